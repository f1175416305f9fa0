"""
Quality scores and the PCA baseline
===================================

Scores a few fixed fusions of a synthetic pair, including the training-free
PCA mix, to show what each number rewards.
"""

import numpy as np

from ssfusion import evaluate, pca_fuse, pca_weights
from ssfusion.synthetic import make_pair

pair = make_pair(128, 128, seed=5, haze=0.6)
nir, gray = pair.nir, pair.gray

w_nir, w_gray = pca_weights(nir, gray)
print(f"PCA weights: nir {w_nir:.3f}, gray {w_gray:.3f}")

candidates = {
    "gray only": gray,
    "nir only": nir,
    "average": 0.5 * (nir + gray),
    "max": np.maximum(nir, gray),
    "pca": pca_fuse(nir, gray),
}

print(f"{'fusion':10s} {'SSIM':>6s} {'corr':>6s} {'EP':>6s} {'EP(1px)':>8s}")
for name, f in candidates.items():
    s = evaluate(nir, gray, f)
    print(f"{name:10s} {s.ssim_score:6.1f} {s.corr_score:6.1f} "
          f"{s.edge_preservation:6.1f} {s.edge_preservation_tolerant:8.1f}")
