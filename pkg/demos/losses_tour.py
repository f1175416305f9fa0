"""
SSIM and edge losses on a simple scene
======================================

How the two training terms react to noise, blur and a brightness offset.
"""

import numpy as np
from scipy import ndimage

from ssfusion import tensor as T
from ssfusion.losses import edge_loss, ssim_loss, total_loss
from ssfusion.synthetic import scene

img = scene(96, 96, seed=1)
rng = np.random.default_rng(1)

variants = {
    "identical": img,
    "noise 0.05": np.clip(img + 0.05 * rng.standard_normal(img.shape), 0, 1),
    "blur 1.5": ndimage.gaussian_filter(img, (0, 0, 1.5, 1.5)),
    "offset +0.1": np.clip(img + 0.1, 0, 1),
}

# SSIM penalises all three distortions; the gradient-based edge term
# ignores a uniform offset (away from clipping) but not blur or noise
print(f"{'variant':12s} {'1-SSIM':>8s} {'edge':>10s}")
for name, v in variants.items():
    a, b = T.constant(img), T.constant(v.astype(np.float32))
    print(f"{name:12s} {float(ssim_loss(b, a).value):8.4f} {float(edge_loss(b, a).value):10.6f}")

# the training objective pulls toward both inputs at once
nir = T.constant(variants["blur 1.5"].astype(np.float32))
gray = T.constant(img)
mid = T.constant((0.5 * (img + variants["blur 1.5"])).astype(np.float32))
print("total loss, fusion = gray:    ", round(float(total_loss(gray, nir, gray).value), 4))
print("total loss, fusion = average: ", round(float(total_loss(mid, nir, gray).value), 4))
