"""
Fusing a synthetic RGB / NIR pair
=================================

Trains the compact network on one hazed pair and writes the results to
``demo_out/``. Pass an epoch count as the first argument (default 150).
"""

import sys
from pathlib import Path

from ssfusion import FusionConfig, evaluate, fuse, rgb_to_gray
from ssfusion.imageio import save_image
from ssfusion.synthetic import make_pair

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 150
pair = make_pair(128, 128, seed=3, haze=0.6)

# one network per pair, trained from scratch on that pair alone
report = fuse(pair, FusionConfig(max_epoch=epochs, seed=0))
trace = report.loss_trace
print(f"{report.num_parameters} parameters, {report.seconds:.1f}s")
for epoch, total, ssim_part, edge_part in (trace[0], trace[len(trace) // 2], trace[-1]):
    print(f"epoch {epoch:4d}  total {total:.4f}  ssim {ssim_part:.4f}  edge {edge_part:.5f}")

# scores of the fusion against both inputs, 0-100
scores = evaluate(pair.nir, pair.gray, rgb_to_gray(report.rgb_fusion))
print(f"SSIM score {scores.ssim_score:.1f}  correlation {scores.corr_score:.1f}  "
      f"edges kept {scores.edge_preservation:.1f}%")

out = Path("demo_out")
out.mkdir(exist_ok=True)
save_image(out / "rgb.png", pair.rgb)
save_image(out / "nir.png", pair.nir)
save_image(out / "fused_gray.png", report.gray_fusion)
save_image(out / "fused_rgb.png", report.rgb_fusion)
print(f"images written to {out}/")
