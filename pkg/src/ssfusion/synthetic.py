"""Synthetic RGB/NIR scenes for demos and tests when no dataset is at hand."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .pipeline import ImagePair


def texture(h: int, w: int, rng: np.random.Generator, sigma: float = 3.0) -> np.ndarray:
    """Smooth random field rescaled to [0, 1]."""
    f = ndimage.gaussian_filter(rng.standard_normal((h, w)), sigma)
    f -= f.min()
    return f / max(f.max(), 1e-12)


def scene(h: int = 128, w: int = 128, seed: int = 0) -> np.ndarray:
    """Gray test image ``[1,1,h,w]``: soft background, disks, bars and fine texture."""
    rng = np.random.default_rng(seed)
    img = 0.25 + 0.5 * texture(h, w, rng, sigma=max(h, w) / 8)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(4):
        cy, cx = rng.uniform(0.15, 0.85) * h, rng.uniform(0.15, 0.85) * w
        r = rng.uniform(0.05, 0.15) * min(h, w)
        img[(yy - cy) ** 2 + (xx - cx) ** 2 < r ** 2] = rng.uniform(0.1, 0.9)
    x0 = int(rng.uniform(0.1, 0.6) * w)
    img[:, x0:x0 + max(2, w // 16)] *= 0.6
    img += 0.15 * (texture(h, w, rng, sigma=1.0) - 0.5)
    return np.clip(img, 0, 1)[None, None].astype(np.float32)


def make_pair(h: int = 128, w: int = 128, seed: int = 0, haze: float = 0.5) -> ImagePair:
    """An RGB/NIR pair sharing one scene.

    The RGB view is tinted and hazed (contrast squeezed toward a bright veil,
    losing the far-field detail); the NIR view keeps the full contrast but
    has its own reflectance for vegetation-like regions.
    """
    rng = np.random.default_rng(seed + 1000)
    base = scene(h, w, seed)[0, 0]
    veil = np.linspace(1.0, 0.0, h)[:, None] * haze
    visible = base * (1 - veil) + 0.8 * veil
    tint = rng.uniform(0.7, 1.0, size=3)
    chroma = texture(h, w, rng, sigma=max(h, w) / 10)
    rgb = np.stack([
        visible * tint[0] * (0.8 + 0.2 * chroma),
        visible * tint[1],
        visible * tint[2] * (1.0 - 0.2 * chroma),
    ])
    foliage = texture(h, w, rng, sigma=4.0) > 0.6
    nir = np.where(foliage, 0.5 + 0.5 * base, base)
    return ImagePair(nir=np.clip(nir, 0, 1)[None, None], rgb=np.clip(rgb, 0, 1)[None])
