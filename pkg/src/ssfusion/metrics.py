"""Fusion quality scores: SSIM fusion score, correlation score, Canny edge preservation.

All scores are on a 0-100 scale and computed in float64 on gray images.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .losses import DEFAULT_SSIM, SsimParams


class UndefinedMetric(ValueError):
    """A score term has no defined value (constant image, image without edges)."""


def _image(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    while a.ndim > 2:
        if a.shape[0] != 1:
            raise ValueError(f"expected a single gray image, got shape {np.shape(x)}")
        a = a[0]
    return a


def _check(*imgs):
    shapes = {im.shape for im in imgs}
    if len(shapes) != 1:
        raise ValueError(f"image shapes differ: {sorted(shapes)}")


def ssim_map(a, b, p: SsimParams = DEFAULT_SSIM) -> np.ndarray:
    a, b = _image(a), _image(b)
    _check(a, b)
    win = p.window

    def blur(x):
        return ndimage.correlate1d(ndimage.correlate1d(x, win, axis=0, mode="reflect"),
                                   win, axis=1, mode="reflect")

    mu1, mu2 = blur(a), blur(b)
    s11 = blur(a * a) - mu1 * mu1
    s22 = blur(b * b) - mu2 * mu2
    s12 = blur(a * b) - mu1 * mu2
    return ((2 * mu1 * mu2 + p.c1) * (2 * s12 + p.c2)) / (
        (mu1 * mu1 + mu2 * mu2 + p.c1) * (s11 + s22 + p.c2))


def mean_ssim(a, b, p: SsimParams = DEFAULT_SSIM) -> float:
    return float(ssim_map(a, b, p).mean())


def ssim_fusion_score(i1, i2, f, p: SsimParams = DEFAULT_SSIM) -> float:
    return 100.0 * (0.5 * mean_ssim(i1, f, p) + 0.5 * mean_ssim(i2, f, p))


def pearson(a, b) -> float:
    a, b = _image(a).ravel(), _image(b).ravel()
    _check(a, b)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedMetric("correlation is undefined for a constant image")
    da, db = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(da @ da), np.sqrt(db @ db)
    return float(da @ db / (na * nb))


def correlation_score(i1, i2, f) -> float:
    return 100.0 * (0.5 * pearson(i1, f) + 0.5 * pearson(i2, f))


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4
    low: float = 0.1
    high: float = 0.2

    def __post_init__(self):
        if not 0 < self.low < self.high:
            raise ValueError("Canny thresholds need 0 < low < high")


def canny_edges(img, p: CannyParams = CannyParams()) -> np.ndarray:
    """Binary Canny edge map.

    Gaussian smoothing, Sobel gradients, non-maximum suppression against the
    magnitude bilinearly interpolated one pixel along +/- the gradient, then
    hysteresis with thresholds relative to the peak magnitude (8-connected).
    Ties along the gradient keep only the pixel on the negative side, so an
    ideal step yields a one-pixel line.
    """
    im = _image(img)
    smooth = ndimage.gaussian_filter(im, p.sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak < 1e-8:
        return np.zeros(im.shape, dtype=bool)

    h, w = im.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    safe = np.where(mag > 0, mag, 1.0)
    uy, ux = gy / safe, gx / safe
    ahead = ndimage.map_coordinates(mag, [rows + uy, cols + ux], order=1, mode="constant")
    behind = ndimage.map_coordinates(mag, [rows - uy, cols - ux], order=1, mode="constant")
    keep = (mag > 0) & (mag > behind) & (mag >= ahead)
    keep[0, :] = keep[-1, :] = keep[:, 0] = keep[:, -1] = False
    thin = np.where(keep, mag, 0.0)

    strong = thin >= p.high * peak
    weak = thin >= p.low * peak
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    if n == 0:
        return np.zeros(im.shape, dtype=bool)
    hit = np.zeros(n + 1, dtype=bool)
    hit[np.unique(labels[strong])] = True
    hit[0] = False
    return hit[labels]


def edge_overlap(c1: np.ndarray, c2: np.ndarray, cf: np.ndarray) -> float:
    """``50 * sum_i |C_i & C_F| / |C_i|`` over the two input edge maps."""
    terms = []
    for i, c in enumerate((c1, c2), start=1):
        n = int(np.count_nonzero(c))
        if n == 0:
            raise UndefinedMetric(f"input {i} has no edge pixels")
        terms.append(np.count_nonzero(c & cf) / n)
    return 100.0 * 0.5 * (terms[0] + terms[1])


def edge_preservation_score(i1, i2, f, p: CannyParams = CannyParams(),
                            tolerance: int = 0) -> float:
    """Percent of the inputs' Canny edge pixels that reappear in the fusion's edge map.

    ``tolerance=1`` counts an input edge as kept when a fused edge lies within
    one pixel (3x3 neighbourhood).
    """
    i1, i2, f = _image(i1), _image(i2), _image(f)
    _check(i1, i2, f)
    cf = canny_edges(f, p)
    if tolerance:
        cf = ndimage.binary_dilation(cf, structure=np.ones((3, 3)), iterations=tolerance)
    return edge_overlap(canny_edges(i1, p), canny_edges(i2, p), cf)


@dataclass
class MetricReport:
    ssim_score: float
    corr_score: float
    edge_preservation: float
    edge_preservation_tolerant: float
    breakdown: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "ssim_score": self.ssim_score,
            "corr_score": self.corr_score,
            "edge_preservation": self.edge_preservation,
            "edge_preservation_tolerant": self.edge_preservation_tolerant,
            "breakdown": self.breakdown,
        }


def _or_nan(fn, *args, **kwargs) -> float:
    try:
        return fn(*args, **kwargs)
    except UndefinedMetric:
        return float("nan")


def evaluate(i1, i2, f, ssim_params: SsimParams = DEFAULT_SSIM,
             canny: CannyParams = CannyParams()) -> MetricReport:
    """All scores for one fused image; undefined terms come back as NaN."""
    breakdown = {
        "ssim_1": 100.0 * mean_ssim(i1, f, ssim_params),
        "ssim_2": 100.0 * mean_ssim(i2, f, ssim_params),
        "corr_1": _or_nan(lambda: 100.0 * pearson(i1, f)),
        "corr_2": _or_nan(lambda: 100.0 * pearson(i2, f)),
    }
    return MetricReport(
        ssim_score=ssim_fusion_score(i1, i2, f, ssim_params),
        corr_score=_or_nan(correlation_score, i1, i2, f),
        edge_preservation=_or_nan(edge_preservation_score, i1, i2, f, canny),
        edge_preservation_tolerant=_or_nan(edge_preservation_score, i1, i2, f, canny, tolerance=1),
        breakdown=breakdown,
    )
