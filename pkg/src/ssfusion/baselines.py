"""Training-free PCA fusion baseline."""

from __future__ import annotations

import warnings

import numpy as np


def pca_weights(i1, i2) -> tuple[float, float]:
    """Mixing weights from the leading eigenvector of the 2x2 pixel covariance.

    Weights are non-negative and sum to 1. A constant input or anti-correlated
    inputs (mixed-sign eigenvector) fall back to 0.5/0.5 with a warning.
    """
    a = np.asarray(i1, dtype=np.float64).ravel()
    b = np.asarray(i2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"image sizes differ: {np.shape(i1)} vs {np.shape(i2)}")
    cov = np.cov(np.stack([a, b]))
    if cov[0, 0] <= 1e-12 or cov[1, 1] <= 1e-12:
        warnings.warn("degenerate covariance (constant input); using equal weights")
        return 0.5, 0.5
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, np.argmax(vals)]
    if v.sum() < 0:
        v = -v
    if np.any(v < 0):
        warnings.warn("anti-correlated inputs; using equal weights")
        return 0.5, 0.5
    v = v / v.sum()
    return float(v[0]), float(v[1])


def pca_fuse(i1, i2) -> np.ndarray:
    w1, w2 = pca_weights(i1, i2)
    i1, i2 = np.asarray(i1), np.asarray(i2)
    dtype = np.result_type(i1.dtype, i2.dtype, np.float32)
    out = w1 * i1.astype(np.float64) + w2 * i2.astype(np.float64)
    return np.clip(out, 0, 1).astype(dtype)
