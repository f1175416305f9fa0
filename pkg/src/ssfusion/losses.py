"""Differentiable SSIM and edge-preservation losses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Node


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """1-D Gaussian taps normalized to sum 1 (the 2-D window is their outer product)."""
    x = np.arange(size) - size // 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


@dataclass(frozen=True)
class SsimParams:
    size: int = 11
    sigma: float = 1.5
    dynamic_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03
    window: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "window", gaussian_window(self.size, self.sigma))

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


DEFAULT_SSIM = SsimParams()

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8
SOBEL_Y = SOBEL_X.T.copy()


def ssim_map(a: Node, b: Node, p: SsimParams = DEFAULT_SSIM) -> Node:
    """Per-pixel SSIM from Gaussian-weighted local means, variances and covariance."""
    T._same_shape(a, b, "ssim_map")
    blur = lambda x: T.separable_filter(x, p.window)  # noqa: E731
    mu1, mu2 = blur(a), blur(b)
    mu11, mu22, mu12 = mu1 * mu1, mu2 * mu2, mu1 * mu2
    s11 = blur(a * a) - mu11
    s22 = blur(b * b) - mu22
    s12 = blur(a * b) - mu12
    num = (2 * mu12 + p.c1) * (2 * s12 + p.c2)
    den = (mu11 + mu22 + p.c1) * (s11 + s22 + p.c2)
    return num / den


def ssim_loss(fusion: Node, target: Node, p: SsimParams = DEFAULT_SSIM) -> Node:
    """``1 - mean(ssim_map)``: zero for identical images."""
    return 1.0 - T.reduce_mean(ssim_map(fusion, target, p))


def sobel(x: Node) -> Node:
    """Horizontal and vertical Sobel responses ``[n,2,h-2,w-2]`` over the valid interior."""
    if x.shape[1] != 1:
        raise T.ShapeError(f"sobel expects one channel, got {x.shape[1]}")
    k = T.constant(np.stack([SOBEL_X, SOBEL_Y])[:, None], dtype=x.dtype)
    return T.conv2d(x, k, None, padding=0)


def edge_loss(a: Node, b: Node) -> Node:
    """Mean squared difference of the two images' Sobel gradient maps."""
    T._same_shape(a, b, "edge_loss")
    return T.reduce_mean(T.square(sobel(a) - sobel(b)))


def loss_terms(fusion: Node, nir: Node, gray: Node, p: SsimParams = DEFAULT_SSIM,
               edge: bool = True, literal_alg1: bool = False) -> tuple[Node, Node, Node]:
    """Return ``(total, ssim_part, edge_part)`` for one training step.

    The default is the symmetric objective
    ``[1-ssim(F,nir)] + [1-ssim(F,gray)] + edge(F,nir) + edge(F,gray)``.
    ``literal_alg1`` swaps the second SSIM term for ``edge(F,gray)``, counting
    the gray edge term twice. ``edge=False`` drops the edge part (SSIM-only).
    """
    if literal_alg1:
        ssim_part = ssim_loss(fusion, nir, p) + edge_loss(fusion, gray)
    else:
        ssim_part = ssim_loss(fusion, nir, p) + ssim_loss(fusion, gray, p)
    if not edge:
        return ssim_part, ssim_part, None
    edge_part = edge_loss(fusion, nir) + edge_loss(fusion, gray)
    return ssim_part + edge_part, ssim_part, edge_part


def total_loss(fusion: Node, nir: Node, gray: Node, p: SsimParams = DEFAULT_SSIM,
               **kwargs) -> Node:
    return loss_terms(fusion, nir, gray, p, **kwargs)[0]
