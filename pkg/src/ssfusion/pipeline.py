"""Per-pair self-supervised fusion: gray conversion, training, recoloring."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .losses import DEFAULT_SSIM, SsimParams, loss_terms
from .nn import Adam, FusionNet

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])


class NumericalFailure(RuntimeError):
    """Training produced a non-finite loss; carries the last finite parameters."""

    def __init__(self, epoch: int, checkpoint: dict[str, np.ndarray], message: str = ""):
        super().__init__(f"non-finite loss at epoch {epoch}" + (f": {message}" if message else ""))
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass
class ImagePair:
    nir: np.ndarray
    rgb: np.ndarray
    nir_path: Optional[str] = None
    rgb_path: Optional[str] = None

    def __post_init__(self):
        self.nir = np.clip(T.tensor(self.nir), 0, 1)
        self.rgb = np.clip(T.tensor(self.rgb), 0, 1)
        if self.nir.ndim != 4 or self.nir.shape[:2] != (1, 1):
            raise T.ShapeError(f"nir must be [1,1,h,w], got {self.nir.shape}")
        if self.rgb.ndim != 4 or self.rgb.shape[:2] != (1, 3):
            raise T.ShapeError(f"rgb must be [1,3,h,w], got {self.rgb.shape}")
        if self.nir.shape[2:] != self.rgb.shape[2:]:
            raise T.ShapeError(f"nir {self.nir.shape[2:]} and rgb {self.rgb.shape[2:]} sizes differ")

    @property
    def gray(self) -> np.ndarray:
        return rgb_to_gray(self.rgb)


@dataclass
class FusionConfig:
    max_epoch: int = 300
    lr: float = 1e-3
    stn_enabled: bool = False
    unet_enabled: bool = False
    literal_alg1_loss: bool = False
    edge_loss_enabled: bool = True
    seed: int = 0
    recolor_epsilon: float = 1e-3

    def __post_init__(self):
        if self.max_epoch < 1:
            raise ValueError("max_epoch must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.recolor_epsilon <= 0:
            raise ValueError("recolor_epsilon must be positive")


@dataclass
class FusionReport:
    gray_fusion: np.ndarray
    rgb_fusion: np.ndarray
    loss_trace: list[tuple[int, float, float, float]]
    seconds: float
    config: dict
    num_parameters: int
    metrics: dict = field(default_factory=dict)
    net: Optional[FusionNet] = field(default=None, repr=False, compare=False)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "num_parameters": self.num_parameters,
            "seconds": self.seconds,
            "metrics": self.metrics,
            "loss_trace": [
                {"epoch": e, "total": t, "ssim": s, "edge": g} for e, t, s, g in self.loss_trace
            ],
        }


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of ``[n,3,h,w]`` -> ``[n,1,h,w]``."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 4 or rgb.shape[1] != 3:
        raise T.ShapeError(f"rgb_to_gray expects [n,3,h,w], got {rgb.shape}")
    w = LUMA.astype(rgb.dtype)
    gray = w[0] * rgb[:, 0] + w[1] * rgb[:, 1] + w[2] * rgb[:, 2]
    return np.clip(gray, 0, 1)[:, None]


def recolor(gray_fusion: np.ndarray, gray: np.ndarray, rgb: np.ndarray,
            epsilon: float = 1e-3) -> np.ndarray:
    """Scale each RGB channel by ``gray_fusion / max(gray, epsilon)``, clamp to [0,1]."""
    ratio = gray_fusion / np.maximum(gray, gray.dtype.type(epsilon))
    return np.clip(rgb * ratio, 0, 1)


def train_fusion(pair: ImagePair, cfg: FusionConfig,
                 ssim_params: SsimParams = DEFAULT_SSIM) -> tuple[FusionNet, list]:
    """Train a fresh network on one pair for ``cfg.max_epoch`` full-image steps.

    Returns the trained net and the loss trace ``[(epoch, total, ssim, edge)]``,
    each entry measured before that epoch's parameter update.
    """
    net = FusionNet(stn=cfg.stn_enabled, unet=cfg.unet_enabled, seed=cfg.seed)
    opt = Adam(net.parameters(), lr=cfg.lr)
    nir, gray = pair.nir, pair.gray
    nir_node, gray_node = T.constant(nir), T.constant(gray)
    trace = []
    last_good = net.state()
    for epoch in range(1, cfg.max_epoch + 1):
        fused = net(nir, gray)
        total, ssim_part, edge_part = loss_terms(
            fused, nir_node, gray_node, ssim_params,
            edge=cfg.edge_loss_enabled, literal_alg1=cfg.literal_alg1_loss)
        value = float(total.value)
        if not np.isfinite(value):
            raise NumericalFailure(epoch, last_good)
        trace.append((epoch, value, float(ssim_part.value),
                      float(edge_part.value) if edge_part is not None else 0.0))
        T.backward(total)
        try:
            opt.step()
        except FloatingPointError as exc:
            raise NumericalFailure(epoch, last_good, str(exc)) from exc
        last_good = net.state()
        if epoch == 1 or epoch % 50 == 0:
            logger.debug("epoch %d loss %.5f", epoch, value)
    return net, trace


def fuse(pair: ImagePair, cfg: Optional[FusionConfig] = None,
         ssim_params: SsimParams = DEFAULT_SSIM) -> FusionReport:
    """Train on the pair, run the final forward pass, and recolor the result."""
    cfg = cfg or FusionConfig()
    start = time.perf_counter()
    net, trace = train_fusion(pair, cfg, ssim_params)
    gray = pair.gray
    gray_fusion = net(pair.nir, gray).value
    rgb_fusion = recolor(gray_fusion, gray, pair.rgb, cfg.recolor_epsilon)
    seconds = time.perf_counter() - start
    return FusionReport(gray_fusion=gray_fusion, rgb_fusion=rgb_fusion, loss_trace=trace,
                        seconds=seconds, config=asdict(cfg),
                        num_parameters=net.num_parameters(), net=net)
