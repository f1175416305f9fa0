"""Self-supervised visible/near-infrared image fusion trained per image pair."""

from .baselines import pca_fuse, pca_weights
from .losses import SsimParams, edge_loss, ssim_loss, ssim_map, total_loss
from .metrics import (CannyParams, MetricReport, canny_edges, correlation_score,
                      edge_preservation_score, evaluate, ssim_fusion_score)
from .nn import Adam, FusionNet, load_checkpoint, save_checkpoint
from .pipeline import (FusionConfig, FusionReport, ImagePair, NumericalFailure, fuse, recolor,
                       rgb_to_gray, train_fusion)

__version__ = "0.1.0"

__all__ = [
    "Adam", "CannyParams", "FusionConfig", "FusionNet", "FusionReport", "ImagePair",
    "MetricReport", "NumericalFailure", "SsimParams", "canny_edges", "correlation_score",
    "edge_loss", "edge_preservation_score", "evaluate", "fuse", "load_checkpoint", "pca_fuse",
    "pca_weights", "recolor", "rgb_to_gray", "save_checkpoint", "ssim_fusion_score",
    "ssim_loss", "ssim_map", "total_loss", "train_fusion",
]
