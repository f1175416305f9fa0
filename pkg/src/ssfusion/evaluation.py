"""Dataset discovery and batch evaluation over RGB/NIR pair collections."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .baselines import pca_fuse
from .imageio import SUPPORTED, load_image
from .metrics import CannyParams, evaluate
from .pipeline import FusionConfig, ImagePair, NumericalFailure, fuse, rgb_to_gray

logger = logging.getLogger(__name__)

METHODS = {
    "ssl": "SSIM+EP Loss",
    "ssl-ssim": "SSIM Loss",
    "pca": "PCA",
}
ABLATION = {
    "compact": dict(unet_enabled=False, stn_enabled=False),
    "compact+unet": dict(unet_enabled=True, stn_enabled=False),
    "compact+unet+stn": dict(unet_enabled=True, stn_enabled=True),
}
FIELDS = ["category", "stem", "method", "ssim_score", "corr_score", "edge_preservation",
          "edge_preservation_tolerant", "num_parameters", "seconds", "loss_first",
          "loss_epoch10", "loss_last"]


@dataclass(frozen=True)
class PairEntry:
    category: str
    stem: str
    rgb_path: Path
    nir_path: Path


@dataclass(frozen=True)
class DatasetLayout:
    root: Path
    rgb_suffix: str = "_rgb"
    nir_suffix: str = "_nir"

    def _pairs_in(self, folder: Path, category: str) -> list[PairEntry]:
        files = [p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in SUPPORTED]
        rgb = {p.stem[:-len(self.rgb_suffix)]: p for p in files if p.stem.endswith(self.rgb_suffix)}
        nir = {p.stem[:-len(self.nir_suffix)]: p for p in files if p.stem.endswith(self.nir_suffix)}
        for stem in sorted(set(rgb) ^ set(nir)):
            logger.info("skipping %s/%s: no matching partner image", category, stem)
        return [PairEntry(category, s, rgb[s], nir[s]) for s in sorted(set(rgb) & set(nir))]

    def discover(self, categories: Optional[list[str]] = None) -> list[PairEntry]:
        """All matched pairs, sorted by category then stem.

        Subdirectories of ``root`` are categories; pairs lying directly in
        ``root`` go under the root's own name.
        """
        root = Path(self.root)
        if not root.is_dir():
            return []
        entries = self._pairs_in(root, root.name)
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            entries += self._pairs_in(sub, sub.name)
        if categories:
            wanted = {c.lower() for c in categories}
            entries = [e for e in entries if e.category.lower() in wanted]
        return entries


def select(entries: list[PairEntry], limit: Optional[int] = None,
           sample: Optional[float] = None, seed: int = 0) -> list[PairEntry]:
    """Per category: a seeded random fraction (``sample``) and/or the first ``limit`` pairs."""
    out = []
    for cat in sorted({e.category for e in entries}):
        group = [e for e in entries if e.category == cat]
        if sample is not None:
            k = max(1, math.ceil(sample * len(group)))
            idx = np.sort(np.random.default_rng(seed).choice(len(group), size=k, replace=False))
            group = [group[i] for i in idx]
        if limit is not None:
            group = group[:limit]
        out += group
    return out


def resize(img: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return img
    n, c, h, w = img.shape
    size = (max(1, round(w * scale)), max(1, round(h * scale)))
    chans = [np.asarray(Image.fromarray(img[0, i].astype(np.float32))
                        .resize(size, Image.Resampling.BOX if scale < 1 else Image.Resampling.BILINEAR))
             for i in range(c)]
    return np.clip(np.stack(chans)[None], 0, 1).astype(np.float32)


def load_pair(entry: PairEntry, scale: float = 1.0) -> ImagePair:
    rgb = resize(load_image(entry.rgb_path, channels=3), scale)
    nir = resize(load_image(entry.nir_path, channels=1), scale)
    return ImagePair(nir=nir, rgb=rgb, nir_path=str(entry.nir_path), rgb_path=str(entry.rgb_path))


def run_method(pair: ImagePair, method: str, cfg: FusionConfig,
               canny: CannyParams = CannyParams()) -> dict:
    """Fuse one pair with a named method and score it against both inputs."""
    gray = pair.gray
    row: dict = {"method": method}
    if method == "pca":
        start = time.perf_counter()
        fused = pca_fuse(pair.nir, gray)
        row.update(seconds=time.perf_counter() - start, num_parameters=0)
    else:
        if method in ABLATION:
            cfg = replace(cfg, **ABLATION[method])
        elif method == "ssl-ssim":
            cfg = replace(cfg, edge_loss_enabled=False)
        elif method != "ssl":
            raise ValueError(f"unknown method {method!r}")
        report = fuse(pair, cfg)
        fused = rgb_to_gray(report.rgb_fusion)
        trace = report.loss_trace
        row.update(seconds=report.seconds, num_parameters=report.num_parameters,
                   loss_first=trace[0][1], loss_epoch10=trace[min(9, len(trace) - 1)][1],
                   loss_last=trace[-1][1])
    scores = evaluate(pair.nir, gray, fused, canny=canny)
    row.update(ssim_score=scores.ssim_score, corr_score=scores.corr_score,
               edge_preservation=scores.edge_preservation,
               edge_preservation_tolerant=scores.edge_preservation_tolerant)
    return row


def _pair_job(args) -> list[dict]:
    entry, methods, cfg, canny, scale = args
    try:
        pair = load_pair(entry, scale)
    except (ValueError, OSError) as exc:
        logger.warning("skipping %s/%s: %s", entry.category, entry.stem, exc)
        return []
    rows = []
    for m in methods:
        try:
            row = run_method(pair, m, cfg, canny)
        except NumericalFailure as exc:
            logger.error("%s/%s %s: %s", entry.category, entry.stem, m, exc)
            row = {"method": m, "ssim_score": float("nan")}
        rows.append({"category": entry.category, "stem": entry.stem, **row})
    return rows


def evaluate_dataset(entries: list[PairEntry], methods: list[str], cfg: FusionConfig,
                     canny: CannyParams = CannyParams(), scale: float = 1.0,
                     jobs: int = 1) -> list[dict]:
    """Per-pair rows for every method; order follows ``entries`` regardless of ``jobs``."""
    tasks = [(e, list(methods), cfg, canny, scale) for e in entries]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_pair_job, tasks))
    else:
        results = [_pair_job(t) for t in tasks]
    return [row for rows in results for row in rows]


def summarize(rows: list[dict]) -> list[dict]:
    """One mean row per (category, method), NaNs ignored."""
    out = []
    keys = sorted({(r["category"], r["method"]) for r in rows}, key=lambda k: (k[0], k[1]))
    for cat, method in keys:
        group = [r for r in rows if r["category"] == cat and r["method"] == method]
        mean = {"category": cat, "stem": "MEAN", "method": method}
        for f in FIELDS[3:]:
            vals = [r[f] for r in group if r.get(f) is not None and not _isnan(r[f])]
            mean[f] = float(np.mean(vals)) if vals else float("nan")
        out.append(mean)
    return out


def _isnan(x) -> bool:
    return isinstance(x, float) and math.isnan(x)


def write_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FIELDS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r.get(k, "")) for k in FIELDS})


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return v


def markdown_tables(summary: list[dict], methods: list[str]) -> str:
    """Category x method tables, one per score."""
    cats = sorted({r["category"] for r in summary})
    lookup = {(r["category"], r["method"]): r for r in summary}
    titles = [("ssim_score", "SSIM fusion score"), ("corr_score", "Correlation score"),
              ("edge_preservation", "Canny edge preservation (%)"),
              ("edge_preservation_tolerant", "Canny edge preservation, 1-px tolerance (%)")]
    names = [METHODS.get(m, m) for m in methods]
    parts = []
    for key, title in titles:
        lines = [f"### {title}", "", "| Category | " + " | ".join(names) + " |",
                 "|---" * (len(methods) + 1) + "|"]
        for c in cats:
            cells = []
            for m in methods:
                v = lookup.get((c, m), {}).get(key, float("nan"))
                cells.append("n/a" if _isnan(v) else f"{v:.1f}")
            lines.append(f"| {c} | " + " | ".join(cells) + " |")
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + "\n"


def ablation_table(summary: list[dict]) -> str:
    """Params / runtime / SSIM score per architecture variant, averaged over categories."""
    lines = ["| Variant | Parameters | Runtime (s) | SSIM score |", "|---|---|---|---|"]
    for variant in ABLATION:
        group = [r for r in summary if r["method"] == variant]
        if not group:
            continue
        params = int(np.nanmean([r["num_parameters"] for r in group]))
        secs = float(np.nanmean([r["seconds"] for r in group]))
        ssim = float(np.nanmean([r["ssim_score"] for r in group]))
        lines.append(f"| {variant} | {params} | {secs:.1f} | {ssim:.1f} |")
    return "\n".join(lines) + "\n"
