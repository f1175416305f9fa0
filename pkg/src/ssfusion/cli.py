"""Command line entry point: ``ssfusion {fuse,eval,baseline,ablation}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .baselines import pca_fuse, pca_weights
from .evaluation import (ABLATION, METHODS, DatasetLayout, ablation_table, evaluate_dataset,
                         markdown_tables, select, summarize, write_csv)
from .imageio import ImageFormatError, load_image, save_image
from .metrics import CannyParams, evaluate
from .nn import save_checkpoint
from .pipeline import FusionConfig, ImagePair, NumericalFailure, fuse, recolor, rgb_to_gray
from .tensor import ShapeError

logger = logging.getLogger("ssfusion")

EXIT_OK, EXIT_INPUT, EXIT_SHAPE, EXIT_EMPTY, EXIT_NUMERIC = 0, 2, 3, 4, 5
DATASET_ENV = "SSFUSION_DATASET"


def _training_flags(p: argparse.ArgumentParser):
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stn", action="store_true", help="enable the affine alignment block")
    p.add_argument("--unet", action="store_true", help="enable the parallel MiniUNet stream")
    p.add_argument("--literal-alg1-loss", action="store_true",
                   help="use the SSIM(F,NIR)+EP(F,GRAY) first term instead of the symmetric SSIM pair")
    p.add_argument("--no-edge-loss", action="store_true", help="train with the SSIM terms only")


def _canny_flags(p: argparse.ArgumentParser):
    p.add_argument("--canny-sigma", type=float, default=1.4)
    p.add_argument("--canny-low", type=float, default=0.1)
    p.add_argument("--canny-high", type=float, default=0.2)


def _dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("dataset", nargs="?", default=os.environ.get(DATASET_ENV),
                   help=f"dataset root (default: ${DATASET_ENV})")
    p.add_argument("--out", default="eval_out", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--limit", type=int, default=None, help="at most N pairs per category")
    p.add_argument("--sample", type=float, default=None, help="random fraction of pairs per category")
    p.add_argument("--scale", type=float, default=1.0, help="resize factor applied at load")
    p.add_argument("--category", action="append", dest="categories")
    p.add_argument("--rgb-suffix", default="_rgb")
    p.add_argument("--nir-suffix", default="_nir")


def _config(args) -> FusionConfig:
    return FusionConfig(max_epoch=args.epochs, lr=args.lr, seed=args.seed,
                        stn_enabled=args.stn, unet_enabled=args.unet,
                        literal_alg1_loss=args.literal_alg1_loss,
                        edge_loss_enabled=not args.no_edge_loss)


def _canny(args) -> CannyParams:
    return CannyParams(sigma=args.canny_sigma, low=args.canny_low, high=args.canny_high)


def _load_pair(rgb_path, nir_path) -> ImagePair:
    for p in (rgb_path, nir_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"cannot read {p}")
    rgb = load_image(rgb_path, channels=3)
    nir = load_image(nir_path, channels=1)
    return ImagePair(nir=nir, rgb=rgb, nir_path=str(nir_path), rgb_path=str(rgb_path))


def cmd_fuse(args) -> int:
    cfg = _config(args)
    pair = _load_pair(args.rgb, args.nir)
    report = fuse(pair, cfg)
    gray = pair.gray
    scores = evaluate(pair.nir, gray, rgb_to_gray(report.rgb_fusion), canny=_canny(args))
    report.metrics = scores.as_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / "fused_gray.png", report.gray_fusion)
    save_image(out / "fused_rgb.png", report.rgb_fusion)
    payload = report.to_json()
    payload["inputs"] = {"rgb": str(args.rgb), "nir": str(args.nir)}
    (out / "report.json").write_text(json.dumps(payload, indent=2, allow_nan=True))
    if args.checkpoint:
        save_checkpoint(report.net, out / "net.ckpt", cfg)
    logger.info("fused in %.1fs: SSIM %.1f corr %.1f EP %.1f", report.seconds,
                scores.ssim_score, scores.corr_score, scores.edge_preservation)
    return EXIT_OK


def cmd_baseline(args) -> int:
    pair = _load_pair(args.rgb, args.nir)
    gray = pair.gray
    w1, w2 = pca_weights(pair.nir, gray)
    fused = pca_fuse(pair.nir, gray)
    scores = evaluate(pair.nir, gray, fused, canny=_canny(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / "pca_gray.png", fused)
    save_image(out / "pca_rgb.png", recolor(fused, gray, pair.rgb))
    payload = {"method": "pca", "weights": {"nir": w1, "gray": w2}, "metrics": scores.as_dict()}
    (out / "report.json").write_text(json.dumps(payload, indent=2))
    return EXIT_OK


def _run_eval(args, methods: list[str]) -> tuple[int, list[dict]]:
    if not args.dataset:
        logger.error("no dataset root given and $%s is unset", DATASET_ENV)
        return EXIT_INPUT, []
    layout = DatasetLayout(Path(args.dataset), args.rgb_suffix, args.nir_suffix)
    entries = select(layout.discover(args.categories), args.limit, args.sample, args.seed)
    if not entries:
        logger.error("no image pairs found under %s", args.dataset)
        return EXIT_EMPTY, []
    logger.info("evaluating %d pairs with %s", len(entries), ", ".join(methods))
    rows = evaluate_dataset(entries, methods, _config(args), _canny(args), args.scale, args.jobs)
    if not rows:
        return EXIT_EMPTY, []
    return EXIT_OK, rows


def cmd_eval(args) -> int:
    if args.ablation:
        return cmd_ablation(args)
    methods = list(METHODS) if args.method == "all" else [args.method]
    code, rows = _run_eval(args, methods)
    if code:
        return code
    summary = summarize(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", rows + summary)
    (out / "tables.md").write_text(markdown_tables(summary, methods))
    print(markdown_tables(summary, methods))
    return EXIT_OK


def cmd_ablation(args) -> int:
    methods = list(ABLATION)
    code, rows = _run_eval(args, methods)
    if code:
        return code
    summary = summarize(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "ablation.csv", rows + summary)
    table = ablation_table(summary)
    (out / "ablation.md").write_text(table)
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssfusion",
                                     description="Self-supervised RGB/NIR image fusion")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="train on one pair and write the fused images")
    p.add_argument("rgb")
    p.add_argument("nir")
    p.add_argument("out")
    p.add_argument("--checkpoint", action="store_true", help="also write net.ckpt")
    _training_flags(p)
    _canny_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("baseline", help="PCA fusion of one pair")
    p.add_argument("rgb")
    p.add_argument("nir")
    p.add_argument("out")
    _canny_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score a dataset of pairs per category")
    _dataset_flags(p)
    p.add_argument("--method", choices=list(METHODS) + ["all"], default="ssl")
    p.add_argument("--ablation", action="store_true",
                   help="run the compact / +unet / +unet+stn variants instead")
    _training_flags(p)
    _canny_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", help="architecture ablation over a dataset")
    _dataset_flags(p)
    _training_flags(p)
    _canny_flags(p)
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ImageFormatError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except ShapeError as exc:
        logger.error("%s", exc)
        return EXIT_SHAPE
    except NumericalFailure as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
