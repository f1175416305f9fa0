import csv
import json

import numpy as np
import pytest

from ssfusion.cli import main
from ssfusion.imageio import save_image
from ssfusion.pipeline import rgb_to_gray
from ssfusion.synthetic import make_pair

FAST = ["--epochs", "5"]


def write_pair(folder, stem, h=32, w=32, seed=0, identical=False):
    folder.mkdir(parents=True, exist_ok=True)
    pair = make_pair(h, w, seed=seed)
    rgb, nir = pair.rgb, pair.nir
    if identical:
        # one gray picture stored as both the RGB and the NIR file
        nir = rgb_to_gray(rgb)
        rgb = np.repeat(nir, 3, axis=1)
    save_image(folder / f"{stem}_rgb.png", rgb)
    save_image(folder / f"{stem}_nir.png", nir)
    return folder / f"{stem}_rgb.png", folder / f"{stem}_nir.png"


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestFuse:
    def test_writes_outputs(self, tmp_path):
        rgb, nir = write_pair(tmp_path / "in", "a")
        out = tmp_path / "out"
        assert main(["fuse", str(rgb), str(nir), str(out), *FAST, "--checkpoint"]) == 0
        for name in ("fused_gray.png", "fused_rgb.png", "report.json", "net.ckpt"):
            assert (out / name).is_file()
        report = json.loads((out / "report.json").read_text())
        assert len(report["loss_trace"]) == 5
        assert {"ssim_score", "corr_score", "edge_preservation"} <= set(report["metrics"])
        assert report["config"]["max_epoch"] == 5

    def test_missing_nir(self, tmp_path):
        rgb, _ = write_pair(tmp_path / "in", "a")
        out = tmp_path / "out"
        assert main(["fuse", str(rgb), str(tmp_path / "nope.png"), str(out), *FAST]) == 2
        assert not out.exists()

    def test_dimension_mismatch(self, tmp_path):
        rgb, _ = write_pair(tmp_path / "in", "a", 32, 32)
        _, nir = write_pair(tmp_path / "in", "b", 32, 40)
        assert main(["fuse", str(rgb), str(nir), str(tmp_path / "out"), *FAST]) == 3

    def test_seeded_runs_are_byte_identical(self, tmp_path):
        rgb, nir = write_pair(tmp_path / "in", "a", 40, 40, seed=3)
        for k in (1, 2):
            assert main(["fuse", str(rgb), str(nir), str(tmp_path / f"o{k}"), "--seed", "7", *FAST]) == 0
        for name in ("fused_gray.png", "fused_rgb.png"):
            assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()
        r1, r2 = (json.loads((tmp_path / f"o{k}" / "report.json").read_text()) for k in (1, 2))
        assert r1["loss_trace"] == r2["loss_trace"] and r1["metrics"] == r2["metrics"]

    def test_unsupported_format(self, tmp_path):
        rgb, _ = write_pair(tmp_path / "in", "a")
        bad = tmp_path / "in" / "x.gif"
        bad.write_bytes(b"GIF89a")
        assert main(["fuse", str(rgb), str(bad), str(tmp_path / "out"), *FAST]) == 2


def test_baseline(tmp_path):
    rgb, nir = write_pair(tmp_path / "in", "a")
    out = tmp_path / "out"
    assert main(["baseline", str(rgb), str(nir), str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["weights"]["nir"] + report["weights"]["gray"] == pytest.approx(1.0)
    assert (out / "pca_gray.png").is_file() and (out / "pca_rgb.png").is_file()


@pytest.fixture
def toy_dataset(tmp_path):
    root = tmp_path / "data"
    for i in range(3):
        write_pair(root / "country", f"{i:04d}", seed=i)
    return root


class TestEval:
    def test_rows_and_summary(self, toy_dataset, tmp_path):
        out = tmp_path / "ev"
        assert main(["eval", str(toy_dataset), "--out", str(out), *FAST]) == 0
        rows = read_csv(out / "results.csv")
        assert [r["stem"] for r in rows] == ["0000", "0001", "0002", "MEAN"]
        mean = np.mean([float(r["ssim_score"]) for r in rows[:3]])
        assert float(rows[3]["ssim_score"]) == pytest.approx(mean, abs=1e-5)
        assert "| country |" in (out / "tables.md").read_text()

    def test_pca_on_identical_pairs(self, tmp_path):
        root = tmp_path / "same"
        for i in range(2):
            write_pair(root / "street", f"p{i}", seed=i, identical=True)
        out = tmp_path / "ev"
        assert main(["eval", str(root), "--method", "pca", "--out", str(out)]) == 0
        rows = read_csv(out / "results.csv")
        assert all(float(r["ssim_score"]) == pytest.approx(100.0, abs=1e-4) for r in rows)

    def test_empty_dataset(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["eval", str(tmp_path / "empty"), "--out", str(tmp_path / "ev")]) == 4

    def test_dataset_from_environment(self, toy_dataset, tmp_path, monkeypatch):
        monkeypatch.setenv("SSFUSION_DATASET", str(toy_dataset))
        out = tmp_path / "ev"
        assert main(["eval", "--method", "pca", "--limit", "2", "--out", str(out)]) == 0
        assert len(read_csv(out / "results.csv")) == 3

    def test_parallel_matches_serial(self, toy_dataset, tmp_path):
        def strip(rows):
            return [{k: v for k, v in r.items() if k != "seconds"} for r in rows]

        outs = []
        for jobs in (1, 2):
            out = tmp_path / f"j{jobs}"
            assert main(["eval", str(toy_dataset), "--method", "all", "--jobs", str(jobs),
                         "--out", str(out), *FAST]) == 0
            outs.append(strip(read_csv(out / "results.csv")))
        assert outs[0] == outs[1]

    def test_ablation(self, toy_dataset, tmp_path):
        out = tmp_path / "ab"
        assert main(["eval", str(toy_dataset), "--ablation", "--limit", "1",
                     "--out", str(out), *FAST]) == 0
        table = (out / "ablation.md").read_text()
        for variant in ("compact", "compact+unet", "compact+unet+stn"):
            assert f"| {variant} |" in table
        assert "| compact | 1393 |" in table
        assert main(["ablation", str(toy_dataset), "--limit", "1", "--out", str(out), *FAST]) == 0
