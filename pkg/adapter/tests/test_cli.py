"""Adapter CLI flows (toy model/world, in-process)."""

import numpy as np
import pytest

from nf_adapter import read_nfat
from nf_adapter.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_extract_writes_table(capsys, tmp_path):
    out = tmp_path / "clean.nfat"
    code, stdout, _ = run_cli(
        capsys, "extract", "--model", "toy", "--images", "toy:test",
        "--class", "0", "--layers", "pool2,relu3", "--conf-floor", "0.5",
        "--out", str(out),
    )
    assert code == 0
    assert "wrote" in stdout
    table = read_nfat(out)
    assert table.kind == "clean"
    assert table.n_neurons == 1088
    assert table.layer_sizes == (1024, 64)
    assert table.n_samples > 20


def test_attack_reports_per_attempt(capsys):
    code, stdout, stderr = run_cli(
        capsys, "attack", "--model", "toy", "--images", "toy:test",
        "--target", "1", "--eps", "0.01", "--n", "6", "--seed", "3",
    )
    assert code == 0
    lines = stdout.strip().splitlines()
    assert lines[0].startswith("attempt,")
    assert len(lines) == 7
    for line in lines[1:]:
        fields = line.split(",")
        assert fields[3] in ("0", "1")
        assert float(fields[6]) <= 0.01  # reported L-inf per attempt
    assert "succeeded" in stderr


def test_build_dataset_emits_loadable_pair(capsys, tmp_path):
    code, stdout, _ = run_cli(
        capsys, "build-dataset", "--model", "toy", "--images", "toy:train",
        "--class", "2", "--n-clean", "12", "--n-attacked", "6",
        "--eps", "0.01", "--iters", "150", "--stop-conf", "0.70",
        "--conf-floor", "0.50", "--layers", "pool2,relu3",
        "--out-dir", str(tmp_path),
    )
    assert code == 0
    clean = read_nfat(tmp_path / "class2_clean.nfat")
    attacked = read_nfat(tmp_path / "class2_attacked.nfat")
    assert clean.n_samples == 12
    assert attacked.n_samples == 6
    assert clean.n_neurons == attacked.n_neurons


def test_directory_image_source(capsys, tmp_path):
    PIL = pytest.importorskip("PIL")
    from PIL import Image

    rng = np.random.default_rng(0)
    for label in (0, 1):
        d = tmp_path / "imgs" / str(label)
        d.mkdir(parents=True)
        for i in range(3):
            arr = (rng.random((32, 32, 3)) * 255).astype(np.uint8)
            Image.fromarray(arr).save(d / f"{i}.png")
    out = tmp_path / "dir.nfat"
    code, _, _ = run_cli(
        capsys, "extract", "--model", "toy", "--images", str(tmp_path / "imgs"),
        "--class", "0", "--layers", "relu3", "--conf-floor", "0.0",
        "--out", str(out),
    )
    assert code == 0
    table = read_nfat(out)
    assert table.n_samples == 6
    assert table.n_neurons == 64


def test_unknown_image_source_errors(capsys):
    code, _, stderr = run_cli(
        capsys, "extract", "--model", "toy", "--images", "nowhere",
        "--class", "0", "--out", "x.nfat",
    )
    assert code == 2
    assert "nf-adapter: error" in stderr
