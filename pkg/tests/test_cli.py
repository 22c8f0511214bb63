import csv
import itertools
import shutil
import subprocess

import numpy as np
import pytest

from blochpt.cli import main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for k in ("MODE", "OUT", "SEED", "THREADS"):
        monkeypatch.delenv("BLOCHPT_" + k, raising=False)


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_free_spectrum(tmp_path):
    cfg = write(tmp_path, "mode: spectrum\nt: [0.2, 0.3]\ncutoff: 4.0\n")
    out = tmp_path / "s.csv"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    got = [float(r["eigenvalue"]) for r in read_csv(out)]
    brute = sorted((m + 0.2) ** 2 + (n + 0.3) ** 2 for m, n in itertools.product(range(-6, 7), repeat=2)
                   if (m + 0.2) ** 2 + (n + 0.3) ** 2 <= 16.0)
    assert np.allclose(got, brute)


def test_singular_basis_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "mode: spectrum\nlattice:\n  kind: basis\n  basis: [[1, 0], [2, 0]]\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert "run.yaml:4" in err and "row 1" in err


def test_bad_yaml_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "mode: spectrum\nrho: [1, 2\nt: 3\n")
    assert main(["--config", str(cfg)]) == 2
    assert "run.yaml:" in capsys.readouterr().err


def test_unknown_mode_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "mode: nonsense\n")
    assert main(["--config", str(cfg)]) == 2
    assert "run.yaml:1" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.yaml")]) == 2


def test_rerun_is_byte_identical(tmp_path):
    text = ("mode: predict-nonres\ncosines: {\"1,0\": 1.0, \"0,1\": 1.0}\nrho: 20\nsamples: 4\nseed: 7\n"
            "threads: 2\n")
    cfg = write(tmp_path, text)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ca = main(["--config", str(cfg), "--out", str(a)])
    cb = main(["--config", str(cfg), "--out", str(b)])
    assert ca == cb and ca in (0, 3)
    assert a.read_bytes() == b.read_bytes()


def test_env_override(tmp_path, monkeypatch):
    cfg = write(tmp_path, "mode: classify\npoints: [[0.3, 20.0]]\n")
    out = tmp_path / "env.csv"
    monkeypatch.setenv("BLOCHPT_OUT", str(out))
    assert main(["--config", str(cfg)]) == 0
    assert read_csv(out)[0]["kind"] == "single"


def test_hill_mode_free_bands(tmp_path):
    cfg = write(tmp_path, "mode: hill\ndelta: [1, 0]\nv: [0.25]\njmax: 3\n")
    out = tmp_path / "h.csv"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    for r in read_csv(out):
        assert float(r["mu"]) == pytest.approx((int(r["j"]) + 0.25) ** 2)


def test_verify_subset(tmp_path):
    cfg = write(tmp_path, "mode: verify-all\nonly: [1]\n")
    out = tmp_path / "report.txt"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    assert "[PASS] criterion  1" in out.read_text()


@pytest.mark.skipif(shutil.which("blochpt") is None, reason="console script not installed")
def test_console_script_help():
    r = subprocess.run(["blochpt", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--config" in r.stdout
