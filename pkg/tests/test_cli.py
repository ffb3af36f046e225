import csv
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ksdiv import cli
from ksdiv.cli import (
    RegionScanConfig, fmt, main, region_flags, render_svg, scan_region, to_screen,
)
from ksdiv.config import ConfigError, load_config
from ksdiv.maps import ks_closed_form_diag, ppp_margin

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


PAULI = """[run]
schema = 1
model = pauli-rates
t_max = 5
grid = 101

[rates]
gamma1 = constant 1
gamma2 = constant 1
gamma3 = {g3}
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(np.bool_(False)) == "false"
    assert fmt(3) == "3"


def test_classify_erika(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "erika.ini"), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "P-divisible on [0,5]; KS-divisibility lost at t ≈ 0.549306" in text
    rows = read_rows(tmp_path / "classification.csv")
    assert len(rows) == 101
    assert all(r["P"] == "true" for r in rows)
    raw = (tmp_path / "classification.csv").read_bytes()
    assert b"\r\n" not in raw


def test_classify_modified(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "modified.ini"), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "KS-divisible on [0,5]" in text
    assert "CP-divisibility lost at t = 0⁺" in text


def test_classify_positive_constants(tmp_path):
    cfg = write(tmp_path, PAULI.format(g3="constant 0.5"))
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "classification.csv")
    assert all(r["P"] == r["KS"] == r["CP"] == "true" for r in rows)


def test_classify_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["classify", "--config", str(CONFIGS / "erika.ini"), "--out", str(tmp_path / d),
                     "--seed", "7"]) == 0
    assert (tmp_path / "a" / "classification.csv").read_bytes() == (
        tmp_path / "b" / "classification.csv").read_bytes()


def test_overrides(tmp_path):
    assert main(["classify", "--config", str(CONFIGS / "erika.ini"), "--out", str(tmp_path),
                 "--t-max", "2", "--grid", "11"]) == 0
    rows = read_rows(tmp_path / "classification.csv")
    assert len(rows) == 11 and float(rows[-1]["t"]) == 2.0


def test_table_rates(tmp_path):
    (tmp_path / "g3.csv").write_text("t,gamma\n0,0\n5,-1\n")
    cfg = write(tmp_path, PAULI.format(g3="table g3.csv"))
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    # g1 + 2 g3 = 1 - 0.4 t changes sign at t = 2.5
    summary = (tmp_path / "o" / "summary.txt").read_text()
    t = float(summary.split("KS-divisibility lost at t ≈ ")[1].split(";")[0])
    assert t == pytest.approx(2.5, abs=2e-6)


@pytest.mark.parametrize("text,needle", [
    ("[run]\nmodel = pauli-rates\n", "schema"),
    ("[run]\nschema = 2\n", "unsupported schema"),
    (PAULI.format(g3="tanh -1"), "wrong number of parameters"),
    (PAULI.format(g3="cubic 1"), "unknown rate"),
    (PAULI.format(g3="table missing.csv"), "does not exist"),
    (PAULI.replace("t_max = 5", "t_max = five").format(g3="constant 1"), ":4: [run] t_max"),
    (PAULI.replace("grid = 101", "gird = 101").format(g3="constant 1"), "unknown field"),
    ("[run]\nschema = 1\nmodel = other\n", "model must be one of"),
    ("not an ini file", "section"),
])
def test_config_errors(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["classify", "--config", str(tmp_path / "nope.ini")]) == 2


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("KSDIV_THREADS", "zero")
    assert main(["region-scan", "--out", str(tmp_path), "--grid", "5"]) == 2


def test_numerical_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "[run]\nschema = 1\nmodel = amplitude-damping\nt_max = 3\n\n"
                          "[damping]\nG = jaynes-cummings 1 2\n")
    # G has a zero near t = 2.418, where the map stops being invertible
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o"), "--grid", "4001"]) in (0, 3)
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--t-max", str(4 * math.pi / (3 * math.sqrt(3))), "--grid", "2"]) == 3


def test_invariant_breach_exit_code(tmp_path, monkeypatch):
    def broken(cfg, threads=1):
        raise cli.InvariantError("forced")
    monkeypatch.setattr(cli, "scan_region", broken)
    assert main(["region-scan", "--out", str(tmp_path)]) == 4


def test_damping_classify(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "damping.ini"), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "classification.csv")
    assert all(r["cptp"] == "true" for r in rows)


def test_region_examples():
    q = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, -1], [1 / 3, 1 / 3, 1 / 3]], dtype=float)
    f = region_flags(q)
    assert all(f["ks_ppp"][:3]) and np.all(np.abs(f["ppp_margin"][:3]) <= 1e-12)
    assert f["positive"][3] and not f["ks_ppp"][3] and not f["cp"][3]
    assert f["positive"][4] and f["ks_ppp"][4] and f["cp"][4]


def test_region_flags_match_scalar_functions(rng):
    q = rng.uniform(-1, 1, (300, 3))
    f = region_flags(q)
    for k in range(len(q)):
        cf = ks_closed_form_diag(q[k])
        assert f["ks_ppp"][k] == cf["certified"]
        assert f["ppp_margin"][k] == pytest.approx(ppp_margin(q[k]))


def test_region_scan_outputs(tmp_path):
    assert main(["region-scan", "--config", str(CONFIGS / "region.ini"), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "region.csv")
    assert len(rows) == 201 * 201
    assert list(rows[0]) == ["p1", "p2", "p3", "positive", "ks_ppp", "ks_q38", "cp"]
    for r in rows:
        assert r["cp"] == "false" or r["ks_ppp"] == "true"
        assert r["ks_ppp"] == "false" or r["positive"] == "true"
    svg = (tmp_path / "region.svg").read_text()
    assert 'width="800" height="800"' in svg and svg.count("<polygon") == 2


def test_region_scan_threads_deterministic(tmp_path, monkeypatch):
    cfg = RegionScanConfig(resolution=41)
    pts1, f1 = scan_region(cfg, 1)
    pts3, f3 = scan_region(cfg, 3)
    assert np.array_equal(pts1, pts3) and all(np.array_equal(f1[k], f3[k]) for k in f1)


def test_svg_geometry():
    # positivity vertices map to the triangle corners, CP vertices to edge midpoints
    a, b, c = to_screen([-1, 1, 1]), to_screen([1, -1, 1]), to_screen([1, 1, -1])
    assert np.allclose(to_screen([1, 0, 0]), (b + c) / 2)
    assert np.allclose(to_screen([1 / 3] * 3), (a + b + c) / 3)
    cfg = RegionScanConfig(resolution=41)
    _, flags = scan_region(cfg)
    svg = render_svg(cfg, flags)
    assert svg == render_svg(cfg, flags)
    assert "<path d=\"M " in svg


def test_region_config_validation():
    with pytest.raises(ConfigError):
        RegionScanConfig(resolution=1)
    with pytest.raises(ConfigError):
        RegionScanConfig(outputs=("png",))


def test_witness_command(tmp_path, capsys):
    assert main(["witness", "--config", str(CONFIGS / "transposition.ini"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "verdict: VIOLATION" in out and "margin: -1" in out
    assert (tmp_path / "witness.txt").exists()


@pytest.mark.parametrize("kind,extra,verdict", [
    ("identity", "", "UNDECIDED"),
    ("diagonal", "q = 0.9 0.9 0.9", "UNDECIDED"),
    ("diagonal", "q = 1 1 -1", "VIOLATION"),
])
def test_witness_maps(tmp_path, capsys, kind, extra, verdict):
    cfg = write(tmp_path, f"[run]\nschema = 1\nmodel = custom-transfer\nbudget = 500\n\n"
                          f"[map]\nkind = {kind}\n{extra}\n")
    assert main(["witness", "--config", str(cfg)]) == 0
    assert f"verdict: {verdict}" in capsys.readouterr().out


def test_witness_generator(tmp_path, capsys):
    cfg = write(tmp_path, PAULI.format(g3="tanh -1 1") + "\n[witness]\nat = 1.0\n")
    assert main(["witness", "--config", str(cfg), "--budget", "400"]) == 0
    assert "verdict: VIOLATION" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ksdiv", "region-scan", "--grid", "5", "--out",
                          str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and "region scan" in res.stdout
