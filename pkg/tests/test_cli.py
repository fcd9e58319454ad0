import json

import numpy as np
import pytest

from betaprime.cli import dumps17, main
from betaprime.sampler import read_points_csv

SMALL_CONFIG = """\
n_grid = [16, 32, 64, 128]
replications = 30
master_seed = 5
kubota_directions = 64

[model]
kind = "{kind}"
d = 2
{param} = {value}

[functional]
kind = "{fkind}"
{index}
"""


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(tmp_path, name="c.toml", kind="beta_prime", param="beta", value=4.0, fkind="intrinsic_volume", index="index = 2"):
    p = tmp_path / name
    p.write_text(SMALL_CONFIG.format(kind=kind, param=param, value=value, fkind=fkind, index=index))
    return p


def test_sample_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        code, _, _ = run(["sample", "--model", "beta_prime", "--d", "2", "--beta", "2", "--n", "100", "--seed", "7", "--out", str(out)], capsys)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert read_points_csv(a).shape == (100, 2)


def test_sample_hemisphere(tmp_path, capsys):
    out = tmp_path / "h.csv"
    code, _, _ = run(["sample", "--model", "hemisphere", "--d", "2", "--alpha", "0", "--n", "50", "--out", str(out)], capsys)
    assert code == 0
    x = read_points_csv(out)
    assert x.shape == (50, 3)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)
    assert np.all(x[:, 2] > 0)


def test_sample_rejects_boundary_beta(tmp_path, capsys):
    code, _, err = run(["sample", "--model", "beta_prime", "--d", "2", "--beta", "1", "--n", "10", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2
    assert "beta > d/2" in err


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 2
    assert run(["lemma-check", "--which", "bogus"], capsys)[0] == 2
    assert run(["sample", "--model", "beta_prime", "--d", "2", "--n", "5", "--out", "x"], capsys)[0] == 2


def test_hull_stats(tmp_path, capsys):
    pts = tmp_path / "p.csv"
    run(["sample", "--model", "beta_prime", "--d", "3", "--beta", "3", "--n", "60", "--seed", "1", "--out", str(pts)], capsys)
    off = tmp_path / "h.off"
    code, out, _ = run(["hull-stats", "--input", str(pts), "--directions", "64", "--off", str(off)], capsys)
    assert code == 0
    assert "euler         PASS" in out and "kubota_mc" in out
    assert off.read_text().startswith("OFF")
    sph = tmp_path / "s.csv"
    run(["sample", "--model", "hemisphere", "--d", "2", "--alpha", "0", "--n", "40", "--out", str(sph)], capsys)
    code, out, _ = run(["hull-stats", "--input", str(sph), "--spherical"], capsys)
    assert code == 0 and "spherical vol" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["--which", "tail", "--gamma", "1.5"],
        ["--which", "halfspace", "--d", "2", "--beta", "2", "--samples", "20000"],
        ["--which", "pushforward", "--d", "2", "--alpha", "1", "--samples", "20000"],
    ],
)
def test_lemma_checks_pass(argv, capsys):
    code, out, _ = run(["lemma-check", *argv], capsys)
    assert code == 0
    assert out.strip().endswith("overall: PASS")


def test_lemma_check_bad_gamma(capsys):
    code, _, err = run(["lemma-check", "--which", "tail", "--gamma", "0.5"], capsys)
    assert code == 2 and "gamma" in err


def test_construction_check(tmp_path, capsys):
    dump = tmp_path / "c.json"
    code, out, _ = run(["construction-check", "--reps", "200", "--json", str(dump)], capsys)
    assert code == 0
    assert "overall: PASS" in out
    data = json.loads(dump.read_text())
    diag = data["diagnostics"]
    assert abs(diag["facet_distance_closed_form"] - 0.75 / 0.5**0.5 * 1024**0.5) < 1e-9
    for key in ("n_p_delta", "p_A_factorized", "var_ratio", "membership"):
        assert key in diag
    again = tmp_path / "d.json"
    run(["construction-check", "--reps", "200", "--json", str(again)], capsys)
    assert dump.read_bytes() == again.read_bytes()


def test_construction_check_constraint(capsys):
    code, _, err = run(["construction-check", "--c3", "0.5"], capsys)
    assert code == 2 and "c3 < 1/d" in err


def test_construction_check_unfixtured_skips(capsys):
    code, out, _ = run(["construction-check", "--d", "3", "--beta", "2.5", "--n", "512", "--reps", "50"], capsys)
    assert "SKIP" in out
    assert code in (0, 1)


def test_variance_scan_outputs_and_threads(tmp_path, capsys):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    code, out, _ = run(["variance-scan", "--config", str(cfg), "--out", str(a), "--plot"], capsys)
    assert code in (0, 1) and "verdict:" in out
    run(["variance-scan", "--config", str(cfg), "--out", str(b), "--plot", "--threads", "2"], capsys)
    for name in ("raw.csv", "summary.csv", "fit.json", "variance.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "variance.svg").read_text().lstrip().startswith("<?xml")


def test_spherical_scan(tmp_path, capsys):
    cfg = write_config(tmp_path, kind="hemisphere", param="alpha", value=0.0, fkind="spherical_volume", index="")
    code, out, _ = run(["spherical-scan", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code in (0, 1) and "reference -2.0000" in out
    wrong = write_config(tmp_path, "w.toml")
    assert run(["spherical-scan", "--config", str(wrong), "--out", str(tmp_path / "p")], capsys)[0] == 2


def test_scan_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("n_grid = [1, 2\n")
    code, _, err = run(["variance-scan", "--config", str(bad)], capsys)
    assert code == 2 and "line" in err and "column" in err
    missing = run(["variance-scan", "--config", str(tmp_path / "nope.toml")], capsys)
    assert missing[0] == 2
    invalid = write_config(tmp_path, "i.toml", index="index = 7")
    code, _, err = run(["variance-scan", "--config", str(invalid), "--out", str(tmp_path / "x")], capsys)
    assert code == 2 and "index" in err


def test_dumps17():
    text = dumps17({"a": 0.1, "b": [1, 2.5], "c": {"d": True, "e": None}, "f": float("nan")})
    data = json.loads(text)
    assert data["a"] == 0.1 and data["c"]["d"] is True and data["f"] is None
    assert "0.10000000000000001" in text
