import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spatial_logistic.cli import main, to_json

ROOT = Path(__file__).resolve().parents[1]


def gaussian_doc(dim=1, m=0.5, sigma_minus=1.0, **blocks):
    doc = {
        "dimension": dim,
        "model": {
            "a_plus": {"kind": "gaussian", "sigma": 1.0, "mass": 1.0},
            "a_minus": {"kind": "gaussian", "sigma": sigma_minus, "mass": 1.0},
            "mortality": m,
        },
    }
    doc.update(blocks)
    return doc


def run(tmp_path, command, doc, *extra, name="out"):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_validate_ok(tmp_path, capsys):
    code, out = run(tmp_path, "validate", gaussian_doc())
    assert code == 0
    assert json.loads((out / "validation.json").read_text())["all_passed"] is True


def test_validate_a2_failure(tmp_path, capsys):
    code, _ = run(tmp_path, "validate", gaussian_doc(m=1.0))
    assert code == 2
    assert "A2: FAIL" in capsys.readouterr().out


def test_validate_a3_failure(tmp_path, capsys):
    code, out = run(tmp_path, "validate", gaussian_doc(m=0.1, sigma_minus=0.2))
    assert code == 2
    report = json.loads((out / "validation.json").read_text())
    assert report["checks"]["A3"]["passed"] is False
    assert report["checks"]["A3"]["margin"] < 0
    assert "A3: FAIL margin=-1.39" in capsys.readouterr().out


@pytest.mark.parametrize(
    "doc",
    [
        {**gaussian_doc(), "bogus": 1},
        gaussian_doc(evolve={"t_end": 1, "typo": 2}),
        {**gaussian_doc(), "model": {**gaussian_doc()["model"], "a_plus": {"kind": "gaussian", "sigma": 1, "width": 2}}},
        {**gaussian_doc(), "model": {**gaussian_doc()["model"], "a_plus": {"kind": "tophat"}}},
        {**gaussian_doc(), "dimension": 0},
    ],
)
def test_config_errors_exit_2(tmp_path, doc, capsys):
    code, _ = run(tmp_path, "validate", doc)
    assert code == 2


def test_evolve_t0_initial_row_only(tmp_path):
    code, out = run(tmp_path, "evolve", gaussian_doc(evolve={"t_end": 0}))
    assert code == 0
    rows = read_csv(out / "trajectory.csv")
    assert len(rows) == 2 and rows[0][:2] == ["t", "p_t"]
    assert all(float(v) == 0.0 for v in rows[1])


def test_evolve_matches_stationary_and_backends(tmp_path):
    doc = gaussian_doc(evolve={"t_end": 40, "dt": 5})
    code, out_d = run(tmp_path, "evolve", doc, "--backend", "duhamel", name="d")
    assert code == 0
    code, out_r = run(tmp_path, "evolve", doc, "--backend", "rk4", name="r")
    assert code == 0
    a = np.array(read_csv(out_d / "trajectory.csv")[1:], dtype=float)
    b = np.array(read_csv(out_r / "trajectory.csv")[1:], dtype=float)
    assert np.max(np.abs(a - b)) <= 1e-6
    code, out_s = run(tmp_path, "stationary", doc, name="s")
    stat = json.loads((out_s / "stationary.json").read_text())
    assert abs(a[-1, 1] - stat["p_star"]) <= 1e-5
    summary = json.loads((out_d / "evolve.json").read_text())
    assert summary["sup_g_hat_minus_stationary"] <= 1e-6


def test_stationary_outputs(tmp_path):
    code, out = run(tmp_path, "stationary", gaussian_doc(2))
    assert code == 0
    rows = read_csv(out / "g_hat_star.csv")
    assert rows[1][1] == "0" and float(rows[1][3]) == pytest.approx(0.5, rel=1e-15)
    assert all(r[4] == "true" for r in rows[1:])
    summary = json.loads((out / "stationary.json").read_text())
    assert summary["bound_holds"] is True
    assert summary["g_hat_star_at_0"] == summary["m_over_kappa_minus"]


def test_critical_outputs(tmp_path):
    code, out = run(tmp_path, "critical", gaussian_doc(2, critical={"eps": [1e-2, 1e-3, 1e-4]}))
    assert code == 0
    rows = read_csv(out / "asymptotics.csv")
    header = rows[0]
    assert "lambert_w" in header
    res = header.index("residual")
    assert all(abs(float(r[res])) <= 1e-10 for r in rows[1:])
    summary = json.loads((out / "critical.json").read_text())
    assert summary["monotone_toward_one"] is True


def test_simulate_poisson_and_reproducible(tmp_path):
    doc = gaussian_doc(simulate={"eps": 0.5, "L": 200, "t_end": 0, "replicates": 100, "q0": 0.25})
    code, out = run(tmp_path, "simulate", doc, "--seed", "17", name="a")
    assert code == 0
    res = json.loads((out / "density.json").read_text())
    assert abs(res["density"] - 0.25) <= 3 * res["density_se"]
    code, out2 = run(tmp_path, "simulate", doc, "--seed", "17", name="b")
    for f in ("density.json", "population.csv"):
        assert (out / f).read_bytes() == (out2 / f).read_bytes()


def test_simulate_extinction_exit_code(tmp_path):
    doc = gaussian_doc(m=6.0, simulate={"eps": 1.0, "L": 40, "t_end": 10, "replicates": 3, "q0": 0.5})
    code, _ = run(tmp_path, "simulate", doc)
    assert code == 4


@pytest.mark.parametrize("command", ["evolve", "stationary", "critical"])
def test_byte_identical_reruns(tmp_path, command):
    doc = gaussian_doc(3, evolve={"t_end": 5}, critical={"eps": [0.2, 0.1]})
    _, a = run(tmp_path, command, doc, name="a")
    _, b = run(tmp_path, command, doc, name="b")
    files = sorted(p.name for p in a.iterdir())
    assert files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_numerical_failure_exit_3(tmp_path):
    doc = gaussian_doc(critical={"eps": [50.0]})
    code, out = run(tmp_path, "critical", doc)
    assert code == 3


def _write_table(path, values):
    xs = np.linspace(-3, 3, 121)
    path.write_text("x,a\n" + "\n".join(f"{x},{v}" for x, v in zip(xs, values(xs))))


def test_custom_table_kernel(tmp_path, capsys):
    _write_table(tmp_path / "k.csv", lambda x: np.exp(-x * x / 2) - np.exp(-4.5))
    doc = gaussian_doc(m=0.3)
    table = {"kind": "custom-table", "path": "k.csv", "mass": 1.0}
    doc["model"]["a_plus"] = doc["model"]["a_minus"] = table
    code, out = run(tmp_path, "validate", doc)
    assert code == 0, capsys.readouterr().out
    code, out = run(tmp_path, "stationary", doc, name="s")
    assert code == 0
    assert json.loads((out / "stationary.json").read_text())["p_star"] < 0


def test_discontinuous_table_fails_a1(tmp_path, capsys):
    # a jump at the table edge gives a transform decaying like 1/xi
    _write_table(tmp_path / "k.csv", lambda x: np.exp(-x * x / 2))
    doc = gaussian_doc(m=0.3)
    doc["model"]["a_plus"] = doc["model"]["a_minus"] = {"kind": "custom-table", "path": "k.csv"}
    code, _ = run(tmp_path, "validate", doc)
    assert code == 2
    assert "A1: FAIL" in capsys.readouterr().out


def test_float_format():
    assert to_json(0.1) == "0.10000000000000001"
    assert to_json({"b": 1, "a": [1.5, True, None]}) == '{\n  "a": [1.5, true, null],\n  "b": 1\n}'


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(gaussian_doc()))
    proc = subprocess.run(
        [sys.executable, "-m", "spatial_logistic", "validate", "--config", str(cfg)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "A3: pass" in proc.stdout


def test_shipped_configs_parse():
    from spatial_logistic.config import load_config

    for path in sorted((ROOT / "configs").glob("*.json")):
        load_config(path)
