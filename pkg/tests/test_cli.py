import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from fanodyn.cli import Table, format_float, main
from fanodyn.regime import boundary_delta


def run_cli(*args, env=None):
    proc = subprocess.run([sys.executable, "-m", "fanodyn", *args], capture_output=True, text=True, env=env)
    return proc.returncode, proc.stdout, proc.stderr


def parse_csv(text):
    meta = {}
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = val
        else:
            lines.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    return meta, rows[0], rows[1:]


def test_simulate_exact_csv():
    code, out, _ = run_cli("simulate", "--nbar", "1000", "--delta", "10", "--p", "1", "--method", "exact", "--points", "50")
    assert code == 0
    meta, header, rows = parse_csv(out)
    assert header == ["t", "rho_aa", "rho_bb", "rho_cc", "re_rho_ab", "im_rho_ab"]
    for key in ("gamma", "delta", "p", "nbar", "method", "version"):
        assert key in meta
    assert meta["method"] == "exact"
    assert len(rows) == 50
    vals = np.array(rows, dtype=float)
    assert np.allclose(vals[:, 3], 1 - 2 * vals[:, 1])


def test_simulate_auto_branch():
    code, out, _ = run_cli("simulate", "--nbar", "1000", "--delta", "0.1", "--p", "0.9", "--method", "analytic-auto")
    assert code == 0
    meta, _, _ = parse_csv(out)
    assert meta["branch"] == "small-delta-subcritical"


def test_simulate_p0_zero_coherence():
    code, out, _ = run_cli("simulate", "--nbar", "50", "--delta", "3", "--p", "0", "--points", "20")
    _, _, rows = parse_csv(out)
    vals = np.array(rows, dtype=float)
    assert code == 0 and np.all(vals[:, 4:] == 0.0)


def test_exit_codes():
    code, _, err = run_cli("simulate", "--nbar", "10", "--delta", "1000", "--p", "1", "--method", "analytic-supercritical")
    assert code == 3 and "underdamped: analytic branch unavailable" in err
    code, _, err = run_cli("simulate", "--nbar", "10", "--delta", "1", "--p", "1.5")
    assert code == 2 and "p" in err
    code, _, _ = run_cli("simulate", "--nbar", "10")
    assert code == 2
    code, _, _ = run_cli("bogus")
    assert code == 2
    code, _, _ = run_cli("lifetime", "--nbar", "10", "--delta", "1000", "--p", "1")
    assert code == 3


def test_classify_outputs():
    code, out, _ = run_cli("classify", "--nbar", "1000", "--delta", "10", "--p", "1", "--json")
    info = json.loads(out)
    assert code == 0 and info["regime"] == "overdamped"
    assert info["delta_over_nbar_gamma"] == 0.01
    code, out, _ = run_cli("classify", "--nbar", "10", "--delta", "1000", "--p", "1")
    assert "regime: underdamped" in out
    y = boundary_delta(0.5, 1e4)
    code, out, _ = run_cli("classify", "--nbar", "10000", "--delta", repr(y), "--p", "0.5")
    assert "regime: critical" in out


def test_lifetime_output():
    code, out, _ = run_cli("lifetime", "--nbar", "1000", "--delta", "10", "--p", "1", "--format", "json")
    data = json.loads(out)
    row = dict(zip(data["columns"], data["rows"][0]))
    assert code == 0
    assert row["tau_formula"] == pytest.approx(13.4)
    assert row["branch"] == "supercritical"


def test_coeffs_and_grid():
    code, out, _ = run_cli("coeffs", "--p", "1")
    _, header, rows = parse_csv(out)
    row = dict(zip(header, map(float, rows[0])))
    assert row["T1"] == pytest.approx(-4.0)
    code, out, _ = run_cli("coeffs", "--p-grid", "0.5:1:11")
    _, header, rows = parse_csv(out)
    assert code == 0 and len(rows) == 11 and "m16" in header and "C6" in header
    assert run_cli("coeffs")[0] == 2


def test_spectrum_and_zterms():
    code, out, _ = run_cli("spectrum", "--nbar", "1000", "--delta", "0.1", "--p", "1")
    meta, header, rows = parse_csv(out)
    assert code == 0 and len(rows) == 3 and float(meta["setwise_rel_error"]) < 1e-9
    code, out, _ = run_cli("zterms", "--nbar", "1000", "--delta", "0.1", "--p-grid", "0.2:1:5")
    _, header, rows = parse_csv(out)
    assert code == 0 and len(rows) == 5 and header[1] == "abs_z10_x0"


def test_scan_workers_env_and_determinism(tmp_path):
    import os

    args = ["scan", "--quantity", "regime", "--axis1", "nbar=10:10000:12:log", "--axis2", "delta_over_gamma=1:10000:12:log", "--p", "1"]
    env1 = dict(os.environ, FANODYN_WORKERS="1")
    env2 = dict(os.environ, FANODYN_WORKERS="2")
    a = run_cli(*args, "--out", str(tmp_path / "a.csv"), env=env1)
    b = run_cli(*args, "--out", str(tmp_path / "b.csv"), env=env2)
    assert a[0] == b[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    bad = run_cli(*args, env=dict(os.environ, FANODYN_WORKERS="x"))
    assert bad[0] == 2


def test_csv_roundtrip():
    vals = [0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)]
    text = Table(["v"], [[v] for v in vals], {"method": "x"}).to_csv()
    _, _, rows = parse_csv(text)
    assert [float(r[0]) for r in rows] == [float(v) for v in vals]
    assert format_float(True) == "true" and format_float(3) == "3"


def test_reproduce_fig9(tmp_path):
    code, out, _ = run_cli("reproduce-fig", "--fig", "9", "--out-dir", str(tmp_path))
    assert code == 0
    csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert csvs == [f"fig9{c}.csv" for c in "abcdef"]
    side = json.loads((tmp_path / "fig9a.json").read_text())
    assert side["parameters"]["nbar"] == 1000.0
    _, header, rows = parse_csv((tmp_path / "fig9a.csv").read_text())
    vals = np.array(rows, dtype=float)
    assert np.abs(vals[:, 1] - vals[:, 2]).max() < 0.02


def test_reproduce_fig4a_and_5(tmp_path):
    assert main(["reproduce-fig", "--fig", "4a", "--out-dir", str(tmp_path)]) == 0
    _, header, rows = parse_csv((tmp_path / "fig4a.csv").read_text())
    last = dict(zip(header, map(float, rows[-1])))
    assert last["p"] == 1.0 and last["f"] == pytest.approx(0.59, abs=0.01)
    assert main(["reproduce-fig", "--fig", "5", "--out-dir", str(tmp_path)]) == 0
    first = (tmp_path / "fig5.csv").read_text()
    assert main(["reproduce-fig", "--fig", "5", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "fig5.csv").read_text() == first


@pytest.mark.parametrize("fig", ["2a", "2b", "3a", "3b", "4b", "6a", "6b", "7", "8", "10"])
def test_reproduce_other_figures(fig, tmp_path):
    assert main(["reproduce-fig", "--fig", fig, "--out-dir", str(tmp_path)]) == 0
    assert list(tmp_path.glob("*.json"))


def test_reproduce_validity_exit(monkeypatch, tmp_path):
    from fanodyn import cli
    from fanodyn.core import OutsideValidity

    def boom(fig, workers=1):
        raise OutsideValidity("nbar below expansion window")

    monkeypatch.setattr(cli, "figure_tables", boom)
    assert main(["reproduce-fig", "--fig", "9", "--out-dir", str(tmp_path)]) == 4
