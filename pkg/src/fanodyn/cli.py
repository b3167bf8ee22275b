"""Command-line front end.

Every subcommand writes a table either as CSV (``#``-prefixed metadata lines,
a header row, shortest round-trip floats) or as JSON.  Exit codes: 0 success,
2 invalid arguments, 3 regime/branch/validity violation, 4 a figure preset
outside the implemented validity range.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    analytic_auto,
    coeffs,
    dm_general,
    rho_p1,
    rho_small_delta,
    rho_subcritical,
    rho_supercritical,
)
from .core import DomainError, FanodynError, OutsideValidity, VParams, validate
from .generator import default_time_grid, log_time_grid, propagate_exact, propagate_stepped
from .regime import boundary_delta, classify, limit_slope, slope_f
from .spectral import (
    coherence_lifetime,
    critical_epsilon,
    eigenvalues_cardano,
    eigenvalues_numeric,
    match_setwise,
)
from .sweep import Axis, GridSpec, Quantity, default_workers, run, zjk_magnitudes

__all__ = ["main", "Table", "format_float"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REGIME = 3
EXIT_VALIDITY = 4

METHODS = (
    "exact",
    "stepped",
    "analytic-auto",
    "analytic-supercritical",
    "analytic-subcritical",
    "analytic-small-delta",
    "analytic-p1",
    "analytic-general",
)
FIGURES = ("2a", "2b", "3a", "3b", "4a", "4b", "5", "6a", "6b", "7", "8", "9", "10")


class UsageError(Exception):
    """Invalid command-line input (exit code 2)."""


# ---------------------------------------------------------------------------
# Tables and writers
# ---------------------------------------------------------------------------


def format_float(v) -> str:
    """Shortest decimal string that round-trips to the same double."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class Table:
    """Named columns plus metadata, serialisable to CSV or JSON."""

    def __init__(self, columns: list[str], rows, meta: dict):
        self.columns = list(columns)
        self.rows = [list(r) for r in rows]
        self.meta = dict(meta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}: {format_float(v) if not isinstance(v, str) else v}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(format_float(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        def conv(v):
            if isinstance(v, str):
                return v
            if isinstance(v, (bool, np.bool_)):
                return bool(v)
            if isinstance(v, (int, np.integer)):
                return int(v)
            f = float(v)
            return f if math.isfinite(f) else repr(f)

        payload = {
            "meta": {k: conv(v) for k, v in self.meta.items()},
            "columns": self.columns,
            "rows": [[conv(v) for v in row] for row in self.rows],
        }
        return json.dumps(payload, indent=1)

    def render(self, fmt: str) -> str:
        return self.to_json() + "\n" if fmt == "json" else self.to_csv()


def _meta(params: VParams | None, method: str, **extra) -> dict:
    meta = {"tool": "fanodyn", "version": __version__}
    if params is not None:
        meta.update({"gamma": params.gamma, "delta": params.delta, "p": params.p, "nbar": params.nbar})
    meta["method"] = method
    meta.update(extra)
    return meta


def _emit(table: Table, out: str | None, fmt: str) -> None:
    text = table.render(fmt)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def _add_params(sp, *, require=("delta", "p", "nbar")):
    sp.add_argument("--gamma", type=float, default=1.0, help="spontaneous decay rate (default 1)")
    sp.add_argument("--delta", type=float, required="delta" in require, help="excited-state splitting")
    sp.add_argument("--p", type=float, required="p" in require, help="dipole alignment factor in [0, 1]")
    sp.add_argument("--nbar", type=float, required="nbar" in require, help="mean photon occupation")


def _add_output(sp):
    sp.add_argument("--out", default=None, help="output file (default stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")


def _params(ns) -> VParams:
    try:
        return validate(VParams(ns.delta, ns.p, ns.nbar, ns.gamma))
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _parse_range(text: str, name: str) -> tuple[float, float, int, str]:
    """``min:max:points[:log]``."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"{name} must be min:max:points[:log|linear], got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"cannot parse {name} {text!r}") from exc
    spacing = parts[3] if len(parts) == 4 else "linear"
    if spacing not in ("log", "linear"):
        raise UsageError(f"{name} spacing must be log or linear")
    return lo, hi, n, spacing


def _grid(text: str, name: str) -> np.ndarray:
    lo, hi, n, spacing = _parse_range(text, name)
    try:
        return Axis("p", lo, hi, n, spacing).values()
    except ValueError as exc:
        raise UsageError(f"{name}: {exc}") from exc


# ---------------------------------------------------------------------------
# Trajectory helpers (shared by simulate and figure presets)
# ---------------------------------------------------------------------------


def _trajectory(params: VParams, method: str, times):
    if method == "exact":
        return propagate_exact(params, times=times)
    if method == "stepped":
        return propagate_stepped(params, times=times)
    if method == "analytic-auto":
        return analytic_auto(params, times)
    if method == "analytic-supercritical":
        return rho_supercritical(params, times)
    if method == "analytic-subcritical":
        return rho_subcritical(params, times)
    if method == "analytic-small-delta":
        return rho_small_delta(params, times)
    if method == "analytic-p1":
        return rho_p1(params, times)
    if method == "analytic-general":
        return dm_general(params, times)
    raise UsageError(f"unknown method {method!r}")


def _trajectory_table(params: VParams, traj, method: str) -> Table:
    v = traj.values
    rows = zip(traj.times, v[:, 0], v[:, 0], 1.0 - 2.0 * v[:, 0], v[:, 1], v[:, 2])
    extra = {}
    if "branch" in traj.info:
        extra["branch"] = traj.info["branch"]
    return Table(
        ["t", "rho_aa", "rho_bb", "rho_cc", "re_rho_ab", "im_rho_ab"],
        rows,
        _meta(params, method, **extra),
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(ns) -> int:
    params = _params(ns)
    if ns.points < 2:
        raise UsageError("--points must be >= 2")
    if ns.t_max is None:
        span = default_time_grid(params)
        times = np.logspace(np.log10(span[0]), np.log10(span[-1]), ns.points)
    else:
        if not ns.t_max > 0:
            raise UsageError("--t-max must be > 0")
        t_min = ns.t_min if ns.t_min is not None else min(default_time_grid(params)[0], ns.t_max / 10)
        if not 0 < t_min < ns.t_max:
            raise UsageError("--t-min must lie in (0, t-max)")
        times = np.logspace(np.log10(t_min), np.log10(ns.t_max), ns.points)
    traj = _trajectory(params, ns.method, times)
    _emit(_trajectory_table(params, traj, ns.method), ns.out, ns.format)
    return EXIT_OK


def cmd_classify(ns) -> int:
    params = _params(ns)
    reg = classify(params)
    ratio = params.delta / (params.nbar * params.gamma) if params.nbar > 0 else math.inf
    info = {
        "regime": reg.tag.value,
        "discriminant": reg.discriminant_value,
        "delta_over_nbar_gamma": ratio,
        "f_p": slope_f(params.p),
    }
    if ns.json:
        payload = {"meta": _meta(params, "classify"), **info}
        sys.stdout.write(json.dumps(payload, indent=1) + "\n")
    else:
        for k, v in info.items():
            sys.stdout.write(f"{k}: {format_float(v)}\n")
    return EXIT_OK


def cmd_spectrum(ns) -> int:
    params = _params(ns)
    card = eigenvalues_cardano(params, with_vectors=False)
    num = eigenvalues_numeric(params, with_vectors=False)
    perm, err = match_setwise(card.lambdas, num.lambdas)
    rows = []
    for j in range(3):
        lc, ln = card.lambdas[j], num.lambdas[perm[j]]
        rows.append([j + 1, lc.real, lc.imag, ln.real, ln.imag])
    table = Table(["j", "re_lambda", "im_lambda", "re_lambda_numeric", "im_lambda_numeric"], rows,
                  _meta(params, "cardano", setwise_rel_error=err))
    _emit(table, ns.out, ns.format)
    return EXIT_OK


def cmd_lifetime(ns) -> int:
    params = _params(ns)
    lt = coherence_lifetime(params)
    rows = [[lt.tau_exact, lt.tau_formula, lt.branch, lt.p_critical, lt.tau_weak_pumping, lt.ratio_to_weak_pumping]]
    table = Table(["tau_exact", "tau_formula", "branch", "p_critical", "tau_weak_pumping", "ratio_to_weak_pumping"],
                  rows, _meta(params, "lifetime"))
    _emit(table, ns.out, ns.format)
    return EXIT_OK


def _axis(text: str, flag: str) -> Axis:
    name, _, rng = text.partition("=")
    lo, hi, n, spacing = _parse_range(rng, flag)
    try:
        return Axis(name, lo, hi, n, spacing)
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from exc


def _sweep_table(table, meta: dict) -> Table:
    rows = [[v1, v2, val, err] for v1, v2, val, err in table.rows()]
    return Table([table.axis1_name, table.axis2_name, table.quantity.value, "error"], rows, meta)


def _workers(ns) -> int:
    if ns.workers is not None:
        if ns.workers < 1:
            raise UsageError("--workers must be >= 1")
        return ns.workers
    try:
        return default_workers()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_scan(ns) -> int:
    a1 = _axis(ns.axis1, "--axis1")
    a2 = _axis(ns.axis2, "--axis2")
    fixed = {}
    for name, val in (("p", ns.p), ("nbar", ns.nbar), ("delta_over_gamma", ns.delta_over_gamma)):
        if val is not None and name not in (a1.name, a2.name):
            fixed[name] = val
    try:
        grid = GridSpec(a1, a2, Quantity(ns.quantity), fixed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    table = run(grid, _workers(ns))
    meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "method": f"scan-{ns.quantity}"}
    meta.update({k: v for k, v in fixed.items()})
    _emit(_sweep_table(table, meta), ns.out, ns.format)
    return EXIT_OK


def _zterms_table(p_grid, nbar: float, y: float) -> Table:
    mags = zjk_magnitudes(p_grid, nbar, y)
    cols = ["p"] + [f"abs_z{j}{k}_x{k}" for j in (1, 2, 3) for k in (0, 1, 2)]
    rows = [[p, *mags[i].ravel()] for i, p in enumerate(p_grid)]
    meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "delta": y, "nbar": nbar, "method": "zterms"}
    return Table(cols, rows, meta)


def cmd_zterms(ns) -> int:
    if ns.nbar is None or ns.delta is None:
        raise UsageError("--nbar and --delta are required")
    p_grid = _grid(ns.p_grid, "--p-grid")
    _emit(_zterms_table(p_grid, ns.nbar, ns.delta / ns.gamma), ns.out, ns.format)
    return EXIT_OK


_COEFF_COLS = (
    ["T1", "T2"]
    + [f"{n}{i}" for n in "ABC" for i in range(1, 7)]
    + [f"m{i}" for i in range(1, 17)]
)


def _coeffs_table(p_values) -> Table:
    rows = []
    for p in p_values:
        d = coeffs(float(p)).as_dict()
        rows.append([p] + [d[c] for c in _COEFF_COLS])
    return Table(["p"] + _COEFF_COLS, rows, {"tool": "fanodyn", "version": __version__, "method": "coeffs"})


def cmd_coeffs(ns) -> int:
    if (ns.p is None) == (ns.p_grid is None):
        raise UsageError("give exactly one of --p or --p-grid")
    p_values = [ns.p] if ns.p is not None else _grid(ns.p_grid, "--p-grid")
    for p in p_values:
        if not 0 < p <= 1:
            raise UsageError(f"p must lie in (0, 1], got {p!r}")
    _emit(_coeffs_table(p_values), ns.out, ns.format)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------


def _fig_boundary(nbar_grid, p_values, tag: str) -> dict:
    rows = []
    for n in nbar_grid:
        row = [n]
        for p in p_values:
            try:
                row.append(boundary_delta(p, n))
            except FanodynError:
                row.append(math.nan)
        rows.append(row)
    cols = ["nbar"] + [f"delta_boundary_p{p:g}" for p in p_values]
    meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "method": "boundary_delta"}
    return {tag: (Table(cols, rows, meta), {"p_values": list(p_values), "nbar_range": [nbar_grid[0], nbar_grid[-1]]})}


def _fig_discriminant(tag: str, n_rng, y_rng, spacing: str, workers: int) -> dict:
    grid = GridSpec(Axis("nbar", *n_rng, 81, spacing), Axis("delta_over_gamma", *y_rng, 81, spacing),
                    Quantity.DISCRIMINANT, {"p": 1.0})
    meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "p": 1.0, "method": "discriminant"}
    return {tag: (_sweep_table(run(grid, workers), meta), {"p": 1.0, "nbar": list(n_rng), "delta_over_gamma": list(y_rng)})}


def _fig_eigs(tag: str, p: float) -> dict:
    rows = []
    for y in np.logspace(-2, 2, 81):
        lam = eigenvalues_cardano(VParams(float(y), p, 1e3), with_vectors=False).lambdas
        rows.append([y] + [c for l in lam for c in (l.real, l.imag)])
    cols = ["delta_over_gamma"] + [f"{part}_lambda{j}" for j in (1, 2, 3) for part in ("re", "im")]
    meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "p": p, "nbar": 1e3, "method": "cardano"}
    return {tag: (Table(cols, rows, meta), {"p": p, "nbar": 1e3})}


def _fig_dynamics(fig: str, y: float) -> dict:
    out = {}
    labels = {1.0: "abc", 0.9: "def"}
    names = ("rho_aa", "re_rho_ab", "im_rho_ab")
    for p, letters in labels.items():
        params = VParams(y, p, 1e3)
        tau = coherence_lifetime(params).tau_exact
        times = log_time_grid(1e-6, 10.0 * tau, 32)
        ana = analytic_auto(params, times)
        ex = propagate_exact(params, times=times)
        for col, letter in enumerate(letters):
            rows = zip(times, ana.values[:, col], ex.values[:, col])
            meta = _meta(params, "analytic-auto+exact", branch=ana.info["branch"], quantity=names[col])
            out[f"{fig}{letter}"] = (Table(["t", f"{names[col]}_analytic", f"{names[col]}_exact"], rows, meta),
                                      {**params.as_dict(), "branch": ana.info["branch"], "quantity": names[col]})
    return out


def _fig_coeff_ratio(tag: str, indices, normaliser) -> dict:
    rows = []
    for p in np.linspace(0.05, 1.0, 96):
        c = coeffs(float(p))
        norm = normaliser(c)
        rows.append([p] + [getattr(c, n)[i] / norm for n in "ABC" for i in indices])
    cols = ["p"] + [f"{n}{i}_normalised" for n in "ABC" for i in indices]
    return {tag: (Table(cols, rows, {"tool": "fanodyn", "version": __version__, "method": "coeffs"}), {"indices": list(indices)})}


def figure_tables(fig: str, workers: int = 1) -> dict:
    """Tables for every panel of a figure preset, keyed by panel name."""
    if fig == "2a":
        return _fig_boundary(np.logspace(1, 4, 61), (0.2, 0.5, 0.8, 1.0), "2a")
    if fig == "2b":
        return _fig_boundary(np.logspace(-2, 1, 61), (0.2, 0.5, 0.8, 1.0), "2b")
    if fig == "3a":
        return _fig_discriminant("3a", (10.0, 1e3), (10.0, 1e3), "linear", workers)
    if fig == "3b":
        return _fig_discriminant("3b", (1e-3, 1.0), (1e-3, 1.0), "linear", workers)
    if fig == "4a":
        ps = np.linspace(0.0, 1.0, 101)
        rows = [[p, slope_f(p), limit_slope(p)] for p in ps]
        meta = {"tool": "fanodyn", "version": __version__, "method": "slope_f"}
        return {"4a": (Table(["p", "f", "limit_slope"], rows, meta), {"p_range": [0.0, 1.0]})}
    if fig == "4b":
        ys = np.logspace(-2, 2, 41)
        rows = [[y, critical_epsilon(1e3, y)] for y in ys]
        meta = {"tool": "fanodyn", "version": __version__, "gamma": 1.0, "nbar": 1e3, "method": "critical_epsilon"}
        return {"4b": (Table(["delta_over_gamma", "epsilon"], rows, meta), {"nbar": 1e3})}
    if fig == "5":
        return {"5": (_zterms_table(np.linspace(0.2, 1.0, 161), 1e3, 0.1), {"nbar": 1e3, "delta_over_gamma": 0.1})}
    if fig == "6a":
        return _fig_eigs("6a", 1.0)
    if fig == "6b":
        return _fig_eigs("6b", 0.9)
    if fig == "7":
        return _fig_coeff_ratio("7", (1, 3, 5), lambda c: c.T1)
    if fig == "8":
        b2 = (1e2 / 1e3) ** 2
        return _fig_coeff_ratio("8", (2, 4, 6), lambda c: c.T1 + c.T2 * b2)
    if fig == "9":
        return _fig_dynamics("9", 10.0)
    if fig == "10":
        return _fig_dynamics("10", 0.1)
    raise UsageError(f"unknown figure {fig!r}")


def cmd_reproduce(ns) -> int:
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        tables = figure_tables(ns.fig, _workers(ns))
    except OutsideValidity as exc:
        sys.stderr.write(f"figure {ns.fig}: parameters outside validity: {exc}\n")
        return EXIT_VALIDITY
    for name, (table, params) in tables.items():
        (out_dir / f"fig{name}.csv").write_text(table.to_csv())
        side = {"figure": name, "version": __version__, "parameters": params, "meta": table.meta}
        (out_dir / f"fig{name}.json").write_text(json.dumps(side, indent=1, default=float) + "\n")
        sys.stdout.write(f"{out_dir / f'fig{name}.csv'}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fanodyn", description="Incoherently pumped V-system dynamics.")
    parser.add_argument("--version", action="version", version=f"fanodyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="time evolution from the ground state")
    _add_params(sp)
    sp.add_argument("--t-max", type=float, default=None)
    sp.add_argument("--t-min", type=float, default=None)
    sp.add_argument("--points", type=int, default=256)
    sp.add_argument("--method", choices=METHODS, default="exact")
    _add_output(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("classify", help="regime classification")
    _add_params(sp)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("spectrum", help="eigenvalues (closed form and numeric)")
    _add_params(sp)
    _add_output(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("lifetime", help="coherence lifetime")
    _add_params(sp)
    _add_output(sp)
    sp.set_defaults(func=cmd_lifetime)

    sp = sub.add_parser("scan", help="quantity over a 2-D grid")
    sp.add_argument("--quantity", choices=[q.value for q in Quantity], required=True)
    sp.add_argument("--axis1", required=True, help="name=min:max:points[:log]")
    sp.add_argument("--axis2", required=True, help="name=min:max:points[:log]")
    sp.add_argument("--p", type=float)
    sp.add_argument("--nbar", type=float)
    sp.add_argument("--delta-over-gamma", type=float)
    sp.add_argument("--workers", type=int, default=None, help="default from FANODYN_WORKERS")
    _add_output(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("zterms", help="magnitudes of eigenvalue expansion terms vs p")
    _add_params(sp, require=())
    sp.add_argument("--p-grid", default="0.2:1:81")
    _add_output(sp)
    sp.set_defaults(func=cmd_zterms)

    sp = sub.add_parser("coeffs", help="trajectory coefficients vs p")
    sp.add_argument("--p", type=float)
    sp.add_argument("--p-grid", help="min:max:points[:log]")
    _add_output(sp)
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("reproduce-fig", help="write the dataset behind a figure")
    sp.add_argument("--fig", choices=FIGURES, required=True)
    sp.add_argument("--out-dir", default=".")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        return ns.func(ns)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except FanodynError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_REGIME
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
