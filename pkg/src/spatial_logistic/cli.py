"""Spatial logistic model: assumption checks, covariance evolution, critical mortality, IBM simulation.

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 extinction-dominated simulation.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import covariance as cov
from . import critical as crit
from .errors import (
    AssumptionViolationError,
    ConfigError,
    InvalidParameterError,
    SpatialLogisticError,
)
from .ibm import run_replicates
from .kernels import validate_assumptions
from .meanfield import MeanFieldTrajectory, q_at

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_EXTINCTION = 0, 2, 3, 4


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    """17 significant digits, so reruns are byte-identical and values round-trip."""
    return format(float(x), ".17g")


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with floats in ``.17g``; non-finite floats become strings."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{k}": {to_json(v, indent + 1)}' for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + ", ".join(to_json(v, indent + 1) for v in seq) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else f'"{float(obj)}"'
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_json(path: Path, obj) -> None:
    path.write_text(to_json(obj) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


# -------------------------------------------------------------- commands


def _grid(cfg, block):
    g = dict(block.get("grid", {}))
    return cov.make_grid(
        cfg.params,
        r_max=g.get("r_max"),
        r_min=g.get("r_min", 1e-6),
        order=int(g.get("order", 16)),
        level=int(g.get("level", 2)),
    )


def _require_valid(cfg):
    report = validate_assumptions(cfg.params)
    if not report.all_passed:
        raise AssumptionViolationError("assumptions failed: " + ", ".join(
            f"{k} (margin {report.checks[k].margin:.6g})" for k in report.failed()
        ))
    return report


def cmd_validate(cfg, out: Path | None, args) -> int:
    report = validate_assumptions(cfg.params)
    for name, check in report.checks.items():
        status = "pass" if check.passed else "FAIL"
        print(f"{name}: {status} margin={fmt(check.margin)} {check.detail}")
    if out:
        write_json(out / "validation.json", {"all_passed": report.all_passed, "checks": report.to_dict()})
    return EXIT_OK if report.all_passed else EXIT_VALIDATION


def _output_times(block):
    t_end = float(block.get("t_end", 40.0))
    if t_end < 0:
        raise ConfigError("evolve.t_end must be nonnegative")
    if "times" in block:
        times = sorted(float(t) for t in block["times"])
        if times and (times[0] < 0 or times[-1] > t_end):
            raise ConfigError("evolve.times must lie in [0, t_end]")
        return sorted(set([0.0] + times + [t_end]))
    dt = float(block.get("dt", 1.0))
    if dt <= 0:
        raise ConfigError("evolve.dt must be positive")
    n = int(math.floor(t_end / dt + 1e-9))
    times = [k * dt for k in range(n + 1)]
    if t_end - times[-1] > 1e-12:
        times.append(t_end)
    return times


def cmd_evolve(cfg, out: Path, args) -> int:
    _require_valid(cfg)
    block = cfg.block("evolve")
    traj = MeanFieldTrajectory(cfg.params, block.get("q0"))
    grid = _grid(cfg, block)
    times = _output_times(block)
    backend = args.backend or cfg.backend
    states = cov.evolve_path(cov.initial_state(grid), traj, times, grid, backend)
    indices = block.get("indices")
    if indices is None:
        indices = sorted(set(np.linspace(0, grid.size - 1, 8).astype(int).tolist()))
    cov.write_trajectory_csv(out / "trajectory.csv", states, indices)
    write_csv(out / "meanfield.csv", ["t", "q_t"], [(t, float(q_at(traj, t))) for t in times])
    (out / "grid.json").write_text(to_json(grid.manifest()) + "\n")
    pts = grid.points if grid.dim > 1 else grid.points[:, 0]
    g_star = cov.stationary_g_hat(cfg.params, pts)
    final = states[-1]
    write_json(
        out / "evolve.json",
        {
            "backend": backend,
            "t_end": final.t,
            "q0": traj.q0,
            "q_t_end": float(q_at(traj, final.t)),
            "p_t_end": final.p,
            "p_star": cov.stationary_p(cfg.params),
            "sup_g_hat_minus_stationary": float(np.max(np.abs(final.g_hat - g_star))),
            "grid_size": grid.size,
            "indices": list(indices),
        },
    )
    return EXIT_OK


def cmd_stationary(cfg, out: Path, args) -> int:
    _require_valid(cfg)
    block = cfg.block("stationary")
    grid = _grid(cfg, block)
    pts = grid.points if grid.dim > 1 else grid.points[:, 0]
    pair = cov.stationary_pair(cfg.params, grid)
    bound = cfg.params.mortality / cfg.params.kappa_minus
    x_max = float(block.get("x_max", min(5.0 * max(1.0, grid.dim), 0.9 * cov.resolution_limit(grid))))
    n_x = int(block.get("n_x", 51))
    xs = np.linspace(0.0, x_max, n_x)
    xq = xs if grid.dim == 1 else np.column_stack([xs] + [np.zeros_like(xs)] * (grid.dim - 1))
    g_star = cov.inverse_transform_g(pair, xq)
    g0 = float(cov.stationary_g_hat(cfg.params, np.zeros(grid.dim) if grid.dim > 1 else 0.0))
    rows = [(0, 0.0, 0.0, g0, True)]
    for i, (r, w, g) in enumerate(zip(grid.radii, grid.weights, pair.g_hat_star), start=1):
        rows.append((i, float(r), float(w), float(g), bool(abs(g) <= bound + 1e-12)))
    write_csv(out / "g_hat_star.csv", ["index", "radius", "weight", "g_hat_star", "within_bound"],
              [(i, r, w, g, str(ok).lower()) for i, r, w, g, ok in rows])
    write_csv(out / "g_star.csv", ["x", "g_star"], zip(xs.tolist(), np.asarray(g_star, dtype=float).tolist()))
    (out / "grid.json").write_text(to_json(grid.manifest()) + "\n")
    write_json(
        out / "stationary.json",
        {
            "q_star": cfg.params.q_star,
            "p_star": pair.p_star,
            "g_hat_star_at_0": g0,
            "m_over_kappa_minus": bound,
            "max_abs_g_hat_star": float(np.max(np.abs(pair.g_hat_star))),
            "bound_holds": bool(np.max(np.abs(pair.g_hat_star)) <= bound + 1e-12),
            "g_star_at_0": float(g_star[0]),
        },
    )
    return EXIT_OK


def cmd_critical(cfg, out: Path, args) -> int:
    _require_valid(cfg)
    block = cfg.block("critical")
    if "eps" in block:
        eps_list = [float(e) for e in block["eps"]]
    else:
        eps_list = crit.eps_sweep(float(block.get("eps0", 0.2)), int(block.get("n", 4)))
    if any(e <= 0 for e in eps_list):
        raise ConfigError("critical.eps values must be positive")
    consts = crit.asymptotic_constants(cfg.params)
    rows = crit.asymptotics_table(cfg.params, eps_list, workers=args.threads or cfg.threads)
    crit.write_table_csv(out / "asymptotics.csv", rows, cfg.dim)
    verdict = crit.ratio_verdict(rows)
    ok_rows = [r for r in rows if not r.error]
    summary = {
        "dimension": cfg.dim,
        "constants": {k: v for k, v in vars(consts).items() if v is not None and k != "dim"},
        "monotone_toward_one": verdict["monotone_toward_one"],
        "final_ratio": verdict["final_ratio"],
        "max_abs_residual": max((abs(r.residual) for r in ok_rows), default=math.nan),
        "flagged_rows": [r.eps for r in rows if r.error or r.out_of_range],
        "errors": {fmt(r.eps): r.error for r in rows if r.error},
    }
    write_json(out / "critical.json", summary)
    if not ok_rows:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(cfg, out: Path, args) -> int:
    block = cfg.block("simulate")
    params = cfg.params
    eps = float(block.get("eps", 0.2))
    side = float(block.get("L", 500.0))
    t_end = float(block.get("t_end", 60.0))
    reps = int(block.get("replicates", 64))
    seed = cfg.seed if args.seed is None else args.seed
    q0 = block.get("q0")
    bins = int(block.get("bins", 20))
    edges = None
    if "r_max" in block:
        edges = np.linspace(0.0, float(block["r_max"]), bins + 1)
    else:
        from .ibm.estimators import default_edges

        edges = default_edges(params, eps, side, bins)
    est, results = run_replicates(
        params, eps, side, t_end, reps, seed, q0=q0, edges=edges,
        workers=args.threads or cfg.threads, return_results=True,
        record_every=block.get("record_every", 1.0), keep_positions=bool(block.get("save_points", False)),
    )
    summary = est.to_dict()
    summary.update({"seed": seed, "q0": q0 if q0 is not None else 0.5 * params.q_star})
    if params.q_star > 0:
        try:
            p_star = cov.stationary_p(params)
            predicted = params.q_star + eps**params.dim * p_star
            summary["predicted_density"] = predicted
            summary["p_star"] = p_star
            z = (est.density - predicted) / est.density_se if est.density_se > 0 else math.inf
            summary["z_score"] = z
            summary["within_3_se"] = bool(abs(z) <= 3)
        except SpatialLogisticError as exc:
            summary["prediction_error"] = str(exc)
    write_json(out / "density.json", summary)
    rows = [(r.replicate, float(t), n) for r in results for t, n in r.trajectory]
    write_csv(out / "population.csv", ["replicate", "t", "population"], rows)
    if block.get("save_points"):
        header = ["replicate"] + [f"x{i}" for i in range(params.dim)]
        write_csv(
            out / "points.csv", header,
            [(r.replicate, *map(float, p)) for r in results for p in r.positions],
        )
    return EXIT_EXTINCTION if est.extinction_dominated else EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "evolve": cmd_evolve,
    "stationary": cmd_stationary,
    "critical": cmd_critical,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spatial-logistic", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: out)")
    p.add_argument("--backend", choices=cov.BACKENDS, default=None, help="time integrator for evolve")
    p.add_argument("--threads", type=int, default=None, help="worker count for critical and simulate")
    p.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed for simulate")
    return p


def main(argv=None) -> int:
    from .config import load_config

    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(args.config)
        out = args.out
        if out is None and args.command != "validate":
            out = Path("out")
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, AssumptionViolationError, InvalidParameterError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SpatialLogisticError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
