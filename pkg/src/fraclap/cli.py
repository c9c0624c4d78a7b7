"""Command-line driver: ``fraclap {evaluate,solve,verify,sweep}``.

Exit codes: 0 all checks pass, 1 a check failed, 2 invalid configuration or
a violated precondition.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .config import CHECK_NAMES, SWEEP_AXES, ExperimentConfig, load_config
from .domains import Ball, Interval
from .errors import CheckFailed, ConfigInvalid, FracLapError
from .grid import FLOAT_FMT, Grid, GridFunction, write_csv
from .kernel import ClosedFormFunction
from .pointwise import delta_s_boundedness_scan, evaluate_op
from .presets import build_preset, interval_as_ball
from .solver import DirichletProblem, solve_dirichlet

log = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
# sweep axes whose values are always written as floats
REAL_AXES = ("s", "p", "r")


@dataclass
class RunResult:
    status: int
    out_dir: Path
    reports: list = field(default_factory=list)
    solution: Optional[GridFunction] = None
    headline: dict = field(default_factory=dict)


def _write_lines(path: Path, lines: Sequence[str]):
    path.write_text("\n".join(lines) + "\n")


def _nodal(fn: ClosedFormFunction, pts: np.ndarray) -> np.ndarray:
    return np.asarray(fn(pts), dtype=float)


def build_problem(cfg: ExperimentConfig, problem_spec: Optional[dict] = None,
                  grid: Optional[Grid] = None) -> DirichletProblem:
    if grid is None:
        grid = Grid.build(cfg.domain, cfg.nodes, collar_factor=cfg.collar_factor,
                          far_field=cfg.far_field)
    spec = cfg.problem if problem_spec is None else problem_spec
    fns = [build_preset(spec.get(k, 0.0), cfg.params, cfg.domain) for k in ("f", "g", "c")]
    pts_i = grid.points[grid.interior]
    pts_c = grid.points[~grid.interior]
    return DirichletProblem(grid, _nodal(fns[0], pts_i), _nodal(fns[1], pts_c),
                            _nodal(fns[2], pts_i))


def _as_ball(domain):
    if isinstance(domain, Interval):
        return interval_as_ball(domain)
    if isinstance(domain, Ball):
        return domain
    c = np.asarray(domain.center)
    return Ball(tuple(c.tolist()), domain.inradius)


def _ray_directions(dim: int, n: int = 8):
    if dim == 1:
        return [[1.0], [-1.0]]
    t = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)]).tolist()


# --------------------------------------------------------------------------
# checks


def _run_check(name: str, u: GridFunction, problem: DirichletProblem,
               cfg: ExperimentConfig) -> harness.VerificationReport:
    opts = dict(cfg.check_options.get(name) or {})
    P, dom = cfg.params, cfg.domain
    center = np.asarray(dom.center, dtype=float)
    rin = dom.inradius
    if name == "comparison":
        companion = opts.pop("v", {"f": 0.0, "g": 0.0, "c": 0.0})
        vprob = build_problem(cfg, companion, problem.grid)
        v = solve_dirichlet(vprob, P, cfg.solver)
        return harness.check_comparison(u, v, problem, P, **opts)
    if name == "min_principle":
        return harness.check_min_principle(u, problem, P, **opts)
    if name == "hopf":
        ball = _ball_option(opts.pop("ball", None), dom)
        dirs = opts.pop("directions", _ray_directions(P.dim))
        n = int(opts.pop("n_points", 16))
        return harness.hopf_ratio_profile(u, ball, dirs, n, P, **opts)
    if name == "holder":
        band = float(opts.pop("band", 0.1 * rin))
        return harness.estimate_holder_exponent(u, dom, band, P.s, **opts)
    if name == "log_lemma":
        e1 = np.zeros(P.dim)
        e1[0] = 1.0
        x0 = opts.pop("x0", (center + 0.3 * rin * e1).tolist())
        R = float(opts.pop("R", 0.6 * rin))
        r = float(opts.pop("r", 0.15 * rin))
        h = opts.pop("h", [0.5, 0.1, 0.01])
        return harness.check_log_lemma(u, x0, R, r, h, problem.c, P, **opts)
    if name == "barrier":
        ball = _ball_option(opts.pop("ball", None), dom)
        rho = float(opts.pop("rho", 0.2 * ball.radius))
        K = _ball_option(opts.pop("K", {"center": list(ball.center),
                                        "radius": 0.2 * ball.radius}), dom)
        _, rep = harness.construct_hopf_barrier(ball, K, u, problem.c, rho, P, cfg.quad, **opts)
        return rep
    if name == "viscosity":
        for key in ("x_star", "eps", "beta", "r"):
            if key not in opts:
                raise ConfigInvalid(f"check_options.viscosity.{key}", "missing")
        return harness.viscosity_touch_test(u, opts.pop("x_star"), float(opts.pop("eps")),
                                            float(opts.pop("beta")), float(opts.pop("r")),
                                            P, cfg.quad, **opts)
    if name == "energy_minimality":
        return harness.check_energy_minimality(u, problem, P, cfg.seed, **opts)
    if name == "delta_s_scan":
        width = float(opts.pop("strip_width", 0.2 * rin))
        n = int(opts.pop("n_samples", 50))
        scan = delta_s_boundedness_scan(dom, width, n, P, cfg.quad)
        rows = [dict(delta=float(d), value=float(v), error=float(e))
                for d, v, e in zip(scan.delta, scan.values, scan.errors)]
        return harness.VerificationReport(
            "delta_s_scan", "pass" if scan.bounded else "fail",
            dict(max_abs=scan.max_abs, median_abs=scan.median_abs, samples=len(rows)),
            10.0, "operator of delta^s on the boundary strip", rows)
    raise ConfigInvalid("checks", f"unknown check {name!r}")


def _ball_option(spec, domain) -> Ball:
    if spec is None:
        return _as_ball(domain)
    if not isinstance(spec, dict) or "radius" not in spec:
        raise ConfigInvalid("check_options", "ball needs center and radius")
    centre = np.atleast_1d(np.asarray(spec.get("center", domain.center), dtype=float))
    return Ball(tuple(centre.tolist()), float(spec["radius"]))


# --------------------------------------------------------------------------
# pipelines


def _manifest(cfg: ExperimentConfig, grid: Optional[Grid], files: list, extra=None) -> str:
    data = {
        "config_hash": cfg.content_hash(),
        "config": cfg.raw,
        "params": {"s": cfg.params.s, "p": cfg.params.p, "dim": cfg.params.dim},
        "seed": cfg.seed,
        "files": sorted(files),
    }
    if grid is not None:
        data["grid"] = {"spacing": FLOAT_FMT % grid.spacing, "nodes": grid.size,
                        "interior_nodes": int(grid.interior.sum()),
                        "collar_radius": FLOAT_FMT % grid.collar_radius,
                        "far_field": grid.far_field}
    if extra:
        data.update(extra)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None, checks: Optional[Sequence[str]] = None,
                   solve_only: bool = False) -> RunResult:
    """Solve the configured problem, run the requested checks and write
    ``solution.csv``, one ``report_<check>.csv`` per check (plus
    ``table_<check>.csv`` where a profile is produced), ``summary.txt`` and
    ``manifest.json`` into ``out_dir``.

    Raises
    ------
    CheckFailed
        after all artifacts are written, if a check did not pass.
    """
    out = Path(out_dir or cfg.output or "out")
    out.mkdir(parents=True, exist_ok=True)
    checks = tuple(cfg.checks if checks is None else checks)
    for name in checks:
        if name not in CHECK_NAMES:
            raise ConfigInvalid("checks", f"unknown check {name!r}")
    problem = build_problem(cfg)
    u = solve_dirichlet(problem, cfg.params, cfg.solver)
    write_csv(u, out / "solution.csv", cfg.params)
    files = ["solution.csv", "solution.meta"]
    reports = []
    if not solve_only:
        for name in checks:
            rep = _run_check(name, u, problem, cfg)
            reports.append(rep)
            _write_lines(out / f"report_{name}.csv", rep.csv_lines())
            files.append(f"report_{name}.csv")
            if rep.table:
                _write_lines(out / f"table_{name}.csv", rep.table_lines())
                files.append(f"table_{name}.csv")
    mid = float(u.interpolate(np.asarray(cfg.domain.center, dtype=float)[None, :])[0])
    headline = {"mid_value": mid}
    for rep in reports:
        for k, v in rep.measured.items():
            if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool):
                headline[f"{rep.check_name}.{k}"] = float(v)
        headline[f"{rep.check_name}.status"] = rep.status
    summary = [f"config {cfg.content_hash()}  s={cfg.params.s:g} p={cfg.params.p:g} "
               f"dim={cfg.params.dim}", f"mid_value={FLOAT_FMT % mid}"]
    summary += [rep.summary() for rep in reports]
    _write_lines(out / "summary.txt", summary)
    files.append("summary.txt")
    (out / "manifest.json").write_text(_manifest(cfg, u.grid, files + ["manifest.json"]))
    status = EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL
    result = RunResult(status, out, reports, u, headline)
    if status != EXIT_PASS:
        failed = [r.check_name for r in reports if not r.passed]
        raise CheckFailed(f"checks not passed: {', '.join(failed)}", result)
    return result


def run_evaluate(cfg: ExperimentConfig, out_dir=None) -> Path:
    if cfg.evaluate is None:
        raise ConfigInvalid("evaluate", "missing")
    out = Path(out_dir or cfg.output or "out")
    out.mkdir(parents=True, exist_ok=True)
    fn = build_preset(cfg.evaluate["function"], cfg.params, cfg.domain)
    cols = ["x", "y"][: cfg.params.dim]
    lines = [",".join(cols + ["value", "error", "levels"])]
    for pt in cfg.evaluate["points"]:
        x = np.atleast_1d(np.asarray(pt, dtype=float))
        if x.size != cfg.params.dim:
            raise ConfigInvalid("evaluate.points", f"point {pt} has wrong dimension")
        est = evaluate_op(fn, x, cfg.params, cfg.quad)
        lines.append(",".join([FLOAT_FMT % c for c in x]
                              + [FLOAT_FMT % est.value, FLOAT_FMT % est.error, str(est.levels)]))
    _write_lines(out / "evaluate.csv", lines)
    (out / "manifest.json").write_text(
        _manifest(cfg, None, ["evaluate.csv", "manifest.json"]))
    return out / "evaluate.csv"


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence, out_dir=None,
          checks: Optional[Sequence[str]] = None) -> list:
    """Run :func:`run_experiment` once per value of ``axis`` and write
    ``summary.csv`` (one row per value, in input order).  Failed runs are
    marked in the ``status`` column and the sweep continues."""
    if axis not in SWEEP_AXES:
        raise ConfigInvalid("sweep.axis", f"must be one of {sorted(SWEEP_AXES)}")
    out = Path(out_dir or cfg.output or "out")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    if axis in REAL_AXES:
        values = [float(v) if isinstance(v, int) and not isinstance(v, bool) else v
                  for v in values]
    for k, value in enumerate(values):
        sub = out / f"{axis}_{k:03d}"
        row = {"axis": axis, "value": value}
        try:
            run_cfg = cfg.with_override(SWEEP_AXES[axis], value)
            res = run_experiment(run_cfg, sub, checks)
            row.update(status="pass", exit=EXIT_PASS, **res.headline)
        except CheckFailed as exc:
            res = exc.result
            row.update(status="fail", exit=EXIT_FAIL, **res.headline)
        except FracLapError as exc:
            row.update(status="error", exit=EXIT_ERROR, message=str(exc).replace(",", ";"))
        rows.append(row)
    keys = ["axis", "value", "status", "exit"]
    for row in rows:
        keys += [k for k in row if k not in keys]
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row.get(key)) for key in keys))
    _write_lines(out / "summary.csv", lines)
    return rows


# --------------------------------------------------------------------------
# argument parsing


def _parse_values(text: str):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(int(tok))
        except ValueError:
            try:
                vals.append(float(tok))
            except ValueError:
                raise ConfigInvalid("--values", f"not a number: {tok!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("evaluate", "pointwise operator at configured points"),
                       ("solve", "solve the configured Dirichlet problem"),
                       ("verify", "solve and run the requested checks"),
                       ("sweep", "repeat verify over an axis of values")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--check", action="append", default=None, choices=CHECK_NAMES,
                       help="check to run (repeatable); overrides the config list")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--axis", choices=sorted(SWEEP_AXES), default=None)
            p.add_argument("--values", default=None, help="comma-separated list")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_override(("seed",), args.seed)
        if args.command == "evaluate":
            path = run_evaluate(cfg, args.out)
            print(path)
            return EXIT_PASS
        if args.command == "solve":
            res = run_experiment(cfg, args.out, solve_only=True)
            print(res.out_dir / "solution.csv")
            return EXIT_PASS
        if args.command == "verify":
            res = run_experiment(cfg, args.out, args.check)
            for rep in res.reports:
                print(rep.summary())
            return EXIT_PASS
        axis = args.axis or (cfg.sweep or {}).get("axis")
        if axis is None:
            raise ConfigInvalid("sweep.axis", "missing (use --axis or the sweep section)")
        values = (_parse_values(args.values) if args.values is not None
                  else list((cfg.sweep or {}).get("values", [])))
        rows = sweep(cfg, axis, values, args.out, args.check)
        for row in rows:
            print(f"{axis}={row['value']}: {row['status']}")
        return EXIT_PASS if all(r["status"] == "pass" for r in rows) else EXIT_FAIL
    except CheckFailed as exc:
        res = exc.result
        if res is not None:
            for rep in res.reports:
                print(rep.summary())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except FracLapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
