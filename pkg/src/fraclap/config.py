"""Experiment configuration (YAML).

Schema, with defaults::

    params:  {s: 0.5, p: 2.0, dim: 1}                 # required
    domain:  {type: interval, a: -1, b: 1}            # or ball / rectangle
    grid:    {nodes: 201, collar_factor: 2.0, far_field: true}
    problem: {f: 0.0, g: 0.0, c: 0.0}                 # number or {preset: NAME, ...}
    solver:  {grad_tol: null, max_iter: 10000}
    quad:    {...}                                    # QuadConfig fields
    checks:  [min_principle, hopf, holder]
    check_options: {hopf: {n_points: 16}, ...}        # per-check keyword overrides
    evaluate: {function: {preset: bump}, points: [[0.0], [0.5]]}
    sweep:   {axis: s, values: [0.25, 0.5, 0.75]}
    seed:    0
    output:  out

Preset names are listed in :data:`fraclap.presets.PRESETS`; check names in
:data:`CHECK_NAMES`.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from .domains import Domain, domain_from_spec
from .errors import ConfigInvalid
from .kernel import FracParams
from .presets import PRESETS, build_preset
from .quadrature import QuadConfig
from .solver import SolverOpts

CHECK_NAMES = ("comparison", "min_principle", "hopf", "log_lemma", "barrier",
               "viscosity", "holder", "energy_minimality", "delta_s_scan")
SWEEP_AXES = {"s": ("params", "s"), "p": ("params", "p"), "nodes": ("grid", "nodes"),
              "r": ("check_options", "log_lemma", "r"), "h": ("check_options", "log_lemma", "h")}
TOP_KEYS = {"params", "domain", "grid", "problem", "solver", "quad", "checks",
            "check_options", "evaluate", "sweep", "seed", "output"}
GRID_KEYS = {"nodes", "collar_factor", "far_field"}
PROBLEM_KEYS = {"f", "g", "c"}
SOLVER_KEYS = {"grad_tol", "max_iter"}


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    params: FracParams
    domain: Domain
    nodes: Optional[int]
    collar_factor: float
    far_field: bool
    problem: dict
    solver: SolverOpts
    quad: QuadConfig
    checks: tuple
    check_options: dict
    evaluate: Optional[dict]
    sweep: Optional[dict]
    seed: int
    output: Optional[str]

    def content_hash(self) -> str:
        return content_hash(self.raw)

    def with_override(self, path: tuple, value) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        node = raw
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigInvalid(".".join(path), "cannot override a non-mapping")
        node[path[-1]] = value
        return parse_config(raw)

    def functions(self):
        """``(f, g, c)`` as closed-form functions."""
        out = []
        for key in ("f", "g", "c"):
            out.append(build_preset(self.problem.get(key, 0.0), self.params, self.domain))
        return tuple(out)


def canonical(raw: dict) -> bytes:
    return json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()


def content_hash(raw: dict) -> str:
    """Git blob hash (SHA-1 over ``blob <len>\\0<data>``) of the canonical
    JSON form; the output location is not part of the content."""
    body = {k: v for k, v in raw.items() if k != "output"}
    data = canonical(body)
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _require_mapping(raw, name) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigInvalid(name, "expected a mapping")
    return raw


def _no_extra(raw: dict, allowed: set, name: str):
    extra = sorted(set(raw) - allowed)
    if extra:
        raise ConfigInvalid(f"{name}.{extra[0]}" if name else extra[0], "unknown key")


def _check_function_spec(spec, name):
    if isinstance(spec, bool) or not isinstance(spec, (int, float, dict)):
        raise ConfigInvalid(name, "expected a number or {preset: NAME, ...}")
    if isinstance(spec, dict) and spec.get("preset") not in PRESETS:
        raise ConfigInvalid(name, f"unknown preset {spec.get('preset')!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    raw = _require_mapping(raw, "config")
    _no_extra(raw, TOP_KEYS, "")
    raw = copy.deepcopy(raw)

    pr = _require_mapping(raw.get("params"), "params")
    _no_extra(pr, {"s", "p", "dim"}, "params")
    for key in ("s", "p"):
        if key not in pr:
            raise ConfigInvalid(f"params.{key}", "missing")
    try:
        params = FracParams(float(pr["s"]), float(pr["p"]), int(pr.get("dim", 1)))
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        field = "params.s" if msg.startswith("s ") else (
            "params.p" if msg.startswith("p ") else "params.dim")
        raise ConfigInvalid(field, msg) from exc

    dspec = _require_mapping(raw.get("domain"), "domain") or {"type": "interval", "a": -1.0,
                                                             "b": 1.0}
    try:
        domain = domain_from_spec(dspec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid("domain", str(exc)) from exc
    if domain.dim != params.dim:
        raise ConfigInvalid("domain", f"dimension {domain.dim} != params.dim {params.dim}")

    gspec = _require_mapping(raw.get("grid"), "grid")
    _no_extra(gspec, GRID_KEYS, "grid")
    nodes = gspec.get("nodes")
    if nodes is not None and (not isinstance(nodes, int) or nodes < 3):
        raise ConfigInvalid("grid.nodes", "must be an integer >= 3")
    collar = float(gspec.get("collar_factor", 2.0))
    if collar < 1.0:
        raise ConfigInvalid("grid.collar_factor", "collar radius must be >= diam(domain)")

    prob = _require_mapping(raw.get("problem"), "problem")
    _no_extra(prob, PROBLEM_KEYS, "problem")
    for key, spec in prob.items():
        _check_function_spec(spec, f"problem.{key}")

    sspec = _require_mapping(raw.get("solver"), "solver")
    _no_extra(sspec, SOLVER_KEYS, "solver")
    solver = SolverOpts(grad_tol=sspec.get("grad_tol"),
                        max_iter=int(sspec.get("max_iter", 10_000)))

    qspec = _require_mapping(raw.get("quad"), "quad")
    _no_extra(qspec, {f.name for f in fields(QuadConfig)}, "quad")
    try:
        quad = QuadConfig(**qspec)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid("quad", str(exc)) from exc

    checks = raw.get("checks", []) or []
    if not isinstance(checks, list):
        raise ConfigInvalid("checks", "expected a list")
    for name in checks:
        if name not in CHECK_NAMES:
            raise ConfigInvalid("checks", f"unknown check {name!r}")
    opts = _require_mapping(raw.get("check_options"), "check_options")
    _no_extra(opts, set(CHECK_NAMES), "check_options")

    ev = raw.get("evaluate")
    if ev is not None:
        ev = _require_mapping(ev, "evaluate")
        _no_extra(ev, {"function", "points"}, "evaluate")
        _check_function_spec(ev.get("function"), "evaluate.function")
        if not isinstance(ev.get("points"), list):
            raise ConfigInvalid("evaluate.points", "expected a list of points")

    sw = raw.get("sweep")
    if sw is not None:
        sw = _require_mapping(sw, "sweep")
        _no_extra(sw, {"axis", "values"}, "sweep")
        if sw.get("axis") not in SWEEP_AXES:
            raise ConfigInvalid("sweep.axis", f"must be one of {sorted(SWEEP_AXES)}")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigInvalid("seed", "must be an integer")
    output = raw.get("output")

    return ExperimentConfig(raw, params, domain, nodes, collar, bool(gspec.get("far_field", True)),
                            prob, solver, quad, tuple(checks), opts, ev, sw, seed, output)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigInvalid("config", str(exc)) from exc
    return parse_config(raw)
