"""INI run configuration.

Grammar (``#`` or ``;`` start comments; keys outside these sets are errors)::

    [problem]
    kind = paper1d | cournot | affine_vi | zero
    # paper1d:   n_bifunctions, n_maps, xi (comma list, optional)
    # cournot:   alpha, beta, lower, upper (comma lists), tax_quadratic, tax_linear,
    #            fee_quadratic, fee_linear, fee_absolute, prox_scale, solution
    # affine_vi: matrices (JSON list of square matrices), lower, upper, solution,
    #            normal_offsets (JSON), lipschitz
    # zero:      dim, n_bifunctions, n_maps, lower, upper
    x0 = comma list (optional)

    [solver]
    algorithm = mann | halpern | averaged | equilibrium_only | vi
    rho = float            (default 0.8 of the step bound)
    alpha = harmonic | harmonic:OFFSET | constant:VALUE | power:P | geometric:RATIO
    weights = uniform | comma list of M+1 constants
    tol_step, max_iter, workers, trace_every,
    prox_max_iters, prox_tol, projection_max_sweeps, projection_tol

    [output]
    trace, summary, bench_csv, bench_text   (paths, relative to the config file)

    [bench]
    repeats = 3
    workers = 1, 2
    tolerances = 1e-5, 1e-6, 1e-8

The environment variable ``EQUIHYBRID_WORKERS`` overrides ``[solver] workers``.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (ConfigurationError, ConstantSchedule, FeasibleSet, GeometricSchedule, HarmonicSchedule,
                   InnerBudget, PowerSchedule, ProblemInstance, ProjectionBudget, SolverConfig)
from .problems import (AffineVIFamily, CournotSpec, Paper1DSpec, make_affine_vi, make_cournot,
                       make_paper_1d, zero_problem)

WORKERS_ENV = "EQUIHYBRID_WORKERS"
ALGORITHMS = ("mann", "halpern", "averaged", "equilibrium_only", "vi")

PROBLEM_KEYS = {
    "paper1d": {"n_bifunctions", "n_maps", "xi"},
    "cournot": {"alpha", "beta", "lower", "upper", "tax_quadratic", "tax_linear", "fee_quadratic",
                "fee_linear", "fee_absolute", "prox_scale", "solution"},
    "affine_vi": {"matrices", "lower", "upper", "solution", "normal_offsets", "lipschitz"},
    "zero": {"dim", "n_bifunctions", "n_maps", "lower", "upper"},
}
SOLVER_KEYS = {"algorithm", "rho", "alpha", "weights", "tol_step", "max_iter", "workers",
               "trace_every", "prox_max_iters", "prox_tol", "projection_max_sweeps", "projection_tol"}
OUTPUT_KEYS = {"trace", "summary", "bench_csv", "bench_text"}
BENCH_KEYS = {"repeats", "workers", "tolerances"}


@dataclass
class RunConfig:
    problem: ProblemInstance
    algorithm: str
    solver: SolverConfig
    vi: Optional[AffineVIFamily] = None
    outputs: dict[str, Path] = field(default_factory=dict)
    bench_repeats: int = 3
    bench_workers: tuple[int, ...] = (1, 2)
    bench_tolerances: tuple[float, ...] = (1e-5, 1e-6, 1e-8)
    source: Optional[Path] = None

    def with_workers(self, workers: int) -> "RunConfig":
        return replace(self, solver=replace(self.solver, workers=workers))


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad number list {text!r}") from exc


def _float(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return float(sec[key])
    except ValueError as exc:
        raise ConfigurationError(f"{key} must be a number, got {sec[key]!r}") from exc


def _int(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return int(sec[key])
    except ValueError as exc:
        raise ConfigurationError(f"{key} must be an integer, got {sec[key]!r}") from exc


def _json(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return json.loads(sec[key])
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{key} must be JSON: {exc}") from exc


def parse_alpha(text: str):
    name, _, arg = text.strip().partition(":")
    try:
        if name == "harmonic":
            return HarmonicSchedule(float(arg) if arg else 1.0)
        if name == "constant":
            return ConstantSchedule(float(arg))
        if name == "power":
            return PowerSchedule(float(arg))
        if name == "geometric":
            return GeometricSchedule(float(arg))
    except ValueError as exc:
        raise ConfigurationError(f"bad alpha schedule {text!r}") from exc
    raise ConfigurationError(f"unknown alpha schedule {text!r}")


def _reject_unknown(sec, allowed, where):
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown keys in [{where}]: {', '.join(extra)}")


def _build_problem(sec) -> tuple[ProblemInstance, Optional[AffineVIFamily]]:
    kind = sec.get("kind")
    if kind not in PROBLEM_KEYS:
        raise ConfigurationError(f"[problem] kind must be one of {sorted(PROBLEM_KEYS)}, got {kind!r}")
    _reject_unknown(sec, PROBLEM_KEYS[kind] | {"kind", "x0"}, "problem")
    x0 = _floats(sec["x0"]) if "x0" in sec else None

    if kind == "paper1d":
        xi = _floats(sec["xi"]) if "xi" in sec else None
        spec = Paper1DSpec(_int(sec, "n_bifunctions", 100), _int(sec, "n_maps", 100), xi,
                           x0[0] if x0 else 1.0)
        return make_paper_1d(spec), None
    if kind == "cournot":
        try:
            spec = CournotSpec(
                alpha=_floats(sec["alpha"]), beta=_floats(sec["beta"]),
                lower=_floats(sec["lower"]), upper=_floats(sec["upper"]),
                **{k: _floats(sec[k]) for k in ("tax_quadratic", "tax_linear", "fee_quadratic",
                                                  "fee_linear", "fee_absolute") if k in sec},
                prox_scale=_float(sec, "prox_scale", 1.0), x0=x0,
                known_solution=_floats(sec["solution"]) if "solution" in sec else None)
        except KeyError as exc:
            raise ConfigurationError(f"[problem] cournot needs key {exc.args[0]}") from exc
        return make_cournot(spec), None
    if kind == "affine_vi":
        mats = _json(sec, "matrices")
        if not mats:
            raise ConfigurationError("[problem] affine_vi needs matrices")
        d = len(mats[0])
        C = FeasibleSet.box(_floats(sec["lower"]), _floats(sec["upper"])) if "lower" in sec \
            else FeasibleSet.whole_space(d)
        if "solution" not in sec:
            raise ConfigurationError("[problem] affine_vi needs a solution")
        fam = make_affine_vi(mats, C, _floats(sec["solution"]), _json(sec, "normal_offsets"),
                             _float(sec, "lipschitz"), x0)
        return fam.as_problem(), fam
    dim = _int(sec, "dim", 1)
    C = FeasibleSet.box(_floats(sec["lower"]), _floats(sec["upper"])) if "lower" in sec \
        else FeasibleSet.whole_space(dim)
    return zero_problem(dim, _int(sec, "n_bifunctions", 1), _int(sec, "n_maps", 1), C, x0), None


def load_config(path, env=None) -> RunConfig:
    """Parse and validate an INI run configuration; raises :class:`ConfigurationError`."""
    env = os.environ if env is None else env
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    unknown = set(cp.sections()) - {"problem", "solver", "output", "bench"}
    if unknown:
        raise ConfigurationError(f"unknown sections: {', '.join(sorted(unknown))}")
    if "problem" not in cp:
        raise ConfigurationError("config needs a [problem] section")
    problem, vi = _build_problem(cp["problem"])

    sol = cp["solver"] if "solver" in cp else {}
    _reject_unknown(sol, SOLVER_KEYS, "solver")
    algorithm = sol.get("algorithm", "mann")
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
    if algorithm == "vi" and vi is None:
        raise ConfigurationError("algorithm vi needs an affine_vi problem")

    weights = None
    if "weights" in sol and sol["weights"].strip() != "uniform":
        w = np.array(_floats(sol["weights"]))
        w.setflags(write=False)
        weights = lambda n, w=w: w  # noqa: E731
    workers = _int(sol, "workers", 1)
    if env.get(WORKERS_ENV):
        try:
            workers = int(env[WORKERS_ENV])
        except ValueError as exc:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer") from exc
    solver = SolverConfig(
        rho=_float(sol, "rho"),
        alpha_schedule=parse_alpha(sol.get("alpha", "harmonic")),
        weight_schedule=weights,
        tol_step=_float(sol, "tol_step", 1e-6),
        max_iter=_int(sol, "max_iter", 1000),
        workers=workers,
        prox_inner=InnerBudget(_int(sol, "prox_max_iters", 500), _float(sol, "prox_tol", 1e-10)),
        projection_inner=ProjectionBudget(_int(sol, "projection_max_sweeps", 10000),
                                          _float(sol, "projection_tol", 1e-12)),
        trace_every=_int(sol, "trace_every", 1),
    )

    out = cp["output"] if "output" in cp else {}
    _reject_unknown(out, OUTPUT_KEYS, "output")
    base = path.parent
    outputs = {k: (base / v) for k, v in out.items()}

    bench = cp["bench"] if "bench" in cp else {}
    _reject_unknown(bench, BENCH_KEYS, "bench")
    bw = tuple(int(w) for w in _floats(bench["workers"])) if "workers" in bench else (1, 2)
    tols = tuple(_floats(bench["tolerances"])) if "tolerances" in bench else (1e-5, 1e-6, 1e-8)
    repeats = _int(bench, "repeats", 3)
    if repeats < 1 or any(w < 1 for w in bw):
        raise ConfigurationError("bench repeats and workers must be positive")
    return RunConfig(problem, algorithm, solver, vi, outputs, repeats, bw, tols, path)
