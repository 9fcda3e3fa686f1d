"""Parallel hybrid extragradient outer loops.

One driver implements the three methods; they differ only in how the
fixed-point stage mixes ``S_j(z_bar)`` into ``u`` and in the progress cut:

* ``mann``      u_j = a x_n + (1-a) S_j z_bar, farthest u_j, cut ||u - v|| <= ||x_n - v||
* ``halpern``   u_j = a x_0 + (1-a) S_j z_bar, farthest u_j, cut with the x_0 term
* ``averaged``  u = w_0 x_n + sum_j w_j S_j z_bar, same cut as ``mann``

With no maps the fixed-point stage is skipped and ``u = z_bar`` (``halpern``
uses the identity map instead so its cut keeps the anchor term).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (ConfigurationError, FeasibleSet, Point, ProblemInstance, SolverConfig,
                   as_point, check_weights, uniform_weights)
from .geometry import (HalfSpace, InfeasibleCutError, anchor_cut, halpern_cut, mann_cut,
                       project_intersection)
from .parallel import (ParallelPlan, WorkerPool, combine_farthest, local_farthest,
                       squared_distances)
from .prox import prox_step, vi_bifunction

EXACT_FIXED_POINT = 1e-14

STOP_REASONS = ("step_tol", "fixed_point_exact", "max_iter", "infeasible_cut")


@dataclass(frozen=True, eq=False)
class TraceRecord:
    """Diagnostics of iteration ``n`` (1-based), which maps ``x_prev`` to ``x``.

    Residuals are measured at ``x_prev``.  The per-family vectors are empty
    unless the solver ran with ``trace_detail``.
    """

    n: int
    x: Point
    step_residual: float
    u_residual: float
    max_z_residual: float
    max_y_residual: float
    max_fixed_point_residual: float
    dist_to_known: Optional[float]
    wall_time_ms: float
    x_prev: Point
    u_bar: Point
    z_bar: Point
    y_bar: Point
    alpha: float
    cuts: tuple[HalfSpace, ...]
    z_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    y_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    fixed_point_residuals: np.ndarray = field(default_factory=lambda: np.empty(0))

    def fingerprint(self) -> bytes:
        """Bytes of every deterministic field (wall time excluded)."""
        parts = [np.int64(self.n).tobytes()]
        for arr in (self.x, self.x_prev, self.u_bar, self.z_bar, self.y_bar,
                    self.z_residuals, self.y_residuals, self.fixed_point_residuals):
            parts.append(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        scalars = [self.step_residual, self.u_residual, self.max_z_residual, self.max_y_residual,
                   self.max_fixed_point_residual, self.alpha,
                   math.nan if self.dist_to_known is None else self.dist_to_known]
        parts.append(np.array(scalars, dtype=np.float64).tobytes())
        for h in self.cuts:
            parts.append(h.normal.tobytes() + np.float64(h.offset).tobytes())
        return b"".join(parts)


@dataclass(frozen=True, eq=False)
class SolveResult:
    solution: Point
    iterations: int
    stop_reason: str
    trace: tuple[TraceRecord, ...]
    algorithm: str
    rho: float
    elapsed_s: float
    warnings: tuple[str, ...] = ()

    def trace_fingerprint(self) -> bytes:
        return self.solution.tobytes() + b"".join(r.fingerprint() for r in self.trace)


# --------------------------------------------------------------------------
# per-family block kernels


def _pair_kernel(problem: ProblemInstance, rho: float, budget, detail: bool):
    bifs, C, d = problem.bifunctions, problem.C, problem.dim
    vectorised = getattr(bifs, "extragradient_block", None)

    def run(x: Point):
        def block(lo, hi):
            unconverged = 0
            if vectorised is not None:
                Y, Z = vectorised(lo, hi, x, rho, C, budget)
            else:
                Y = np.empty((hi - lo, d))
                Z = np.empty((hi - lo, d))
                for k, i in enumerate(range(lo, hi)):
                    ry = prox_step(bifs[i], x, rho, C, budget)
                    rz = prox_step(bifs[i], ry.y, rho, C, budget, anchor=x)
                    Y[k], Z[k] = ry.y, rz.y
                    unconverged += (not ry.converged) + (not rz.converged)
            sz = squared_distances(Z, x)
            sy = squared_distances(Y, x)
            best = local_farthest(sz, lo)
            k = best[1] - lo
            return (best, Y[k], Z[k], float(np.max(sy)),
                    np.sqrt(sz) if detail else None, np.sqrt(sy) if detail else None, unconverged)
        return block
    return run


def _map_rows(maps, lo, hi, v, d):
    vectorised = getattr(maps, "apply_block", None)
    if vectorised is not None:
        return vectorised(lo, hi, v)
    out = np.empty((hi - lo, d))
    for k, j in enumerate(range(lo, hi)):
        out[k] = maps[j].apply(v)
    return out


# --------------------------------------------------------------------------
# driver


def _check_start(problem: ProblemInstance, x0) -> Point:
    if x0 is None:
        x0 = problem.x0 if problem.x0 is not None else problem.C.project(np.zeros(problem.dim))
    x0 = as_point(x0, problem.dim)
    if not problem.C.contains(x0, 1e-12):
        raise ConfigurationError("start point must lie in C")
    return x0


def _alpha(cfg: SolverConfig, n: int) -> float:
    a = float(cfg.alpha_schedule(n))
    if not 0.0 < a < 1.0:
        raise ConfigurationError(f"alpha_{n} = {a!r} is outside (0, 1)")
    return a


def check_vanishing(schedule) -> None:
    """Reject schedules that do not tend to zero (Halpern precondition)."""
    flag = getattr(schedule, "vanishing", None)
    if flag is False:
        raise ConfigurationError(f"Halpern iteration needs alpha_n -> 0; {schedule!r} does not vanish")
    if flag is None:
        far, farther = float(schedule(10 ** 4)), float(schedule(10 ** 6))
        if not (farther <= 1e-2 and farther <= far):
            raise ConfigurationError("Halpern iteration needs alpha_n -> 0; schedule does not appear to vanish")


def _hybrid(problem: ProblemInstance, cfg: SolverConfig, variant: str, x0=None) -> SolveResult:
    rho = cfg.resolved_rho(problem)
    x0 = _check_start(problem, x0)
    C: FeasibleSet = problem.C
    N, M, d = problem.n_bifunctions, problem.n_maps, problem.dim
    known = problem.known_solution
    detail = cfg.trace_detail

    if variant == "halpern":
        check_vanishing(cfg.alpha_schedule)
    weights = None
    if variant == "averaged" and M > 0:
        weights = cfg.weight_schedule or uniform_weights(M)
        check_weights(weights(1), M)

    plan = ParallelPlan(cfg.workers)
    pairs = _pair_kernel(problem, rho, cfg.prox_inner, detail)
    maps = problem.maps
    empty = np.empty(0)

    trace: list[TraceRecord] = []
    notes: list[str] = []
    unconverged_total = 0
    x = x0
    stop_reason = "max_iter"
    iterations = 0

    with WorkerPool(plan) as pool:
        t0 = time.perf_counter()
        for n in range(1, cfg.max_iter + 1):
            alpha = _alpha(cfg, n)

            # extragradient pairs and the farthest corrector
            if N > 0:
                parts = pool.run_blocks(N, pairs(x))
                _, i_n = combine_farthest([p[0] for p in parts])
                win = next(p for p in parts if p[0][1] == i_n)
                y_bar, z_bar = win[1], win[2]
                max_y = math.sqrt(max(p[3] for p in parts))
                z_res = np.concatenate([p[4] for p in parts]) if detail else empty
                y_res = np.concatenate([p[5] for p in parts]) if detail else empty
                unconverged_total += sum(p[6] for p in parts)
            else:
                y_bar = z_bar = x
                max_y = 0.0
                z_res = y_res = empty
            max_z = float(np.linalg.norm(z_bar - x))

            # fixed-point stage
            if M > 0:
                if variant == "averaged":
                    def block(lo, hi, z_bar=z_bar, x=x):
                        SZ = _map_rows(maps, lo, hi, z_bar, d)
                        SX = _map_rows(maps, lo, hi, x, d)
                        return SZ, np.sqrt(squared_distances(SX, x))
                    parts = pool.run_blocks(M, block)
                    w = check_weights(weights(n), M)
                    SZ = np.concatenate([p[0] for p in parts])
                    u_bar = w[0] * x + np.sum(w[1:, None] * SZ, axis=0)
                else:
                    base = alpha * (x0 if variant == "halpern" else x)

                    def block(lo, hi, z_bar=z_bar, x=x, base=base):
                        U = base + (1.0 - alpha) * _map_rows(maps, lo, hi, z_bar, d)
                        best = local_farthest(squared_distances(U, x), lo)
                        SX = _map_rows(maps, lo, hi, x, d)
                        return best, U[best[1] - lo], np.sqrt(squared_distances(SX, x))
                    parts = pool.run_blocks(M, block)
                    _, j_n = combine_farthest([p[0] for p in parts])
                    u_bar = next(p[1] for p in parts if p[0][1] == j_n)
                fp_res = np.concatenate([p[-1] for p in parts])
                max_fp = float(np.max(fp_res))
                if not detail:
                    fp_res = empty
            else:
                u_bar = alpha * x0 + (1.0 - alpha) * z_bar if variant == "halpern" else z_bar
                max_fp, fp_res = 0.0, empty

            # hybrid cuts and projection of the anchor
            if variant == "halpern":
                progress = halpern_cut(x0, x, u_bar, alpha)
            else:
                progress = mann_cut(x, u_bar)
            cuts = (progress, anchor_cut(x0, x))
            try:
                x_next = project_intersection(C, cuts, x0, cfg.projection_inner)
            except InfeasibleCutError as exc:
                notes.append(f"iteration {n}: {exc}")
                stop_reason = "infeasible_cut"
                break

            iterations = n
            step = float(np.linalg.norm(x_next - x))
            u_res = float(np.linalg.norm(u_bar - x))
            if n % cfg.trace_every == 0 or n == cfg.max_iter:
                trace.append(TraceRecord(
                    n=n, x=x_next, step_residual=step, u_residual=u_res, max_z_residual=max_z,
                    max_y_residual=max_y, max_fixed_point_residual=max_fp,
                    dist_to_known=None if known is None else float(np.linalg.norm(x_next - known)),
                    wall_time_ms=(time.perf_counter() - t0) * 1e3, x_prev=x, u_bar=u_bar,
                    z_bar=z_bar, y_bar=y_bar, alpha=alpha, cuts=cuts, z_residuals=z_res,
                    y_residuals=y_res, fixed_point_residuals=fp_res))
            x = x_next
            if variant != "halpern" and min(step, u_res) <= EXACT_FIXED_POINT:
                stop_reason = "fixed_point_exact"
                break
            if step <= cfg.tol_step or (variant != "halpern" and u_res <= cfg.tol_step):
                stop_reason = "step_tol"
                break
        elapsed = time.perf_counter() - t0

    if unconverged_total:
        notes.append(f"{unconverged_total} inner prox solves hit their iteration budget")
    return SolveResult(x, iterations, stop_reason, tuple(trace), variant, rho, elapsed, tuple(notes))


def solve_mann(p: ProblemInstance, cfg: SolverConfig = SolverConfig(), x0=None) -> SolveResult:
    """Parallel hybrid Mann-extragradient method."""
    return _hybrid(p, cfg, "mann", x0)


def solve_halpern(p: ProblemInstance, cfg: SolverConfig = SolverConfig(), x0=None) -> SolveResult:
    """Parallel hybrid Halpern-extragradient method.

    A small step does not certify a solution for this variant, so it never
    reports ``fixed_point_exact``; ``cfg.max_iter`` is the hard stop.
    """
    return _hybrid(p, cfg, "halpern", x0)


def solve_averaged(p: ProblemInstance, cfg: SolverConfig = SolverConfig(), x0=None) -> SolveResult:
    """Parallel hybrid iteration-extragradient method (convex combination of ``x_n`` and ``S_j z_bar``)."""
    return _hybrid(p, cfg, "averaged", x0)


def solve_equilibrium_only(p: ProblemInstance, cfg: SolverConfig = SolverConfig(), x0=None) -> SolveResult:
    if p.n_maps != 0 or p.n_bifunctions < 1:
        raise ConfigurationError("equilibrium-only solver needs M = 0 and N >= 1")
    res = _hybrid(p, cfg, "mann", x0)
    return SolveResult(res.solution, res.iterations, res.stop_reason, res.trace,
                       "equilibrium_only", res.rho, res.elapsed_s, res.warnings)


def solve_vi(fields: Sequence[Callable[[Point], Point]], L: float, C: FeasibleSet,
             cfg: SolverConfig = SolverConfig(), x0=None, known_solution=None) -> SolveResult:
    """Hybrid extragradient method for a family of ``L``-Lipschitz variational inequalities.

    Each step is ``y = P_C(x - rho A_i(x))``, ``z = P_C(x - rho A_i(y))``
    followed by the farthest-``z`` cut; requires ``0 < rho < 1/L``.
    """
    if not L > 0:
        raise ConfigurationError("Lipschitz constant L must be positive")
    if cfg.rho is not None and not cfg.rho < 1.0 / L:
        raise ConfigurationError(f"rho={cfg.rho!r} violates the bound rho < 1/L = {1.0 / L!r}")
    bifs = [vi_bifunction(A, L, C.dim) for A in fields]
    problem = ProblemInstance(C.dim, C, bifs, (), known_solution, name="vi")
    res = _hybrid(problem, cfg, "mann", x0)
    return SolveResult(res.solution, res.iterations, res.stop_reason, res.trace,
                       "vi", res.rho, res.elapsed_s, res.warnings)


SOLVERS = {
    "mann": solve_mann,
    "halpern": solve_halpern,
    "averaged": solve_averaged,
    "equilibrium_only": solve_equilibrium_only,
}
