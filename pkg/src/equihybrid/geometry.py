"""Hybrid cuts as halfspaces and projection of the anchor onto ``C`` intersected with them."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import FeasibleSet, Point, ProjectionBudget, as_point


class InfeasibleCutError(RuntimeError):
    """The feasible set and the cuts have (numerically) empty intersection."""


class ProjectionWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``{v : <normal, v> <= offset}``; a zero normal with ``offset >= 0`` is the whole space."""

    normal: Point
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=np.float64)
        if not np.all(np.isfinite(a)) or not math.isfinite(self.offset):
            raise ValueError("halfspace data must be finite")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))
        if self.is_trivial_normal and self.offset < 0:
            raise ValueError("zero normal with negative offset describes the empty set")

    @property
    def is_trivial_normal(self) -> bool:
        return not np.any(self.normal)

    @property
    def is_trivial(self) -> bool:
        return self.is_trivial_normal

    def value(self, v: Point) -> float:
        """Signed violation ``<a, v> - b``."""
        return float(self.normal @ v) - self.offset

    def contains(self, v: Point, tol: float = 0.0) -> bool:
        return self.value(v) <= tol


def _cut(normal, offset) -> HalfSpace:
    normal = np.asarray(normal, dtype=np.float64)
    if not np.any(normal):
        if offset < 0:
            raise InfeasibleCutError("degenerate cut with zero normal excludes every point")
        return HalfSpace(normal, 0.0)
    return HalfSpace(normal, offset)


def mann_cut(x_n: Point, u_bar: Point) -> HalfSpace:
    """Linearisation of ``||u_bar - v|| <= ||x_n - v||``."""
    d = x_n - u_bar
    # <d, x + u> rather than ||x||^2 - ||u||^2 avoids cancellation as u -> x
    return _cut(2.0 * d, float(d @ (x_n + u_bar)))


def halpern_cut(x0: Point, x_n: Point, u_bar: Point, alpha: float) -> HalfSpace:
    """Linearisation of ``||u - v||^2 <= alpha ||x0 - v||^2 + (1 - alpha) ||x_n - v||^2``."""
    # with w = alpha x0 + (1 - alpha) x_n the right side is
    # ||w - v||^2 + alpha (1 - alpha) ||x0 - x_n||^2
    w = alpha * x0 + (1.0 - alpha) * x_n
    # exactly zero when x0 = x_n = u_bar, and equal to x_n - u_bar bitwise when alpha = 0
    d = alpha * (x0 - u_bar) + (1.0 - alpha) * (x_n - u_bar)
    e = x0 - x_n
    return _cut(2.0 * d, float(d @ (w + u_bar)) + alpha * (1.0 - alpha) * float(e @ e))


def anchor_cut(x0: Point, x_n: Point) -> HalfSpace:
    """``{v : <x0 - x_n, v - x_n> <= 0}``."""
    a = x0 - x_n
    return _cut(a, float(a @ x_n))


def project_halfspace(h: HalfSpace, x: Point) -> Point:
    excess = h.value(x)
    if excess <= 0:
        return np.array(x, dtype=np.float64)
    return x - (excess / float(h.normal @ h.normal)) * h.normal


def polyhedron(halfspaces: Sequence[HalfSpace], dim: int, bounding_box,
               budget: ProjectionBudget = ProjectionBudget()) -> FeasibleSet:
    """Feasible set given as an intersection of halfspaces (projection by Dykstra)."""
    hs = tuple(halfspaces)

    def project(x):
        return project_intersection(FeasibleSet.whole_space(dim), hs, x, budget)

    def contains(x, tol=0.0):
        return all(h.contains(x, tol) for h in hs)

    lo, hi = (as_point(b, dim) for b in bounding_box)
    return FeasibleSet(dim, project, contains, "halfspace_list", bounding_box=(lo, hi), halfspaces=hs)


# --------------------------------------------------------------------------
# projection onto C and the cuts

PLATEAU_LEVEL = 1e-6
PLATEAU_SWEEPS = 100


def _feasible(cuts, z, tol) -> bool:
    return all(h.value(z) <= tol for h in cuts)


def _two_cut_projection(cuts: Sequence[HalfSpace], x0: Point) -> Point:
    """Exact projection onto the intersection of at most two halfspaces."""
    if not cuts or _feasible(cuts, x0, 0.0):
        return np.array(x0, dtype=np.float64)
    if len(cuts) == 1:
        return project_halfspace(cuts[0], x0)
    h1, h2 = cuts
    p = project_halfspace(h1, x0)
    if h2.value(p) <= 0:
        return p
    p = project_halfspace(h2, x0)
    if h1.value(p) <= 0:
        return p
    # both constraints active: x0 - A^T lam on the intersection of the hyperplanes
    A = np.vstack([h1.normal, h2.normal])
    G = A @ A.T
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if abs(det) <= 1e-14 * G[0, 0] * G[1, 1]:
        raise InfeasibleCutError("parallel cuts with empty intersection")
    rhs = A @ x0 - np.array([h1.offset, h2.offset])
    lam = np.linalg.solve(G, rhs)
    return x0 - A.T @ lam


def _interval_projection(lo: float, hi: float, cuts, x0: Point) -> Point:
    for h in cuts:
        a = float(h.normal[0])
        bound = h.offset / a
        if a > 0:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    if lo > hi:
        slack = 1e-12 * (1.0 + abs(lo) + abs(hi))
        if lo - hi > slack:
            raise InfeasibleCutError(f"empty interval [{lo!r}, {hi!r}]")
        lo = hi = 0.5 * (lo + hi)
    return np.array([min(max(float(x0[0]), lo), hi)])


def _clip_multiplier(a: Point, c: Point, lo: Point, hi: Point, b: float) -> float:
    """Smallest ``mu >= 0`` with ``a . clip(c - mu a, lo, hi) <= b``.

    The left side is piecewise linear and nonincreasing in ``mu``; its kinks
    are where a coordinate reaches a bound, so the root is found exactly by a
    binary search over the sorted kinks and one linear interpolation.
    """
    def h(mu):
        return float(a @ np.clip(c - mu * a, lo, hi))

    if h(0.0) <= b:
        return 0.0
    nz = a != 0
    floor = float(np.sum(np.where(a > 0, a * lo, a * hi)[nz]))
    if floor > b:
        raise InfeasibleCutError("cut does not meet the box")
    with np.errstate(divide="ignore", invalid="ignore"):
        kinks = np.concatenate([(c[nz] - lo[nz]) / a[nz], (c[nz] - hi[nz]) / a[nz]])
    kinks = np.unique(kinks[np.isfinite(kinks) & (kinks > 0)])
    left, right = 0, kinks.size - 1
    while left < right:  # first kink where h <= b
        mid = (left + right) // 2
        if h(kinks[mid]) <= b:
            right = mid
        else:
            left = mid + 1
    t1 = float(kinks[left])
    t0 = float(kinks[left - 1]) if left > 0 else 0.0
    h0, h1 = h(t0), h(t1)
    if h0 == h1:
        return t1
    return t0 + (h0 - b) * (t1 - t0) / (h0 - h1)


def _box_cuts_projection(lo: Point, hi: Point, cuts: Sequence[HalfSpace], x0: Point) -> Point:
    """Exact projection onto a box intersected with at most two halfspaces.

    The minimiser is ``clip(x0 - A' lam)`` for multipliers ``lam >= 0``.  For
    a fixed second multiplier the first follows from :func:`_clip_multiplier`;
    the remaining scalar equation is monotone and piecewise linear, solved by
    bracketing and the Illinois rule to full precision.
    """
    if len(cuts) == 1:
        mu = _clip_multiplier(cuts[0].normal, x0, lo, hi, cuts[0].offset)
        return np.clip(x0 - mu * cuts[0].normal, lo, hi)
    (a1, b1), (a2, b2) = ((h.normal, h.offset) for h in cuts)

    def point(lam2):
        c = x0 - lam2 * a2
        return np.clip(c - _clip_multiplier(a1, c, lo, hi, b1) * a1, lo, hi)

    def g(lam2):
        return float(a2 @ point(lam2)) - b2

    g0 = g(0.0)
    if g0 <= 0:
        return point(0.0)
    t0, t1 = 0.0, max(g0 / float(a2 @ a2), 1e-300)
    g1 = g(t1)
    while g1 > 0:
        t0, g0 = t1, g1
        t1 *= 2.0
        if t1 > 1e300:
            raise InfeasibleCutError("cuts and box have empty intersection")
        g1 = g(t1)
    side = 0
    for _ in range(200):
        if g1 == 0 or t1 - t0 <= 4 * np.finfo(float).eps * t1:
            break
        t = t1 - g1 * (t1 - t0) / (g1 - g0) if g0 != g1 else 0.5 * (t0 + t1)
        if not t0 < t < t1:
            t = 0.5 * (t0 + t1)
        gt = g(t)
        if gt > 0:
            t0, g0 = t, gt
            if side == -1:
                g1 *= 0.5
            side = -1
        else:
            t1, g1 = t, gt
            if side == 1:
                g0 *= 0.5
            side = 1
    return point(t1)


def dykstra(projectors: Sequence[Callable[[Point], Point]], x0: Point,
            budget: ProjectionBudget = ProjectionBudget()) -> tuple[Point, int, bool]:
    """Dykstra's alternating projections onto an intersection of convex sets.

    Returns ``(z, sweeps, converged)``.  Convergence means the iterate moved by
    less than ``tol`` over a sweep while its distance to every set is below
    ``tol``.  A distance residual stuck above 1e-6 for 100 sweeps raises
    :class:`InfeasibleCutError`.
    """
    x = np.array(x0, dtype=np.float64)
    incr = [np.zeros_like(x) for _ in projectors]
    best_res, stalled = math.inf, 0
    for sweep in range(1, budget.max_sweeps + 1):
        start = x
        for k, P in enumerate(projectors):
            y = P(x + incr[k])
            incr[k] = x + incr[k] - y
            x = y
        moved = float(np.linalg.norm(x - start))
        res = max(float(np.linalg.norm(P(x) - x)) for P in projectors)
        if moved <= budget.tol and res <= budget.tol:
            return x, sweep, True
        if res < best_res * (1.0 - 1e-9):
            best_res, stalled = res, 0
        else:
            stalled += 1
            if stalled >= PLATEAU_SWEEPS and res > PLATEAU_LEVEL:
                raise InfeasibleCutError(f"alternating projections stalled at distance {res:.3e}")
    return x, budget.max_sweeps, False


def project_intersection(C: FeasibleSet, cuts: Sequence[HalfSpace], x0: Point,
                         budget: ProjectionBudget = ProjectionBudget()) -> Point:
    """Metric projection of ``x0`` onto ``C`` intersected with every cut.

    Exact paths, tried in order: intervals of the real line; ``C`` the whole
    space with at most two cuts; the cuts-only projection when it lands in
    ``C``; a box with at most two cuts; ``P_C(x0)`` when it satisfies every
    cut.  Otherwise Dykstra's
    method over ``C`` and the cuts; if it exhausts ``budget`` the last iterate
    is returned with a :class:`ProjectionWarning`.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    cuts = [h for h in cuts if not h.is_trivial]
    if not cuts:
        return C.project(x0)

    interval = C.interval()
    if interval is not None:
        return _interval_projection(interval[0], interval[1], cuts, x0)

    if len(cuts) <= 2:
        z = _two_cut_projection(cuts, x0)
        if C.kind == "whole_space" or C.contains(z, 0.0):
            return z
        if C.kind == "box":
            return _box_cuts_projection(C.lower, C.upper, cuts, x0)
    pc = C.project(x0)
    if _feasible(cuts, pc, 0.0):
        return pc

    projectors = [C.project] + [(lambda v, h=h: project_halfspace(h, v)) for h in cuts]
    z, sweeps, ok = dykstra(projectors, x0, budget)
    if not ok:
        warnings.warn(f"Dykstra projection did not reach tol={budget.tol:g} in {sweeps} sweeps",
                      ProjectionWarning, stacklevel=2)
    return z
