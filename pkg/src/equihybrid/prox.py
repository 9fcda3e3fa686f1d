"""Extragradient subproblems ``argmin { rho f(x, .) + 0.5 ||anchor - .||^2 : C }``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import BifunctionOracle, CapabilityError, FeasibleSet, InnerBudget, Point, as_point


@dataclass(frozen=True)
class ProxResult:
    y: Point
    inner_iters: int
    optimality_residual: float
    converged: bool = True


def _gradient_mapping_norm(y, grad, C):
    return float(np.linalg.norm(y - C.project(y - grad)))


def prox_step(f: BifunctionOracle, x: Point, rho: float, C: FeasibleSet,
              budget: InnerBudget = InnerBudget(), anchor: Optional[Point] = None) -> ProxResult:
    """Minimise ``g(y) = rho f(x, y) + 0.5 ||anchor - y||^2`` over ``C``.

    ``anchor`` defaults to ``x``.  A closed form on the oracle is used verbatim
    (``inner_iters=0``, residual 0).  Otherwise a projected subgradient method
    runs from the anchor.  Each step first tries the largest step ``t`` no
    bigger than the local inverse Lipschitz constant of the subgradient (fast
    when ``f(x, .)`` is smooth) and falls back to the diminishing step
    ``1/(k+1)``, which converges for any 1-strongly convex ``g``.  It stops once ``||y_{k+1} - y_k|| / t`` drops
    below ``budget.tol``.  When the budget runs out the best iterate (by
    objective value) is returned with ``converged=False``.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if anchor is None:
        anchor = x
    if f.prox_closed_form is not None:
        return ProxResult(as_point(f.prox_closed_form(x, rho, C, anchor)), 0, 0.0)
    if f.subgrad2 is None:
        raise CapabilityError("bifunction has neither a closed-form prox nor subgrad2")

    def objective(y):
        d = anchor - y
        return rho * f.eval(x, y) + 0.5 * float(d @ d)

    def grad(y):
        return rho * np.asarray(f.subgrad2(x, y), dtype=np.float64) + (y - anchor)

    y = C.project(np.array(anchor, dtype=np.float64))
    g = grad(y)
    best, best_val = y, objective(y)
    t = 1.0
    for k in range(budget.max_iters):
        floor = 1.0 / (k + 1.0)
        t = max(2.0 * t, floor)
        while True:
            y_next = C.project(y - t * g)
            step = y_next - y
            g_next = grad(y_next)
            # accept t when it does not exceed the local inverse Lipschitz constant of grad g
            if t * float(np.linalg.norm(g_next - g)) <= float(np.linalg.norm(step)) or t <= floor:
                break
            t = max(0.5 * t, floor)
        moved = float(np.linalg.norm(step)) / t
        y, g = y_next, g_next
        val = objective(y)
        if val <= best_val:
            best, best_val = y, val
        if moved < budget.tol:
            return ProxResult(y, k + 1, _gradient_mapping_norm(y, g, C))
    return ProxResult(best, budget.max_iters, _gradient_mapping_norm(best, grad(best), C), converged=False)


def extragradient_pair(f: BifunctionOracle, x: Point, rho: float, C: FeasibleSet,
                       budget: InnerBudget = InnerBudget()) -> tuple[Point, Point]:
    """Predictor ``y`` at ``x`` and corrector ``z`` built from ``f(y, .)``, both anchored at ``x``."""
    y = prox_step(f, x, rho, C, budget).y
    z = prox_step(f, y, rho, C, budget, anchor=x).y
    return y, z


def vi_prox(A: Callable[[Point], Point], x: Point, rho: float, C: FeasibleSet,
            anchor: Optional[Point] = None) -> Point:
    """``P_C(anchor - rho A(x))``; with the default anchor this is ``P_C(x - rho A(x))``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    base = x if anchor is None else anchor
    return C.project(base - rho * np.asarray(A(x), dtype=np.float64))


def vi_bifunction(A: Callable[[Point], Point], lipschitz: float, dim: int) -> BifunctionOracle:
    """Bifunction ``<A(x), y - x>`` of an ``L``-Lipschitz field; c1 = c2 = L/2."""

    def value(x, y):
        return float(np.asarray(A(x)) @ (y - x))

    def subgrad(x, y):
        return np.asarray(A(x), dtype=np.float64)

    def closed(point, rho, C, anchor=None):
        return vi_prox(A, point, rho, C, anchor)

    half = 0.5 * float(lipschitz)
    return BifunctionOracle(dim, value, half, half, subgrad2=subgrad, prox_closed_form=closed)
