"""Independent reference implementations used as test oracles.

Nothing here imports the package under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# --------------------------------------------------------------------------
# scalar one-dimensional experiment

def _ramp(x, s):
    t = x - s
    return math.exp(t) + math.sin(t) - 1.0 if t > 0 else 0.0


def _clip01(v):
    return min(1.0, max(0.0, v))


def scalar_paper_1d(N, M, rho=0.2, x0=1.0, tol=1e-5, max_iter=1000, alpha=lambda n: 1.0 / (n + 1)):
    """Plain-Python run of the one-dimensional experiment.

    Uses the closed-form update ``x_{n+1} = (x_n + u_bar) / 2`` that follows
    from both cuts being half-lines below ``x_n``.  Returns the iterates
    ``[x_0, x_1, ...]`` and the stop reason.
    """
    xi = [(i + 1) / (N + 1) for i in range(N)]
    xs = [x0]
    x = x0
    for n in range(1, max_iter + 1):
        a = alpha(n)
        zbar, best = x, -1.0
        for s in xi:
            y = _clip01(x - rho * _ramp(x, s))
            z = _clip01(x - rho * _ramp(y, s))
            if abs(z - x) > best:
                best, zbar = abs(z - x), z
        ubar, best = zbar, -1.0
        sz = math.sin(zbar)
        for j in range(1, M + 1):
            u = a * x + (1 - a) * zbar ** j * sz ** (j - 1) / (2 * j - 1)
            if abs(u - x) > best:
                best, ubar = abs(u - x), u
        x_next = (x + ubar) / 2.0
        xs.append(x_next)
        step, ures = abs(x_next - x), abs(ubar - x)
        x = x_next
        if step <= tol or ures <= tol:
            return xs, "step_tol"
    return xs, "max_iter"


def _scalar_pairs(x, xi, rho):
    zbar, best = x, -1.0
    for s in xi:
        y = _clip01(x - rho * _ramp(x, s))
        z = _clip01(x - rho * _ramp(y, s))
        if abs(z - x) > best:
            best, zbar = abs(z - x), z
    return zbar


def _scalar_map(v, j):
    return v ** j * math.sin(v) ** (j - 1) / (2 * j - 1)


def _interval_cut(lo, hi, a, b):
    """Intersect ``[lo, hi]`` with ``{v : a v <= b}``."""
    if a > 0:
        hi = min(hi, b / a)
    elif a < 0:
        lo = max(lo, b / a)
    elif b < 0:
        raise ValueError("empty cut")
    return lo, hi


def scalar_paper_1d_halpern(N, M, rho=0.2, x0=1.0, tol=1e-5, max_iter=1000, alpha=lambda n: 1.0 / (n + 1)):
    """The anchored variant on the 1-D experiment, with the cuts expanded by hand.

    The progress cut ``(u - v)^2 <= a (x0 - v)^2 + (1 - a)(x - v)^2`` is
    linear in ``v``: ``2 (a x0 + (1 - a) x - u) v <= a x0^2 + (1 - a) x^2 - u^2``.
    Stops on the step test only.
    """
    xi = [(i + 1) / (N + 1) for i in range(N)]
    xs, x = [x0], x0
    for n in range(1, max_iter + 1):
        a = alpha(n)
        zbar = _scalar_pairs(x, xi, rho)
        cands = [_scalar_map(zbar, j) for j in range(1, M + 1)] or [zbar]
        ubar, best = None, -1.0
        for s in cands:
            u = a * x0 + (1 - a) * s
            if abs(u - x) > best:
                best, ubar = abs(u - x), u
        lo, hi = _interval_cut(0.0, 1.0, 2 * (a * x0 + (1 - a) * x - ubar),
                               a * x0 * x0 + (1 - a) * x * x - ubar * ubar)
        lo, hi = _interval_cut(lo, hi, x0 - x, (x0 - x) * x)
        x_next = min(max(x0, lo), hi)
        xs.append(x_next)
        done = abs(x_next - x) <= tol
        x = x_next
        if done:
            return xs, "step_tol"
    return xs, "max_iter"


def scalar_paper_1d_averaged(N, M, rho=0.2, x0=1.0, tol=1e-5, max_iter=1000):
    """Averaged variant with uniform weights ``1/(M+1)`` on ``x, S_1 z, ..., S_M z``."""
    xi = [(i + 1) / (N + 1) for i in range(N)]
    xs, x = [x0], x0
    for _ in range(max_iter):
        zbar = _scalar_pairs(x, xi, rho)
        u = (x + sum(_scalar_map(zbar, j) for j in range(1, M + 1))) / (M + 1)
        lo, hi = _interval_cut(0.0, 1.0, 2 * (x - u), x * x - u * u)
        lo, hi = _interval_cut(lo, hi, x0 - x, (x0 - x) * x)
        x_next = min(max(x0, lo), hi)
        xs.append(x_next)
        step, ures = abs(x_next - x), abs(u - x)
        x = x_next
        if step <= tol or ures <= tol:
            return xs, "step_tol"
    return xs, "max_iter"


# --------------------------------------------------------------------------
# projections by brute force

def project_two_halfspaces_kkt(x0, halfspaces):
    """Nearest point to ``x0`` in ``{v : a.v <= b}`` for at most two halfspaces, by active-set enumeration."""
    x0 = np.asarray(x0, dtype=float)
    best = None
    for r in range(len(halfspaces) + 1):
        for active in itertools.combinations(halfspaces, r):
            if r == 0:
                v = x0.copy()
            else:
                A = np.array([a for a, _ in active])
                b = np.array([bb for _, bb in active])
                G = A @ A.T
                if abs(np.linalg.det(G)) < 1e-14:
                    continue
                lam = np.linalg.solve(G, A @ x0 - b)
                if np.any(lam < -1e-13):
                    continue
                v = x0 - A.T @ lam
            if all(np.dot(a, v) <= bb + 1e-9 * (1 + abs(bb)) for a, bb in halfspaces):
                d = np.linalg.norm(v - x0)
                if best is None or d < best[0]:
                    best = (d, v)
    return best[1]


def grid_projection(x0, lower, upper, halfspaces, step=1e-3):
    """Feasible grid point nearest to ``x0``; box ``[lower, upper]`` intersected with halfspaces."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    axes = [np.arange(lo, hi + step / 2, step) for lo, hi in zip(lower, upper)]
    if len(axes) == 1:
        P = axes[0][:, None]
    else:
        g = np.meshgrid(*axes, indexing="ij")
        P = np.stack([a.ravel() for a in g], axis=1)
    mask = np.ones(P.shape[0], dtype=bool)
    for a, b in halfspaces:
        mask &= P @ np.asarray(a, dtype=float) <= b
    P = P[mask]
    if P.shape[0] == 0:
        return None
    d = np.sum((P - x0) ** 2, axis=1)
    return P[int(np.argmin(d))]


# --------------------------------------------------------------------------
# hybrid extragradient method of Nadezhkina and Takahashi (unconstrained, S = I)

def nadezhkina_takahashi_step(M, q, x0, x, lam, alpha=0.0):
    """One step of the hybrid extragradient method for ``A x = M x + q`` on the whole space.

    ``y = x - lam A x``, ``z = alpha x + (1 - alpha)(x - lam A y)`` and the
    next iterate is the projection of ``x0`` onto ``C_n cap Q_n``.
    """
    M = np.asarray(M, dtype=float)
    q = np.asarray(q, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    A = lambda v: M @ v + q  # noqa: E731
    y = x - lam * A(x)
    z = alpha * x + (1 - alpha) * (x - lam * A(y))
    hs = []
    # ||z - v|| <= ||x - v||
    a1 = 2 * (x - z)
    if np.any(a1 != 0):
        hs.append((a1, x @ x - z @ z))
    # <x - v, x0 - x> >= 0
    a2 = x0 - x
    if np.any(a2 != 0):
        hs.append((a2, a2 @ x))
    return project_two_halfspaces_kkt(x0, hs)


def nadezhkina_takahashi(M, q, x0, lam, alpha=0.0, tol=1e-12, max_iter=500):
    """Iterates ``[x0, x1, ...]`` of :func:`nadezhkina_takahashi_step`."""
    x = np.asarray(x0, dtype=float)
    xs = [x.copy()]
    for _ in range(max_iter):
        x_next = nadezhkina_takahashi_step(M, q, x0, x, lam, alpha)
        xs.append(x_next.copy())
        done = np.linalg.norm(x_next - x) <= tol
        x = x_next
        if done:
            break
    return xs
