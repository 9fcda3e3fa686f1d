"""Shipped problem instances.

* ``make_paper_1d``: ``f_i(x, y) = B_i(x) (y - x)`` on ``[0, 1]`` with the
  ramp ``B_i(x) = exp(x - xi_i) + sin(x - xi_i) - 1`` above ``xi_i`` (zero
  below) and ``S_j x = x^j sin^(j-1)(x) / (2j - 1)``.  Both families carry
  vectorised block kernels so very large ``N`` and ``M`` stay cheap.
* ``make_cournot``: Nash-Cournot oligopoly with convex quadratic taxes and
  the proximal map of a separable convex fee as the nonexpansive map.
* ``make_affine_vi``: families of monotone affine fields sharing a solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (BifunctionOracle, ConfigurationError, FeasibleSet, NonexpansiveMap, Point,
                   ProblemInstance, as_point)
from .prox import vi_bifunction

# --------------------------------------------------------------------------
# one-dimensional family


def ramp(x, xi):
    """``B(x)``: 0 for ``x <= xi``, else ``exp(x - xi) + sin(x - xi) - 1``; vectorises over ``xi``."""
    t = np.asarray(x, dtype=np.float64) - np.asarray(xi, dtype=np.float64)
    return np.where(t > 0, np.expm1(t) + np.sin(t), 0.0)


def fixed_point_map_values(x: float, j):
    """``x^j sin^(j-1)(x) / (2j - 1)`` for an array of 1-based indices ``j``."""
    j = np.asarray(j, dtype=np.float64)
    return np.power(x, j) * np.power(math.sin(x), j - 1.0) / (2.0 * j - 1.0)


@dataclass(frozen=True)
class Paper1DSpec:
    N: int
    M: int
    xi: Optional[Sequence[float]] = None
    x0: float = 1.0

    def thresholds(self) -> np.ndarray:
        if self.xi is None:
            return np.arange(1, self.N + 1, dtype=np.float64) / (self.N + 1)
        return np.asarray(self.xi, dtype=np.float64)


class Paper1DBifunctions:
    """The ramp bifunctions as an indexed family with a vectorised kernel."""

    dim = 1
    c1 = 2.0
    c2 = 2.0

    def __init__(self, xi: np.ndarray):
        self.xi = np.asarray(xi, dtype=np.float64)
        self.xi.setflags(write=False)

    def __len__(self):
        return self.xi.shape[0]

    def __getitem__(self, i: int) -> BifunctionOracle:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        s = float(self.xi[i])

        def value(x, y):
            return float(ramp(x[0], s) * (y[0] - x[0]))

        def subgrad(x, y):
            return np.array([float(ramp(x[0], s))])

        def closed(point, rho, C, anchor=None):
            base = point if anchor is None else anchor
            return C.project(base - rho * ramp(point[0], s))

        return BifunctionOracle(1, value, self.c1, self.c2, subgrad2=subgrad, prox_closed_form=closed)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def extragradient_block(self, lo, hi, x, rho, C, budget=None):
        s = self.xi[lo:hi]
        lower, upper = C.interval()
        x = float(x[0])
        y = np.clip(x - rho * ramp(x, s), lower, upper)
        z = np.clip(x - rho * ramp(y, s), lower, upper)
        return y[:, None], z[:, None]


class Paper1DMaps:
    dim = 1

    def __init__(self, m: int):
        self.m = int(m)

    def __len__(self):
        return self.m

    def __getitem__(self, j: int) -> NonexpansiveMap:
        if not 0 <= j < self.m:
            raise IndexError(j)
        power = j + 1
        return NonexpansiveMap(1, lambda x: fixed_point_map_values(float(x[0]), [power]))

    def __iter__(self):
        return (self[j] for j in range(self.m))

    def apply_block(self, lo, hi, x):
        return fixed_point_map_values(float(x[0]), np.arange(lo + 1, hi + 1))[:, None]


def make_paper_1d(spec: Paper1DSpec) -> ProblemInstance:
    xi = spec.thresholds()
    if xi.shape != (spec.N,):
        raise ConfigurationError(f"need {spec.N} thresholds, got {xi.shape[0]}")
    if spec.N and not (xi[0] > 0 and xi[-1] < 1 and np.all(np.diff(xi) > 0)):
        raise ConfigurationError("thresholds must satisfy 0 < xi_1 < ... < xi_N < 1")
    if spec.M < 0 or spec.N < 0:
        raise ConfigurationError("family sizes must be nonnegative")
    return ProblemInstance(1, FeasibleSet.box([0.0], [1.0]), Paper1DBifunctions(xi),
                           Paper1DMaps(spec.M), known_solution=[0.0],
                           name="paper1d", x0=[spec.x0])


# --------------------------------------------------------------------------
# separable fee proximal map


def prox_separable_quadratic(quadratic, linear, c: float, x, absolute=None, lower=None, upper=None):
    """Resolvent ``(I + c dg)^-1`` of ``g(u) = sum 0.5 q_j u_j^2 + l_j u_j + a_j |u_j|``.

    Componentwise this is a soft threshold followed by shrinkage; box bounds
    are applied last, which is exact because each component is a 1-D
    strongly convex problem.
    """
    if not c > 0:
        raise ConfigurationError("prox scale c must be positive")
    x = np.asarray(x, dtype=np.float64)
    q = np.broadcast_to(np.asarray(quadratic, dtype=np.float64), x.shape)
    lin = np.broadcast_to(np.asarray(linear, dtype=np.float64), x.shape)
    a = np.zeros_like(x) if absolute is None else np.broadcast_to(np.asarray(absolute, dtype=np.float64), x.shape)
    if np.any(q < 0) or np.any(a < 0):
        raise ConfigurationError("fee coefficients must be convex (q >= 0, a >= 0)")
    v = x - c * lin
    v = np.sign(v) * np.maximum(np.abs(v) - c * a, 0.0)
    u = v / (1.0 + c * q)
    if lower is not None or upper is not None:
        u = np.clip(u, lower if lower is not None else -np.inf, upper if upper is not None else np.inf)
    return u


# --------------------------------------------------------------------------
# Nash-Cournot oligopoly


@dataclass(frozen=True)
class CournotSpec:
    """Firm data for the oligopoly.

    Price for firm j: ``alpha_j - beta_j * s`` with ``s`` total output.  Tax
    ``0.5 tax_quadratic_j x^2 + tax_linear_j x``; fee ``0.5 fee_quadratic_j x^2
    + fee_linear_j x + fee_absolute_j |x|``.
    """

    alpha: Sequence[float]
    beta: Sequence[float]
    lower: Sequence[float]
    upper: Sequence[float]
    tax_quadratic: Optional[Sequence[float]] = None
    tax_linear: Optional[Sequence[float]] = None
    fee_quadratic: Optional[Sequence[float]] = None
    fee_linear: Optional[Sequence[float]] = None
    fee_absolute: Optional[Sequence[float]] = None
    prox_scale: float = 1.0
    x0: Optional[Sequence[float]] = None
    known_solution: Optional[Sequence[float]] = None

    @property
    def n(self) -> int:
        return len(self.alpha)

    def vec(self, name: str) -> np.ndarray:
        v = getattr(self, name)
        if v is None:
            return np.zeros(self.n)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n,):
            raise ConfigurationError(f"{name} must have one entry per firm ({self.n})")
        return v


@dataclass(frozen=True, eq=False)
class CournotModel:
    """Quadratic data of ``f(x, y) = <P x + Q y + q, y - x>`` for the oligopoly.

    Writing ``psi(x, y) = -sum_j profit_j(x with x_j replaced by y_j)`` gives
    ``psi(x, y) = 0.5 y'Dy + x'By - (alpha - t)'y`` with ``D = diag(2 beta +
    tau)`` and ``B[k, j] = beta_j`` off the diagonal.  Hence ``P = B' + D/2``,
    ``Q = D/2`` and ``q = t - alpha``.  Expanding the three-point expression
    gives ``f(x,y) + f(y,z) - f(x,z) = <(P - Q)(x - y), y - z>``, so
    ``||P - Q|| / 2`` is a valid constant; ``||P + Q|| / 2`` dominates it (all
    entries are nonnegative) and is the one used.
    """

    P: np.ndarray
    Q: np.ndarray
    q: np.ndarray
    D: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def value(self, x, y) -> float:
        return float((self.P @ x + self.Q @ y + self.q) @ (y - x))

    def grad_y(self, x, y) -> np.ndarray:
        # f(x, .) = 0.5 y'Dy + (B'x + q)'y + const
        return self.D * y + (self.P - self.Q) @ x + self.q

    def prox(self, point, rho, C, anchor=None):
        """Separable minimiser of ``rho f(point, .) + 0.5 ||anchor - .||^2`` over the box."""
        base = point if anchor is None else anchor
        lin = (self.P - self.Q) @ point + self.q
        y = (base - rho * lin) / (1.0 + rho * self.D)
        return np.clip(y, self.lower, self.upper)

    def lipschitz(self) -> float:
        return 0.5 * float(np.linalg.norm(self.P + self.Q, 2))

    def equilibrium_interior(self) -> np.ndarray:
        """Solve the first-order conditions ``(D/2 + P) x + q = 0`` (interior equilibrium)."""
        return np.linalg.solve(self.P + self.Q, -self.q)


def cournot_model(spec: CournotSpec) -> CournotModel:
    alpha, beta = spec.vec("alpha"), spec.vec("beta")
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise ConfigurationError("price intercepts and slopes must be positive")
    tau, t = spec.vec("tax_quadratic"), spec.vec("tax_linear")
    if np.any(tau < 0):
        raise ConfigurationError("tax must be convex (tax_quadratic >= 0)")
    lo, hi = spec.vec("lower"), spec.vec("upper")
    if np.any(lo > hi):
        raise ConfigurationError("strategy box lower bound exceeds upper bound")
    n = spec.n
    D = 2.0 * beta + tau
    B = np.tile(beta, (n, 1))  # B[k, j] = beta_j
    np.fill_diagonal(B, 0.0)
    P = B.T + np.diag(0.5 * D)
    Q = np.diag(0.5 * D)
    return CournotModel(P, Q, t - alpha, D, lo, hi)


def make_cournot(spec: CournotSpec) -> ProblemInstance:
    model = cournot_model(spec)
    for name in ("fee_quadratic", "fee_absolute"):
        if np.any(spec.vec(name) < 0):
            raise ConfigurationError(f"fee must be convex ({name} >= 0)")
    if not spec.prox_scale > 0:
        raise ConfigurationError("prox_scale must be positive")
    n = spec.n
    C = FeasibleSet.box(model.lower, model.upper)
    c = model.lipschitz()
    bif = BifunctionOracle(n, model.value, c, c, subgrad2=model.grad_y, prox_closed_form=model.prox)
    fq, fl, fa = spec.vec("fee_quadratic"), spec.vec("fee_linear"), spec.vec("fee_absolute")
    scale = float(spec.prox_scale)

    def fee_prox(x):
        return prox_separable_quadratic(fq, fl, scale, x, fa, model.lower, model.upper)

    x0 = spec.x0 if spec.x0 is not None else model.lower
    return ProblemInstance(n, C, [bif], [NonexpansiveMap(n, fee_prox)],
                           known_solution=spec.known_solution, name="cournot", x0=x0)


# --------------------------------------------------------------------------
# affine variational inequalities


@dataclass(frozen=True, eq=False)
class AffineVIFamily:
    matrices: tuple[np.ndarray, ...]
    offsets: tuple[np.ndarray, ...]
    C: FeasibleSet
    lipschitz: float
    known_solution: Point
    x0: Optional[Point] = None
    fields: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(
            (lambda x, Mi=Mi, qi=qi: Mi @ x + qi) for Mi, qi in zip(self.matrices, self.offsets)))

    def residuals(self, x) -> list[float]:
        """Natural-map residuals ``||x - P_C(x - A_i(x))||`` (zero exactly at solutions)."""
        return [float(np.linalg.norm(x - self.C.project(x - A(x)))) for A in self.fields]

    def as_problem(self, with_identity_map: bool = True) -> ProblemInstance:
        d = self.C.dim
        bifs = [vi_bifunction(A, self.lipschitz, d) for A in self.fields]
        maps = [NonexpansiveMap(d, lambda x: np.array(x, dtype=np.float64))] if with_identity_map else []
        return ProblemInstance(d, self.C, bifs, maps, self.known_solution, name="affine_vi", x0=self.x0)


def make_affine_vi(matrices: Sequence, C: FeasibleSet, solution, normal_offsets=None,
                   lipschitz: Optional[float] = None, x0=None) -> AffineVIFamily:
    """Affine monotone fields ``A_i(x) = M_i x + q_i`` that all solve the VI at ``solution``.

    ``q_i = -M_i x* + w_i`` where ``w_i`` (default 0) must make ``-w_i`` a
    normal vector of the box ``C`` at ``x*``, which keeps ``x*`` a solution
    when it sits on the boundary.
    """
    xs = as_point(solution, C.dim)
    if not C.contains(xs, 1e-12):
        raise ConfigurationError("solution must lie in C")
    mats = tuple(np.asarray(Mi, dtype=np.float64) for Mi in matrices)
    offs = []
    for i, Mi in enumerate(mats):
        if Mi.shape != (C.dim, C.dim):
            raise ConfigurationError(f"matrix {i} has shape {Mi.shape}")
        if float(np.min(np.linalg.eigvalsh(0.5 * (Mi + Mi.T)))) < -1e-12:
            raise ConfigurationError(f"matrix {i} is not positive semidefinite (field not monotone)")
        w = np.zeros(C.dim) if normal_offsets is None else as_point(normal_offsets[i], C.dim)
        if np.any(w):
            if C.kind != "box":
                raise ConfigurationError("normal offsets are supported for box sets only")
            at_lo, at_hi = xs <= C.lower, xs >= C.upper
            ok = np.where(at_lo & at_hi, True, np.where(at_lo, w >= 0, np.where(at_hi, w <= 0, w == 0)))
            if not np.all(ok):
                raise ConfigurationError(f"offset {i} is not an inward normal at the solution")
        offs.append(w - Mi @ xs)
    L_true = max(float(np.linalg.norm(Mi, 2)) for Mi in mats)
    if lipschitz is None:
        lipschitz = L_true
    elif lipschitz < L_true * (1 - 1e-12):
        raise ConfigurationError(f"supplied L={lipschitz!r} is below the operator norm {L_true!r}")
    return AffineVIFamily(mats, tuple(offs), C, float(lipschitz), xs,
                          None if x0 is None else as_point(x0, C.dim))


def zero_problem(dim: int, n_bifunctions: int = 1, n_maps: int = 1, C: Optional[FeasibleSet] = None,
                 x0=None) -> ProblemInstance:
    """``f = 0`` and identity maps: every point of ``C`` is a solution."""
    C = C or FeasibleSet.whole_space(dim)

    def closed(point, rho, C, anchor=None):
        return C.project(point if anchor is None else anchor)

    zero = BifunctionOracle(dim, lambda x, y: 0.0, 0.0, 0.0, subgrad2=lambda x, y: np.zeros(dim),
                            prox_closed_form=closed)
    ident = NonexpansiveMap(dim, lambda x: np.array(x, dtype=np.float64))
    return ProblemInstance(dim, C, [zero] * n_bifunctions, [ident] * n_maps, name="zero", x0=x0)
