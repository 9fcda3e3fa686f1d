"""Domain types, oracle contracts and sampled problem validation.

Points are 1-D ``float64`` numpy arrays.  Oracles are plain callables bundled
in frozen dataclasses; families of oracles are any ``Sequence`` and may
additionally expose vectorised block kernels (see :mod:`equihybrid.problems`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

Point = NDArray[np.float64]


class ConfigurationError(ValueError):
    """Problem or solver configuration violates a precondition."""


class CapabilityError(TypeError):
    """An oracle lacks the capability an operation needs."""


def as_point(x, dim: Optional[int] = None) -> Point:
    """Coerce ``x`` to a finite 1-D float64 array, optionally checking its size."""
    p = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if p.ndim != 1:
        raise ConfigurationError(f"point must be a vector, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise ConfigurationError(f"point has dimension {p.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(p)):
        raise ConfigurationError("point has non-finite entries")
    return p


# --------------------------------------------------------------------------
# oracles


@dataclass(frozen=True)
class BifunctionOracle:
    """One bifunction ``f(x, y)`` with its Lipschitz-type constants.

    ``prox_closed_form(point, rho, C, anchor)`` must return the exact minimiser
    of ``rho * f(point, .) + 0.5 * ||anchor - .||**2`` over ``C``.  ``subgrad2``
    returns an element of the subdifferential of ``f(x, .)`` at ``y``.
    """

    dim: int
    eval: Callable[[Point, Point], float]
    c1: float
    c2: float
    subgrad2: Optional[Callable[[Point, Point], Point]] = None
    prox_closed_form: Optional[Callable[..., Point]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dim must be positive")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigurationError("Lipschitz-type constants must be nonnegative")
        if self.subgrad2 is None and self.prox_closed_form is None:
            raise CapabilityError("bifunction needs subgrad2 or prox_closed_form")


@dataclass(frozen=True)
class NonexpansiveMap:
    dim: int
    apply: Callable[[Point], Point]

    def __call__(self, x: Point) -> Point:
        return self.apply(x)


FEASIBLE_KINDS = ("whole_space", "box", "ball", "halfspace_list", "custom")


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Closed convex set ``C`` given by projection and membership oracles.

    Use the constructors :meth:`whole_space`, :meth:`box`, :meth:`ball` or
    :meth:`custom`; polyhedra come from :func:`equihybrid.geometry.polyhedron`.
    ``bounding_box`` is the sampling window used by :func:`validate_problem`.
    """

    dim: int
    project: Callable[[Point], Point]
    contains: Callable[[Point, float], bool]
    kind: str
    lower: Optional[Point] = None
    upper: Optional[Point] = None
    center: Optional[Point] = None
    radius: Optional[float] = None
    bounding_box: Optional[tuple[Point, Point]] = None
    halfspaces: tuple = ()

    def __post_init__(self):
        if self.kind not in FEASIBLE_KINDS:
            raise ConfigurationError(f"unknown feasible-set kind {self.kind!r}")

    @classmethod
    def whole_space(cls, dim: int, window: float = 10.0) -> "FeasibleSet":
        box = (np.full(dim, -window), np.full(dim, window))
        return cls(dim, lambda x: np.array(x, dtype=np.float64), lambda x, tol=0.0: True,
                   "whole_space", bounding_box=box)

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lo = as_point(lower)
        hi = as_point(upper, lo.shape[0])
        if np.any(lo > hi):
            raise ConfigurationError("box lower bound exceeds upper bound")

        def project(x):
            return np.clip(x, lo, hi)

        def contains(x, tol=0.0):
            return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

        return cls(lo.shape[0], project, contains, "box", lower=lo, upper=hi,
                   bounding_box=(lo, hi))

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        c = as_point(center)
        if not radius > 0:
            raise ConfigurationError("ball radius must be positive")
        r = float(radius)

        def project(x):
            d = x - c
            n = math.sqrt(float(d @ d))
            return np.array(x, dtype=np.float64) if n <= r else c + (r / n) * d

        def contains(x, tol=0.0):
            d = x - c
            return math.sqrt(float(d @ d)) <= r + tol

        return cls(c.shape[0], project, contains, "ball", center=c, radius=r,
                   bounding_box=(c - r, c + r))

    @classmethod
    def custom(cls, dim, project, contains, bounding_box) -> "FeasibleSet":
        if bounding_box is None:
            raise ConfigurationError("custom feasible sets need a bounding box for sampling")
        lo, hi = (as_point(b, dim) for b in bounding_box)
        return cls(dim, project, contains, "custom", bounding_box=(lo, hi))

    def interval(self) -> Optional[tuple[float, float]]:
        """Endpoints of ``C`` when it is an interval of the real line, else None."""
        if self.dim != 1:
            return None
        if self.kind == "whole_space":
            return (-math.inf, math.inf)
        if self.kind == "box":
            return (float(self.lower[0]), float(self.upper[0]))
        if self.kind == "ball":
            return (float(self.center[0]) - self.radius, float(self.center[0]) + self.radius)
        return None


# --------------------------------------------------------------------------
# problem and configuration


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    dim: int
    C: FeasibleSet
    bifunctions: Sequence[BifunctionOracle] = ()
    maps: Sequence[NonexpansiveMap] = ()
    known_solution: Optional[Point] = None
    name: str = "problem"
    x0: Optional[Point] = None

    def __post_init__(self):
        if len(self.bifunctions) + len(self.maps) < 1:
            raise ConfigurationError("problem needs at least one bifunction or map")
        if self.C.dim != self.dim:
            raise ConfigurationError(f"feasible set has dimension {self.C.dim}, expected {self.dim}")
        for kind, family in (("bifunction", self.bifunctions), ("map", self.maps)):
            fam_dim = getattr(family, "dim", None)
            if fam_dim is not None:
                if fam_dim != self.dim:
                    raise ConfigurationError(f"{kind} family has dimension {fam_dim}, expected {self.dim}")
                continue
            for k, oracle in enumerate(family):
                if oracle.dim != self.dim:
                    raise ConfigurationError(
                        f"{kind}[{k}] has dimension {oracle.dim}, expected {self.dim}")
        if self.known_solution is not None:
            object.__setattr__(self, "known_solution", as_point(self.known_solution, self.dim))
        if self.x0 is not None:
            object.__setattr__(self, "x0", as_point(self.x0, self.dim))

    @property
    def n_bifunctions(self) -> int:
        return len(self.bifunctions)

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    def lipschitz_constants(self) -> tuple[float, float]:
        """Common constants ``(max c1, max c2)`` over the bifunction family."""
        fam = self.bifunctions
        if hasattr(fam, "c1") and hasattr(fam, "c2"):
            return float(fam.c1), float(fam.c2)
        if len(fam) == 0:
            return 0.0, 0.0
        return max(f.c1 for f in fam), max(f.c2 for f in fam)

    def rho_bound(self) -> float:
        """Supremum of admissible step sizes, ``min(1/(2 c1), 1/(2 c2))``."""
        c1, c2 = self.lipschitz_constants()
        c = max(c1, c2)
        return math.inf if c == 0 else 1.0 / (2.0 * c)


@dataclass(frozen=True)
class InnerBudget:
    max_iters: int = 500
    tol: float = 1e-10


@dataclass(frozen=True)
class ProjectionBudget:
    max_sweeps: int = 10000
    tol: float = 1e-12


class HarmonicSchedule:
    """``alpha_n = 1 / (n + offset)`` for the 1-based iteration number ``n``."""

    vanishing = True

    def __init__(self, offset: float = 1.0):
        if offset <= 0:
            raise ConfigurationError("harmonic offset must be positive")
        self.offset = float(offset)

    def __call__(self, n: int) -> float:
        return 1.0 / (n + self.offset)

    def __repr__(self):
        return f"HarmonicSchedule(offset={self.offset:g})"


class PowerSchedule:
    """``alpha_n = (n + 1) ** -power``."""

    vanishing = True

    def __init__(self, power: float):
        if power <= 0:
            raise ConfigurationError("power must be positive")
        self.power = float(power)

    def __call__(self, n: int) -> float:
        return (n + 1.0) ** -self.power

    def __repr__(self):
        return f"PowerSchedule(power={self.power:g})"


class GeometricSchedule:
    """``alpha_n = ratio ** n``, floored at the smallest normal double so it never reaches 0."""

    vanishing = True

    def __init__(self, ratio: float):
        if not 0 < ratio < 1:
            raise ConfigurationError("geometric ratio must lie in (0, 1)")
        self.ratio = float(ratio)

    def __call__(self, n: int) -> float:
        return max(self.ratio ** n, np.finfo(np.float64).tiny)

    def __repr__(self):
        return f"GeometricSchedule(ratio={self.ratio:g})"


class ConstantSchedule:
    vanishing = False

    def __init__(self, value: float):
        if not 0 < value < 1:
            raise ConfigurationError("constant alpha must lie in (0, 1)")
        self.value = float(value)

    def __call__(self, n: int) -> float:
        return self.value

    def __repr__(self):
        return f"ConstantSchedule({self.value:g})"


def uniform_weights(m: int) -> Callable[[int], NDArray[np.float64]]:
    w = np.full(m + 1, 1.0 / (m + 1))
    w.setflags(write=False)
    return lambda n: w


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by all solvers.

    ``rho=None`` selects ``0.8 * rho_bound`` (1.0 when the bound is infinite).
    ``alpha_schedule`` and ``weight_schedule`` receive the 1-based iteration
    number.  ``trace_detail`` keeps the per-family residual vectors in every
    trace record; ``trace_every`` subsamples the trace.
    """

    rho: Optional[float] = None
    alpha_schedule: Callable[[int], float] = field(default_factory=HarmonicSchedule)
    weight_schedule: Optional[Callable[[int], NDArray[np.float64]]] = None
    tol_step: float = 1e-6
    max_iter: int = 1000
    workers: int = 1
    prox_inner: InnerBudget = InnerBudget()
    projection_inner: ProjectionBudget = ProjectionBudget()
    trace_every: int = 1
    trace_detail: bool = True

    def __post_init__(self):
        if self.rho is not None and not self.rho > 0:
            raise ConfigurationError("rho must be positive")
        if not self.tol_step > 0:
            raise ConfigurationError("tol_step must be positive")
        if self.max_iter < 1 or self.workers < 1 or self.trace_every < 1:
            raise ConfigurationError("max_iter, workers and trace_every must be positive")

    def resolved_rho(self, problem: ProblemInstance) -> float:
        bound = problem.rho_bound()
        if self.rho is None:
            return 1.0 if math.isinf(bound) else 0.8 * bound
        if not self.rho < bound:
            c1, c2 = problem.lipschitz_constants()
            raise ConfigurationError(
                f"rho={self.rho!r} violates the step bound rho < min(1/(2c1), 1/(2c2)) = {bound!r} "
                f"(c1={c1!r}, c2={c2!r})")
        return float(self.rho)


def check_weights(w, m: int) -> NDArray[np.float64]:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (m + 1,):
        raise ConfigurationError(f"weights must have length M+1={m + 1}, got shape {w.shape}")
    if np.any(w < 0) or np.any(w > 1):
        raise ConfigurationError("weights must lie in [0, 1]")
    if abs(float(np.sum(w)) - 1.0) > 1e-12:
        raise ConfigurationError(f"weights must sum to 1, got {float(np.sum(w))!r}")
    return w


# --------------------------------------------------------------------------
# validation

REL_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    check: str
    target: str
    worst_violation: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    samples: int
    seed: int
    checks: tuple[CheckResult, ...]
    oracles_checked: int
    oracles_total: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> str:
        doc = {
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "oracles_checked": self.oracles_checked,
            "oracles_total": self.oracles_total,
            "checks": [
                {"check": c.check, "target": c.target, "worst_violation": repr(c.worst_violation),
                 "tolerance": repr(c.tolerance), "passed": c.passed}
                for c in self.checks
            ],
        }
        return json.dumps(doc, indent=1)

    def summary_lines(self) -> list[str]:
        """One line per check kind: pass count and the worst offender."""
        by_kind: dict[str, list[CheckResult]] = {}
        for c in self.checks:
            by_kind.setdefault(c.check, []).append(c)
        lines = []
        for kind, results in by_kind.items():
            worst = max(results, key=lambda c: c.worst_violation)
            ok = sum(c.passed for c in results)
            status = "PASS" if ok == len(results) else "FAIL"
            lines.append(f"{status} {kind}: {ok}/{len(results)} passed; "
                         f"worst {worst.worst_violation:.3e} at {worst.target}")
        return lines


def _sample_points(rng: np.random.Generator, C: FeasibleSet, k: int, box=None) -> NDArray:
    lo, hi = box if box is not None else C.bounding_box
    pts = rng.uniform(lo, hi, size=(k, C.dim))
    if C.kind != "box":
        pts = np.array([C.project(p) for p in pts])
    return pts


def _select_oracles(n: int, cap: int) -> list[int]:
    if n <= cap:
        return list(range(n))
    return sorted(set(np.linspace(0, n - 1, cap).round().astype(int).tolist()))


def validate_problem(p: ProblemInstance, cfg: SolverConfig, samples: int = 64, seed: int = 0,
                     max_oracles: int = 1000, sample_box=None) -> ValidationReport:
    """Spot-check the standing assumptions of ``p`` on deterministic samples.

    Each oracle gets its own RNG stream seeded from ``(seed, kind, index)``, so
    the report does not depend on evaluation order.  Raises
    :class:`ConfigurationError` when ``cfg.rho`` violates the step bound.
    """
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    rho = cfg.resolved_rho(p)
    C = p.C
    checks: list[CheckResult] = []

    def add(check, target, worst, tol):
        checks.append(CheckResult(check, target, float(worst), float(tol), bool(worst <= tol)))

    bound = p.rho_bound()
    add("rho_bound", "config", max(0.0, rho - bound) if not math.isinf(bound) else 0.0, 0.0)

    rng = np.random.default_rng([seed, 0])
    X = _sample_points(rng, C, samples, sample_box)
    Y = _sample_points(rng, C, samples, sample_box)
    idem = firm = var = 0.0
    for x, y in zip(X, Y):
        # sampled points are pushed off C before projecting
        xo = x + rng.normal(size=C.dim)
        yo = y + rng.normal(size=C.dim)
        px, py = C.project(xo), C.project(yo)
        idem = max(idem, float(np.max(np.abs(C.project(px) - px))))
        dp = px - py
        firm = max(firm, float(dp @ dp - dp @ (xo - yo)))
        var = max(var, float(-((xo - px) @ (px - y))))
    scale = 1.0 + float(np.max(np.abs(X)))
    add("projection_idempotent", "C", idem, REL_TOL * scale)
    add("projection_firmly_nonexpansive", "C", firm, REL_TOL * scale ** 2)
    add("projection_variational", "C", var, REL_TOL * scale ** 2)

    bif_idx = _select_oracles(len(p.bifunctions), max_oracles)
    for i in bif_idx:
        f = p.bifunctions[i]
        r = np.random.default_rng([seed, 1, i])
        Xs, Ys, Zs = (_sample_points(r, C, samples, sample_box) for _ in range(3))
        w_zero = w_pm = w_lip = 0.0
        t_zero = t_pm = t_lip = 0.0
        for x, y, z in zip(Xs, Ys, Zs):
            fxx = f.eval(x, x)
            w_zero = max(w_zero, abs(fxx))
            t_zero = max(t_zero, REL_TOL * (1.0 + float(np.max(np.abs(x)))))
            fxy, fyx = f.eval(x, y), f.eval(y, x)
            if fxy >= 0:
                w_pm = max(w_pm, fyx)
            t_pm = max(t_pm, REL_TOL * (1.0 + abs(fxy) + abs(fyx)))
            fyz, fxz = f.eval(y, z), f.eval(x, z)
            dxy, dyz = float((x - y) @ (x - y)), float((y - z) @ (y - z))
            gap = fxz - f.c1 * dxy - f.c2 * dyz - fxy - fyz
            w_lip = max(w_lip, gap)
            t_lip = max(t_lip, REL_TOL * (1.0 + abs(fxy) + abs(fyz) + abs(fxz)
                                          + f.c1 * dxy + f.c2 * dyz))
        add("f_xx_zero", f"bifunction[{i}]", w_zero, t_zero)
        add("pseudomonotone", f"bifunction[{i}]", w_pm, t_pm)
        add("lipschitz_type", f"bifunction[{i}]", w_lip, t_lip)

    map_idx = _select_oracles(len(p.maps), max_oracles)
    for j in map_idx:
        S = p.maps[j]
        r = np.random.default_rng([seed, 2, j])
        Xs, Ys = (_sample_points(r, C, samples, sample_box) for _ in range(2))
        w_ne = w_in = 0.0
        t_ne = 0.0
        for x, y in zip(Xs, Ys):
            sx, sy = S.apply(x), S.apply(y)
            w_ne = max(w_ne, float(np.linalg.norm(sx - sy) - np.linalg.norm(x - y)))
            t_ne = max(t_ne, REL_TOL * (1.0 + float(np.linalg.norm(x - y))))
            w_in = max(w_in, float(np.linalg.norm(C.project(sx) - sx)))
        add("nonexpansive", f"map[{j}]", w_ne, t_ne)
        add("maps_into_C", f"map[{j}]", w_in, REL_TOL * (1.0 + float(np.max(np.abs(Xs)))))

    return ValidationReport(samples, seed, tuple(checks), len(bif_idx) + len(map_idx),
                            len(p.bifunctions) + len(p.maps))
