"""Space-time cylinder Q = (0, inf) x Omega, boundary data, and the compatibility check.

Data callables are expected to be numpy-vectorized: ``initial(y)`` maps arrays of
shape (..., n) to (...), ``lateral(t, x)`` maps ((...), (..., n)) to (...).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quadform import SpdForm

BOX = "box"
BALL = "ball"
WHOLE_SPACE = "whole_space"

COMPAT_SLACK = 1e-9


@dataclass(frozen=True)
class Domain:
    """Spatial domain Omega: an axis-aligned box, a ball, or all of R^n."""

    kind: str
    n: int
    lower: Optional[np.ndarray] = None   # box
    upper: Optional[np.ndarray] = None   # box
    center: Optional[np.ndarray] = None  # ball
    radius: Optional[float] = None       # ball

    @classmethod
    def box(cls, lower, upper) -> "Domain":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(upper - lower <= 0):
            raise ValueError("box intervals must have positive length")
        return cls(kind=BOX, n=lower.size, lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius: float) -> "Domain":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        return cls(kind=BALL, n=center.size, center=center, radius=float(radius))

    @classmethod
    def whole_space(cls, n: int) -> "Domain":
        return cls(kind=WHOLE_SPACE, n=n)

    @property
    def bounded(self) -> bool:
        return self.kind != WHOLE_SPACE

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == WHOLE_SPACE:
            return np.ones(x.shape[:-1], dtype=bool) if x.ndim > 1 else np.bool_(True)
        if self.kind == BOX:
            return np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius

    def boundary_distance(self, x) -> np.ndarray:
        """Euclidean distance from x to the boundary of Omega (0 exactly on it)."""
        x = np.asarray(x, dtype=float)
        if self.kind == WHOLE_SPACE:
            shape = x.shape[:-1]
            return np.full(shape, np.inf) if shape else np.inf
        if self.kind == BALL:
            d = np.abs(np.linalg.norm(x - self.center, axis=-1) - self.radius)
            return d
        inside_margin = np.minimum(np.min(x - self.lower, axis=-1),
                                   np.min(self.upper - x, axis=-1))
        # outside points: distance to the box closure equals distance to the boundary
        excess = np.maximum(np.maximum(self.lower - x, x - self.upper), 0.0)
        outside = np.linalg.norm(excess, axis=-1)
        return np.where(inside_margin >= 0, inside_margin, outside)

    def sample_interior(self, rng: np.random.Generator, m: int,
                        box_fallback: float = 2.0) -> np.ndarray:
        """m uniform points in Omega (for whole_space: in [-box_fallback, box_fallback]^n)."""
        if self.kind == BOX:
            return rng.uniform(self.lower, self.upper, size=(m, self.n))
        if self.kind == BALL:
            z = rng.standard_normal((m, self.n))
            z /= np.linalg.norm(z, axis=-1, keepdims=True)
            r = self.radius * rng.uniform(size=(m, 1)) ** (1.0 / self.n)
            return self.center + r * z
        return rng.uniform(-box_fallback, box_fallback, size=(m, self.n))

    def sample_boundary(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """m points on the spatial boundary of a bounded Omega (per-face / sphere uniform)."""
        if self.kind == BALL:
            z = rng.standard_normal((m, self.n))
            z /= np.linalg.norm(z, axis=-1, keepdims=True)
            return self.center + self.radius * z
        if self.kind == BOX:
            pts = rng.uniform(self.lower, self.upper, size=(m, self.n))
            axes = rng.integers(0, self.n, size=m)
            sides = rng.integers(0, 2, size=m)
            vals = np.where(sides == 0, self.lower[axes], self.upper[axes])
            pts[np.arange(m), axes] = vals
            return pts
        raise ValueError("whole_space domain has no lateral boundary")


@dataclass(frozen=True)
class BoundaryData:
    """Initial datum u0 on the closure of Omega and lateral datum on (0, inf) x dOmega."""

    initial: Callable[[np.ndarray], np.ndarray]
    lateral: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    lipschitz_bound: float = 0.0
    # global lower bound of the datum when one is known; tightens the
    # whole-space admissible-set truncation
    lower_bound: float = -np.inf


@dataclass(frozen=True)
class Problem:
    domain: Domain
    data: BoundaryData

    def __post_init__(self):
        if self.domain.bounded and self.data.lateral is None:
            raise ValueError("bounded domains require lateral boundary data")

    @property
    def n(self) -> int:
        return self.domain.n

    def phi(self, t, x) -> np.ndarray:
        """Boundary datum at points of dQ: initial face where t == 0, lateral otherwise."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.data.lateral is None:
            return np.asarray(self.data.initial(x), dtype=float)
        init = np.asarray(self.data.initial(x), dtype=float)
        lat = np.asarray(self.data.lateral(t, x), dtype=float)
        return np.where(t == 0.0, init, lat)

    def validate_corner_agreement(self, rng: np.random.Generator,
                                  samples: int = 64, tol: float = 1e-10) -> float:
        """Max |initial - lateral| mismatch on {0} x dOmega; raises if above tol."""
        if not self.domain.bounded:
            return 0.0
        y = self.domain.sample_boundary(rng, samples)
        gap = np.max(np.abs(self.data.initial(y) - self.data.lateral(np.zeros(samples), y)))
        if gap > tol:
            raise ValueError(f"initial and lateral data disagree on {{0}} x dOmega by {gap:.3e}")
        return float(gap)


@dataclass(frozen=True)
class CompatibilityReport:
    violations: list
    max_excess: float
    vacuous: bool = False
    n_samples: int = 0

    @property
    def compatible(self) -> bool:
        return self.vacuous or self.max_excess <= 0.0


def _sample_parabolic_boundary(problem: Problem, rng: np.random.Generator,
                               m: int, horizon: float):
    """m points (t, y) on dQ: the initial face {0} x Omega or the lateral boundary."""
    on_initial = rng.uniform(size=m) < 0.5
    t = np.where(on_initial, 0.0, rng.uniform(0.0, horizon, size=m))
    y = np.empty((m, problem.n))
    n_init = int(on_initial.sum())
    if n_init:
        y[on_initial] = problem.domain.sample_interior(rng, n_init)
    if m - n_init:
        y[~on_initial] = problem.domain.sample_boundary(rng, m - n_init)
    return t, y


def check_compatibility(problem: Problem, form: SpdForm, sample_count: int,
                        rng_seed: int, horizon: float = 2.0) -> CompatibilityReport:
    """Sample boundary pairs and flag violations of the cone condition
    phi(t,x) - phi(s,y) <= (t-s) L((x-y)/(t-s)).

    On whole_space domains the parabolic boundary is {0} x R^n, so no pair with
    t > s exists and the condition is vacuous.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if not problem.domain.bounded:
        return CompatibilityReport(violations=[], max_excess=-np.inf, vacuous=True)
    rng = np.random.default_rng(rng_seed)
    t1, x1 = _sample_parabolic_boundary(problem, rng, sample_count, horizon)
    t2, x2 = _sample_parabolic_boundary(problem, rng, sample_count, horizon)
    # order each pair so that t > s; re-draw degenerate t == s pairs as t separated
    swap = t1 < t2
    t_hi = np.where(swap, t2, t1)
    t_lo = np.where(swap, t1, t2)
    x_hi = np.where(swap[:, None], x2, x1)
    x_lo = np.where(swap[:, None], x1, x2)
    ok = t_hi > t_lo
    t_hi, t_lo, x_hi, x_lo = t_hi[ok], t_lo[ok], x_hi[ok], x_lo[ok]
    dt = t_hi - t_lo
    cone = dt * form.lagrangian((x_hi - x_lo) / dt[:, None])
    excess = problem.phi(t_hi, x_hi) - problem.phi(t_lo, x_lo) - cone
    bad = excess > COMPAT_SLACK
    violations = [
        {"t": float(t_hi[i]), "x": x_hi[i].copy(),
         "s": float(t_lo[i]), "y": x_lo[i].copy(), "excess": float(excess[i])}
        for i in np.nonzero(bad)[0]
    ]
    return CompatibilityReport(violations=violations,
                               max_excess=float(np.max(excess)) if excess.size else -np.inf,
                               n_samples=int(excess.size))
