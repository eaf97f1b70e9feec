"""Closed-form reference data: the 1-d sharp-dissipation example and multi-well data.

Everything here is evaluated analytically, never through the numerical solver, so
comparisons against these values are independent checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryData, Domain, Problem
from .quadform import SpdForm
from .superdiff import Covector


@dataclass(frozen=True)
class EpsExample:
    """u_t + u_x^2 / 2 = 0 on (0, inf) x R with u(0, x) = (|x| - 1)^2 / (2 eps).

    Closed-form solution u(t, x) = (|x| - 1)^2 / (2 (t + eps)); the singular set is
    exactly (0, inf) x {0} and the singularity at x = 0 persists forever.
    """

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def initial(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1)
        return (r - 1.0) ** 2 / (2.0 * self.epsilon)

    def solution(self, t, x) -> np.ndarray:
        """(|x| - 1)^2 / (2 (t + eps)); x may be scalar, (n,), or (..., n)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=-1)
        out = (r - 1.0) ** 2 / (2.0 * (np.asarray(t, dtype=float) + self.epsilon))
        return float(out) if out.ndim == 0 else out

    def min_energy_covector(self, s: float, form: SpdForm) -> Covector:
        """Energy-minimizing selection on the singular line: (-1/(2(s+eps)^2), 0)."""
        if s < 0:
            raise ValueError("s must be >= 0")
        return Covector.make(-1.0 / (2.0 * (s + self.epsilon) ** 2),
                             np.zeros(form.n), form)

    def vertices_on_singular_line(self, s: float, form: SpdForm) -> list:
        """Reachable gradients at (s, 0) for n = 1: tau = -1/(2(s+eps)^2), p = ±1/(s+eps)."""
        c = s + self.epsilon
        return [Covector.make(-0.5 / c ** 2, np.array([sign / c]), form)
                for sign in (+1.0, -1.0)]

    def problem(self, n: int = 1) -> Problem:
        data = BoundaryData(initial=self.initial,
                            lipschitz_bound=np.inf,  # quadratic growth, only locally Lipschitz
                            lower_bound=0.0)
        return Problem(domain=Domain.whole_space(n), data=data)


# ---------------------------------------------------------------------------
# multi-well quadratic data

def two_well_solution(form: SpdForm, wells, sharpness: float, t, x) -> np.ndarray:
    """Whole-space viscosity solution for u0(y) = sharpness * min_w |y - w|^2.

    Per well the inf-convolution of c |y - w|^2 with the transport cost reduces,
    in the eigenbasis A = V diag(w_i) V^T with e = V^T (x - well), to
    c * sum_i e_i^2 / (1 + 2 c t w_i); the solution is the minimum over wells.
    The formula is exact at t = 0 (it degenerates to the datum) and vectorizes
    over matching leading shapes of ``t`` and ``x``.
    """
    wells = np.atleast_2d(np.asarray(wells, dtype=float))
    c = float(sharpness)
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1 and np.ndim(t) == 0
    pts = np.atleast_2d(x)
    t = np.asarray(t, dtype=float)
    eig, vecs = np.linalg.eigh(form.a)
    denom = 1.0 + 2.0 * c * t[..., None] * eig          # (..., n) or (n,)
    best = np.full(np.broadcast_shapes(pts.shape[:-1], t.shape), np.inf)
    for w in wells:
        e = (pts - w) @ vecs
        vals = c * np.sum(e * e / denom, axis=-1)
        best = np.minimum(best, vals)
    return float(best.ravel()[0]) if squeeze else best


def two_well_data(domain: Domain, form: SpdForm, wells, sharpness: float) -> BoundaryData:
    """Boundary data for u0(y) = sharpness * min_w |y - w|^2.

    On bounded domains the lateral datum is the restriction of the whole-space
    closed-form solution, so the Hopf solution of the bounded problem coincides
    with the whole-space one (the cone compatibility condition holds by dynamic
    programming).
    """
    wells = np.atleast_2d(np.asarray(wells, dtype=float))
    c = float(sharpness)
    if wells.shape[0] < 1:
        raise ValueError("need at least one well")
    if wells.shape[1] != domain.n:
        raise ValueError("well dimension does not match the domain")
    if domain.bounded and not bool(np.all(domain.contains(wells))):
        raise ValueError("wells must lie inside Omega for bounded domains")

    def initial(y):
        y = np.asarray(y, dtype=float)
        d2 = np.min(np.sum((y[..., None, :] - wells) ** 2, axis=-1), axis=-1)
        return c * d2

    lateral = None
    lip = np.inf
    if domain.bounded:
        def lateral(t, y):
            y = np.atleast_2d(np.asarray(y, dtype=float))
            t = np.broadcast_to(np.asarray(t, dtype=float), y.shape[:-1])
            return np.asarray(two_well_solution(form, wells, c, t, y))
        lip = _two_well_lipschitz(domain, form, wells, c)
    return BoundaryData(initial=initial, lateral=lateral,
                        lipschitz_bound=lip, lower_bound=0.0)


def _two_well_lipschitz(domain, form, wells, c) -> float:
    # |grad u0| <= 2 c rho with rho the farthest well distance over Omega; the time
    # slope of the solution is bounded by H at that gradient
    if domain.kind == "box":
        corners = np.stack(np.meshgrid(*zip(domain.lower, domain.upper),
                                       indexing="ij"), axis=-1).reshape(-1, domain.n)
        rho = float(np.max(np.linalg.norm(corners[:, None, :] - wells, axis=-1)))
    else:
        rho = float(np.max(np.linalg.norm(domain.center - wells, axis=-1))) + domain.radius
    g = 2.0 * c * rho
    a_norm = float(np.linalg.eigvalsh(form.a)[-1])
    return g + 0.5 * a_norm * g * g


# ---------------------------------------------------------------------------
# named data registry for run configs

def make_data(key: str, domain: Domain, form: SpdForm, params: dict) -> BoundaryData:
    """Build registry data: 'eps_example' (whole-space sharp example) or 'two_well'."""
    if key == "eps_example":
        ex = EpsExample(epsilon=float(params.get("epsilon", 0.1)))
        return BoundaryData(initial=ex.initial, lipschitz_bound=np.inf, lower_bound=0.0)
    if key == "two_well":
        wells = params.get("wells")
        if wells is None:
            raise ValueError("two_well data requires 'wells'")
        return two_well_data(domain, form, wells, float(params.get("sharpness", 0.5)))
    raise ValueError(f"unknown data registry key {key!r}")
