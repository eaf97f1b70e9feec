"""Reachable gradients, superdifferential hulls, and the energy-minimizing selection.

At a point X = (t, x), each minimizer y of the slice representation contributes a
reachable gradient (tau, p) = (-L((x-y)/(t-s)), A^{-1}(x-y)/(t-s)).  The
superdifferential is the convex hull of these vertices; the full Hamiltonian
F(tau, p) = tau + H(p) vanishes on the vertices and its minimum over the hull is
strictly negative exactly at singular points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Problem, WHOLE_SPACE
from .hopf import HopfOptions, HopfValue, SliceWindow, hopf_value, slice_value
from .quadform import SpdForm

DEFAULT_SINGULAR_TOL = 1e-6
DEFAULT_ENERGY_TOL = 1e-6
VERTEX_DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class Covector:
    """A space-time gradient candidate P = (tau, p) with energy F = tau + H(p)."""

    tau: float
    p: np.ndarray
    energy: float

    @classmethod
    def make(cls, tau: float, p, form: SpdForm) -> "Covector":
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return cls(tau=float(tau), p=p, energy=float(tau) + form.hamiltonian(p))

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.tau], self.p))


@dataclass(frozen=True)
class SuperDiff:
    point: tuple                 # (t, x)
    vertices: list               # reachable gradients (Covector)
    min_energy: float
    min_selection: Covector
    hull_weights: np.ndarray     # barycentric coordinates of min_selection
    singular: bool
    u_value: float


def reachable_gradients(problem: Problem, form: SpdForm, t: float, x,
                        t_bar: float = 0.0,
                        u_on_slice: Optional[Callable] = None,
                        opts: Optional[HopfOptions] = None,
                        hv: Optional[HopfValue] = None) -> list:
    """Vertices of the superdifferential at (t, x) from slice minimizers.

    With t_bar = 0 the minimization runs over the full parabolic boundary, so each
    minimizer carries its own time s; with t_bar > 0 it runs over the t_bar-slice
    (requires a certified window or an exact slice callable ``u_on_slice``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if hv is None:
        hv = _representation(problem, form, t, x, t_bar, u_on_slice, opts)
    verts = []
    for m in hv.minimizers:
        dt = t - m.s
        q = (x - m.y) / dt
        verts.append(Covector.make(tau=-form.lagrangian(q),
                                   p=form.grad_lagrangian(q), form=form))
    return _dedup_vertices(verts)


def _representation(problem, form, t, x, t_bar, u_on_slice, opts) -> HopfValue:
    if t_bar == 0.0:
        return hopf_value(problem, form, t, x, opts)
    if u_on_slice is None:
        raise ValueError("t_bar > 0 requires u_on_slice (exact or hopf-backed slice values)")
    return slice_value(problem, form, t_bar, t, x, u_on_slice, opts)


def _dedup_vertices(verts, tol: float = VERTEX_DEDUP_TOL):
    kept = []
    for v in verts:
        if not any(max(abs(v.tau - k.tau), float(np.max(np.abs(v.p - k.p)))) <= tol
                   for k in kept):
            kept.append(v)
    return kept


# ---------------------------------------------------------------------------
# simplex-constrained energy minimization

def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def energy_min_selection(vertices, form: SpdForm, max_iter: int = 500,
                         grad_tol: float = 1e-10):
    """Argmin of F over the convex hull of ``vertices``.

    Minimizes sum_k w_k tau_k + H(sum_k w_k p_k) over the simplex; closed form for
    one or two vertices, projected gradient with exact quadratic line search
    otherwise.  Returns (Covector, weights).
    """
    if not vertices:
        raise ValueError("vertices must be non-empty")
    taus = np.array([v.tau for v in vertices])
    ps = np.stack([v.p for v in vertices])
    k = len(vertices)
    if k == 1:
        return vertices[0], np.array([1.0])
    if k == 2:
        dp = ps[0] - ps[1]
        a = float(dp @ form.a @ dp)
        b = float((taus[0] - taus[1]) + dp @ form.a @ ps[1])
        lam = 0.5 if a == 0 else float(np.clip(-b / a, 0.0, 1.0))
        if a == 0:  # linear in lam: pick the cheaper endpoint
            lam = 1.0 if taus[0] < taus[1] else 0.0
        w = np.array([lam, 1.0 - lam])
    else:
        w = np.full(k, 1.0 / k)
        G = ps @ form.a @ ps.T  # gradient of H-part in weight space
        lip = max(np.linalg.eigvalsh(G)[-1], 1e-12)
        for _ in range(max_iter):
            g = taus + G @ w
            w_proj = project_to_simplex(w - g / lip)
            d = w_proj - w
            if np.linalg.norm(d) <= grad_tol:
                break
            # exact line search on the quadratic objective along d
            quad = float(d @ G @ d)
            lin = float(g @ d)
            alpha = 1.0 if quad <= 0 else float(np.clip(-lin / quad, 0.0, 1.0))
            if alpha == 0.0:
                break
            w = w + alpha * d
    p = w @ ps
    tau = float(w @ taus)
    return Covector.make(tau, p, form), w


def directional_derivative(vertices, v) -> float:
    """min over vertices of <(tau, p), V> (equals the min over the hull)."""
    if not vertices:
        raise ValueError("vertices must be non-empty")
    v = np.asarray(v, dtype=float)
    return float(min(float(c.as_vector() @ v) for c in vertices))


def exposed_face(vertices, v, tol: float = 1e-9):
    """Vertices achieving the minimum of <., V> within tol."""
    if not vertices:
        raise ValueError("vertices must be non-empty")
    v = np.asarray(v, dtype=float)
    vals = np.array([float(c.as_vector() @ v) for c in vertices])
    return [c for c, val in zip(vertices, vals) if val <= vals.min() + tol]


def v_transform_superdiff(u_value: float, t: float, t_bar: float, vertices):
    """Superdifferential of v_tbar(t,x) = (t - t_bar) u(t,x):
    each (tau, p) maps to (u + (t - t_bar) tau, (t - t_bar) p)."""
    if not t > t_bar:
        raise ValueError("v transform requires t > t_bar")
    dt = t - t_bar
    return [(u_value + dt * c.tau, dt * c.p) for c in vertices]


def superdifferential(problem: Problem, form: SpdForm, t: float, x,
                      t_bar: float = 0.0,
                      u_on_slice: Optional[Callable] = None,
                      opts: Optional[HopfOptions] = None,
                      singular_tol: float = DEFAULT_SINGULAR_TOL) -> SuperDiff:
    """Full superdifferential summary at (t, x): vertices, energy minimum, flag."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    hv = _representation(problem, form, t, x, t_bar, u_on_slice, opts)
    verts = reachable_gradients(problem, form, t, x, t_bar, u_on_slice, opts, hv=hv)
    sel, w = energy_min_selection(verts, form)
    return SuperDiff(point=(float(t), x.copy()), vertices=verts,
                     min_energy=sel.energy, min_selection=sel, hull_weights=w,
                     singular=sel.energy < -singular_tol, u_value=hv.value)


# ---------------------------------------------------------------------------
# monotonicity suites

@dataclass(frozen=True)
class MonotonicityReport:
    max_excess: float
    n_pairs: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_excess <= self.tol


def _sample_window_points(window: SliceWindow, rng, m: int, problem: Problem):
    t_c, x_c = window.center
    pts = []
    while len(pts) < m:
        t = t_c + rng.uniform(-window.radius, window.radius)
        x = x_c + rng.uniform(-window.radius, window.radius, size=x_c.size)
        d2 = (t - t_c) ** 2 + float(np.sum((x - x_c) ** 2))
        if t > window.t_bar and d2 < window.radius ** 2 and bool(problem.domain.contains(x)):
            pts.append((t, x))
    return pts


def _random_hull_covector(sd_vertices, rng, form):
    w = rng.dirichlet(np.ones(len(sd_vertices)))
    tau = float(sum(wi * c.tau for wi, c in zip(w, sd_vertices)))
    p = sum(wi * c.p for wi, c in zip(w, sd_vertices))
    return Covector.make(tau, p, form)


def monotonicity_check(problem: Problem, form: SpdForm, window: SliceWindow,
                       pair_count: int, rng_seed: int,
                       u_on_slice: Optional[Callable] = None,
                       opts: Optional[HopfOptions] = None,
                       tol: float = 1e-7) -> MonotonicityReport:
    """Sharp joint monotonicity of D+ v_tbar on a certified window:
    <P1 - P2, X1 - X2> <= 2 L(x1 - x2) for random point pairs and random
    superdifferential elements."""
    rng = np.random.default_rng(rng_seed)
    pts = _sample_window_points(window, rng, 2 * pair_count, problem)
    max_excess = -np.inf
    for i in range(pair_count):
        (t1, x1), (t2, x2) = pts[2 * i], pts[2 * i + 1]
        exc = _pair_excess(problem, form, window, t1, x1, t2, x2, rng, u_on_slice, opts)
        max_excess = max(max_excess, exc)
    return MonotonicityReport(max_excess=float(max_excess), n_pairs=pair_count, tol=tol)


def _pair_excess(problem, form, window, t1, x1, t2, x2, rng, u_on_slice, opts):
    covs = []
    us = []
    for t, x in ((t1, x1), (t2, x2)):
        sd = superdifferential(problem, form, t, x, t_bar=window.t_bar,
                               u_on_slice=u_on_slice, opts=opts)
        covs.append(_random_hull_covector(sd.vertices, rng, form))
        us.append(sd.u_value)
    p1_full, p2_full = (
        np.concatenate(([u + (t - window.t_bar) * c.tau], (t - window.t_bar) * c.p))
        for u, t, c in zip(us, (t1, t2), covs)
    )
    dx_full = np.concatenate(([t1 - t2], x1 - x2))
    return float((p1_full - p2_full) @ dx_full) - 2.0 * form.lagrangian(x1 - x2)


def same_time_monotonicity_check(problem: Problem, form: SpdForm, window: SliceWindow,
                                 pair_count: int, rng_seed: int,
                                 u_on_slice: Optional[Callable] = None,
                                 opts: Optional[HopfOptions] = None,
                                 tol: float = 1e-7) -> MonotonicityReport:
    """Classical spatial semiconcavity corollary on same-time pairs:
    <p1 - p2, x1 - x2> <= lambda_max |x1 - x2|^2 / (t - t_bar)."""
    rng = np.random.default_rng(rng_seed)
    pts = _sample_window_points(window, rng, 2 * pair_count, problem)
    max_excess = -np.inf
    for i in range(pair_count):
        (t1, x1), (_, x2) = pts[2 * i], pts[2 * i + 1]
        t = t1
        ps = []
        for x in (x1, x2):
            sd = superdifferential(problem, form, t, x, t_bar=window.t_bar,
                                   u_on_slice=u_on_slice, opts=opts)
            ps.append(_random_hull_covector(sd.vertices, rng, form).p)
        bound = form.lambda_max * float(np.sum((x1 - x2) ** 2)) / (t - window.t_bar)
        exc = float((ps[0] - ps[1]) @ (x1 - x2)) - bound
        max_excess = max(max_excess, exc)
    return MonotonicityReport(max_excess=float(max_excess), n_pairs=pair_count, tol=tol)
