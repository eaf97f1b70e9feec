"""Hopf-formula evaluation, minimizer enumeration, and certified slice windows.

u(t,x) = min over boundary points (s,y), s < t, of (t-s) L((x-y)/(t-s)) + phi(s,y).

The minimization runs a tensor grid scan over each boundary face followed by
projected damped-Newton refinement from every grid-local minimum; the Newton
model combines the exact Hessian of the quadratic transport term with a
finite-difference model of the data term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.ndimage import minimum_filter

from .geometry import BALL, BOX, WHOLE_SPACE, Problem
from .quadform import SpdForm


@dataclass(frozen=True)
class HopfOptions:
    grid_pts: int = 64           # tensor grid points per axis
    max_newton: int = 40
    grad_tol: float = 1e-9
    cluster_tol: float = 1e-7    # objective gap for co-minimizers
    dedup_dist: float = 1e-4     # sup-norm distance separating distinct wells
    max_refine: int = 16         # refinement starts per face
    trunc_safety: float = 2.0    # whole-space admissible-set safety factor
    sphere_samples: int = 4096   # grid-only fallback for ball lateral faces, n > 3

    def __post_init__(self):
        if self.grid_pts < 8:
            raise ValueError("grid_pts must be >= 8")


@dataclass(frozen=True)
class Minimizer:
    s: float
    y: np.ndarray
    objective: float


@dataclass(frozen=True)
class HopfValue:
    value: float
    minimizers: list
    refined: bool


@dataclass(frozen=True)
class SliceWindow:
    """Ball B_tbar(X', R) on which u equals the inf-convolution of its tbar-slice."""

    center: tuple                # (t', x')
    radius: float
    t_bar: float
    constants: dict = field(default_factory=dict)

    def contains(self, t: float, x) -> bool:
        t_c, x_c = self.center
        d = math.hypot(t - t_c, float(np.linalg.norm(np.asarray(x) - x_c)))
        return t > self.t_bar and d < self.radius


class WindowConstructionError(RuntimeError):
    """No (R, t_bar) satisfying the window invariants was found."""


# ---------------------------------------------------------------------------
# boundary faces

@dataclass
class _Face:
    """A smoothly parametrized patch of admissible boundary points.

    ``embed`` maps parameter arrays z of shape (m, d) to (s (m,), y (m, n)).
    """

    embed: Callable
    lo: np.ndarray
    hi: np.ndarray
    refinable: bool = True
    project: Optional[Callable] = None   # z -> feasible z (e.g. into a ball)
    mask: Optional[Callable] = None      # z (m, d) -> bool mask of valid grid points
    samples: Optional[np.ndarray] = None  # explicit candidate z's instead of a grid


def _const_s_face(s0: float, lo, hi, project=None, mask=None) -> _Face:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))

    def embed(z):
        return np.full(z.shape[0], s0), z

    return _Face(embed=embed, lo=lo, hi=hi, project=project, mask=mask)


def _box_lateral_faces(domain, t: float, s_lo: float = 0.0) -> list:
    """One face per box side: parameters (s, tangential coordinates)."""
    faces = []
    s_hi = t * (1.0 - 1e-12)
    n = domain.n
    for axis in range(n):
        for side_val in (domain.lower[axis], domain.upper[axis]):
            tang = [i for i in range(n) if i != axis]
            lo = np.concatenate(([s_lo], domain.lower[tang]))
            hi = np.concatenate(([s_hi], domain.upper[tang]))

            def embed(z, axis=axis, side_val=side_val, tang=tuple(tang)):
                y = np.empty((z.shape[0], n))
                y[:, axis] = side_val
                for j, i in enumerate(tang):
                    y[:, i] = z[:, 1 + j]
                return z[:, 0], y

            faces.append(_Face(embed=embed, lo=lo, hi=hi))
    return faces


def _ball_lateral_faces(domain, t: float, opts: HopfOptions, s_lo: float = 0.0) -> list:
    n = domain.n
    c, r = domain.center, domain.radius
    s_hi = t * (1.0 - 1e-12)
    if n == 1:
        faces = []
        for pt in (c - r, c + r):
            def embed(z, pt=pt):
                return z[:, 0], np.full((z.shape[0], 1), float(pt[0]))
            faces.append(_Face(embed=embed, lo=np.array([s_lo]), hi=np.array([s_hi])))
        return faces
    if n == 2:
        def embed(z):
            th = z[:, 1]
            y = c + r * np.stack([np.cos(th), np.sin(th)], axis=-1)
            return z[:, 0], y
        # angle bounds extended beyond one period so wrap-around minima refine freely
        return [_Face(embed=embed, lo=np.array([s_lo, -np.pi]),
                      hi=np.array([s_hi, 3 * np.pi]))]
    if n == 3:
        def embed(z):
            th, ph = z[:, 1], z[:, 2]
            y = c + r * np.stack([np.sin(ph) * np.cos(th),
                                  np.sin(ph) * np.sin(th),
                                  np.cos(ph)], axis=-1)
            return z[:, 0], y
        return [_Face(embed=embed, lo=np.array([s_lo, -np.pi, 0.0]),
                      hi=np.array([s_hi, 3 * np.pi, np.pi]))]
    # n > 3: grid-only sphere sampling, no smooth refinement
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((opts.sphere_samples, n))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    ss = np.linspace(s_lo, s_hi, opts.grid_pts)
    zz = np.array([[s, k] for s in ss for k in range(opts.sphere_samples)], dtype=float)

    def embed(z):
        return z[:, 0], c + r * dirs[z[:, 1].astype(int)]

    return [_Face(embed=embed, lo=np.array([s_lo, 0]), hi=np.array([s_hi, 0]),
                  refinable=False, samples=zz)]


# ---------------------------------------------------------------------------
# refinement

def _fd_gradient(f, z, lo, hi, h: np.ndarray):
    g = np.empty_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] = min(z[i] + h[i], hi[i])
        zm[i] = max(z[i] - h[i], lo[i])
        dz = zp[i] - zm[i]
        if dz <= 0:
            g[i] = 0.0
            continue
        g[i] = (f(zp) - f(zm)) / dz
    return g


def _fd_hessian(f, z, lo, hi, h: np.ndarray, f0: float):
    d = z.size
    H = np.empty((d, d))
    shifted = []
    for i in range(d):
        zp, zm = z.copy(), z.copy()
        zp[i] = min(z[i] + h[i], hi[i])
        zm[i] = max(z[i] - h[i], lo[i])
        shifted.append((zp, zm, f(zp), f(zm)))
    for i in range(d):
        zpi, zmi, fpi, fmi = shifted[i]
        hi_eff = 0.5 * (zpi[i] - zmi[i])
        if hi_eff <= 0:
            H[i, i] = 1.0
        else:
            H[i, i] = (fpi - 2 * f0 + fmi) / hi_eff ** 2
        for j in range(i + 1, d):
            zpp, zmm = z.copy(), z.copy()
            zpp[i] = shifted[i][0][i]
            zpp[j] = shifted[j][0][j]
            zmm[i] = shifted[i][1][i]
            zmm[j] = shifted[j][1][j]
            di = 0.5 * (shifted[i][0][i] - shifted[i][1][i])
            dj = 0.5 * (shifted[j][0][j] - shifted[j][1][j])
            if di <= 0 or dj <= 0:
                H[i, j] = H[j, i] = 0.0
                continue
            fij = f(zpp) + f(zmm)
            H[i, j] = H[j, i] = (fij - shifted[i][2] - shifted[i][3]
                                 - shifted[j][2] - shifted[j][3] + 2 * f0) / (2 * di * dj)
    return H


def _newton_refine(f, z0, lo, hi, opts: HopfOptions, project=None):
    """Projected damped Newton with finite-difference derivatives.

    Returns (z, f(z), converged).
    """
    scale = np.maximum(1.0, np.abs(z0))
    hg = 1e-6 * scale
    hh = 5e-5 * scale
    z = np.clip(z0.astype(float), lo, hi)
    if project is not None:
        z = project(z)
    fz = f(z)
    converged = False
    for _ in range(opts.max_newton):
        g = _fd_gradient(f, z, lo, hi, hg)
        pg = g.copy()
        pg[(z <= lo + 1e-14) & (g > 0)] = 0.0
        pg[(z >= hi - 1e-14) & (g < 0)] = 0.0
        if np.linalg.norm(pg) <= opts.grad_tol * (1.0 + abs(fz)):
            converged = True
            break
        H = _fd_hessian(f, z, lo, hi, hh, fz)
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        w = np.maximum(w, max(1e-8, 1e-8 * np.max(np.abs(w))))
        step = -V @ ((V.T @ g) / w)
        alpha, improved = 1.0, False
        for _ in range(40):
            z_new = np.clip(z + alpha * step, lo, hi)
            if project is not None:
                z_new = project(z_new)
            f_new = f(z_new)
            if f_new < fz:
                z, fz, improved = z_new, f_new, True
                break
            alpha *= 0.5
        if not improved:
            converged = np.linalg.norm(pg) <= 1e3 * opts.grad_tol * (1.0 + abs(fz))
            break
    return z, fz, converged


def _grid_local_minima(vals_flat: np.ndarray, shape: tuple):
    """Indices (flat) of discrete local minima on a tensor grid."""
    vals = vals_flat.reshape(shape)
    filt = minimum_filter(vals, size=3, mode="nearest")
    mask = vals <= filt
    return np.nonzero(mask.ravel())[0]


def _minimize_over_faces(faces, objective, opts: HopfOptions):
    """Grid scan + Newton refinement over every face; returns clustered minimizers."""
    candidates = []     # (s, y, f, converged)
    for face in faces:
        d = face.lo.size
        if face.samples is not None:
            zs = face.samples
            s, y = face.embed(zs)
            vals = objective(s, y)
            order = np.argsort(vals)[: opts.max_refine]
            for i in order:
                candidates.append((float(s[i]), y[i].copy(), float(vals[i]), False))
            continue
        axes = [np.linspace(face.lo[i], face.hi[i], opts.grid_pts) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        zs = np.stack([m.ravel() for m in mesh], axis=-1)
        s, y = face.embed(zs)
        vals = np.asarray(objective(s, y), dtype=float)
        if face.mask is not None:
            vals = np.where(face.mask(zs), vals, np.inf)
        shape = tuple(opts.grid_pts for _ in range(d))
        loc = _grid_local_minima(vals, shape)
        loc = loc[np.isfinite(vals[loc])]
        loc = loc[np.argsort(vals[loc])][: opts.max_refine]
        for i in loc:
            if not face.refinable:
                candidates.append((float(s[i]), y[i].copy(), float(vals[i]), False))
                continue

            def f_single(z, face=face):
                ss, yy = face.embed(z[None, :])
                return float(objective(ss, yy)[0])

            z_ref, f_ref, conv = _newton_refine(f_single, zs[i].copy(),
                                                face.lo, face.hi, opts,
                                                project=face.project)
            ss, yy = face.embed(z_ref[None, :])
            candidates.append((float(ss[0]), yy[0].copy(), f_ref, conv))

    if not candidates:
        raise RuntimeError("empty admissible boundary set")
    candidates.sort(key=lambda c: c[2])
    best = candidates[0][2]
    near = [c for c in candidates if c[2] <= best + opts.cluster_tol]
    # cluster by position in (s, y) sup norm, keep the best representative
    kept = []
    for c in near:
        dup = False
        for k in kept:
            if max(abs(c[0] - k[0]), float(np.max(np.abs(c[1] - k[1])))) <= opts.dedup_dist:
                dup = True
                break
        if not dup:
            kept.append(c)
    refined = all(c[3] for c in kept) if any(f.refinable for f in faces) else False
    minimizers = [Minimizer(s=c[0], y=c[1], objective=c[2]) for c in kept]
    return HopfValue(value=best, minimizers=minimizers, refined=refined)


# ---------------------------------------------------------------------------
# admissible-set truncation for whole-space problems

def _truncation_radius(form: SpdForm, dt: float, data_at_x: float,
                       lower_bound: float, safety: float) -> float:
    """Coercivity radius: any Hopf minimizer y satisfies
    lambda_min |x-y|^2 / (2 dt) <= datum(x) - inf datum."""
    gap = max(data_at_x - lower_bound, 0.0)
    return safety * math.sqrt(2.0 * dt * gap / form.lambda_min) + 1e-3


# ---------------------------------------------------------------------------
# public operations

def hopf_value(problem: Problem, form: SpdForm, t: float, x, opts=None) -> HopfValue:
    """Evaluate u(t,x) by the Hopf formula and enumerate its global minimizers."""
    opts = opts or HopfOptions()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t <= 0:
        raise ValueError("hopf_value requires t > 0")
    dom = problem.domain
    if dom.bounded and not bool(dom.contains(x)):
        raise ValueError("x must lie in the closure of Omega")

    def objective(s, y):
        dt = t - s
        q = (x - y) / dt[:, None]
        return dt * form.lagrangian(q) + problem.phi(s, y)

    faces = []
    if dom.kind == WHOLE_SPACE:
        lb = getattr(problem.data, "lower_bound", -np.inf)
        if not np.isfinite(lb):
            lb = _sampled_lower_bound(problem, x, t, form, opts)
        r = _truncation_radius(form, t, float(problem.data.initial(x[None, :])[0]),
                               lb, opts.trunc_safety)
        faces.append(_const_s_face(0.0, x - r, x + r))
    elif dom.kind == BOX:
        faces.append(_const_s_face(0.0, dom.lower, dom.upper))
        faces.extend(_box_lateral_faces(dom, t))
    elif dom.kind == BALL:
        c, r = dom.center, dom.radius

        def project(z):
            d = z - c
            nrm = np.linalg.norm(d)
            return c + d * (r / nrm) if nrm > r else z

        def mask(zs):
            return np.linalg.norm(zs - c, axis=-1) <= r

        faces.append(_const_s_face(0.0, c - r, c + r, project=project, mask=mask))
        faces.extend(_ball_lateral_faces(dom, t, opts))
    else:
        raise ValueError(f"unknown domain kind {dom.kind!r}")
    return _minimize_over_faces(faces, objective, opts)


def _sampled_lower_bound(problem, x, t, form, opts) -> float:
    # best-effort floor when the datum carries no global lower bound: sample a
    # Lipschitz-sized window and keep the observed minimum
    l = max(problem.data.lipschitz_bound, 1.0)
    r = 4.0 * t * l / form.lambda_min + 1.0
    rng = np.random.default_rng(0)
    pts = x + rng.uniform(-r, r, size=(4096, x.size))
    return float(np.min(problem.data.initial(pts)))


def slice_value(problem: Problem, form: SpdForm, t_bar: float, t: float, x,
                u_on_slice: Callable, opts=None,
                u_lower_bound: Optional[float] = None) -> HopfValue:
    """Time-slice representation: min over y in Omega of
    (t - t_bar) L((x - y)/(t - t_bar)) + u(t_bar, y)."""
    opts = opts or HopfOptions()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not t > t_bar >= 0:
        raise ValueError("slice_value requires t > t_bar >= 0")
    dt = t - t_bar

    def objective(s, y):
        q = (x - y) / dt
        return dt * form.lagrangian(q) + np.asarray(u_on_slice(y), dtype=float)

    dom = problem.domain
    if dom.kind == WHOLE_SPACE:
        if u_lower_bound is None:
            u_lower_bound = getattr(problem.data, "lower_bound", -np.inf)
        if not np.isfinite(u_lower_bound):
            u_lower_bound = _sampled_lower_bound(problem, x, dt, form, opts)
        u_x = float(np.asarray(u_on_slice(x[None, :]))[0])
        r = _truncation_radius(form, dt, u_x, u_lower_bound, opts.trunc_safety)
        faces = [_const_s_face(t_bar, x - r, x + r)]
    elif dom.kind == BOX:
        faces = [_const_s_face(t_bar, dom.lower, dom.upper)]
    elif dom.kind == BALL:
        c, r = dom.center, dom.radius

        def project(z):
            d = z - c
            nrm = np.linalg.norm(d)
            return c + d * (r / nrm) if nrm > r else z

        def mask(zs):
            return np.linalg.norm(zs - c, axis=-1) <= r

        faces = [_const_s_face(t_bar, c - r, c + r, project=project, mask=mask)]
    else:
        raise ValueError(f"unknown domain kind {dom.kind!r}")
    return _minimize_over_faces(faces, objective, opts)


# ---------------------------------------------------------------------------
# slice-window construction

def _default_u_eval(problem, form, opts):
    coarse = HopfOptions(grid_pts=max(24, opts.grid_pts // 2), max_newton=20,
                         cluster_tol=opts.cluster_tol, dedup_dist=opts.dedup_dist)

    def u_eval(t, x):
        if t <= 0:
            return float(problem.data.initial(np.atleast_1d(x)[None, :])[0])
        return hopf_value(problem, form, t, x, coarse).value

    return u_eval


def _estimate_lipschitz(problem, t_hi, region_radius, x_center, u_eval,
                        rng, pairs: int = 60) -> float:
    quots = []
    for _ in range(pairs):
        t1, t2 = rng.uniform(1e-3, t_hi, size=2)
        x1 = x_center + rng.uniform(-region_radius, region_radius, size=x_center.size)
        x2 = x_center + rng.uniform(-region_radius, region_radius, size=x_center.size)
        for x in (x1, x2):
            np.clip(x, *_omega_clip_bounds(problem), out=x)
        d = math.hypot(t1 - t2, float(np.linalg.norm(x1 - x2)))
        if d < 1e-8:
            continue
        quots.append(abs(u_eval(t1, x1) - u_eval(t2, x2)) / d)
    return 1.5 * max(quots) if quots else 1.0


def _omega_clip_bounds(problem):
    dom = problem.domain
    if dom.kind == BOX:
        return dom.lower, dom.upper
    if dom.kind == BALL:
        return dom.center - dom.radius / math.sqrt(dom.n), dom.center + dom.radius / math.sqrt(dom.n)
    return -np.inf, np.inf


def coercivity_radius(lam: float, l: float, r_prime: float) -> float:
    """Smallest K >= R' with lam (K - R')^2 = l (1 + K + R'), plus a 1e-6 nudge.

    Boundary candidates farther than K from x' cost more transport than any value
    gap, so Hopf minimizers stay inside B(x', K)."""
    if lam <= 0 or l <= 0 or r_prime < 0:
        raise ValueError("coercivity_radius needs lam, l > 0 and R' >= 0")
    disc = l * l + 4.0 * lam * l * (1.0 + 2.0 * r_prime)
    return r_prime + (l + math.sqrt(disc)) / (2.0 * lam) + 1e-6


def make_slice_window(problem: Problem, form: SpdForm, t_prime: float, x_prime,
                      u_eval: Optional[Callable] = None, opts=None,
                      rng_seed: int = 0, m_samples: Optional[int] = None) -> SliceWindow:
    """Construct a certified window (R, t_bar) for the slice representation at X'.

    Follows the constructive constants: R' = min(boundary distance, t')/2, K from
    the coercivity inequality lambda (K - R')^2 = l (1 + K + R'), M = sampled sup
    of |u| near X' (times a 1.25 safety factor), then shrink R and raise t_bar
    until (d(x') - R)^2 / (t' - t_bar + R) > 4 M / lambda.
    """
    opts = opts or HopfOptions()
    dom = problem.domain
    if not dom.bounded:
        raise ValueError("slice windows are defined for bounded domains; "
                         "whole-space problems use t_bar = 0 directly")
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if t_prime <= 0 or not bool(dom.contains(x_prime)) or dom.boundary_distance(x_prime) <= 0:
        raise ValueError("(t', x') must be an interior point of Q")
    rng = np.random.default_rng(rng_seed)
    hopf_backed = u_eval is None
    if hopf_backed:
        u_eval = _default_u_eval(problem, form, opts)
    if m_samples is None:
        m_samples = 400 if hopf_backed else 10_000

    lam = form.lambda_min
    bd = float(dom.boundary_distance(x_prime))
    r_prime = 0.5 * min(bd, t_prime)
    l = _estimate_lipschitz(problem, t_prime + r_prime, bd, x_prime, u_eval, rng)
    k = coercivity_radius(lam, l, r_prime)

    # sampled sup of |u| on B(X', K) ∩ Q
    t_lo = max(1e-6, t_prime - k)
    t_smp = rng.uniform(t_lo, t_prime + k, size=m_samples)
    x_smp = x_prime + rng.uniform(-k, k, size=(m_samples, dom.n))
    keep = dom.contains(x_smp) & (dom.boundary_distance(x_smp) > 1e-9)
    keep &= (t_smp - t_prime) ** 2 + np.sum((x_smp - x_prime) ** 2, axis=1) <= k * k
    m_val = 0.0
    for ti, xi in zip(t_smp[keep], x_smp[keep]):
        m_val = max(m_val, abs(u_eval(float(ti), xi)))
    m_val *= 1.25

    radius = r_prime
    t_bar = max(0.0, t_prime - 0.5)
    t_bar += 0.25 * (t_prime - t_bar)
    for _ in range(60):
        ok = (radius < bd and 0.0 < t_bar < t_prime
              and (bd - radius) ** 2 / (t_prime - t_bar + radius) > 4.0 * m_val / lam)
        if ok:
            return SliceWindow(center=(float(t_prime), x_prime.copy()),
                               radius=float(radius), t_bar=float(t_bar),
                               constants={"K": k, "M": m_val, "l": l,
                                          "lambda_min": lam, "R_prime": r_prime})
        t_bar += 0.5 * (t_prime - t_bar)
        radius *= 0.75
    raise WindowConstructionError(
        f"no certified window at ({t_prime}, {x_prime}): point too close to the boundary")


def window_invariants(window: SliceWindow, problem: Problem, form: SpdForm) -> dict:
    """Re-check the three SliceWindow invariants by direct evaluation."""
    t_p, x_p = window.center
    r, t_bar = window.radius, window.t_bar
    k, m_val, l = window.constants["K"], window.constants["M"], window.constants["l"]
    lam = form.lambda_min
    bd = float(problem.domain.boundary_distance(x_p))
    closure_ok = (t_bar > 0.0 and r < bd and bool(problem.domain.contains(x_p)))
    k_ok = (k > r) and (lam * (k - r) ** 2 / (l * (1.0 + k + r)) >= 1.0)
    m_ok = (bd - r) ** 2 / (t_p - t_bar + r) > 4.0 * m_val / lam
    return {"closure_in_Q": closure_ok, "coercivity_K": k_ok, "interior_M": m_ok}
