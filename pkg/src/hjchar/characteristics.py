"""Generalized characteristics: tracing, dissipation, derivative identity, persistence.

The arc follows gamma' = grad H(p) = A p with (tau, p) the energy-minimizing
selection of the superdifferential, stepped by explicit Euler with the
right-continuous piecewise-constant selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import Problem
from .hopf import HopfOptions, SliceWindow, hopf_value, make_slice_window
from .quadform import SpdForm
from .superdiff import DEFAULT_SINGULAR_TOL, superdifferential

STATUS_RUNNING = "running"
STATUS_HIT_BOUNDARY = "hit_boundary"
STATUS_LEFT_WINDOW = "left_window"
STATUS_MAX_TIME = "max_time"

BOUNDARY_EDGE_TOL = 1e-9
REWINDOW_FRACTION = 0.8


@dataclass(frozen=True)
class CharArc:
    """Sampled generalized characteristic with the selection recorded per sample."""

    s: np.ndarray          # (m,) strictly increasing, uniform step dt
    gamma: np.ndarray      # (m, n)
    tau: np.ndarray        # (m,)
    p: np.ndarray          # (m, n)
    F: np.ndarray          # (m,) selection energy
    u: np.ndarray          # (m,) solution value along the arc
    n_vertices: np.ndarray  # (m,) superdifferential vertex counts
    t0: float
    dt: float
    status: str
    end_s: float           # where stepping stopped (continuation point)
    end_gamma: np.ndarray

    def __len__(self) -> int:
        return self.s.size


def _superdiff_at(problem, form, t, x, t_bar, u_on_slice, opts, singular_tol):
    return superdifferential(problem, form, t, x, t_bar=t_bar,
                             u_on_slice=u_on_slice, opts=opts,
                             singular_tol=singular_tol)


def trace(problem: Problem, form: SpdForm, t0: float, x0, dt: float, t_max: float,
          t_bar: float = 0.0, u_on_slice: Optional[Callable] = None,
          window: Optional[SliceWindow] = None,
          opts: Optional[HopfOptions] = None,
          singular_tol: float = DEFAULT_SINGULAR_TOL) -> CharArc:
    """Trace the generalized characteristic from (t0, x0) until t_max, the boundary
    of Omega, or (if a window is supplied) until leaving 80% of its radius."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not t_bar < t0:
        raise ValueError("t_bar must be < t0")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    s = float(t0)
    rows = []
    status = STATUS_RUNNING
    while True:
        if window is not None and not _inside_window_core(window, s, x):
            status = STATUS_LEFT_WINDOW
            break
        if problem.domain.bounded and (
                not bool(problem.domain.contains(x))
                or float(problem.domain.boundary_distance(x)) <= BOUNDARY_EDGE_TOL):
            status = STATUS_HIT_BOUNDARY
            break
        sd = _superdiff_at(problem, form, s, x, t_bar, u_on_slice, opts, singular_tol)
        sel = sd.min_selection
        rows.append((s, x.copy(), sel.tau, sel.p.copy(), sel.energy,
                     sd.u_value, len(sd.vertices)))
        if s + dt > t_max + 1e-12:
            status = STATUS_MAX_TIME
            break
        x = x + dt * form.grad_hamiltonian(sel.p)
        s += dt
    if not rows:
        raise RuntimeError(f"arc truncated before the first sample (status={status})")
    return _pack_arc(rows, t0, dt, status, s, x)


def _inside_window_core(window: SliceWindow, s: float, x) -> bool:
    t_c, x_c = window.center
    d = math.hypot(s - t_c, float(np.linalg.norm(x - x_c)))
    return s > window.t_bar and d < REWINDOW_FRACTION * window.radius


def _pack_arc(rows, t0, dt, status, end_s, end_gamma) -> CharArc:
    s = np.array([r[0] for r in rows])
    return CharArc(
        s=s,
        gamma=np.stack([r[1] for r in rows]),
        tau=np.array([r[2] for r in rows]),
        p=np.stack([r[3] for r in rows]),
        F=np.array([r[4] for r in rows]),
        u=np.array([r[5] for r in rows]),
        n_vertices=np.array([r[6] for r in rows]),
        t0=float(t0), dt=float(dt), status=status,
        end_s=float(end_s), end_gamma=np.asarray(end_gamma, dtype=float).copy(),
    )


# ---------------------------------------------------------------------------
# checks along arcs

@dataclass(frozen=True)
class IdentityReport:
    max_err: float
    n_checked: int
    jump_count: int


def selection_jumps(arc: CharArc, p_jump_factor: float = 100.0) -> np.ndarray:
    """Sample indices where the selection jumps: a vertex-count change or a
    p-increment far larger than the smooth O(dt) drift."""
    if len(arc) < 2:
        return np.array([], dtype=int)
    dp = np.linalg.norm(np.diff(arc.p, axis=0), axis=-1)
    p_scale = 1.0 + float(np.max(np.abs(arc.p)))
    thresh = p_jump_factor * arc.dt * p_scale
    jump = (np.diff(arc.n_vertices) != 0) | (dp > thresh)
    return np.nonzero(jump)[0] + 1


def derivative_identity_check(arc: CharArc, problem: Problem, form: SpdForm,
                              jump_window: int = 5) -> IdentityReport:
    """Forward difference of u along the arc against tau + A p . p, away from
    selection jumps."""
    if len(arc) < 3:
        raise ValueError("arc must have at least 3 samples")
    jumps = selection_jumps(arc)
    excluded = np.zeros(len(arc), dtype=bool)
    for j in jumps:
        lo = max(0, j - jump_window)
        hi = min(len(arc), j + jump_window + 1)
        excluded[lo:hi] = True
    fd = (arc.u[1:] - arc.u[:-1]) / arc.dt
    rhs = arc.tau[:-1] + np.einsum("ki,ij,kj->k", arc.p[:-1], form.a, arc.p[:-1])
    ok = ~excluded[:-1]
    errs = np.abs(fd - rhs)[ok]
    return IdentityReport(max_err=float(np.max(errs)) if errs.size else 0.0,
                          n_checked=int(ok.sum()), jump_count=int(jumps.size))


@dataclass(frozen=True)
class DissipationReport:
    max_excess: float
    per_sample: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_excess <= self.tol


def dissipation_check(arc: CharArc, t_bar: float, tol: float = 1e-5) -> DissipationReport:
    """Energy dissipation along the arc:
    F(s) <= ((t0 - t_bar)/(s - t_bar))^2 F(t0), reported as excess <= 0."""
    if not t_bar < arc.t0:
        raise ValueError("t_bar must be < t0")
    ratio = ((arc.t0 - t_bar) / (arc.s - t_bar)) ** 2
    excess = arc.F - ratio * arc.F[0]
    return DissipationReport(max_excess=float(np.max(excess)), per_sample=excess, tol=tol)


# ---------------------------------------------------------------------------
# persistence

@dataclass(frozen=True)
class PersistenceReport:
    singular_duration: float
    status: str
    falsified: bool
    offending: Optional[dict]
    samples: int
    rewindow_count: int

    @property
    def passed(self) -> bool:
        return not self.falsified


def persistence_run(problem: Problem, form: SpdForm, t0: float, x0,
                    dt: float, t_max: float,
                    opts: Optional[HopfOptions] = None,
                    singular_tol: float = DEFAULT_SINGULAR_TOL,
                    slice_factory: Optional[Callable] = None) -> PersistenceReport:
    """Iterate trace + re-windowing from a singular start, asserting the singular
    flag at every sample until the boundary or t_max.

    Loss of singularity is retried once with dt/4 substeps (refinement jitter at
    well merges); a persistent loss is reported as a falsification, never passed
    silently.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    s = float(t0)
    whole_space = not problem.domain.bounded

    window = None
    u_slice = None
    rewindows = 0

    def refresh_window():
        nonlocal window, u_slice, rewindows
        window = make_slice_window(problem, form, s, x, opts=opts)
        u_slice = (slice_factory(window.t_bar) if slice_factory is not None
                   else _hopf_slice_callable(problem, form, window.t_bar, opts))
        rewindows += 1

    if not whole_space:
        refresh_window()

    def sd_at(ss, xx):
        t_bar = 0.0 if whole_space else window.t_bar
        return _superdiff_at(problem, form, ss, xx, t_bar, u_slice, opts, singular_tol)

    sd = sd_at(s, x)
    if not sd.singular:
        raise ValueError(f"(t0, x0) is not singular (min_energy = {sd.min_energy:.3e})")

    last_singular_s = s
    prev_energy = sd.min_energy
    n_samples = 1
    status = STATUS_RUNNING
    while True:
        if s + dt > t_max + 1e-12:
            status = STATUS_MAX_TIME
            break
        x_prev, s_prev, sd_prev = x.copy(), s, sd
        x_next = x + dt * form.grad_hamiltonian(sd.min_selection.p)
        s_next = s + dt
        if problem.domain.bounded and (
                not bool(problem.domain.contains(x_next))
                or float(problem.domain.boundary_distance(x_next)) <= BOUNDARY_EDGE_TOL):
            status = STATUS_HIT_BOUNDARY
            break
        if window is not None and not _inside_window_core(window, s_next, x_next):
            s, x = s_next, x_next
            refresh_window()
            sd = sd_at(s, x)
        else:
            s, x = s_next, x_next
            sd = sd_at(s, x)
        n_samples += 1
        if not sd.singular and prev_energy < -10.0 * singular_tol:
            # retry the step in dt/4 substeps to ride through refinement noise
            x_retry, s_retry, sd_r = x_prev.copy(), s_prev, sd_prev
            sub = dt / 4.0
            for _ in range(4):
                x_retry = x_retry + sub * form.grad_hamiltonian(sd_r.min_selection.p)
                s_retry += sub
                sd_r = sd_at(s_retry, x_retry)
            if sd_r.singular:
                x, sd = x_retry, sd_r
        if not sd.singular:
            return PersistenceReport(
                singular_duration=last_singular_s - t0, status="falsified",
                falsified=True,
                offending={"s": s, "x": x.copy(), "min_energy": sd.min_energy},
                samples=n_samples, rewindow_count=rewindows)
        last_singular_s = s
        prev_energy = sd.min_energy
    return PersistenceReport(singular_duration=last_singular_s - t0, status=status,
                             falsified=False, offending=None,
                             samples=n_samples, rewindow_count=rewindows)


def _hopf_slice_callable(problem, form, t_bar, opts):
    def u_slice(y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return np.array([hopf_value(problem, form, t_bar, yi, opts).value for yi in y])
    return u_slice
