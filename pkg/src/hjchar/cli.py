"""Command-line front end: hj {solve, singular-scan, trace, verify, example}.

Exit codes: 0 success, 1 verification-suite failure, 2 configuration error.
CSV output uses a header row, comma separator, and 17-significant-digit floats so
values round-trip losslessly.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from .analytic import EpsExample
from .characteristics import (derivative_identity_check, dissipation_check,
                              persistence_run, trace)
from .config import ConfigError, RunConfig, load_config
from .hopf import hopf_value, make_slice_window, SliceWindow
from .superdiff import monotonicity_check, superdifferential


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                     else str(v) for v in row) + "\n")


def _load(config_path) -> RunConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("HJ_THREADS", "1")))
    except ValueError:
        return 1


def _parse_floats(text: str):
    return [float(v) for v in text.split(",") if v.strip()]


@click.group()
def main():
    """Hopf-formula Hamilton-Jacobi solver and singularity tracker."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--grid", required=True, help="nt,nx[,ny,...] evaluation grid sizes")
@click.option("--t-range", default="0.1,2.0", show_default=True)
@click.option("--x-range", default=None,
              help="per-axis 'a,b;c,d' ranges (default: domain bounds or [-2,2])")
@click.option("--out", "out_path", required=True, type=click.Path())
def solve(config_path, grid, t_range, x_range, out_path):
    """Evaluate u on a space-time grid; emits (t, x..., u, n_minimizers)."""
    cfg = _load(config_path)
    n = cfg.problem.n
    sizes = [int(v) for v in grid.split(",")]
    if len(sizes) != n + 1:
        click.echo(f"config error: --grid needs {n + 1} sizes for dimension {n}", err=True)
        sys.exit(2)
    t_lo, t_hi = _parse_floats(t_range)
    if x_range is not None:
        xr = [_parse_floats(part) for part in x_range.split(";")]
    elif cfg.problem.domain.kind == "box":
        xr = [[lo, hi] for lo, hi in zip(cfg.problem.domain.lower, cfg.problem.domain.upper)]
    elif cfg.problem.domain.kind == "ball":
        c, r = cfg.problem.domain.center, cfg.problem.domain.radius
        xr = [[ci - r, ci + r] for ci in c]
    else:
        xr = [[-2.0, 2.0]] * n
    ts = np.linspace(t_lo, t_hi, sizes[0])
    axes = [np.linspace(a, b, m) for (a, b), m in zip(xr, sizes[1:])]
    mesh = np.meshgrid(*axes, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)
    pts = [(float(t), x) for t in ts for x in xs
           if not cfg.problem.domain.bounded or bool(cfg.problem.domain.contains(x))]

    def eval_one(tx):
        t, x = tx
        hv = hopf_value(cfg.problem, cfg.form, t, x, cfg.hopf_options)
        return (t, *x, hv.value, len(hv.minimizers))

    with ThreadPoolExecutor(max_workers=_n_threads()) as pool:
        rows = list(pool.map(eval_one, pts))
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + ["u", "n_minimizers"]
    _write_csv(out_path, header, rows)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@main.command("singular-scan")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--t", "t_val", required=True, type=float)
@click.option("--grid", required=True, help="nx[,ny,...] scan grid sizes")
@click.option("--x-range", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def singular_scan(config_path, t_val, grid, x_range, out_path):
    """Scan min-energy of the superdifferential at fixed t;
    emits (x..., min_energy, n_vertices, singular)."""
    cfg = _load(config_path)
    n = cfg.problem.n
    sizes = [int(v) for v in grid.split(",")]
    if len(sizes) != n:
        click.echo(f"config error: --grid needs {n} sizes for dimension {n}", err=True)
        sys.exit(2)
    if x_range is not None:
        xr = [_parse_floats(part) for part in x_range.split(";")]
    elif cfg.problem.domain.kind == "box":
        xr = [[lo, hi] for lo, hi in zip(cfg.problem.domain.lower, cfg.problem.domain.upper)]
    else:
        xr = [[-2.0, 2.0]] * n
    axes = [np.linspace(a, b, m) for (a, b), m in zip(xr, sizes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    xs = np.stack([m.ravel() for m in mesh], axis=-1)

    def eval_one(x):
        sd = superdifferential(cfg.problem, cfg.form, t_val, x,
                               opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
        return (*x, sd.min_energy, len(sd.vertices), int(sd.singular))

    with ThreadPoolExecutor(max_workers=_n_threads()) as pool:
        rows = list(pool.map(eval_one, [x for x in xs
                                        if not cfg.problem.domain.bounded
                                        or bool(cfg.problem.domain.contains(x))]))
    header = [f"x{i + 1}" for i in range(n)] + ["min_energy", "n_vertices", "singular"]
    _write_csv(out_path, header, rows)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@main.command("trace")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--start", required=True, help="t0,x0[,y0,...]")
@click.option("--dt", default=1e-3, show_default=True, type=float)
@click.option("--tmax", required=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def trace_cmd(config_path, start, dt, tmax, out_path):
    """Trace a generalized characteristic; emits (s, gamma..., tau, p..., F, u, singular)."""
    cfg = _load(config_path)
    vals = _parse_floats(start)
    if len(vals) != cfg.problem.n + 1:
        click.echo(f"config error: --start needs t0 plus {cfg.problem.n} coordinates", err=True)
        sys.exit(2)
    t0, x0 = vals[0], np.array(vals[1:])
    arc = trace(cfg.problem, cfg.form, t0, x0, dt, tmax,
                opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
    n = cfg.problem.n
    header = (["s"] + [f"gamma{i + 1}" for i in range(n)] + ["tau"]
              + [f"p{i + 1}" for i in range(n)] + ["F", "u", "singular"])
    rows = [(arc.s[k], *arc.gamma[k], arc.tau[k], *arc.p[k], arc.F[k], arc.u[k],
             int(arc.F[k] < -cfg.singular_tol)) for k in range(len(arc))]
    _write_csv(out_path, header, rows)
    click.echo(f"wrote {len(rows)} rows to {out_path} (status: {arc.status})")


def _verify_start(cfg):
    v = cfg.verify
    start = v.get("start")
    if start is None:
        start = [0.9] + [0.0] * cfg.problem.n
    return float(start[0]), np.asarray(start[1:], dtype=float)


def _run_suite(cfg: RunConfig, suite: str) -> dict:
    t0, x0 = _verify_start(cfg)
    dt = float(cfg.verify.get("dt", cfg.dt))
    t_max = float(cfg.verify.get("t_max", t0 + 1.0))
    if suite == "monotonicity":
        if cfg.problem.domain.bounded:
            window = make_slice_window(cfg.problem, cfg.form, t0, x0,
                                       opts=cfg.hopf_options, rng_seed=cfg.seed)
        else:
            window = SliceWindow(center=(t0, x0), radius=float(cfg.verify.get("radius", 0.4)),
                                 t_bar=0.0, constants={})
        rep = monotonicity_check(cfg.problem, cfg.form, window,
                                 pair_count=int(cfg.verify.get("pairs", 200)),
                                 rng_seed=cfg.seed, opts=cfg.hopf_options)
        return {"suite": suite, "n_checks": rep.n_pairs,
                "max_excess": rep.max_excess, "pass": bool(rep.passed)}
    if suite == "dissipation":
        arc = trace(cfg.problem, cfg.form, t0, x0, dt, t_max,
                    opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
        rep = dissipation_check(arc, t_bar=float(cfg.verify.get("t_bar", 0.0)))
        return {"suite": suite, "n_checks": len(arc),
                "max_excess": rep.max_excess, "pass": bool(rep.passed)}
    if suite == "persistence":
        rep = persistence_run(cfg.problem, cfg.form, t0, x0, dt, t_max,
                              opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
        return {"suite": suite, "n_checks": rep.samples,
                "max_excess": 0.0 if rep.passed else rep.offending["min_energy"],
                "pass": bool(rep.passed)}
    if suite == "identity":
        arc = trace(cfg.problem, cfg.form, t0, x0, dt, t_max,
                    opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
        arc_half = trace(cfg.problem, cfg.form, t0, x0, dt / 2, t_max,
                         opts=cfg.hopf_options, singular_tol=cfg.singular_tol)
        e1 = derivative_identity_check(arc, cfg.problem, cfg.form).max_err
        e2 = derivative_identity_check(arc_half, cfg.problem, cfg.form).max_err
        excess = e2 - (0.6 * e1 + 1e-4)
        return {"suite": suite, "n_checks": len(arc) + len(arc_half),
                "max_excess": excess, "pass": bool(excess <= 0.0)}
    raise ConfigError(f"unknown suite {suite!r}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--suite", required=True,
              type=click.Choice(["monotonicity", "dissipation", "persistence", "identity"]))
@click.option("--out", "out_path", default=None, type=click.Path())
def verify(config_path, suite, out_path):
    """Run a verification suite; writes a JSON report {suite, n_checks, max_excess, pass}."""
    cfg = _load(config_path)
    try:
        report = _run_suite(cfg, suite)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    text = json.dumps(report, indent=2)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    click.echo(text)
    sys.exit(0 if report["pass"] else 1)


@main.command()
@click.option("--eps", default=0.1, show_default=True, type=float)
@click.option("--fast", is_flag=True, help="smaller grids / larger dt for a quick look")
def example(eps, fast):
    """Reproduce the sharp 1-d example end to end and print a pass/fail table."""
    from .quadform import SpdForm
    from .superdiff import energy_min_selection, reachable_gradients

    ex = EpsExample(epsilon=eps)
    form = SpdForm.identity(1)
    problem = ex.problem()
    results = []

    # 1. Hopf values against the closed form on a (t, x) grid
    nt, nx = (20, 20) if fast else (100, 100)
    ts = np.linspace(0.1, 2.0, nt)
    xs = np.linspace(-2.0, 2.0, nx)
    worst = 0.0
    for t in ts:
        for x in xs:
            hv = hopf_value(problem, form, float(t), [float(x)])
            worst = max(worst, abs(hv.value - ex.solution(t, [x])))
    results.append(("hopf vs closed form (max |err|)", worst, worst <= 1e-6))

    # 2. energy-minimizing selection on the singular line
    worst = 0.0
    for s in (0.4, 0.9, 1.9):
        verts = reachable_gradients(problem, form, s, [0.0])
        sel, _ = energy_min_selection(verts, form)
        ref = ex.min_energy_covector(s, form)
        worst = max(worst, abs(sel.tau - ref.tau), float(np.max(np.abs(sel.p - ref.p))))
    results.append(("selection vs argmin (max |err|)", worst, worst <= 1e-6))

    # 3. dissipation sharpness along the singular arc
    dt = 1e-2 if fast else 1e-3
    arc = trace(problem, form, 0.9, [0.0], dt, 1.9)
    ratio = ((0.9 + eps) / (arc.s + eps)) ** 2
    sharp_err = float(np.max(np.abs(arc.F - ratio * arc.F[0])))
    gen = dissipation_check(arc, t_bar=0.0)
    results.append(("dissipation sharpness (max |err|)", sharp_err, sharp_err <= 1e-4))
    results.append(("general dissipation excess", gen.max_excess, gen.passed))

    # 4. persistence to t_max
    t_max = 3.0 if fast else 10.0
    rep = persistence_run(problem, form, 0.9, [0.0], 1e-2, t_max)
    results.append((f"persistence to t={t_max} ({rep.status})", rep.singular_duration,
                    rep.passed and rep.status == "max_time"))

    width = max(len(name) for name, _, _ in results)
    all_ok = True
    for name, value, ok in results:
        click.echo(f"{name:<{width}}  {value: .3e}  {'PASS' if ok else 'FAIL'}")
        all_ok &= ok
    sys.exit(0 if all_ok else 1)


if __name__ == "__main__":
    main()
