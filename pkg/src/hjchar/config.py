"""Run configuration: a single TOML file declaring problem, tolerances, solver knobs."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analytic import make_data
from .geometry import BoundaryData, Domain, Problem
from .hopf import HopfOptions
from .quadform import SpdForm


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    form: SpdForm
    problem: Problem
    singular_tol: float
    energy_tol: float
    cluster_tol: float
    hopf_options: HopfOptions
    dt: float
    seed: int
    verify: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key '{key}' in [{where}]")
    return table[key]


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    prob_tbl = _require(raw, "problem", "")
    n = int(_require(prob_tbl, "dimension", "problem"))
    matrix = _require(prob_tbl, "matrix", "problem")
    if len(matrix) != n * n:
        raise ConfigError(f"[problem] matrix must have {n * n} row-major entries, got {len(matrix)}")
    try:
        form = SpdForm.from_matrix(np.asarray(matrix, dtype=float).reshape(n, n))
    except ValueError as exc:
        raise ConfigError(f"[problem] matrix: {exc}")

    dom_tbl = _require(prob_tbl, "domain", "problem")
    kind = _require(dom_tbl, "kind", "problem.domain")
    try:
        if kind == "box":
            domain = Domain.box(_require(dom_tbl, "lower", "problem.domain"),
                                _require(dom_tbl, "upper", "problem.domain"))
        elif kind == "ball":
            domain = Domain.ball(_require(dom_tbl, "center", "problem.domain"),
                                 float(_require(dom_tbl, "radius", "problem.domain")))
        elif kind == "whole_space":
            domain = Domain.whole_space(n)
        else:
            raise ConfigError(f"[problem.domain] unknown kind {kind!r}")
    except ValueError as exc:
        raise ConfigError(f"[problem.domain] {exc}")
    if domain.n != n:
        raise ConfigError("[problem.domain] bounds dimension does not match [problem] dimension")

    data_tbl = _require(prob_tbl, "data", "problem")
    try:
        if "registry" in data_tbl:
            params = {k: v for k, v in data_tbl.items() if k != "registry"}
            data = make_data(data_tbl["registry"], domain, form, params)
        elif "grid_file" in data_tbl:
            data = load_grid_data(data_tbl["grid_file"], n)
        else:
            raise ConfigError("[problem.data] needs 'registry' or 'grid_file'")
    except ValueError as exc:
        raise ConfigError(f"[problem.data] {exc}")

    try:
        problem = Problem(domain=domain, data=data)
    except ValueError as exc:
        raise ConfigError(str(exc))

    tol_tbl = raw.get("tolerances", {})
    singular_tol = float(tol_tbl.get("singular_tol", 1e-6))
    energy_tol = float(tol_tbl.get("energy_tol", 1e-6))
    cluster_tol = float(tol_tbl.get("cluster_tol", 1e-7))
    if min(singular_tol, energy_tol, cluster_tol) <= 0:
        raise ConfigError("[tolerances] all tolerances must be positive")

    sol_tbl = raw.get("solver", {})
    grid = int(sol_tbl.get("grid", 64))
    dt = float(sol_tbl.get("dt", 1e-3))
    if grid < 8:
        raise ConfigError("[solver] grid must be >= 8 points per axis")
    if dt <= 0:
        raise ConfigError("[solver] dt must be positive")
    opts = HopfOptions(grid_pts=grid,
                       max_newton=int(sol_tbl.get("newton_steps", 40)),
                       cluster_tol=cluster_tol,
                       dedup_dist=float(sol_tbl.get("dedup_dist", 1e-4)))
    seed = int(raw.get("seed", 0))
    return RunConfig(form=form, problem=problem, singular_tol=singular_tol,
                     energy_tol=energy_tol, cluster_tol=cluster_tol,
                     hopf_options=opts, dt=dt, seed=seed,
                     verify=raw.get("verify", {}), raw=raw)


def load_grid_data(path, n: int) -> BoundaryData:
    """Initial datum sampled on a tensor grid: CSV rows are x1..xn,value;
    evaluated by multilinear interpolation (linear extrapolation outside)."""
    from scipy.interpolate import RegularGridInterpolator

    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError:
        raise ConfigError(f"grid data file not found: {path}")
    if table.shape[1] != n + 1:
        raise ConfigError(f"grid file must have {n + 1} columns (coordinates then value)")
    coords = table[:, :n]
    vals = table[:, n]
    axes = [np.unique(coords[:, i]) for i in range(n)]
    shape = tuple(a.size for a in axes)
    if int(np.prod(shape)) != table.shape[0]:
        raise ConfigError("grid file rows do not form a full tensor grid")
    order = np.lexsort(tuple(coords[:, i] for i in reversed(range(n))))
    grid_vals = vals[order].reshape(shape)
    interp = RegularGridInterpolator(axes, grid_vals, method="linear",
                                     bounds_error=False, fill_value=None)

    def initial(y):
        y = np.asarray(y, dtype=float)
        return np.asarray(interp(y), dtype=float)

    # Lipschitz bound from grid differences, padded 10%
    lip = 0.0
    for i in range(n):
        if shape[i] > 1:
            d = np.diff(grid_vals, axis=i)
            h = np.min(np.diff(axes[i]))
            lip = max(lip, float(np.max(np.abs(d))) / h)
    return BoundaryData(initial=initial, lipschitz_bound=1.1 * lip,
                        lower_bound=float(np.min(vals)))
