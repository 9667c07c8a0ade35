"""Checks on fitted and reference paths.

Transversality residuals, log-growth rates of co-states along divergent
paths, sweeps over grid size and kernel choice, and basin membership for
models with several steady states.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import NoBracket, RidgelessError, ShootingDiverged
from .kernels import KernelSpec, TrainingGrid
from .models import ModelSpec, Trajectory
from .reference import (
    SteadyState,
    integrate_ivp,
    reference_trajectory,
    relative_error,
    shooting_solve,
    steady_states,
)
from .solver import KernelSolution, SolverConfig, penalized_norm, solve

log = logging.getLogger(__name__)

#: fraction of the time window averaged into the tail growth rate
TAIL_FRACTION = 0.2


# --- transversality ----------------------------------------------------------


@dataclass
class TransversalityReport:
    times: np.ndarray
    #: ``exp(-r t) x(t) * mu(t)``, one column per state
    values: np.ndarray
    terminal: np.ndarray

    @property
    def terminal_max(self) -> float:
        return float(np.max(np.abs(self.terminal)))


def discounted_products(times, x, mu, r: float) -> np.ndarray:
    """``exp(-r t) x(t) * mu(t)`` row by row."""
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float).reshape(times.size, -1)
    mu = np.asarray(mu, dtype=float).reshape(times.size, -1)
    return np.exp(-r * times)[:, None] * x * mu


def transversality_residual(sol: KernelSolution, horizon: float = 200.0, n_points: int = 50) -> TransversalityReport:
    """Discounted state/co-state products on log-spaced times up to ``horizon``.

    Times are ``geomspace(1, horizon + 1, n_points) - 1``, so the first is 0
    and the last is ``horizon``.
    """
    if horizon < sol.grid.horizon:
        raise ValueError(f"horizon {horizon} is shorter than the training horizon {sol.grid.horizon}")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    times = np.geomspace(1.0, horizon + 1.0, int(n_points)) - 1.0
    times[0], times[-1] = 0.0, horizon
    traj = sol.trajectory(times)
    vals = discounted_products(times, traj.x_path, traj.mu_path, sol.model.r)
    return TransversalityReport(times, vals, vals[-1].copy())


# --- divergence rates --------------------------------------------------------


@dataclass
class DivergenceReport:
    times: np.ndarray
    #: ``mudot / mu`` per co-state; NaN after a zero crossing of ``mu``
    rates: np.ndarray
    tail_rate: np.ndarray
    discount_rate: float

    @property
    def exceeds_discount(self) -> bool:
        """True when some co-state's tail rate exceeds ``r``."""
        tail = self.tail_rate[np.isfinite(self.tail_rate)]
        return bool(tail.size and np.any(tail > self.discount_rate))


def divergence_rate(model: ModelSpec, trajectory: Trajectory) -> DivergenceReport:
    """Logarithmic growth rate ``mudot / mu`` along ``trajectory``.

    ``mudot`` is recomputed from the co-state equation when the trajectory
    does not carry it. The tail rate is the mean over the last 20% of the
    time window.
    """
    t = np.asarray(trajectory.times, dtype=float)
    mu = trajectory.mu_path
    if trajectory.mudot_path is not None:
        mudot = trajectory.mudot_path
    else:
        with np.errstate(all="ignore"):
            mudot = model.costate_rhs(trajectory.x_path, mu, trajectory.y_path)
    with np.errstate(all="ignore"):
        rates = mudot / mu
    # a sign change (or exact zero) of mu makes the log rate meaningless
    sign0 = np.sign(mu[:1])
    crossed = np.cumsum(np.sign(mu) != sign0, axis=0) > 0
    rates = np.where(crossed, np.nan, rates)
    if t.size:
        tail = t >= t[-1] - TAIL_FRACTION * (t[-1] - t[0])
        tail_vals = rates[tail]
        with np.errstate(all="ignore"):
            tail_rate = np.where(np.all(np.isfinite(tail_vals), axis=0), np.mean(tail_vals, axis=0), np.nan)
    else:
        tail_rate = np.full(mu.shape[1], np.nan)
    return DivergenceReport(t, rates, tail_rate, model.r)


def log_growth_rate(times, values) -> np.ndarray:
    """Finite-difference ``d log|v| / dt`` for a sampled scalar path."""
    return np.gradient(np.log(np.abs(np.asarray(values, dtype=float))), np.asarray(times, dtype=float))


# --- sweeps ------------------------------------------------------------------


@dataclass
class SweepCell:
    """One configuration of a sweep and its metrics."""

    cell: int
    nu: float
    ell: float
    N: int
    seed: Optional[int] = None
    x0: Optional[float] = None
    #: keyed by variable label, e.g. ``x[0]``
    max_rel_error: dict = field(default_factory=dict)
    min_rel_error: dict = field(default_factory=dict)
    norm_sq: float = np.nan
    runtime: float = np.nan
    status: str = "ok"
    message: str = ""
    extra: dict = field(default_factory=dict)
    solution: Optional[KernelSolution] = field(default=None, repr=False, compare=False)


REPORT_COLUMNS = (
    "cell",
    "nu",
    "ell",
    "N",
    "seed",
    "x0",
    "variable",
    "max_rel_error",
    "min_rel_error",
    "norm_sq",
    "runtime",
    "status",
)


@dataclass
class SweepReport:
    axis: str
    cells: list

    def __len__(self):
        return len(self.cells)

    def failed(self) -> list:
        return [c for c in self.cells if c.status != "ok"]

    def max_error(self, variable: str) -> np.ndarray:
        return np.array([c.max_rel_error.get(variable, np.nan) for c in self.cells])

    def rows(self, include_runtime: bool = True) -> list:
        """Long-format rows, one per cell and variable.

        Cells without error metrics (for example failed ones) still get one
        row with an empty ``variable``.
        """
        extra_keys = sorted({k for c in self.cells for k in c.extra})
        out = []
        for c in self.cells:
            variables = sorted(c.max_rel_error) or [""]
            for v in variables:
                row = {
                    "cell": c.cell,
                    "nu": c.nu,
                    "ell": c.ell,
                    "N": c.N,
                    "seed": "" if c.seed is None else c.seed,
                    "x0": "" if c.x0 is None else c.x0,
                    "variable": v,
                    "max_rel_error": c.max_rel_error.get(v, np.nan),
                    "min_rel_error": c.min_rel_error.get(v, np.nan),
                    "norm_sq": c.norm_sq,
                    "runtime": c.runtime if include_runtime else "",
                    "status": c.status,
                }
                for k in extra_keys:
                    row[k] = c.extra.get(k, "")
                out.append(row)
        return out

    def to_csv(self, path, include_runtime: bool = True) -> None:
        rows = self.rows(include_runtime)
        extra_keys = sorted({k for c in self.cells for k in c.extra})
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(REPORT_COLUMNS) + extra_keys, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: format_value(v) for k, v in row.items()})


def format_value(v) -> str:
    """Full-precision text for CSV cells (17 significant digits for floats)."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g") if np.isfinite(v) else ("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def _error_names(model: ModelSpec, variables):
    names = {}
    groups = {"x": model.state_names, "mu": model.costate_names, "y": model.jump_names}
    for g in variables:
        for i, n in enumerate(groups[g]):
            names[(g, i)] = n
    return names


def _fit_cell(cell: SweepCell, model, grid, kernel, config, reference, variables) -> SweepCell:
    tic = time.perf_counter()
    try:
        sol = solve(model, grid, kernel, config)
        cell.solution = sol
        cell.norm_sq = penalized_norm(sol)
        if reference is not None:
            rep = relative_error(sol, reference, variables=variables, names=_error_names(model, variables))
            cell.max_rel_error, cell.min_rel_error = rep.max_error, rep.min_error
    except RidgelessError as exc:
        cell.status = type(exc).__name__
        cell.message = str(exc)
        log.warning("sweep cell %d failed: %s", cell.cell, exc)
    cell.runtime = time.perf_counter() - tic
    return cell


def consistency_sweep(
    model: ModelSpec,
    kernel: Optional[KernelSpec],
    config: Optional[SolverConfig],
    N_list: Sequence[int],
    sampling: str = "equispaced",
    seed: int = 0,
    horizon: float = 40.0,
    reference: Optional[Trajectory] = None,
    variables=("x", "y"),
) -> SweepReport:
    """Fit the model for each grid size in ``N_list``.

    Grids cover ``[0, horizon]``, either equispaced or as sorted uniform
    draws (with 0 prepended) seeded by ``seed``. Errors are measured
    against ``reference`` (by default a shooting benchmark on 401 points
    over ``[0, horizon]``). Failed fits are recorded, not raised.
    """
    N_list = [int(n) for n in N_list]
    if any(b < a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be non-decreasing")
    if sampling not in ("equispaced", "uniform-iid"):
        raise ValueError(f"unknown sampling {sampling!r}")
    kernel = kernel or KernelSpec()
    if reference is None:
        reference = reference_trajectory(model, np.linspace(0.0, horizon, 401))
    cells = []
    for i, n in enumerate(N_list):
        if sampling == "equispaced":
            grid = TrainingGrid.equispaced(horizon, n)
            cell_seed = None
        else:
            grid = TrainingGrid.uniform_iid(horizon, n, seed)
            cell_seed = seed
        cell = SweepCell(i, kernel.nu, kernel.lengthscale, len(grid), seed=cell_seed)
        cells.append(_fit_cell(cell, model, grid, kernel, config, reference, variables))
    return SweepReport("N", cells)


def robustness_sweep(
    model: ModelSpec,
    kernel_grid: Sequence,
    config: Optional[SolverConfig] = None,
    grid: Optional[TrainingGrid] = None,
    reference: Optional[Trajectory] = None,
    eval_times=None,
    scale: float = 1.0,
    variables=("x", "y"),
) -> SweepReport:
    """Fit the model once per ``(nu, ell)`` pair.

    The default grid is ``{0, 1, ..., 40}`` and errors are measured on 401
    points over ``[0, 1.5 T]`` against a shooting benchmark.
    """
    kernels = [KernelSpec(nu, ell, scale) for nu, ell in kernel_grid]
    grid = grid or TrainingGrid(np.arange(41.0))
    if reference is None:
        if eval_times is None:
            eval_times = np.linspace(0.0, 1.5 * grid.horizon, 401)
        reference = reference_trajectory(model, eval_times)
    cells = []
    for i, k in enumerate(kernels):
        cell = SweepCell(i, k.nu, k.lengthscale, len(grid))
        cells.append(_fit_cell(cell, model, grid, k, config, reference, variables))
    return SweepReport("nu_ell", cells)


# --- multiple steady states --------------------------------------------------


def nearest_steady_state(x_end, states: Sequence[SteadyState]) -> tuple:
    """Index of the steady state closest to ``x_end`` and the relative gap."""
    x_end = np.atleast_1d(np.asarray(x_end, dtype=float))
    gaps = [float(np.max(np.abs(x_end - s.x_ss) / np.abs(s.x_ss))) for s in states]
    k = int(np.argmin(gaps))
    return k, gaps[k]


def discounted_welfare(model: ModelSpec, trajectory: Trajectory, utility, target: SteadyState) -> float:
    """``int_0^T e^{-rt} u(y) dt`` plus the steady-state continuation value."""
    t = trajectory.times
    r = model.r
    flow = np.exp(-r * t) * utility(trajectory.y_path[:, 0])
    tail = np.exp(-r * t[-1]) * utility(target.y_ss[0]) / r
    return float(integrate.simpson(flow, x=t) + tail)


def basin_choice(
    model: ModelSpec,
    states: Sequence[SteadyState],
    T: float = 40.0,
    utility=np.log,
    n_eval: int = 4001,
) -> tuple:
    """Steady state reached by the optimal path from ``model.initial_state``.

    Shoots towards every candidate steady state and keeps the reachable
    path with the highest discounted welfare. Returns ``(index, welfares)``
    with ``-inf`` for unreachable targets.
    """
    welfare = []
    for s in states:
        try:
            res = shooting_solve(model, T=T, target=s, n_eval=n_eval)
        except (ShootingDiverged, NoBracket, RidgelessError) as exc:
            log.debug("target %s unreachable: %s", s.x_ss, exc)
            welfare.append(-np.inf)
            continue
        if res.trajectory.terminated_early or not np.all(np.isfinite(res.trajectory.y_path)):
            welfare.append(-np.inf)
            continue
        welfare.append(discounted_welfare(model, res.trajectory, utility, s))
    if not np.any(np.isfinite(welfare)):
        raise ShootingDiverged("no steady state is reachable from this initial condition")
    return int(np.argmax(welfare)), welfare


def skiba_threshold(
    model: ModelSpec,
    states: Optional[Sequence[SteadyState]] = None,
    bracket: Optional[tuple] = None,
    tol: float = 1e-3,
    T: float = 40.0,
    utility=np.log,
) -> float:
    """Initial state separating the basins of two steady states.

    Bisects on :func:`basin_choice` between the two steady-state capital
    levels (or ``bracket``). Single-state models only.
    """
    if model.state_dim != 1:
        raise ValueError("threshold search needs a single state variable")
    states = list(states) if states is not None else steady_states(model)
    if len(states) < 2:
        raise NoBracket("fewer than two steady states; there is no basin boundary")
    states = sorted(states, key=lambda s: float(s.x_ss[0]))[:1] + sorted(states, key=lambda s: float(s.x_ss[0]))[-1:]
    lo, hi = bracket or (float(states[0].x_ss[0]), float(states[1].x_ss[0]))

    def side(x0):
        return basin_choice(model.with_initial_state([x0]), states, T=T, utility=utility)[0]

    s_lo, s_hi = side(lo), side(hi)
    if s_lo == s_hi:
        raise NoBracket(f"both ends of [{lo}, {hi}] lead to the same steady state")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if side(mid) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def initial_condition_sweep(
    model: ModelSpec,
    x0_list: Sequence[float],
    kernel: Optional[KernelSpec] = None,
    config: Optional[SolverConfig] = None,
    grid: Optional[TrainingGrid] = None,
    states: Optional[Sequence[SteadyState]] = None,
    threshold: Optional[float] = None,
    basin_tolerance: float = 0.05,
) -> SweepReport:
    """Fit the model from each initial state and classify where it ends.

    Each cell records the terminal ``x(T)``, the index of the nearest
    steady state and, when ``threshold`` is given, whether that steady
    state lies on the same side of the threshold as ``x0`` with a terminal
    gap within ``basin_tolerance``.
    """
    kernel = kernel or KernelSpec()
    grid = grid or TrainingGrid(np.arange(41.0))
    states = sorted(states if states is not None else steady_states(model), key=lambda s: float(s.x_ss[0]))
    cells = []
    for i, x0 in enumerate(x0_list):
        m = model.with_initial_state([x0])
        cell = SweepCell(i, kernel.nu, kernel.lengthscale, len(grid), x0=float(x0))
        _fit_cell(cell, m, grid, kernel, config, None, ())
        if cell.solution is not None:
            x_end = cell.solution.trajectory([grid.horizon]).x_path[0]
            k, gap = nearest_steady_state(x_end, states)
            cell.extra.update(x_terminal=float(x_end[0]), steady_state=k, x_ss=float(states[k].x_ss[0]), gap=gap)
            if threshold is not None:
                x_ss = float(states[k].x_ss[0])
                correct = (x_ss > threshold) == (x0 > threshold) and gap <= basin_tolerance
                cell.extra["correct"] = bool(correct)
        cells.append(cell)
    return SweepReport("x0", cells)


def ivp_from_costate(model: ModelSpec, mu0, T: float, tol: float = 1e-10, n_eval: int = 2001) -> Trajectory:
    """Forward path for a given initial co-state, truncated where it fails."""
    return integrate_ivp(
        model, model.initial_state, mu0, T, tol=tol, times=np.linspace(0.0, T, n_eval), on_failure="truncate"
    )
