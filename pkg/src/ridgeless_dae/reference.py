"""Classical benchmarks for the kernel solutions.

Everything here is independent of the kernel machinery: an IVP integrator
that eliminates the jump variables by Newton's method, multi-start steady
state search, shooting on the terminal mismatch, a finite-horizon BVP
benchmark, closed-form asset prices, and relative-error reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .errors import NewtonFailure, NoBracket, ShootingDiverged, StepUnderflow
from .models import ModelSpec, Trajectory, level_jacobian, steady_state_residual

#: integration stops once any state or co-state exceeds this magnitude
BLOWUP = 1e12
#: largest relative gap |x(T) - x_ss| / |x_ss| accepted from shooting
ACCEPT_GAP = 1e-2


# --- algebraic elimination ---------------------------------------------------


def solve_jump(model: ModelSpec, x, mu, y_guess, tol: float = 1e-13, max_iter: int = 50):
    """Newton solve of ``H(x, mu, y) = 0`` for ``y``; vectorized over leading axes."""
    y = np.array(y_guess, dtype=float, copy=True)
    if model.jump_dim == 0:
        return y
    for _ in range(max_iter):
        with np.errstate(all="ignore"):
            h = model.H(x, mu, y)
        scale = 1.0 + np.max(np.abs(y))
        if np.all(np.isfinite(h)) and np.max(np.abs(h)) <= tol * scale:
            return y
        Hy = model.H_jac(x, mu, y)[2]
        try:
            step = np.linalg.solve(Hy, -h[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NewtonFailure("singular Jacobian of H with respect to y") from exc
        # damping: halve until the residual decreases and stays finite
        t = 1.0
        hn = np.linalg.norm(h)
        while t > 1e-10:
            cand = y + t * step
            with np.errstate(all="ignore"):
                hc = model.H(x, mu, cand)
            if np.all(np.isfinite(hc)) and np.linalg.norm(hc) < hn:
                break
            t *= 0.5
        else:
            raise NewtonFailure("line search failed while solving H = 0")
        y = cand
    with np.errstate(all="ignore"):
        h = model.H(x, mu, y)
    if np.all(np.isfinite(h)) and np.max(np.abs(h)) <= 1e3 * tol * (1.0 + np.max(np.abs(y))):
        return y
    raise NewtonFailure(f"Newton on H did not converge (|H| = {np.max(np.abs(h)):.2e})")


# --- IVP ---------------------------------------------------------------------


class _JumpElimination:
    """ODE right-hand side in ``(x, mu)`` with ``y`` recovered by warm-started Newton."""

    def __init__(self, model: ModelSpec, y_start, newton_tol, soft=False):
        self.soft = soft
        self.model = model
        self.y = np.asarray(y_start, dtype=float)
        self.tol = newton_tol
        self.M = model.state_dim

    def split(self, z):
        return z[: self.M], z[self.M :]

    def jump(self, x, mu):
        self.y = solve_jump(self.model, x, mu, self.y, tol=self.tol)
        return self.y

    def __call__(self, t, z):
        x, mu = self.split(z)
        if self.soft:
            try:
                y = self.jump(x, mu)
            except NewtonFailure:
                # rejected by the step-size control; repeated failure underflows
                return np.full(z.shape, np.nan)
        else:
            y = self.jump(x, mu)
        with np.errstate(all="ignore"):
            return np.concatenate([self.model.F(x, mu, y), self.model.costate_rhs(x, mu, y)])


def integrate_ivp(
    model: ModelSpec,
    x0,
    mu0,
    T: float,
    tol: float = 1e-10,
    times=None,
    y_guess=None,
    method: str = "DOP853",
    stop_on_exit: bool = True,
    events=None,
    on_failure: str = "raise",
) -> Trajectory:
    """Integrate the DAE forward from ``(x0, mu0)`` with ``y`` eliminated.

    Uses an embedded Runge-Kutta pair (Dormand-Prince 8(5,3) by default) with
    ``rtol = atol = tol``. Integration stops early, with
    ``terminated_early=True``, if a level leaves the model's box bounds or
    grows beyond :data:`BLOWUP`.

    Parameters
    ----------
    times : array_like, optional
        Output times within ``[0, T]``; defaults to the accepted steps.
    y_guess : array_like, optional
        Starting guess for the Newton solve of ``H(x0, mu0, y) = 0``.
    events : sequence of callables, optional
        Extra terminal events ``g(t, x, mu, y)``; an optional ``direction``
        attribute is honoured as in :func:`scipy.integrate.solve_ivp`.
    on_failure : {"raise", "truncate"}
        With ``"truncate"``, step-size collapse or a failed Newton solve
        returns the path up to the failure with ``terminated_early=True``.

    Raises
    ------
    NewtonFailure
        ``H = 0`` could not be solved (the path left the regular region).
    StepUnderflow
        The step size collapsed before reaching ``T``.
    """
    M, P = model.state_dim, model.jump_dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))
    y_start = np.ones(P) if y_guess is None else np.atleast_1d(np.asarray(y_guess, dtype=float))
    newton_tol = min(1e-13, tol * 1e-3)
    # trial stages that leave the regular region are rejected by step-size
    # control; only a collapse of the step size is reported
    rhs = _JumpElimination(model, y_start, newton_tol, soft=True)
    y0 = rhs.jump(x0, mu0)

    user_events = list(events or [])
    events = []
    if stop_on_exit:
        xlo, xhi = model.bounds.arrays("x", M)
        mlo, mhi = model.bounds.arrays("mu", M)
        lo = np.concatenate([xlo, mlo])
        hi = np.concatenate([xhi, mhi])
        for i in range(2 * M):
            if np.isfinite(lo[i]):
                events.append(_terminal(lambda t, z, i=i: z[i] - lo[i]))
            if np.isfinite(hi[i]):
                events.append(_terminal(lambda t, z, i=i: hi[i] - z[i]))
        events.append(_terminal(lambda t, z: BLOWUP - np.max(np.abs(z))))
    for g in user_events:
        events.append(_wrap_event(g, rhs))

    t_eval = None if times is None else np.asarray(times, dtype=float)
    sol = integrate.solve_ivp(
        rhs,
        (0.0, float(T)),
        np.concatenate([x0, mu0]),
        method=method,
        rtol=tol,
        atol=tol,
        dense_output=True,
        events=events or None,
    )
    if sol.status == -1 and on_failure == "raise":
        raise StepUnderflow(sol.message)
    early = sol.status != 0
    if t_eval is None:
        ts = sol.t
    else:
        ts = t_eval[t_eval <= sol.t[-1] + 1e-12] if early else t_eval
    if not ts.size:
        Z = np.zeros((0, 2 * M))
    elif sol.status == -1:
        # no dense output past the last accepted step
        Z = np.array([np.interp(ts, sol.t, row) for row in sol.y]).T
    else:
        Z = sol.sol(ts).T
    xs, mus = Z[:, :M], Z[:, M:]
    # recover y and derivatives along the output grid, warm-starting pointwise
    ys = np.zeros((ts.size, P))
    xd = np.zeros((ts.size, M))
    md = np.zeros((ts.size, M))
    elim = _JumpElimination(model, y0, newton_tol)
    for k in range(ts.size):
        try:
            ys[k] = elim.jump(xs[k], mus[k])
        except NewtonFailure:
            if on_failure == "raise":
                raise
            ys[k] = np.nan
        with np.errstate(all="ignore"):
            xd[k] = model.F(xs[k], mus[k], ys[k])
            md[k] = model.costate_rhs(xs[k], mus[k], ys[k])
    return Trajectory(
        ts,
        xs,
        mus,
        ys,
        xd,
        md,
        terminated_early=bool(early),
        message=sol.message,
    )


def _wrap_event(g, rhs):
    def fn(t, z):
        x, mu = rhs.split(z)
        try:
            y = solve_jump(rhs.model, x, mu, rhs.y, tol=rhs.tol)
        except NewtonFailure:
            return np.nan
        return g(t, x, mu, y)

    fn.terminal = True
    fn.direction = getattr(g, "direction", 0)
    return fn


def _terminal(fn):
    fn.terminal = True
    fn.direction = -1
    return fn


# --- steady states -----------------------------------------------------------


@dataclass
class SteadyState:
    x_ss: np.ndarray
    mu_ss: np.ndarray
    y_ss: np.ndarray
    residual_norm: float

    def as_vector(self):
        return np.concatenate([self.x_ss, self.mu_ss, self.y_ss])


def default_search_box(model: ModelSpec):
    """Finite search box for steady states built from the model's bounds."""
    M, P = model.state_dim, model.jump_dim
    span = 10.0 * max(1.0, float(np.max(np.abs(model.initial_state))))
    lo, hi = [], []
    for name, dim, width in (("x", M, span), ("mu", M, 10.0), ("y", P, 5.0)):
        a, b = model.bounds.arrays(name, dim)
        with np.errstate(invalid="ignore"):
            lo.append(np.where(np.isfinite(a), a + 1e-3 * np.maximum(1.0, np.abs(a)), -width))
            hi.append(np.where(np.isfinite(b), b - 1e-3 * np.maximum(1.0, np.abs(b)), width))
    return np.concatenate(lo), np.concatenate(hi)


def _newton_root(model: ModelSpec, z0, tol=1e-12, max_iter=100):
    M, P = model.state_dim, model.jump_dim

    def split(z):
        return z[:M], z[M : 2 * M], z[2 * M :]

    def resid(z):
        with np.errstate(all="ignore"):
            return steady_state_residual(model, *split(z))

    z = np.array(z0, dtype=float)
    f = resid(z)
    for _ in range(max_iter):
        if not np.all(np.isfinite(f)):
            return None
        if np.max(np.abs(f)) <= tol:
            return z
        Dx, Dm, Dy = level_jacobian(model, *split(z))
        J = np.concatenate([Dx, Dm, Dy], axis=1)
        if not np.all(np.isfinite(J)):
            return None
        step = np.linalg.lstsq(J, -f, rcond=None)[0]
        t, fn = 1.0, np.linalg.norm(f)
        while t > 1e-12:
            cand = z + t * step
            fc = resid(cand)
            if np.all(np.isfinite(fc)) and np.linalg.norm(fc) < fn:
                break
            t *= 0.5
        else:
            return None
        z, f = cand, fc
    return z if np.max(np.abs(f)) <= tol else None


def steady_states(model: ModelSpec, search_box=None, n_starts: int = 40, seed: int = 0) -> list:
    """All distinct steady states found by multi-start damped Newton.

    Start points are drawn uniformly from ``search_box`` (a ``(lo, hi)``
    pair over the stacked ``(x, mu, y)``). Roots outside the model bounds
    or with residual above 1e-10 are dropped; roots closer than 1e-6 are
    merged. Results are sorted by the first state component.
    """
    M, P = model.state_dim, model.jump_dim
    lo, hi = default_search_box(model) if search_box is None else map(np.asarray, search_box)
    rng = np.random.default_rng(seed)
    starts = lo + (hi - lo) * rng.uniform(size=(n_starts, lo.size))
    roots = []
    for z0 in starts:
        z = _newton_root(model, z0)
        if z is None:
            continue
        x, mu, y = z[:M], z[M : 2 * M], z[2 * M :]
        inside = True
        for name, v in (("x", x), ("mu", mu), ("y", y)):
            a, b = model.bounds.arrays(name, v.size)
            inside &= bool(np.all(v > a) and np.all(v < b))
        if not inside:
            continue
        res = float(np.max(np.abs(steady_state_residual(model, x, mu, y)))) if z.size else 0.0
        if res > 1e-10:
            continue
        if any(np.linalg.norm(z - r.as_vector()) <= 1e-6 for r in roots):
            continue
        roots.append(SteadyState(x.copy(), mu.copy(), y.copy(), res))
    roots.sort(key=lambda s: tuple(s.x_ss))
    return roots


# --- shooting ----------------------------------------------------------------


@dataclass
class ShootingResult:
    trajectory: Trajectory
    mu0: np.ndarray
    psi: np.ndarray
    target: SteadyState
    iterations: int
    #: |dPsi/dmu0| (M = 1) or singular-value ratio of dPsi/dmu0 (M > 1)
    sensitivity: float = np.nan
    condition_number: float = np.nan
    extra: dict = field(default_factory=dict)


def _psi(model, target, traj):
    y_end = traj.y_path[-1] if model.jump_dim else np.zeros(0)
    return np.concatenate([traj.x_path[-1] - target.x_ss, traj.mu_path[-1] - target.mu_ss, y_end - target.y_ss])


def _psi_jacobian(model, target, mu0, T, tol, y_guess, h=1e-7):
    cols = []
    for m in range(model.state_dim):
        e = np.zeros(model.state_dim)
        e[m] = h * max(1.0, abs(mu0[m]))
        try:
            up = integrate_ivp(model, model.initial_state, mu0 + e, T, tol=tol, times=[T], y_guess=y_guess)
            dn = integrate_ivp(model, model.initial_state, mu0 - e, T, tol=tol, times=[T], y_guess=y_guess)
        except (StepUnderflow, NewtonFailure) as exc:
            raise ShootingDiverged(f"integration failed while differencing the shooting residual: {exc}") from exc
        if up.terminated_early or dn.terminated_early:
            raise ShootingDiverged("integration left the domain while differencing the shooting residual")
        cols.append((_psi(model, target, up) - _psi(model, target, dn)) / (2 * e[m]))
    return np.stack(cols, axis=1)


def shooting_solve(
    model: ModelSpec,
    T: float = 40.0,
    mu0_guess=None,
    tol: float = 1e-10,
    target: Optional[SteadyState] = None,
    method: str = "auto",
    ivp_tol: float = 1e-12,
    horizon: Optional[float] = None,
    n_eval: int = 2001,
    max_iter: int = 200,
) -> ShootingResult:
    """Find ``mu0`` so that the path reaches the steady state at time ``T``.

    With one state variable the initial co-state is bracketed and refined
    by Brent's method on a signed phase-plane score (see :func:`_shoot_gap`);
    otherwise damped Gauss-Newton with a
    finite-difference Jacobian is applied to the full terminal mismatch.
    The converged path is sampled on ``n_eval`` points over ``[0, horizon]``
    (``horizon`` defaults to ``T``).

    Raises
    ------
    NoBracket
        No co-states on both sides of the target were found.
    ShootingDiverged
        Newton iterates left the domain or failed to converge, or the
        final path ends farther than :data:`ACCEPT_GAP` from the target.
    """
    M = model.state_dim
    if target is None:
        found = steady_states(model)
        if len(found) != 1:
            raise ShootingDiverged(f"expected one steady state, found {len(found)}; pass target explicitly")
        target = found[0]
    y_guess = target.y_ss if model.jump_dim else None
    if mu0_guess is None:
        mu0_guess = target.mu_ss
    mu0_guess = np.atleast_1d(np.asarray(mu0_guess, dtype=float))
    if method == "auto":
        method = "bisection" if M == 1 else "newton"

    if method == "bisection":
        if M != 1:
            raise ValueError("bisection shooting needs a single co-state")
        mu0, iterations = _bisect_costate(model, target, float(mu0_guess[0]), T, ivp_tol, y_guess, tol)
        mu0 = np.array([mu0])
    elif method == "newton":
        mu0, iterations = _newton_costate(model, target, mu0_guess, T, ivp_tol, y_guess, tol, max_iter)
    else:
        raise ValueError(f"unknown shooting method {method!r}")

    horizon = T if horizon is None else horizon
    times = np.linspace(0.0, horizon, n_eval)
    traj = integrate_ivp(model, model.initial_state, mu0, max(T, horizon), tol=ivp_tol, times=times, y_guess=y_guess)
    at_T = integrate_ivp(model, model.initial_state, mu0, T, tol=ivp_tol, times=[T], y_guess=y_guess)
    psi = _psi(model, target, at_T)
    gap = np.max(np.abs(at_T.x_path[-1] - target.x_ss) / np.maximum(np.abs(target.x_ss), 1e-12))
    if at_T.terminated_early or not gap <= ACCEPT_GAP:
        # a sign change of the score at a discontinuity, not a saddle path
        raise ShootingDiverged(f"shooting path ends {gap:.2e} (relative) away from the target state")
    try:
        jac = _psi_jacobian(model, target, mu0, T, ivp_tol, y_guess)
        sv = np.linalg.svd(jac, compute_uv=False)
        sensitivity = float(sv[0])
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    except ShootingDiverged:
        sensitivity = cond = np.nan
    return ShootingResult(traj, mu0, psi, target, iterations, sensitivity, cond)


def _shoot_gap(model, target, mu0, T, ivp_tol, y_guess):
    """Signed phase-plane score of the path started at ``mu0``.

    Negative for co-states below the saddle path, positive above it. A
    path that heads away from ``x_ss``, turns back, or stalls short of it
    scores the remaining relative gap (signed by the direction of travel);
    a path that reaches ``x_ss`` scores ``mu/mu_ss - 1`` there; a path
    still close to ``x_ss`` at ``T`` scores ``mu(T)/mu_ss - 1``, which
    makes the score continuous around the root.
    """
    x0, x_ss, mu_ss = model.initial_state[0], target.x_ss[0], target.mu_ss[0]
    d = np.sign(x_ss - x0)
    if d == 0:
        return float(mu0 / mu_ss - 1.0)

    def short_of_target(x):
        return float(-d * abs(x - x_ss) / abs(x_ss))

    try:
        y0 = solve_jump(model, model.initial_state, np.array([mu0]), np.atleast_1d(y_guess))
    except NewtonFailure:
        return short_of_target(x0) if mu0 < mu_ss else -short_of_target(x0)
    with np.errstate(all="ignore"):
        if not d * model.F(model.initial_state, np.array([mu0]), y0)[0] > 0:
            return short_of_target(x0)

    def reach(t, x, mu, y):
        return x[0] - x_ss

    def turn(t, x, mu, y):
        with np.errstate(all="ignore"):
            return d * model.F(x, mu, y)[0]

    turn.direction = -1
    traj = integrate_ivp(
        model, model.initial_state, [mu0], T, tol=ivp_tol, y_guess=y0, events=[reach, turn], on_failure="truncate"
    )
    x_end, mu_end = traj.x_path[-1, 0], traj.mu_path[-1, 0]
    gap = abs(x_end - x_ss) / abs(x_ss)
    if traj.terminated_early and gap <= 1e-8:
        return float(mu_end / mu_ss - 1.0)
    if not np.isfinite(x_end) or gap > ACCEPT_GAP or traj.terminated_early:
        return short_of_target(x_end if np.isfinite(x_end) else x0)
    return float(mu_end / mu_ss - 1.0)


def _bisect_costate(model, target, guess, T, ivp_tol, y_guess, tol):
    lo_b, _ = model.bounds.arrays("mu", 1)
    floor = lo_b[0] if np.isfinite(lo_b[0]) else -np.inf
    calls = [0]

    def gap(m):
        calls[0] += 1
        return _shoot_gap(model, target, m, T, ivp_tol, y_guess)

    g_guess = gap(guess)
    if g_guess == 0:
        return guess, calls[0]
    # expand geometrically away from the guess until the sign flips
    a, ga = guess, g_guess
    b = None
    factor = 1.05
    for _ in range(200):
        if guess > 0:
            cand = a * factor if ga < 0 else a / factor
        else:
            cand = a + (factor - 1) if ga < 0 else a - (factor - 1)
        if cand <= floor:
            break
        gc = gap(cand)
        if gc == 0:
            return cand, calls[0]
        if np.sign(gc) != np.sign(ga):
            b = cand
            break
        a, ga = cand, gc
        factor = min(factor * 1.5, 2.0)
    if b is None:
        raise NoBracket("could not bracket the shooting root")
    root = optimize.brentq(gap, min(a, b), max(a, b), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root), calls[0]


def _newton_costate(model, target, mu0, T, ivp_tol, y_guess, tol, max_iter):
    mu = np.array(mu0, dtype=float)

    def psi_at(m):
        traj = integrate_ivp(model, model.initial_state, m, T, tol=ivp_tol, times=[T], y_guess=y_guess)
        if traj.terminated_early:
            return None
        return _psi(model, target, traj)

    psi = psi_at(mu)
    if psi is None:
        raise ShootingDiverged("initial co-state guess leaves the domain before T")
    for it in range(1, max_iter + 1):
        if np.max(np.abs(psi)) < tol:
            return mu, it - 1
        J = _psi_jacobian(model, target, mu, T, ivp_tol, y_guess)
        step = np.linalg.lstsq(J, -psi, rcond=None)[0]
        t = 1.0
        while t > 1e-10:
            cand = mu + t * step
            try:
                pc = psi_at(cand)
            except NewtonFailure:
                pc = None
            if pc is not None and np.linalg.norm(pc) < np.linalg.norm(psi):
                break
            t *= 0.5
        else:
            raise ShootingDiverged("Newton shooting could not reduce the terminal mismatch")
        mu, psi = cand, pc
    if np.max(np.abs(psi)) < tol:
        return mu, max_iter
    raise ShootingDiverged(f"Newton shooting stopped with |Psi| = {np.max(np.abs(psi)):.2e}")


# --- BVP benchmark -----------------------------------------------------------


def bvp_benchmark(
    model: ModelSpec,
    T: float,
    target: SteadyState,
    initial_guess: Optional[Trajectory] = None,
    tol: float = 1e-6,
    n_nodes: int = 201,
    max_nodes: int = 100000,
):
    """Finite-horizon collocation benchmark with ``mu(T) = mu_ss`` imposed.

    Uses :func:`scipy.integrate.solve_bvp` on the ``(x, mu)`` system with
    ``y`` eliminated pointwise. Returns a callable ``t -> (x, mu, y)``.
    """
    M = model.state_dim
    y_cache = {"y": None}

    def jumps(x, mu):
        guess = np.broadcast_to(target.y_ss, x.shape[:-1] + (model.jump_dim,)) if y_cache["y"] is None or y_cache["y"].shape[:-1] != x.shape[:-1] else y_cache["y"]
        y = solve_jump(model, x, mu, guess)
        y_cache["y"] = y
        return y

    def fun(t, z):
        x, mu = z[:M].T, z[M:].T
        y = jumps(x, mu)
        with np.errstate(all="ignore"):
            return np.concatenate([model.F(x, mu, y), model.costate_rhs(x, mu, y)], axis=1).T

    def bc(za, zb):
        return np.concatenate([za[:M] - model.initial_state, zb[M:] - target.mu_ss])

    t = np.linspace(0.0, T, n_nodes)
    if initial_guess is not None:
        z0 = np.vstack(
            [
                np.array([np.interp(t, initial_guess.times, initial_guess.x_path[:, i]) for i in range(M)]),
                np.array([np.interp(t, initial_guess.times, initial_guess.mu_path[:, i]) for i in range(M)]),
            ]
        )
    else:
        w = np.exp(-0.1 * t)
        z0 = np.vstack(
            [
                np.outer(target.x_ss, 1 - w) + np.outer(model.initial_state, w),
                np.outer(target.mu_ss, np.ones_like(t)),
            ]
        )
    res = integrate.solve_bvp(fun, bc, t, z0, tol=tol, max_nodes=max_nodes)
    if not res.success:
        raise ShootingDiverged(f"BVP benchmark failed: {res.message}")

    def path(times):
        z = res.sol(np.atleast_1d(times))
        x, mu = z[:M].T, z[M:].T
        y = solve_jump(model, x, mu, np.broadcast_to(target.y_ss, x.shape[:-1] + (model.jump_dim,)))
        return x, mu, y

    return path


def reference_trajectory(model: ModelSpec, times, T_shoot: Optional[float] = None, target=None, **kwargs) -> Trajectory:
    """Shooting benchmark sampled at ``times``.

    Asset pricing uses its closed-form dividend and fundamental price instead.

    The terminal horizon defaults to ``max(40, times[-1])``. Longer
    horizons are not useful in double precision: the unstable root of the
    saddle amplifies rounding in ``mu0`` by roughly ``exp(lambda_u T)``.
    """
    times = np.asarray(times, dtype=float)
    if model.name == "asset_pricing":
        return asset_pricing_trajectory(model, times)
    T_shoot = T_shoot or max(40.0, float(times[-1]))
    res = shooting_solve(model, T=T_shoot, target=target, n_eval=2, horizon=T_shoot, **kwargs)
    y_guess = res.target.y_ss if model.jump_dim else None
    return integrate_ivp(model, model.initial_state, res.mu0, float(times[-1]), tol=1e-12, times=times, y_guess=y_guess)


# --- closed forms ------------------------------------------------------------


def _asset_params(params):
    p = params.params if isinstance(params, ModelSpec) else params
    return float(p["x0"]), float(p["c"]), float(p["g"]), float(p["r"])


def asset_pricing_dividend(params, t):
    """Dividend path ``x(t) = -c/g + (x0 + c/g) e^{g t}`` (``c + g x0`` if g = 0)."""
    x0, c, g, r = _asset_params(params)
    t = np.asarray(t, dtype=float)
    if g == 0:
        return x0 + c * t
    return -c / g + (x0 + c / g) * np.exp(g * t)


def asset_pricing_fundamental(params, t):
    """Fundamental price ``int_0^inf e^{-r s} x(t + s) ds`` in closed form."""
    x0, c, g, r = _asset_params(params)
    if not r > g:
        raise ValueError("the fundamental price needs r > g")
    xt = asset_pricing_dividend(params, t)
    if g == 0:
        return xt / r + c / r**2
    return (-c / g) / r + (xt + c / g) / (r - g)


def asset_pricing_fundamental_quad(params, t: float, cutoff: float = 1e-14) -> float:
    """Quadrature check of :func:`asset_pricing_fundamental`, truncated where ``e^{-r s}`` < cutoff."""
    x0, c, g, r = _asset_params(params)
    upper = -np.log(cutoff) / r
    val, _ = integrate.quad(
        lambda s: np.exp(-r * s) * asset_pricing_dividend(params, t + s), 0.0, upper, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return val


def asset_pricing_bubble(params, t, zeta: float):
    """Non-solution price path ``mu_f(t) + zeta e^{r t}``."""
    x0, c, g, r = _asset_params(params)
    return asset_pricing_fundamental(params, t) + zeta * np.exp(r * np.asarray(t, dtype=float))


def asset_pricing_trajectory(params, times) -> Trajectory:
    """Dividend and fundamental price as a :class:`Trajectory`."""
    times = np.asarray(times, dtype=float)
    x0, c, g, r = _asset_params(params)
    x = asset_pricing_dividend(params, times)
    mu = asset_pricing_fundamental(params, times)
    return Trajectory(times, x, mu, np.zeros((times.size, 0)), c + g * x, r * mu - x, np.zeros((times.size, 0)))


def human_capital_no_arbitrage(model_or_params, x_k0: Optional[float] = None) -> float:
    """Human capital ``x_h`` equating the net returns on both capital stocks."""
    p = model_or_params.params if isinstance(model_or_params, ModelSpec) else model_or_params
    xk = float(p["x_k0"] if x_k0 is None else x_k0)
    ak, ah, dk, dh = p["a_k"], p["a_h"], p["delta_k"], p["delta_h"]

    def gap(xh):
        f = xk**ak * xh**ah
        return (ah * f / xh - dh) - (ak * f / xk - dk)

    return optimize.brentq(gap, 1e-6, 1e6, xtol=1e-14, rtol=1e-14)


# --- errors ------------------------------------------------------------------


@dataclass
class ErrorReport:
    times: np.ndarray
    #: relative-error paths keyed by variable name, one value per time
    errors: dict
    max_error: dict
    min_error: dict

    def overall_max(self) -> float:
        return max(self.max_error.values())


def relative_error(candidate, reference: Trajectory, variables=("x", "mu", "y"), names=None) -> ErrorReport:
    """Pointwise ``|(w_hat - w) / w|`` of ``candidate`` against ``reference``.

    ``candidate`` is a :class:`Trajectory` sampled at the reference times or
    anything with a ``trajectory(times)`` method (e.g. a kernel solution).
    Variables are keyed ``x[0]``, ``mu[0]``, ... unless ``names`` maps
    ``(group, index)`` to a label.
    """
    if hasattr(candidate, "trajectory") and not isinstance(candidate, Trajectory):
        candidate = candidate.trajectory(reference.times)
    if candidate.times.shape != reference.times.shape or not np.allclose(candidate.times, reference.times):
        raise ValueError("candidate and reference must share sample times")
    errors = {}
    for group in variables:
        ref = reference.variables()[group]
        cand = candidate.variables()[group]
        if np.any(np.abs(ref) <= 1e-8):
            raise ZeroDivisionError(f"reference {group} path has values too close to zero for relative errors")
        for i in range(ref.shape[1]):
            label = names[(group, i)] if names else f"{group}[{i}]"
            errors[label] = np.abs((cand[:, i] - ref[:, i]) / ref[:, i])
    return ErrorReport(
        reference.times,
        errors,
        {k: float(np.max(v)) for k, v in errors.items()},
        {k: float(np.min(v)) for k, v in errors.items()},
    )
