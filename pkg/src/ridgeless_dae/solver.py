"""Ridgeless kernel collocation for DAEs with transversality conditions.

Every time derivative is a kernel machine on the training grid,

    xdot(t) = sum_j ax_j k(t, t_j),    x(t) = x0 + sum_j ax_j int_0^t k(s, t_j) ds

and likewise for ``mu`` (free ``mu0``) and ``y`` (free ``y0``). The
coefficients minimize

    sum_i |DAE residual at t_i|^2 + lam * (sum |xdot|_H^2 + sum |mudot|_H^2 + ...)

for a small fixed ``lam``. No terminal or asymptotic condition is imposed:
the norm penalty alone picks the non-explosive trajectory.

The problem is a nonlinear least-squares problem once the penalty is
written as extra residual rows ``sqrt(lam) L^T a`` with ``L L^T = K``.
It is solved with a bound-projected Levenberg-Marquardt iteration, falling
back to L-BFGS-B on the scalar objective when LM stalls.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize

from .errors import BoundViolation, ConfigurationError, ModelDomainError, NonConvergence
from .kernels import (
    KernelSpec,
    TrainingGrid,
    gram_factor,
    gram_matrix,
    integrated_kernel_matrix,
    kernel_matrix,
    rkhs_norm_sq,
)
from .models import ModelSpec, Trajectory, dae_residual, level_jacobian

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    """Options for :func:`solve`.

    ``extra_penalty_weight=None`` uses the weight carried by the model.
    Jump-variable penalties are relative weights inside the ridge term, so
    the effective coefficient on ``|ydot_p|_H^2`` is ``ridge_lambda * weight``.
    """

    ridge_lambda: float = 1e-6
    extra_penalty_weight: Optional[float] = None
    penalize_jump_derivatives: bool = False
    max_iterations: int = 500
    residual_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    objective_tolerance: float = 1e-13
    initial_coefficient_scale: float = 0.0
    initial_mu0: Optional[np.ndarray] = None
    initial_y0: Optional[np.ndarray] = None
    seed: int = 0
    fallback: bool = True

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ConfigurationError("ridge_lambda must be non-negative")
        if self.extra_penalty_weight is not None and self.extra_penalty_weight < 0:
            raise ConfigurationError("extra_penalty_weight must be non-negative")
        for name in ("residual_tolerance", "step_tolerance", "objective_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if int(self.max_iterations) < 1:
            raise ConfigurationError("max_iterations must be at least 1")


class Parameters(NamedTuple):
    alpha_x: np.ndarray
    alpha_mu: np.ndarray
    alpha_y: np.ndarray
    mu0_hat: np.ndarray
    y0_hat: np.ndarray


class SolutionPoint(NamedTuple):
    x: np.ndarray
    mu: np.ndarray
    y: np.ndarray
    xdot: np.ndarray
    mudot: np.ndarray
    ydot: np.ndarray


@dataclass
class FitReport:
    iterations: int = 0
    objective: float = np.nan
    residual_mse: float = np.nan
    max_abs_residual: float = np.nan
    method: str = ""
    status: str = ""
    runtime: float = 0.0


@dataclass
class KernelSolution:
    """Fitted coefficients plus everything needed to evaluate the paths."""

    model: ModelSpec
    grid: TrainingGrid
    kernel: KernelSpec
    alpha_x: np.ndarray
    alpha_mu: np.ndarray
    alpha_y: np.ndarray
    mu0_hat: np.ndarray
    y0_hat: np.ndarray
    config: SolverConfig = field(default_factory=SolverConfig)
    fit_report: FitReport = field(default_factory=FitReport)

    @property
    def parameters(self) -> Parameters:
        return Parameters(self.alpha_x, self.alpha_mu, self.alpha_y, self.mu0_hat, self.y0_hat)

    def __call__(self, t):
        return evaluate_solution(self, t)

    def trajectory(self, times) -> Trajectory:
        p = evaluate_solution(self, np.atleast_1d(times))
        return Trajectory(np.atleast_1d(times), p.x, p.mu, p.y, p.xdot, p.mudot, p.ydot)


# --- evaluation --------------------------------------------------------------


def evaluate_solution(sol: KernelSolution, t) -> SolutionPoint:
    """Levels and derivatives at time(s) ``t``.

    A scalar ``t`` gives 1-d arrays; an array gives one row per time. Times
    beyond the grid horizon extrapolate (derivatives decay to zero there).
    """
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("solution can only be evaluated at t >= 0")
    K = kernel_matrix(sol.kernel, times, sol.grid)
    I = integrated_kernel_matrix(sol.kernel, times, sol.grid)
    x = sol.model.initial_state + I @ sol.alpha_x
    mu = sol.mu0_hat + I @ sol.alpha_mu
    y = sol.y0_hat + I @ sol.alpha_y
    out = SolutionPoint(x, mu, y, K @ sol.alpha_x, K @ sol.alpha_mu, K @ sol.alpha_y)
    if scalar:
        out = SolutionPoint(*(a[0] for a in out))
    return out


def solution_norms(sol: KernelSolution) -> dict:
    """Squared RKHS norms of every derivative expansion, keyed by variable."""
    K = gram_matrix(sol.kernel, sol.grid)
    m = sol.model
    norms = {}
    for names, alpha in ((m.state_names, sol.alpha_x), (m.costate_names, sol.alpha_mu), (m.jump_names, sol.alpha_y)):
        for i, name in enumerate(names):
            norms[name] = rkhs_norm_sq(K, alpha[:, i])
    return norms


def penalized_norm(sol: KernelSolution) -> float:
    """Weighted norm sum that the ridge term penalizes."""
    problem = CollocationProblem(sol.model, sol.grid, sol.kernel, sol.config)
    K = problem.gram
    total = 0.0
    for alpha, w in ((sol.alpha_x, problem.w_x), (sol.alpha_mu, problem.w_mu), (sol.alpha_y, problem.w_y)):
        for i in range(alpha.shape[1]):
            if w[i] > 0:
                total += w[i] * rkhs_norm_sq(K, alpha[:, i])
    return total


# --- problem assembly --------------------------------------------------------


class CollocationProblem:
    """Residuals and Jacobian of the penalized collocation problem.

    Parameters are packed as ``[ax, amu, ay, mu0, y0]`` with each
    coefficient block flattened row-major from shape ``(N, dim)``. The DAE
    residual rows are ordered point by point: ``(N, 2M + P)`` row-major.
    """

    def __init__(self, model: ModelSpec, grid: TrainingGrid, kernel: KernelSpec, config: SolverConfig):
        self.model, self.grid, self.kernel, self.config = model, grid, kernel, config
        self.N = N = len(grid)
        self.M = M = model.state_dim
        self.P = P = model.jump_dim
        self.gram = gram_matrix(kernel, grid)
        self.integ = integrated_kernel_matrix(kernel, grid.points, grid)
        self.factor_t = gram_factor(self.gram, kernel.variance).T

        lam = config.ridge_lambda
        lam_p = model.extra_penalty_weight if config.extra_penalty_weight is None else config.extra_penalty_weight
        self.w_x = np.ones(M)
        self.w_mu = np.ones(M)
        self.w_y = np.zeros(P)
        if config.penalize_jump_derivatives:
            self.w_y[:] = 1.0
        for j in model.extra_penalty_vars:
            self.w_y[j] = max(self.w_y[j], lam_p)
        self.sqrt_wx = np.sqrt(lam * self.w_x)
        self.sqrt_wmu = np.sqrt(lam * self.w_mu)
        self.sqrt_wy = np.sqrt(lam * self.w_y)

        sizes = [N * M, N * M, N * P, M, P]
        edges = np.cumsum([0] + sizes)
        self.slices = [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]
        self.n_params = int(edges[-1])
        self.n_dae = N * (2 * M + P)
        self.n_ridge = N * M * 2 + N * P

    # packing ---------------------------------------------------------------

    def pack(self, params: Parameters) -> np.ndarray:
        N, M, P = self.N, self.M, self.P
        ax, am, ay, mu0, y0 = params
        return np.concatenate(
            [
                np.asarray(ax, float).reshape(N * M),
                np.asarray(am, float).reshape(N * M),
                np.asarray(ay, float).reshape(N * P),
                np.asarray(mu0, float).reshape(M),
                np.asarray(y0, float).reshape(P),
            ]
        )

    def unpack(self, p: np.ndarray) -> Parameters:
        N, M, P = self.N, self.M, self.P
        s = self.slices
        return Parameters(
            p[s[0]].reshape(N, M),
            p[s[1]].reshape(N, M),
            p[s[2]].reshape(N, P),
            p[s[3]].copy(),
            p[s[4]].copy(),
        )

    def bounds(self):
        """Projection box for the parameter vector (only ``mu0`` and ``y0`` are boxed)."""
        lo = np.full(self.n_params, -np.inf)
        hi = np.full(self.n_params, np.inf)
        for sl, name, dim in ((self.slices[3], "mu", self.M), (self.slices[4], "y", self.P)):
            a, b = self.model.bounds.arrays(name, dim)
            # open bounds: keep a relative margin from the boundary
            with np.errstate(invalid="ignore"):
                lo[sl] = np.where(np.isfinite(a), a + 1e-8 * (1 + np.abs(a)), -np.inf)
                hi[sl] = np.where(np.isfinite(b), b - 1e-8 * (1 + np.abs(b)), np.inf)
        return lo, hi

    # evaluation ------------------------------------------------------------

    def levels(self, p):
        ax, am, ay, mu0, y0 = self.unpack(p)
        x = self.model.initial_state + self.integ @ ax
        mu = mu0 + self.integ @ am
        y = y0 + self.integ @ ay
        return x, mu, y, self.gram @ ax, self.gram @ am

    def dae_residuals(self, p) -> np.ndarray:
        """DAE residuals at the grid points, shape ``(N, 2M + P)``."""
        x, mu, y, xd, md = self.levels(p)
        return dae_residual(self.model, x, mu, y, xd, md)

    def ridge_rows(self, p) -> np.ndarray:
        ax, am, ay, _, _ = self.unpack(p)
        Lt = self.factor_t
        return np.concatenate(
            [
                ((Lt @ ax) * self.sqrt_wx).ravel(),
                ((Lt @ am) * self.sqrt_wmu).ravel(),
                ((Lt @ ay) * self.sqrt_wy).ravel(),
            ]
        )

    def residuals(self, p) -> np.ndarray:
        """Full residual vector: DAE rows followed by ridge rows."""
        return np.concatenate([self.dae_residuals(p).ravel(), self.ridge_rows(p)])

    def objective(self, p) -> float:
        r = self.residuals(p)
        return float(r @ r)

    def jacobian(self, p) -> np.ndarray:
        N, M, P = self.N, self.M, self.P
        E = 2 * M + P
        x, mu, y, _, _ = self.levels(p)
        Dx, Dmu, Dy = level_jacobian(self.model, x, mu, y)
        eye = np.eye(M)
        Kg, Ig = self.gram, self.integ
        J = np.zeros((self.n_dae + self.n_ridge, self.n_params))
        s = self.slices
        # d r[i, e] / d a[j, b] = D[i, e, b] I[i, j] (+ K[i, j] on the matching derivative row)
        jx = np.einsum("ieb,ij->iejb", Dx, Ig)
        jx[:, :M, :, :] += np.einsum("ij,eb->iejb", Kg, eye)
        jm = np.einsum("ieb,ij->iejb", Dmu, Ig)
        jm[:, M : 2 * M, :, :] += np.einsum("ij,eb->iejb", Kg, eye)
        jy = np.einsum("ieb,ij->iejb", Dy, Ig)
        rows = slice(0, self.n_dae)
        J[rows, s[0]] = jx.reshape(N * E, N * M)
        J[rows, s[1]] = jm.reshape(N * E, N * M)
        J[rows, s[2]] = jy.reshape(N * E, N * P)
        J[rows, s[3]] = Dmu.reshape(N * E, M)
        J[rows, s[4]] = Dy.reshape(N * E, P)

        Lt = self.factor_t
        r0 = self.n_dae
        for sl, w, dim in ((s[0], self.sqrt_wx, M), (s[1], self.sqrt_wmu, M), (s[2], self.sqrt_wy, P)):
            block = np.einsum("ij,ab->iajb", Lt, np.diag(w)).reshape(N * dim, N * dim)
            J[r0 : r0 + N * dim, sl] = block
            r0 += N * dim
        return J

    def gradient(self, p) -> np.ndarray:
        """Gradient of :meth:`objective`."""
        return 2.0 * self.jacobian(p).T @ self.residuals(p)


def assemble_objective(
    model: ModelSpec, grid: TrainingGrid, kernel: KernelSpec, config: SolverConfig, parameters
):
    """Penalized objective and the stacked DAE residuals for given parameters.

    ``parameters`` is a :class:`Parameters` tuple or a packed vector.
    Returns ``(objective, residuals)`` with ``residuals`` of length
    ``N * (2M + P)``. Raises :class:`ModelDomainError` on a non-finite residual.
    """
    problem = CollocationProblem(model, grid, kernel, config)
    p = parameters if isinstance(parameters, np.ndarray) else problem.pack(Parameters(*parameters))
    dae = problem.dae_residuals(p)
    bad = np.argwhere(~np.isfinite(dae))
    if bad.size:
        i, e = bad[0]
        raise ModelDomainError(
            f"non-finite residual at grid point {i} (t={grid.points[i]:g}), equation {e}", point=int(i), equation=int(e)
        )
    ridge = problem.ridge_rows(p)
    return float(dae.ravel() @ dae.ravel() + ridge @ ridge), dae.ravel()


# --- optimizer ---------------------------------------------------------------


@dataclass
class _LMResult:
    p: np.ndarray
    cost: float
    iterations: int
    status: str


def _levenberg_marquardt(fun, jac, p0, lo, hi, max_iter, xtol, ftol):
    """Bound-projected Levenberg-Marquardt with Nielsen damping updates.

    Each step is computed from a thin SVD of the Jacobian, so rejected
    steps only cost one residual evaluation.
    """
    p = np.clip(p0, lo, hi)
    r = fun(p)
    cost = r @ r
    if not np.isfinite(cost):
        raise ModelDomainError("initial point gives non-finite residuals")
    damping = None
    growth = 2.0
    it = 0
    status = "max_iterations"
    while it < max_iter:
        it += 1
        J = jac(p)
        U, s, Vt = np.linalg.svd(J, full_matrices=False)
        Utr = U.T @ r
        if damping is None:
            damping = 1e-3 * s[0] ** 2
        accepted = False
        while not accepted:
            step = -Vt.T @ (s / (s * s + damping) * Utr)
            p_new = np.clip(p + step, lo, hi)
            dp = p_new - p
            r_new = fun(p_new)
            cost_new = r_new @ r_new
            lin = r + J @ dp
            predicted = cost - lin @ lin
            if np.isfinite(cost_new) and predicted > 0 and cost_new < cost:
                rho = (cost - cost_new) / predicted
                damping *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                growth = 2.0
                accepted = True
            else:
                damping *= growth
                growth *= 2.0
                if damping > 1e16 * max(s[0] ** 2, 1.0) or not np.any(np.abs(dp) > 0):
                    return _LMResult(p, cost, it, "stalled")
        small_step = np.linalg.norm(dp) <= xtol * (xtol + np.linalg.norm(p))
        small_gain = cost - cost_new <= ftol * cost_new
        p, r, cost = p_new, r_new, cost_new
        if small_step or small_gain:
            status = "converged"
            break
    return _LMResult(p, cost, it, status)


def _initial_jump(model: ModelSpec, x0, mu0, y_start):
    """Solve ``H(x0, mu0, y) = 0`` for ``y`` by damped Gauss-Newton."""
    y = np.array(y_start, dtype=float)
    if model.jump_dim == 0:
        return y
    for _ in range(100):
        h = model.H(x0, mu0, y)
        if np.max(np.abs(h)) < 1e-13:
            break
        Hy = model.H_jac(x0, mu0, y)[2]
        step = np.linalg.lstsq(Hy, -h, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            cand = y + t * step
            hc = model.H(x0, mu0, cand)
            if np.all(np.isfinite(hc)) and np.linalg.norm(hc) < np.linalg.norm(h):
                break
            t *= 0.5
        y = cand
    return y


def initial_parameters(problem: CollocationProblem) -> np.ndarray:
    """Default start: zero coefficients, ``mu0 = 1`` and ``y0`` solving ``H = 0``."""
    cfg, model = problem.config, problem.model
    N, M, P = problem.N, problem.M, problem.P
    rng = np.random.default_rng(cfg.seed)
    scale = cfg.initial_coefficient_scale
    coeffs = [scale * rng.standard_normal((N, d)) if scale > 0 else np.zeros((N, d)) for d in (M, M, P)]
    mu0 = np.ones(M) if cfg.initial_mu0 is None else np.broadcast_to(np.asarray(cfg.initial_mu0, float), (M,)).copy()
    lo, hi = problem.bounds()
    mu0 = np.clip(mu0, lo[problem.slices[3]], hi[problem.slices[3]])
    if cfg.initial_y0 is not None:
        y0 = np.broadcast_to(np.asarray(cfg.initial_y0, float), (P,)).copy()
    else:
        y0 = _initial_jump(model, model.initial_state, mu0, np.ones(P))
    y0 = np.clip(y0, lo[problem.slices[4]], hi[problem.slices[4]])
    return problem.pack(Parameters(*coeffs, mu0, y0))


def _check_bounds(sol: KernelSolution):
    m = sol.model
    pt = evaluate_solution(sol, sol.grid.points)
    for name, vals in (("x", pt.x), ("mu", pt.mu), ("y", pt.y)):
        lo, hi = m.bounds.arrays(name, vals.shape[1])
        if np.any(vals <= lo) or np.any(vals >= hi):
            raise BoundViolation(f"fitted {name} path leaves its bounds on the training grid")


def solve(
    model: ModelSpec,
    grid: TrainingGrid,
    kernel: Optional[KernelSpec] = None,
    config: Optional[SolverConfig] = None,
    start: Optional[np.ndarray] = None,
) -> KernelSolution:
    """Fit the minimum-norm kernel solution of ``model`` on ``grid``.

    Parameters
    ----------
    model, grid, kernel, config
        Problem definition; ``kernel`` defaults to Matern-1/2 with
        lengthscale 10 and ``config`` to :class:`SolverConfig` defaults.
    start
        Optional packed starting vector overriding the default initialization.

    Raises
    ------
    NonConvergence
        The mean-squared DAE residual stayed above ``residual_tolerance``.
        The best iterate is attached as ``exc.best``.
    BoundViolation
        The converged paths leave the model's box bounds on the grid.
    """
    kernel = kernel or KernelSpec()
    config = config or SolverConfig()
    if not isinstance(grid, TrainingGrid):
        grid = TrainingGrid(grid)
    tic = time.perf_counter()
    problem = CollocationProblem(model, grid, kernel, config)
    if config.ridge_lambda == 0:
        # unpenalized directions make the Gauss-Newton system singular
        raise ConfigurationError("ridge_lambda = 0 leaves the problem without a unique minimizer")
    p0 = initial_parameters(problem) if start is None else np.asarray(start, dtype=float)
    lo, hi = problem.bounds()

    def fun(p):
        with np.errstate(all="ignore"):
            return problem.residuals(p)

    res = _levenberg_marquardt(
        fun, problem.jacobian, p0, lo, hi, int(config.max_iterations), config.step_tolerance, config.objective_tolerance
    )
    method = "levenberg-marquardt"
    p, iterations = res.p, res.iterations
    dae = problem.dae_residuals(p)
    mse = float(np.mean(dae**2))
    if not mse <= config.residual_tolerance and config.fallback:
        log.info("LM ended with status %s and mse %.3e; trying L-BFGS-B", res.status, mse)
        bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))

        def f_and_g(q):
            with np.errstate(all="ignore"):
                r = problem.residuals(q)
                val = r @ r
                if not np.isfinite(val):
                    return np.inf, np.zeros_like(q)
                return val, 2.0 * problem.jacobian(q).T @ r

        out = optimize.minimize(
            f_and_g,
            p,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options=dict(maxiter=20 * int(config.max_iterations), ftol=1e-16, gtol=1e-14),
        )
        dae_fb = problem.dae_residuals(out.x)
        mse_fb = float(np.mean(dae_fb**2))
        if np.isfinite(mse_fb) and mse_fb < mse:
            p, dae, mse, method = out.x, dae_fb, mse_fb, "l-bfgs-b"
            iterations += int(out.nit)

    params = problem.unpack(p)
    report = FitReport(
        iterations=iterations,
        objective=problem.objective(p),
        residual_mse=mse,
        max_abs_residual=float(np.max(np.abs(dae))),
        method=method,
        status=res.status,
        runtime=time.perf_counter() - tic,
    )
    sol = KernelSolution(model, grid, kernel, *params, config=config, fit_report=report)
    if not mse <= config.residual_tolerance:
        report.status = "nonconvergence"
        raise NonConvergence(
            f"mean-squared DAE residual {mse:.3e} above tolerance {config.residual_tolerance:.1e}",
            best=sol,
            diagnostics=dict(iterations=iterations, mse=mse, lm_status=res.status),
        )
    _check_bounds(sol)
    return sol
