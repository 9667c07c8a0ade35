"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(see ``conftest.py``) before asserting, so a failing criterion still shows
its measured numbers.
"""

import time

import numpy as np
import pytest
from conftest import record

from ridgeless_dae.diagnostics import (
    divergence_rate,
    initial_condition_sweep,
    ivp_from_costate,
    robustness_sweep,
    transversality_residual,
)
from ridgeless_dae.kernels import (
    KernelSpec,
    TrainingGrid,
    gram_matrix,
    kernel_integral,
    kernel_integral_quad,
)
from ridgeless_dae.models import (
    Trajectory,
    make_asset_pricing,
    make_human_capital,
    make_optimal_advertising,
    make_skiba_growth,
)
from ridgeless_dae.reference import (
    asset_pricing_bubble,
    asset_pricing_dividend,
    asset_pricing_fundamental_quad,
    human_capital_no_arbitrage,
    integrate_ivp,
    reference_trajectory,
    relative_error,
    steady_states,
)
from ridgeless_dae.solver import CollocationProblem, SolverConfig, initial_parameters, penalized_norm, solve

BASELINE_GRID = TrainingGrid(np.arange(41.0))
BASELINE_KERNEL = KernelSpec(0.5, 10.0, 1.0)
NAMES = {("x", 0): "capital", ("y", 0): "consumption"}
# criterion 10 spans two parametrized tests; both feed one summary line
_PARTIAL: dict = {}

# max relative errors (capital, consumption) for each (nu, ell) row of the robustness table
TARGET_ROBUSTNESS = {
    (0.5, 10.0): (1.8e-3, 2.9e-3),
    (1.5, 10.0): (5.9e-4, 3.0e-2),
    (2.5, 10.0): (1.4e-4, 2.4e-2),
    (0.5, 2.0): (3.1e-3, 2.8e-3),
    (0.5, 20.0): (1.9e-3, 8.2e-2),
}


def _errors(sol, reference):
    return relative_error(sol, reference, variables=("x", "y"), names=NAMES).max_error


def _check(criterion, passed, detail):
    record(criterion, bool(passed), detail)
    assert passed, detail


@pytest.fixture(scope="module")
def baseline(growth):
    tic = time.perf_counter()
    sol = solve(growth, BASELINE_GRID, BASELINE_KERNEL, SolverConfig(ridge_lambda=1e-6))
    return sol, time.perf_counter() - tic


def test_criterion_01_baseline_growth(baseline, growth_reference_40):
    sol, runtime = baseline
    err = _errors(sol, growth_reference_40)
    ok = err["capital"] <= 5e-3 and err["consumption"] <= 8e-3 and runtime <= 10.0
    _check(1, ok, f"max eps_x={err['capital']:.2e} (<=5e-3) eps_y={err['consumption']:.2e} (<=8e-3) fit {runtime:.2f}s")


def test_criterion_02_robustness_table(growth, growth_reference_60):
    # errors over the 401-point evaluation window [0, 1.5 T] used by the runner
    tic = time.perf_counter()
    rep = robustness_sweep(growth, list(TARGET_ROBUSTNESS), grid=BASELINE_GRID, reference=growth_reference_60)
    runtime = time.perf_counter() - tic
    assert not rep.failed()
    measured = {(c.nu, c.ell): (c.max_rel_error["capital"], c.max_rel_error["consumption"]) for c in rep.cells}
    off = []
    for key, target in TARGET_ROBUSTNESS.items():
        for label, got, want in zip(("x", "y"), measured[key], target):
            ratio = got / want
            if not 0.1 <= ratio <= 10.0:
                off.append(f"nu={key[0]} ell={key[1]} eps_{label} {got:.1e} vs {want:.1e}")
    smooth_beats_rough = measured[(2.5, 10.0)][0] < measured[(0.5, 10.0)][0]
    worst_y = max(measured, key=lambda k: measured[k][1])
    ok = not off and smooth_beats_rough and worst_y == (0.5, 20.0) and runtime <= 60.0
    detail = (
        f"outside 10x: {off or 'none'}; nu=5/2 beats nu=1/2 on eps_x: {smooth_beats_rough}; "
        f"worst eps_y at nu={worst_y[0]} ell={worst_y[1]}; {runtime:.1f}s"
    )
    _check(2, ok, detail)


def test_criterion_03_sparse_grid(growth, growth_reference_40):
    grid = TrainingGrid([0, 1, 3, 5, 10, 15, 20, 25, 30, 35, 38, 40])
    err = _errors(solve(growth, grid, BASELINE_KERNEL), growth_reference_40)
    ok = err["capital"] <= 1e-2 and err["consumption"] <= 1e-2
    _check(3, ok, f"max eps_x={err['capital']:.3e} eps_y={err['consumption']:.3e} (both <=1e-2)")


def test_criterion_04_short_horizon(growth):
    sol = solve(growth, TrainingGrid(np.arange(11.0)), BASELINE_KERNEL)
    ref = reference_trajectory(growth, np.linspace(0.0, 5.0, 51))
    err = _errors(sol, ref)
    ok = err["capital"] <= 1e-2 and err["consumption"] <= 1e-2
    _check(4, ok, f"on [0,5]: max eps_x={err['capital']:.2e} eps_y={err['consumption']:.2e} (<=1e-2)")


def test_criterion_05_asset_pricing():
    model = make_asset_pricing(x0=1.0, c=0.02, g=-0.2, r=0.1)
    sol = solve(model, BASELINE_GRID, BASELINE_KERNEL)
    t = np.linspace(0.0, 40.0, 81)
    fundamental = np.array([asset_pricing_fundamental_quad(model, s) for s in t])
    price = sol.trajectory(t).mu_path[:, 0]
    err = float(np.max(np.abs(price / fundamental - 1.0)))
    tv = transversality_residual(sol, horizon=200.0).terminal_max
    ok = err <= 1e-2 and tv <= 1e-4
    _check(5, ok, f"max price error={err:.2e} (<=1e-2) transversality(200)={tv:.1e} (<=1e-4)")


def test_criterion_06_skiba_basins():
    model = make_skiba_growth(A=0.5, b1=3.0, b2=2.5)
    threshold = 1.953125
    x0_list = [x for x in np.linspace(0.5, 4.0, 10) if abs(x - threshold) > 0.05]
    states = steady_states(model)
    rep = initial_condition_sweep(model, x0_list, BASELINE_KERNEL, grid=BASELINE_GRID, states=states, threshold=threshold)
    correct = sum(bool(c.extra.get("correct")) for c in rep.cells)
    worst = max(c.extra.get("gap", np.inf) for c in rep.cells)
    ok = len(x0_list) == 10 and correct == 10
    _check(6, ok, f"{correct}/{len(x0_list)} reach the steady state on their side of {threshold}; worst gap {worst:.1e}")


def test_criterion_07_divergence_rates(growth, growth_shooting):
    mu_star = growth_shooting.mu0[0]
    # downward perturbations exhaust capital in finite time and leave the domain
    rates = []
    for factor in (1.02, 1.05, 1.1, 1.15, 1.2):
        traj = ivp_from_costate(growth, [factor * mu_star], 100.0, n_eval=2001)
        rates.append(float(divergence_rate(growth, traj).tail_rate[0]))
    model = make_asset_pricing()
    t = np.linspace(0.0, 200.0, 2001)
    bubble = Trajectory(t, asset_pricing_dividend(model, t), asset_pricing_bubble(model, t, 0.01), np.zeros((t.size, 0)))
    bubble_rate = float(divergence_rate(model, bubble).tail_rate[0])
    ok = all(r > 0.11 for r in rates) and abs(bubble_rate - 0.1) <= 1e-3
    _check(7, ok, f"growth tail rates min {min(rates):.4f} (>0.11); bubble tail rate {bubble_rate:.5f} (0.1+-1e-3)")


def test_criterion_08_ridge_path(growth, baseline):
    sol_small, _ = baseline
    sol_large = solve(growth, BASELINE_GRID, BASELINE_KERNEL, SolverConfig(ridge_lambda=1e-4))
    t = np.linspace(0.0, 40.0, 401)
    a, b = sol_small.trajectory(t), sol_large.trajectory(t)
    diff = max(np.max(np.abs(getattr(a, f) - getattr(b, f))) for f in ("x_path", "mu_path", "y_path"))
    _check(8, diff <= 1e-3, f"sup |lambda=1e-4 - lambda=1e-6| = {diff:.1e} (<=1e-3)")


def test_criterion_09_consistency(growth, growth_reference_40):
    errs, norms = [], []
    for n in (8, 12, 20, 41):
        sol = solve(growth, TrainingGrid.equispaced(40.0, n), BASELINE_KERNEL)
        errs.append(_errors(sol, growth_reference_40)["capital"])
        norms.append(penalized_norm(sol))
    drift = abs(norms[3] / norms[2] - 1.0)
    # "within noise": no step may grow the error by more than 10%
    monotone = all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
    ok = drift <= 0.2 and monotone
    _check(9, ok, f"eps_x {['%.1e' % e for e in errs]}; norm change N=20->41 {drift:.1%} (<=20%)")


@pytest.mark.parametrize("factory", [make_human_capital, make_optimal_advertising], ids=["human_capital", "advertising"])
def test_criterion_10_other_models(factory):
    model = factory()
    tic = time.perf_counter()
    sol = solve(model, BASELINE_GRID, BASELINE_KERNEL)
    runtime = time.perf_counter() - tic
    traj = sol.trajectory(np.linspace(0.0, 200.0, 2001))
    bounded = all(np.all(np.isfinite(p)) and np.max(np.abs(p)) < 1e3 for p in (traj.x_path, traj.mu_path, traj.y_path))
    tv = transversality_residual(sol, horizon=200.0).terminal_max
    ok = bounded and tv <= 1e-4 and runtime <= 60.0
    detail = f"{model.name}: mse {sol.fit_report.residual_mse:.1e}, bounded {bounded}, transversality {tv:.1e}, {runtime:.1f}s"
    if model.name == "human_capital":
        xh = human_capital_no_arbitrage(model)
        ok = ok and abs(xh - 1.37) <= 0.01
        detail += f", no-arbitrage x_h(0)={xh:.4f}"
    previous = _PARTIAL.setdefault(10, [])
    previous.append((ok, detail))
    record(10, all(p[0] for p in previous), "; ".join(p[1] for p in previous))
    assert ok, detail


def test_criterion_11_numerical_hygiene(growth):
    rng = np.random.default_rng(11)
    notes = []
    # Gram matrices are positive semi-definite
    psd = True
    for nu in (0.5, 1.5, 2.5):
        for ell in (2.0, 10.0, 20.0):
            pts = np.sort(rng.uniform(0, 40, 30))
            eig = np.linalg.eigvalsh(gram_matrix(KernelSpec(nu, ell), TrainingGrid(pts)))
            psd &= eig.min() >= -1e-10 * 30
    notes.append(f"PSD {psd}")
    # closed-form kernel integrals against adaptive quadrature
    gap = max(
        abs(kernel_integral(KernelSpec(nu, ell), u, c) - kernel_integral_quad(KernelSpec(nu, ell), u, c))
        for nu in (0.5, 1.5, 2.5)
        for ell in (2.0, 10.0, 20.0)
        for u, c in rng.uniform(0, 60, size=(5, 2))
    )
    notes.append(f"integral gap {gap:.1e}")
    # analytic gradient against central differences
    problem = CollocationProblem(growth, TrainingGrid.equispaced(40.0, 9), KernelSpec(1.5, 10.0), SolverConfig())
    p = initial_parameters(problem) + 1e-3 * rng.normal(size=problem.n_params)
    g = problem.gradient(p)
    fd = np.empty_like(g)
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = 1e-6 * max(1.0, abs(p[j]))
        fd[j] = (problem.objective(p + e) - problem.objective(p - e)) / (2 * e[j])
    grad_rel = float(np.max(np.abs(g - fd)) / np.max(np.abs(g)))
    notes.append(f"gradient rel gap {grad_rel:.1e}")
    # algebraic constraint along an eliminated IVP
    tol = 1e-10
    traj = integrate_ivp(growth, growth.initial_state, [1.4422045], 20.0, tol=tol, times=np.linspace(0, 20, 201))
    h_max = float(np.max(np.abs(growth.H(traj.x_path, traj.mu_path, traj.y_path))))
    notes.append(f"|H| {h_max:.1e}")
    ok = psd and gap <= 1e-10 and grad_rel <= 1e-5 and h_max <= 10 * tol
    _check(11, ok, ", ".join(notes))


def test_divergence_dichotomy(growth, growth_shooting):
    """Perturbed co-states either track the saddle path, diverge faster than r, or exhaust capital."""
    mu_star = growth_shooting.mu0[0]
    T = 40.0
    ref = integrate_ivp(growth, growth.initial_state, [mu_star], T / 2, tol=1e-12, times=np.linspace(0, T / 2, 201))
    classes = []
    for factor in np.linspace(0.8, 1.2, 9):
        traj = ivp_from_costate(growth, [factor * mu_star], T, n_eval=401)
        half = traj.times <= T / 2
        tracks = (
            not traj.terminated_early
            and np.max(np.abs(traj.x_path[half, 0] / ref.x_path[:, 0] - 1.0)) <= 1e-2
        )
        if tracks:
            classes.append("tracks")
        elif traj.terminated_early and traj.xdot_path[-1, 0] < 0 and traj.x_path[-1, 0] < growth.initial_state[0]:
            classes.append("capital exhausted")
        else:
            assert divergence_rate(growth, traj).tail_rate[0] > 0.11, factor
            classes.append("diverges")
    assert classes[4] == "tracks"
    assert set(classes[:4]) <= {"capital exhausted", "tracks"} and set(classes[5:]) <= {"diverges", "tracks"}
