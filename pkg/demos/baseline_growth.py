"""Fit the Ramsey growth model with no terminal condition.

The kernel solution is trained on t = 0, 1, ..., 40 and compared with a
shooting benchmark out to t = 60, i.e. beyond the training window.

Run with ``python demos/baseline_growth.py``.
"""

import numpy as np

from ridgeless_dae import KernelSpec, TrainingGrid, make_neoclassical_growth, solve
from ridgeless_dae.reference import reference_trajectory, relative_error, steady_states

model = make_neoclassical_growth(x0=1.0, delta=0.1, r=0.11, a=1 / 3)
(ss,) = steady_states(model)
print(f"steady state: capital {ss.x_ss[0]:.5f}, consumption {ss.y_ss[0]:.5f}")

sol = solve(model, TrainingGrid(np.arange(41.0)), KernelSpec(nu=0.5, lengthscale=10.0))
rep = sol.fit_report
print(f"fit: {rep.iterations} iterations, residual mse {rep.residual_mse:.1e}, {rep.runtime:.2f}s")

# the benchmark needs the saddle-path co-state; the kernel fit finds it unaided
times = np.linspace(0.0, 60.0, 601)
ref = reference_trajectory(model, times)
print(f"initial co-state: kernel {sol.mu0_hat[0]:.6f}, shooting {ref.mu_path[0, 0]:.6f}")

names = {("x", 0): "capital", ("y", 0): "consumption"}
err = relative_error(sol, ref, variables=("x", "y"), names=names)
inside = times <= 40.0
print(f"\n{'':12s}{'max error t<=40':>18s}{'max error t<=60':>18s}")
for name, path in err.errors.items():
    print(f"{name:12s}{path[inside].max():18.2e}{path.max():18.2e}")

traj = sol.trajectory([0.0, 10.0, 20.0, 40.0, 60.0])
print("\n    t    capital  consumption")
for t, x, y in zip(traj.times, traj.x_path[:, 0], traj.y_path[:, 0]):
    print(f"{t:5.0f} {x:10.5f} {y:12.5f}")
