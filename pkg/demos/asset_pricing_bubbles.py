"""Price a dividend stream without ruling out bubbles.

Every path ``fundamental + zeta * exp(r t)`` solves the pricing equation
from any starting price. The minimum-norm kernel fit nonetheless picks the
fundamental price, and a bubble path grows at exactly the discount rate.
"""

import numpy as np

from ridgeless_dae import KernelSpec, TrainingGrid, make_asset_pricing, solve
from ridgeless_dae.diagnostics import divergence_rate, transversality_residual
from ridgeless_dae.models import Trajectory
from ridgeless_dae.reference import asset_pricing_bubble, asset_pricing_dividend, asset_pricing_fundamental

model = make_asset_pricing(x0=1.0, c=0.02, g=-0.2, r=0.1)
sol = solve(model, TrainingGrid(np.arange(41.0)), KernelSpec(0.5, 10.0))

t = np.linspace(0.0, 60.0, 13)
fitted = sol.trajectory(t).mu_path[:, 0]
exact = asset_pricing_fundamental(model, t)
print("    t    fitted price  fundamental  rel error")
for row in zip(t, fitted, exact, np.abs(fitted / exact - 1)):
    print("{:5.0f} {:13.6f} {:12.6f} {:10.1e}".format(*row))

tv = transversality_residual(sol, horizon=200.0)
print(f"\ndiscounted price * dividend at t=200: {tv.terminal_max:.1e}")

tb = np.linspace(0.0, 200.0, 2001)
for zeta in (0.001, 0.01, 0.1):
    bubble = Trajectory(tb, asset_pricing_dividend(model, tb), asset_pricing_bubble(model, tb, zeta), np.zeros((tb.size, 0)))
    rate = divergence_rate(model, bubble).tail_rate[0]
    print(f"bubble zeta={zeta:<6g} tail growth rate {rate:.5f} (discount rate 0.1)")
