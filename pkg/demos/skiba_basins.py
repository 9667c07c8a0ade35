"""Multiple steady states in a growth model with a convex-concave technology.

The same kernel fit, started from capital levels on either side of the
technology kink, settles at the low or the high steady state without being
told which one to aim for.
"""

import numpy as np

from ridgeless_dae import KernelSpec, TrainingGrid, make_skiba_growth
from ridgeless_dae.diagnostics import initial_condition_sweep
from ridgeless_dae.models import skiba_kink
from ridgeless_dae.reference import steady_states

model = make_skiba_growth(A=0.5, b1=3.0, b2=2.5)
states = sorted(steady_states(model), key=lambda s: s.x_ss[0])
kink = skiba_kink(1 / 3, 3.0, 2.5)
print("steady states:", ", ".join(f"{s.x_ss[0]:.5f}" for s in states), f"| kink at {kink}")

rep = initial_condition_sweep(
    model, np.linspace(0.5, 4.0, 10), KernelSpec(0.5, 10.0), grid=TrainingGrid(np.arange(41.0)),
    states=states, threshold=kink,
)
print("\n   x0    x(40)   steady state  gap")
for c in rep.cells:
    e = c.extra
    print(f"{c.x0:5.2f} {e['x_terminal']:8.4f} {e['x_ss']:10.4f} {e['gap']:9.1e}")
