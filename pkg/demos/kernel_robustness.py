"""How much does the choice of Matern kernel matter?

Refits the growth model for several smoothness and lengthscale settings
and prints max/min relative errors against the shooting benchmark over
the training window and over the extrapolation window.
"""

import numpy as np

from ridgeless_dae import make_neoclassical_growth
from ridgeless_dae.diagnostics import robustness_sweep
from ridgeless_dae.reference import reference_trajectory

model = make_neoclassical_growth()
pairs = [(0.5, 10.0), (1.5, 10.0), (2.5, 10.0), (0.5, 2.0), (0.5, 20.0)]

for end in (40.0, 60.0):
    ref = reference_trajectory(model, np.linspace(0.0, end, 401))
    rep = robustness_sweep(model, pairs, reference=ref)
    print(f"\nerrors over [0, {end:g}]")
    print(f"{'nu':>4s} {'ell':>5s} {'max x':>9s} {'max y':>9s} {'min x':>9s} {'min y':>9s}")
    for c in rep.cells:
        mx, mn = c.max_rel_error, c.min_rel_error
        print(f"{c.nu:4.1f} {c.ell:5.0f} {mx['capital']:9.1e} {mx['consumption']:9.1e} {mn['capital']:9.1e} {mn['consumption']:9.1e}")
