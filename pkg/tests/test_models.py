import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgeless_dae.models import (
    MODEL_FACTORIES,
    Bounds,
    Trajectory,
    build_model,
    dae_residual,
    level_jacobian,
    make_human_capital,
    make_neoclassical_growth,
    make_skiba_growth,
    skiba_kink,
    steady_state_residual,
)

# interior sample boxes (x, mu, y) for each built-in model
BOXES = {
    "neoclassical_growth": ((0.3, 5.0), (0.3, 3.0), (0.2, 3.0)),
    "skiba_growth": ((0.3, 5.0), (0.3, 3.0), (0.2, 3.0)),
    "asset_pricing": ((0.1, 3.0), (0.5, 6.0), None),
    "human_capital": ((0.5, 4.0), (0.3, 2.0), (0.1, 1.0)),
    "optimal_advertising": ((0.05, 0.95), (0.2, 3.0), (0.05, 1.0)),
}


def _sample(model, rng):
    bx, bm, by = BOXES[model.name]
    x = rng.uniform(*bx, size=model.state_dim)
    mu = rng.uniform(*bm, size=model.state_dim)
    y = rng.uniform(*by, size=model.jump_dim) if model.jump_dim else np.zeros(0)
    return x, mu, y


def _fd_jacobian(fn, args, k, h=1e-7):
    args = [np.array(a, dtype=float) for a in args]
    base = fn(*args)
    cols = []
    for j in range(args[k].size):
        up = [a.copy() for a in args]
        dn = [a.copy() for a in args]
        step = h * max(1.0, abs(args[k][j]))
        up[k][j] += step
        dn[k][j] -= step
        cols.append((fn(*up) - fn(*dn)) / (2 * step))
    return np.stack(cols, axis=-1) if cols else np.zeros(base.shape + (0,))


@pytest.mark.parametrize("name", sorted(MODEL_FACTORIES))
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_analytic_jacobians_match_finite_differences(name, seed):
    model = build_model(name)
    if name == "skiba_growth":
        # keep away from the kink, where the marginal product jumps
        model = make_skiba_growth()
    x, mu, y = _sample(model, np.random.default_rng(seed))
    if name == "skiba_growth" and abs(x[0] - skiba_kink(1 / 3, 3.0, 2.5)) < 1e-3:
        x = x + 0.01
    for fn, jac in ((model.F, model.F_jac), (model.G, model.G_jac), (model.H, model.H_jac)):
        analytic = jac(x, mu, y)
        for k in range(3):
            fd = _fd_jacobian(fn, (x, mu, y), k)
            assert np.allclose(analytic[k], fd, rtol=1e-6, atol=1e-7), (name, fn.__name__, k)


@pytest.mark.parametrize("name", sorted(MODEL_FACTORIES))
def test_level_jacobian_matches_finite_differences(name):
    model = build_model(name)
    rng = np.random.default_rng(7)
    x, mu, y = _sample(model, rng)
    xd = rng.normal(size=model.state_dim)
    md = rng.normal(size=model.state_dim)

    def res(x_, mu_, y_):
        return dae_residual(model, x_, mu_, y_, xd, md)

    analytic = level_jacobian(model, x, mu, y)
    for k in range(3):
        fd = _fd_jacobian(res, (x, mu, y), k)
        assert np.allclose(analytic[k], fd, rtol=1e-6, atol=1e-7)


def test_growth_steady_state_closed_form():
    # x* solves a x^(a-1) = r + delta; y* = x*^a - delta x*; mu* = 1 / y*
    a, delta, r = 1 / 3, 0.1, 0.11
    x = ((r + delta) / a) ** (1 / (a - 1))
    y = x**a - delta * x
    assert x == pytest.approx(1.99981, abs=1e-5)
    assert y == pytest.approx(1.05990, abs=1e-5)
    res = steady_state_residual(make_neoclassical_growth(), [x], [1 / y], [y])
    assert np.max(np.abs(res)) < 1e-14


def test_skiba_kink_value():
    assert skiba_kink(1 / 3, 3.0, 2.5) == pytest.approx(1.953125, rel=1e-14)


def test_skiba_production_is_continuous_at_kink():
    m = make_skiba_growth()
    f, _ = m.production
    k = skiba_kink(1 / 3, 3.0, 2.5)
    assert f(k * (1 + 1e-12)) == pytest.approx(f(k * (1 - 1e-12)), rel=1e-9)


def test_dae_residual_shape_and_zero_on_consistent_point():
    m = make_neoclassical_growth()
    x, mu = np.array([[1.0], [2.0]]), np.array([[1.2], [0.9]])
    y = 1 / mu
    xd = m.F(x, mu, y)
    md = m.costate_rhs(x, mu, y)
    res = dae_residual(m, x, mu, y, xd, md)
    assert res.shape == (2, 3)
    assert np.allclose(res, 0.0)


def test_dae_residual_rejects_wrong_dimensions():
    m = make_human_capital()
    with pytest.raises(ValueError):
        dae_residual(m, np.ones(2), np.ones(2), np.ones(2), np.ones(2), np.ones(2))


def test_build_model_rejects_unknown_parameters():
    with pytest.raises(KeyError):
        build_model("neoclassical_growth", {"beta": 0.3})
    with pytest.raises(KeyError):
        build_model("no_such_model")


def test_factories_validate_parameters():
    with pytest.raises(ValueError):
        make_neoclassical_growth(a=1.5)
    with pytest.raises(ValueError):
        make_neoclassical_growth(x0=-1.0)
    with pytest.raises(ValueError):
        build_model("skiba_growth", {"b1": 0.5})


def test_with_initial_state_updates_params():
    m = make_neoclassical_growth().with_initial_state([2.5])
    assert m.initial_state[0] == 2.5 and m.params["x0"] == 2.5


def test_human_capital_layout():
    m = make_human_capital()
    assert (m.state_dim, m.jump_dim) == (2, 3)
    assert m.extra_penalty_vars == (0, 1, 2)
    assert m.extra_penalty_weight == pytest.approx(5e-3)


def test_bounds_arrays():
    b = Bounds(x=((0.0, None),), mu=(None,))
    lo, hi = b.arrays("x", 1)
    assert lo[0] == 0.0 and hi[0] == np.inf
    lo, hi = b.arrays("mu", 1)
    assert lo[0] == -np.inf


def test_trajectory_shape_checks():
    t = np.linspace(0, 1, 5)
    tr = Trajectory(t, np.ones(5), np.ones(5), np.ones(5))
    assert tr.x_path.shape == (5, 1)
    with pytest.raises(ValueError):
        Trajectory(t, np.ones(4), np.ones(5), np.ones(5))
