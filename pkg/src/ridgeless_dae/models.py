"""Semi-explicit DAE models with a transversality condition.

A model is the triple of maps ``F, G, H`` in

    xdot  = F(x, mu, y)
    mudot = r mu - mu * G(x, mu, y)
    0     = H(x, mu, y)

with ``x(0) = x0`` given and ``mu(0)``, ``y(0)`` free. All maps operate on
stacked arrays: ``x`` and ``mu`` have shape ``(..., M)``, ``y`` has shape
``(..., P)``. Each map also has an analytic Jacobian returning the tuple of
partials with respect to ``(x, mu, y)``, shaped ``(..., out, M)``,
``(..., out, M)`` and ``(..., out, P)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

Array = np.ndarray
MapFn = Callable[[Array, Array, Array], Array]
JacFn = Callable[[Array, Array, Array], tuple]


@dataclass(frozen=True)
class Bounds:
    """Open box bounds; ``None`` entries mean unbounded."""

    x: tuple = ()
    mu: tuple = ()
    y: tuple = ()

    @staticmethod
    def _arrays(spec, dim):
        lo = np.full(dim, -np.inf)
        hi = np.full(dim, np.inf)
        for i, pair in enumerate(spec):
            if pair is None:
                continue
            a, b = pair
            lo[i] = -np.inf if a is None else a
            hi[i] = np.inf if b is None else b
        return lo, hi

    def arrays(self, name: str, dim: int):
        return self._arrays(getattr(self, name), dim)


@dataclass(frozen=True)
class ModelSpec:
    """A DAE instance; see the module docstring for the conventions."""

    name: str
    state_dim: int
    jump_dim: int
    discount_rate: float
    initial_state: Array
    F: MapFn
    G: MapFn
    H: MapFn
    F_jac: JacFn
    G_jac: JacFn
    H_jac: JacFn
    bounds: Bounds = field(default_factory=Bounds)
    extra_penalty_vars: tuple = ()
    extra_penalty_weight: float = 0.0
    params: dict = field(default_factory=dict)
    state_names: tuple = ()
    costate_names: tuple = ()
    jump_names: tuple = ()
    #: scalar production function and its derivative, when the model has one
    production: Optional[Callable] = None

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.initial_state, dtype=float))
        if x0.shape != (self.state_dim,):
            raise ValueError(f"initial_state must have shape ({self.state_dim},)")
        if not self.discount_rate > 0:
            raise ValueError("discount rate must be positive")
        object.__setattr__(self, "initial_state", x0)
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"x[{i}]" for i in range(self.state_dim)))
        if not self.costate_names:
            object.__setattr__(self, "costate_names", tuple(f"mu[{i}]" for i in range(self.state_dim)))
        if not self.jump_names:
            object.__setattr__(self, "jump_names", tuple(f"y[{i}]" for i in range(self.jump_dim)))
        for name, dim in (("x", self.state_dim), ("mu", self.state_dim), ("y", self.jump_dim)):
            lo, hi = self.bounds.arrays(name, dim)
            if np.any(lo >= hi):
                raise ValueError(f"bounds on {name} must satisfy lower < upper")

    @property
    def r(self) -> float:
        return self.discount_rate

    def with_initial_state(self, x0) -> "ModelSpec":
        """Copy of the model with a different ``x0``."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        params = dict(self.params)
        if "x0" in params and x0.size == 1:
            params["x0"] = float(x0[0])
        return replace(self, initial_state=x0, params=params)

    def costate_rhs(self, x, mu, y):
        """``r mu - mu * G`` evaluated pointwise."""
        return self.r * mu - mu * self.G(x, mu, y)


def _check_dims(model: ModelSpec, x, mu, y, xdot, mudot):
    M, P = model.state_dim, model.jump_dim
    for name, arr, dim in (("x", x, M), ("mu", mu, M), ("y", y, P), ("xdot", xdot, M), ("mudot", mudot, M)):
        if np.shape(arr)[-1:] != (dim,):
            raise ValueError(f"{name} must have trailing dimension {dim}, got shape {np.shape(arr)}")


def dae_residual(model: ModelSpec, x, mu, y, xdot, mudot) -> Array:
    """Stacked residual ``[xdot - F; mudot - r mu + mu G; H]``.

    Works pointwise or on stacks of points (leading dimensions broadcast).
    Non-finite entries signal that the point left the model's domain.
    """
    x, mu, y, xdot, mudot = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (x, mu, y, xdot, mudot))
    _check_dims(model, x, mu, y, xdot, mudot)
    with np.errstate(all="ignore"):
        r_f = xdot - model.F(x, mu, y)
        r_g = mudot - model.costate_rhs(x, mu, y)
        r_h = model.H(x, mu, y)
    return np.concatenate([r_f, r_g, np.broadcast_to(r_h, r_f.shape[:-1] + (model.jump_dim,))], axis=-1)


def level_jacobian(model: ModelSpec, x, mu, y):
    """Partials of the stacked residual with respect to the level variables.

    Returns ``(Dx, Dmu, Dy)`` shaped ``(..., 2M + P, dim)``; the derivative
    terms ``xdot`` and ``mudot`` enter the residual with unit coefficient and
    are not included.
    """
    M = model.state_dim
    with np.errstate(all="ignore"):
        Fx, Fm, Fy = model.F_jac(x, mu, y)
        Gx, Gm, Gy = model.G_jac(x, mu, y)
        Hx, Hm, Hy = model.H_jac(x, mu, y)
        G = model.G(x, mu, y)
    mu_c = np.asarray(mu)[..., :, None]
    Dx = np.concatenate([-Fx, mu_c * Gx, Hx], axis=-2)
    Dmu = np.concatenate([-Fm, (G - model.r)[..., :, None] * np.eye(M) + mu_c * Gm, Hm], axis=-2)
    Dy = np.concatenate([-Fy, mu_c * Gy, Hy], axis=-2)
    return Dx, Dmu, Dy


def steady_state_residual(model: ModelSpec, x, mu, y) -> Array:
    """Residual at a candidate rest point (all derivatives zero)."""
    zero = np.zeros(model.state_dim)
    return dae_residual(model, x, mu, y, zero, zero)


# --- helpers -----------------------------------------------------------------


def _zeros(x, out, dim):
    return np.zeros(np.shape(x)[:-1] + (out, dim))


def _col(v):
    return np.asarray(v)[..., None]


def _scalar_jac(dx, dmu, dy, x):
    """Pack scalar partials into the (..., 1, 1) Jacobian layout."""
    shape = np.shape(x)[:-1] + (1, 1)
    return (
        np.broadcast_to(np.asarray(dx)[..., None, None], shape).copy(),
        np.broadcast_to(np.asarray(dmu)[..., None, None], shape).copy(),
        np.broadcast_to(np.asarray(dy)[..., None, None], shape).copy(),
    )


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def _growth_model(name, x0, delta, r, f, fprime, fsecond, params, production):
    """Shared one-sector growth structure with a scalar production function."""
    _positive("x0", x0)
    _positive("r", r)
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")

    def F(x, mu, y):
        return f(x) - delta * x - y

    def G(x, mu, y):
        return fprime(x) - delta

    def H(x, mu, y):
        return mu * y - 1.0

    def F_jac(x, mu, y):
        return _scalar_jac(fprime(x[..., 0]) - delta, 0.0, -1.0, x)

    def G_jac(x, mu, y):
        return _scalar_jac(fsecond(x[..., 0]), 0.0, 0.0, x)

    def H_jac(x, mu, y):
        return _scalar_jac(0.0, y[..., 0], mu[..., 0], x)

    return ModelSpec(
        name=name,
        state_dim=1,
        jump_dim=1,
        discount_rate=r,
        initial_state=np.array([x0], dtype=float),
        F=F,
        G=G,
        H=H,
        F_jac=F_jac,
        G_jac=G_jac,
        H_jac=H_jac,
        bounds=Bounds(x=((0.0, None),), mu=((0.0, None),), y=((0.0, None),)),
        params=params,
        state_names=("capital",),
        costate_names=("costate",),
        jump_names=("consumption",),
        production=production,
    )


def make_neoclassical_growth(x0: float = 1.0, delta: float = 0.1, r: float = 0.11, a: float = 1.0 / 3.0) -> ModelSpec:
    """Ramsey growth model with ``f(x) = x**a`` and log utility."""
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a}")

    def f(x):
        return np.power(x, a)

    def fprime(x):
        return a * np.power(x, a - 1.0)

    def fsecond(x):
        return a * (a - 1.0) * np.power(x, a - 2.0)

    params = dict(x0=float(x0), delta=float(delta), r=float(r), a=float(a))
    return _growth_model("neoclassical_growth", x0, delta, r, f, fprime, fsecond, params, (f, fprime))


def skiba_kink(a: float, b1: float, b2: float) -> float:
    """Capital level where the two production branches meet."""
    return (b2 / (b1 - 1.0)) ** (1.0 / a)


def make_skiba_growth(
    x0: float = 1.0,
    delta: float = 0.1,
    r: float = 0.11,
    a: float = 1.0 / 3.0,
    A: float = 0.5,
    b1: float = 3.0,
    b2: float = 2.5,
) -> ModelSpec:
    """Growth model with the concave-convex technology ``A max(x^a, b1 x^a - b2)``.

    The marginal product jumps at the kink; exactly at the kink the lower
    branch is used.
    """
    if not 0 < a < 1:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    if not b1 > 1:
        raise ValueError(f"b1 must exceed 1, got {b1}")
    _positive("b2", b2)
    _positive("A", A)
    kink = skiba_kink(a, b1, b2)

    def upper(x):
        return np.asarray(x) > kink

    def f(x):
        xa = np.power(x, a)
        return A * np.maximum(xa, b1 * xa - b2)

    def fprime(x):
        return A * np.where(upper(x), b1, 1.0) * a * np.power(x, a - 1.0)

    def fsecond(x):
        return A * np.where(upper(x), b1, 1.0) * a * (a - 1.0) * np.power(x, a - 2.0)

    params = dict(x0=float(x0), delta=float(delta), r=float(r), a=float(a), A=float(A), b1=float(b1), b2=float(b2))
    return _growth_model("skiba_growth", x0, delta, r, f, fprime, fsecond, params, (f, fprime))


def make_asset_pricing(x0: float = 1.0, c: float = 0.02, g: float = -0.2, r: float = 0.1) -> ModelSpec:
    """Linear dividend process ``xdot = c + g x`` priced by a risk-neutral investor.

    The co-state equation ``mudot = r mu - x`` is stored as ``G = x / mu``.
    """
    _positive("r", r)
    if r == g:
        raise ValueError("r must differ from g")

    def F(x, mu, y):
        return c + g * x

    def G(x, mu, y):
        return x / mu

    def H(x, mu, y):
        return np.zeros(np.shape(x)[:-1] + (0,))

    def F_jac(x, mu, y):
        return np.full(np.shape(x)[:-1] + (1, 1), g), _zeros(x, 1, 1), _zeros(x, 1, 0)

    def G_jac(x, mu, y):
        return _col(1.0 / mu), _col(-x / mu**2), _zeros(x, 1, 0)

    def H_jac(x, mu, y):
        return _zeros(x, 0, 1), _zeros(x, 0, 1), _zeros(x, 0, 0)

    return ModelSpec(
        name="asset_pricing",
        state_dim=1,
        jump_dim=0,
        discount_rate=r,
        initial_state=np.array([x0], dtype=float),
        F=F,
        G=G,
        H=H,
        F_jac=F_jac,
        G_jac=G_jac,
        H_jac=H_jac,
        bounds=Bounds(mu=((0.0, None),)),
        params=dict(x0=float(x0), c=float(c), g=float(g), r=float(r)),
        state_names=("dividend",),
        costate_names=("price",),
    )


def make_human_capital(
    x_k0: float = 1.5,
    x_h0: float = 1.37,
    delta_k: float = 0.1,
    delta_h: float = 0.05,
    a_k: float = 1.0 / 3.0,
    a_h: float = 0.25,
    r: float = 0.11,
    lambda_p: float = 5e-3,
) -> ModelSpec:
    """Two-capital growth model with ``f = x_k^a_k x_h^a_h``.

    Jump variables are ``(y_c, y_k, y_h)``: consumption and the two
    investment flows. Their derivative norms are penalized with weight
    ``lambda_p``.
    """
    _positive("a_k", a_k)
    _positive("a_h", a_h)
    if not a_k + a_h < 1:
        raise ValueError("a_k + a_h must be below 1")
    for name, d in (("delta_k", delta_k), ("delta_h", delta_h)):
        if not 0 < d < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {d}")
    _positive("r", r)
    _positive("x_k0", x_k0)
    _positive("x_h0", x_h0)
    if lambda_p < 0:
        raise ValueError("lambda_p must be non-negative")
    deltas = np.array([delta_k, delta_h])
    shares = np.array([a_k, a_h])

    def f(x):
        return np.power(x[..., 0], a_k) * np.power(x[..., 1], a_h)

    def grad_f(x):
        return shares * f(x)[..., None] / x

    def F(x, mu, y):
        return y[..., 1:3] - deltas * x

    def G(x, mu, y):
        return grad_f(x) - deltas

    def H(x, mu, y):
        return np.stack(
            [
                mu[..., 0] * y[..., 0] - 1.0,
                mu[..., 0] - mu[..., 1],
                f(x) - y[..., 0] - y[..., 1] - y[..., 2],
            ],
            axis=-1,
        )

    def F_jac(x, mu, y):
        dx = _zeros(x, 2, 2)
        dx[..., 0, 0] = -delta_k
        dx[..., 1, 1] = -delta_h
        dy = _zeros(x, 2, 3)
        dy[..., 0, 1] = 1.0
        dy[..., 1, 2] = 1.0
        return dx, _zeros(x, 2, 2), dy

    def G_jac(x, mu, y):
        fx = f(x)[..., None, None]
        a = shares
        # d/dx_j (a_i f / x_i) = a_i a_j f / (x_i x_j) - delta_ij a_i f / x_i^2
        xi = x[..., :, None]
        xj = x[..., None, :]
        dx = a[:, None] * a[None, :] * fx / (xi * xj)
        dx = dx - np.eye(2) * (a * f(x)[..., None] / x**2)[..., None, :]
        return dx, _zeros(x, 2, 2), _zeros(x, 2, 3)

    def H_jac(x, mu, y):
        dx = _zeros(x, 3, 2)
        dx[..., 2, :] = grad_f(x)
        dmu = _zeros(x, 3, 2)
        dmu[..., 0, 0] = y[..., 0]
        dmu[..., 1, 0] = 1.0
        dmu[..., 1, 1] = -1.0
        dy = _zeros(x, 3, 3)
        dy[..., 0, 0] = mu[..., 0]
        dy[..., 2, :] = -1.0
        return dx, dmu, dy

    return ModelSpec(
        name="human_capital",
        state_dim=2,
        jump_dim=3,
        discount_rate=r,
        initial_state=np.array([x_k0, x_h0], dtype=float),
        F=F,
        G=G,
        H=H,
        F_jac=F_jac,
        G_jac=G_jac,
        H_jac=H_jac,
        bounds=Bounds(x=((0.0, None), (0.0, None)), mu=((0.0, None), (0.0, None)), y=((0.0, None), None, None)),
        extra_penalty_vars=(0, 1, 2),
        extra_penalty_weight=float(lambda_p),
        params=dict(
            x_k0=float(x_k0),
            x_h0=float(x_h0),
            delta_k=float(delta_k),
            delta_h=float(delta_h),
            a_k=float(a_k),
            a_h=float(a_h),
            r=float(r),
            lambda_p=float(lambda_p),
        ),
        state_names=("physical_capital", "human_capital"),
        costate_names=("costate_k", "costate_h"),
        jump_names=("consumption", "investment_k", "investment_h"),
        production=(f, grad_f),
    )


def make_optimal_advertising(
    x0: float = 0.4, r: float = 0.11, c: float = 0.5, beta: float = 0.05, kappa: float = 0.5
) -> ModelSpec:
    """Vidale-Wolfe style advertising model.

    ``x`` is market share, ``y`` advertising effort. The co-state law
    ``mudot = r mu - gamma + beta mu + mu y`` is stored with
    ``G = gamma / mu - beta - y``, ``gamma = (beta + r) / c``.
    """
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    for name, v in (("beta", beta), ("r", r), ("c", c)):
        _positive(name, v)
    gamma = (beta + r) / c
    power = (1.0 - kappa) / kappa

    def F(x, mu, y):
        return (1.0 - x) * y - beta * x

    def G(x, mu, y):
        return gamma / mu - beta - y

    def H(x, mu, y):
        return np.power(y, power) - kappa * mu * (1.0 - x)

    def F_jac(x, mu, y):
        return _scalar_jac(-y[..., 0] - beta, 0.0, 1.0 - x[..., 0], x)

    def G_jac(x, mu, y):
        return _scalar_jac(0.0, -gamma / mu[..., 0] ** 2, -1.0, x)

    def H_jac(x, mu, y):
        yv = y[..., 0]
        return _scalar_jac(kappa * mu[..., 0], -kappa * (1.0 - x[..., 0]), power * np.power(yv, power - 1.0), x)

    return ModelSpec(
        name="optimal_advertising",
        state_dim=1,
        jump_dim=1,
        discount_rate=r,
        initial_state=np.array([x0], dtype=float),
        F=F,
        G=G,
        H=H,
        F_jac=F_jac,
        G_jac=G_jac,
        H_jac=H_jac,
        bounds=Bounds(x=((0.0, 1.0),), mu=((0.0, None),), y=((0.0, None),)),
        params=dict(x0=float(x0), r=float(r), c=float(c), beta=float(beta), kappa=float(kappa), gamma=gamma),
        state_names=("market_share",),
        costate_names=("costate",),
        jump_names=("advertising",),
    )


MODEL_FACTORIES = {
    "neoclassical_growth": make_neoclassical_growth,
    "skiba_growth": make_skiba_growth,
    "asset_pricing": make_asset_pricing,
    "human_capital": make_human_capital,
    "optimal_advertising": make_optimal_advertising,
}


def build_model(name: str, params: Optional[dict] = None) -> ModelSpec:
    """Construct a built-in model by name, ignoring irrelevant keys."""
    import inspect

    if name not in MODEL_FACTORIES:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODEL_FACTORIES)}")
    factory = MODEL_FACTORIES[name]
    accepted = inspect.signature(factory).parameters
    params = dict(params or {})
    unknown = set(params) - set(accepted)
    if unknown:
        raise KeyError(f"model {name!r} does not take parameters {sorted(unknown)}")
    return factory(**params)


@dataclass
class Trajectory:
    """Sampled paths; ``x_path`` etc. have one row per time."""

    times: Array
    x_path: Array
    mu_path: Array
    y_path: Array
    xdot_path: Optional[Array] = None
    mudot_path: Optional[Array] = None
    ydot_path: Optional[Array] = None
    #: set when integration stopped before the requested horizon
    terminated_early: bool = False
    message: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = self.times.size
        for name in ("x_path", "mu_path", "y_path", "xdot_path", "mudot_path", "ydot_path"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None] if n > 1 or arr.size == 0 else arr[None, :]
            if arr.shape[0] != n:
                raise ValueError(f"{name} has {arr.shape[0]} rows but there are {n} times")
            setattr(self, name, arr)

    def __len__(self):
        return self.times.size

    def variables(self) -> dict:
        """Level paths keyed by ``x``, ``mu``, ``y``."""
        return {"x": self.x_path, "mu": self.mu_path, "y": self.y_path}
