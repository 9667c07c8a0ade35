"""Half-integer Matern kernels on the time axis.

The kernels are written in the usual form

    k(t, t') = sigma^2 * p(z) * exp(-z),    z = sqrt(2 nu) |t - t'| / ell

with p = 1, 1 + z and 1 + z + z^2/3 for nu = 1/2, 3/2 and 5/2. Because
``p(z) exp(-z)`` has an elementary antiderivative, the running integrals
``int_0^u k(tau, c) dtau`` needed to turn derivative expansions into levels
are available in closed form for all three smoothness values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

SUPPORTED_NU = (0.5, 1.5, 2.5)

#: Diagonal jitter (relative to sigma^2) added before factorizing a Gram matrix.
GRAM_JITTER = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Matern kernel parameters.

    Parameters
    ----------
    nu : float
        Smoothness, one of 1/2, 3/2, 5/2.
    lengthscale : float
        Lengthscale in time units.
    scale : float
        Output scale ``sigma``; ``k(t, t) = sigma**2``.
    """

    nu: float = 0.5
    lengthscale: float = 10.0
    scale: float = 1.0

    def __post_init__(self):
        nu = float(self.nu)
        match = [v for v in SUPPORTED_NU if abs(v - nu) < 1e-12]
        if not match:
            raise ValueError(f"nu must be one of {SUPPORTED_NU}, got {self.nu}")
        object.__setattr__(self, "nu", match[0])
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def rate(self) -> float:
        """Inverse distance scale ``sqrt(2 nu) / ell``."""
        return np.sqrt(2.0 * self.nu) / self.lengthscale

    @property
    def variance(self) -> float:
        return self.scale**2


@dataclass(frozen=True)
class TrainingGrid:
    """Strictly increasing, non-negative collocation times."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1)
        if pts.size < 2:
            raise ValueError("a training grid needs at least two points")
        if not np.all(np.isfinite(pts)) or np.any(pts < 0):
            raise ValueError("grid points must be finite and non-negative")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def equispaced(cls, horizon: float, n: int) -> "TrainingGrid":
        return cls(np.linspace(0.0, horizon, int(n)))

    @classmethod
    def uniform_iid(cls, horizon: float, n: int, seed: int) -> "TrainingGrid":
        """Sorted i.i.d. uniform draws on [0, horizon]; 0 is always included."""
        rng = np.random.default_rng(seed)
        draws = np.sort(rng.uniform(0.0, horizon, size=int(n) - 1))
        return cls(np.unique(np.concatenate([[0.0], draws])))

    @property
    def horizon(self) -> float:
        return float(self.points[-1])

    def __len__(self) -> int:
        return self.points.size


def _profile(nu: float, z):
    if nu == 0.5:
        return np.ones_like(z)
    if nu == 1.5:
        return 1.0 + z
    return 1.0 + z + z * z / 3.0


def _profile_integral(nu: float, z):
    """``int_0^z p(s) exp(-s) ds`` for z >= 0."""
    e = np.exp(-z)
    if nu == 0.5:
        return -np.expm1(-z)
    if nu == 1.5:
        return 2.0 * (-np.expm1(-z)) - z * e
    return (8.0 / 3.0) * (-np.expm1(-z)) - e * (5.0 * z + z * z) / 3.0


def kernel_eval(spec: KernelSpec, t, t_prime):
    """Evaluate ``k(t, t')``; broadcasts over array arguments."""
    z = spec.rate * np.abs(np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float))
    out = spec.variance * _profile(spec.nu, z) * np.exp(-z)
    return out if np.ndim(out) else float(out)


def _signed_antiderivative(spec: KernelSpec, w):
    # int_0^w p(c|s|) exp(-c|s|) ds, an odd function of w
    w = np.asarray(w, dtype=float)
    return np.sign(w) * _profile_integral(spec.nu, spec.rate * np.abs(w)) / spec.rate


def kernel_integral(spec: KernelSpec, upper, center):
    """Running integral ``int_0^upper k(tau, center) dtau`` (closed form)."""
    upper = np.asarray(upper, dtype=float)
    center = np.asarray(center, dtype=float)
    if np.any(upper < 0):
        raise ValueError("upper integration limit must be non-negative")
    out = spec.variance * (
        _signed_antiderivative(spec, upper - center) + _signed_antiderivative(spec, center)
    )
    return out if np.ndim(out) else float(out)


def kernel_integral_quad(spec: KernelSpec, upper: float, center: float, tol: float = 1e-12) -> float:
    """Adaptive-quadrature version of :func:`kernel_integral`, used as a check."""
    if upper < 0:
        raise ValueError("upper integration limit must be non-negative")
    if upper == 0:
        return 0.0
    # split at the center so each piece is smooth
    cuts = [0.0] + ([center] if 0 < center < upper else []) + [upper]
    val = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        piece, _ = integrate.quad(
            lambda s: kernel_eval(spec, s, center), a, b, epsabs=tol, epsrel=1e-13, limit=200
        )
        val += piece
    return val


def gram_matrix(spec: KernelSpec, grid: TrainingGrid) -> np.ndarray:
    """``K[i, j] = k(t_i, t_j)`` on the grid."""
    t = grid.points if isinstance(grid, TrainingGrid) else np.asarray(grid, dtype=float)
    return kernel_eval(spec, t[:, None], t[None, :])


def kernel_matrix(spec: KernelSpec, times, grid: TrainingGrid) -> np.ndarray:
    """Cross-kernel matrix between arbitrary evaluation times and grid points."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return np.atleast_2d(kernel_eval(spec, times[:, None], grid.points[None, :]))


def integrated_kernel_row(spec: KernelSpec, eval_time: float, grid: TrainingGrid) -> np.ndarray:
    """Vector of ``int_0^eval_time k(tau, t_j) dtau`` over grid points ``t_j``."""
    if eval_time < 0:
        raise ValueError("eval_time must be non-negative")
    return np.asarray(kernel_integral(spec, float(eval_time), grid.points), dtype=float)


def integrated_kernel_matrix(spec: KernelSpec, times, grid: TrainingGrid) -> np.ndarray:
    """Rows of :func:`integrated_kernel_row` for several evaluation times."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("evaluation times must be non-negative")
    return np.atleast_2d(kernel_integral(spec, times[:, None], grid.points[None, :]))


def rkhs_norm_sq(gram: np.ndarray, coeffs) -> float:
    """Squared RKHS norm ``a^T K a`` of a kernel expansion."""
    coeffs = np.asarray(coeffs, dtype=float)
    gram = np.asarray(gram, dtype=float)
    if coeffs.shape != (gram.shape[0],):
        raise ValueError(f"expected {gram.shape[0]} coefficients, got shape {coeffs.shape}")
    return float(coeffs @ gram @ coeffs)


def gram_factor(gram: np.ndarray, variance: float = 1.0) -> np.ndarray:
    """Return ``L`` with ``L @ L.T = K + jitter * I``.

    Falls back to an eigendecomposition with clipped spectrum if the
    jittered matrix is still numerically indefinite.
    """
    n = gram.shape[0]
    jittered = gram + GRAM_JITTER * variance * np.eye(n)
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(jittered)
        w = np.clip(w, GRAM_JITTER * variance, None)
        return v * np.sqrt(w)
