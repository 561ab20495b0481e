"""Ball polynomials, the boundary-vanishing basis of V_N and its operators.

A ball polynomial is a Jacobi polynomial in ``t = 2|x|^2 - 1`` times a solid
spherical harmonic ``|x|^n Y_l^n(x/|x|)``.  The generalized basis used by the
solver is the difference of two consecutive ``alpha = 0`` members,

    B^{-1,n}_{k,l} = B^{0,n}_{k,l} - B^{0,n}_{k-1,l},    k >= 1,

which vanishes on the unit sphere.  In coefficient space its stiffness matrix
is the diagonal ``2n + 4k + 1`` and its mass matrix is tridiagonal in ``k``
for each fixed (n, l).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .harmonics import azimuthal_factor, decode_order, polar_factor
from .jacobi import JacobiParams, eval_jacobi

__all__ = [
    "BasisIndex",
    "BallPolySpec",
    "ModeOperator",
    "IndexLayout",
    "ball_norm",
    "ball_prefactor",
    "radial_ball",
    "radial_generalized",
    "eval_ball",
    "eval_generalized",
    "stiffness_lambda",
    "mass_tridiagonal",
    "mode_operator",
    "index_set",
    "index_layout",
    "to_spherical",
]

_BOUNDARY_SLACK = 1e-14


class BasisIndex(NamedTuple):
    """(k, n, l): radial degree, harmonic degree, harmonic order."""

    k: int
    n: int
    l: int

    @property
    def degree(self) -> int:
        return 2 * self.k + self.n

    def validate(self, N: int | None = None) -> "BasisIndex":
        k, n, l = self
        if k < 1 or n < 0 or not 1 <= l <= 2 * n + 1:
            raise ValueError(f"invalid basis index {tuple(self)}")
        if N is not None and self.degree > N:
            raise ValueError(f"basis index {tuple(self)} has degree {self.degree} > N={N}")
        return self


@dataclass(frozen=True)
class BallPolySpec:
    alpha: int
    k: int
    n: int
    l: int

    def __post_init__(self):
        if self.alpha not in (-1, 0, 1):
            raise ValueError(f"alpha must be -1, 0 or 1, got {self.alpha}")
        if self.k < 0 or self.n < 0 or not 1 <= self.l <= 2 * self.n + 1:
            raise ValueError(f"invalid ball polynomial index (k={self.k}, n={self.n}, l={self.l})")


def _log_poch(x: float, k: int) -> float:
    return math.lgamma(x + k) - math.lgamma(x)


def ball_prefactor(alpha: float, k: int, n: int) -> float:
    """(n + k + 3/2)_k / (n + k + 3/2 + alpha)_k; identically 1 for alpha = 0."""
    if alpha == 0:
        return 1.0
    return math.exp(_log_poch(n + k + 1.5, k) - _log_poch(n + k + 1.5 + alpha, k))


@lru_cache(maxsize=None)
def ball_norm(alpha: float, k: int, n: int) -> float:
    """Squared weighted L2 norm h_k^{alpha,n} of a ball polynomial."""
    if not alpha > -1:
        raise ValueError("ball_norm needs alpha > -1")
    # Exact rational forms for the two cases used by the solver and tests.
    if alpha == 0:
        return 1.0 / (2 * n + 4 * k + 3)
    if alpha == 1:
        return 2.0 * (k + 1) * (2 * n + 2 * k + 3) / ((2 * n + 4 * k + 3) ** 2 * (2 * n + 4 * k + 5))
    log_h = (
        math.lgamma(k + alpha + 1.0)
        + math.lgamma(n + 2 * k + 1.5)
        + _log_poch(n + k + 1.5, k)
        - math.log(2.0)
        - math.lgamma(k + 1.0)
        - math.lgamma(n + 2 * k + alpha + 2.5)
        - _log_poch(n + k + alpha + 1.5, k)
    )
    return math.exp(log_h)


def stiffness_lambda(k: int, n: int) -> float:
    """Diagonal entry of the gradient Gram matrix of the generalized basis."""
    if k < 1 or n < 0:
        raise ValueError("stiffness_lambda needs k >= 1 and n >= 0")
    return float(2 * n + 4 * k + 1)


def radial_ball(alpha: float, k: int, n: int, r, t=None):
    """Radial part ``prefactor * r^n * P_k^{(alpha, n+1/2)}(2 r^2 - 1)``.

    ``t`` may be passed when ``2 r^2 - 1`` is already known (more accurate near
    the origin than recomputing it).
    """
    r = np.asarray(r, dtype=float)
    if t is None:
        t = 2.0 * r * r - 1.0
    jac = eval_jacobi(k, JacobiParams(alpha, n + 0.5), t, clamp=True)
    return ball_prefactor(alpha, k, n) * r**n * jac


def radial_generalized(k: int, n: int, r, t=None):
    """Radial part of B^{-1,n}_{k,l}: ``r^n (P_k - P_{k-1})`` with parameters (0, n + 1/2)."""
    r = np.asarray(r, dtype=float)
    if t is None:
        t = 2.0 * r * r - 1.0
    params = JacobiParams(0.0, n + 0.5)
    diff = eval_jacobi(k, params, t, clamp=True)
    if k >= 1:
        diff = diff - eval_jacobi(k - 1, params, t, clamp=True)
    return r**n * diff


def to_spherical(x):
    """Cartesian points (..., 3) to (r, cos_theta, sin_theta, phi).

    At the origin the angles are set to theta = 0, phi = 0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("points must have a trailing dimension of size 3")
    r = np.sqrt(np.sum(x * x, axis=-1))
    if np.any(r > 1.0 + _BOUNDARY_SLACK) or not np.all(np.isfinite(r)):
        bad = np.flatnonzero(~(r <= 1.0 + _BOUNDARY_SLACK))[0]
        raise ValueError(f"point {x.reshape(-1, 3)[bad].tolist()} lies outside the closed unit ball")
    safe = np.where(r > 0.0, r, 1.0)
    cos_t = np.where(r > 0.0, x[..., 2] / safe, 1.0)
    cos_t = np.clip(cos_t, -1.0, 1.0)
    rho = np.hypot(x[..., 0], x[..., 1])
    sin_t = np.where(r > 0.0, rho / safe, 0.0)
    phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * math.pi)
    return np.minimum(r, 1.0), cos_t, sin_t, phi


def _angular(n: int, l: int, cos_t, sin_t, phi):
    j, _ = decode_order(l)
    return polar_factor(n, j, cos_t, sin_t) * azimuthal_factor(l, phi)


def eval_ball(spec: BallPolySpec, x):
    """Evaluate B^{alpha,n}_{k,l} (alpha in {0, 1}) at points ``x`` of shape (..., 3).

    At the origin the harmonic factor is the constant 1/sqrt(4 pi) for n = 0
    and exactly 0 for n >= 1.
    """
    if spec.alpha not in (0, 1):
        raise ValueError("eval_ball handles alpha = 0 and alpha = 1; use eval_generalized for alpha = -1")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    r, cos_t, sin_t, phi = to_spherical(x)
    val = radial_ball(spec.alpha, spec.k, spec.n, r) * _angular(spec.n, spec.l, cos_t, sin_t, phi)
    return float(val) if scalar else val


def eval_generalized(idx, x):
    """Evaluate the boundary-vanishing basis function B^{-1,n}_{k,l} at ``x``."""
    k, n, l = BasisIndex(*idx)
    if k < 1:
        raise ValueError("the generalized basis needs k >= 1")
    BasisIndex(k, n, l).validate()
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    r, cos_t, sin_t, phi = to_spherical(x)
    val = radial_generalized(k, n, r) * _angular(n, l, cos_t, sin_t, phi)
    return float(val) if scalar else val


@dataclass(frozen=True)
class ModeOperator:
    """Radial operators of one harmonic degree n, for k = 1..k_max."""

    n: int
    stiffness: np.ndarray
    mass_diag: np.ndarray
    mass_off: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.stiffness)

    def mass_matrix(self) -> np.ndarray:
        return np.diag(self.mass_diag) + np.diag(self.mass_off, 1) + np.diag(self.mass_off, -1)


def mass_tridiagonal(n: int, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(diag, off) of the L2 Gram matrix of B^{-1,n}_{k,l}, k = 1..k_max.

    diag[k] = h_k + h_{k-1} and off[k, k+1] = -h_k with h_k = 1/(2n + 4k + 3).
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k = np.arange(1, k_max + 1)
    h = 1.0 / (2 * n + 4 * np.arange(0, k_max + 1) + 3.0)
    diag = h[k] + h[k - 1]
    off = -h[k[:-1]]
    return diag, off


def mode_operator(n: int, k_max: int) -> ModeOperator:
    diag, off = mass_tridiagonal(n, k_max)
    lam = 2.0 * n + 4.0 * np.arange(1, k_max + 1) + 1.0
    return ModeOperator(n, lam, diag, off)


def index_set(N: int) -> list[BasisIndex]:
    """Every (k, n, l) with k >= 1 and 2k + n <= N, ordered by n, then l, then k."""
    return list(index_layout(N).indices)


@dataclass(frozen=True)
class IndexLayout:
    """Flat array view of :func:`index_set` used by the transforms and the solver.

    Each (n, l) pair owns a contiguous block of radial degrees k = 1..K_n with
    K_n = (N - n) // 2.
    """

    N: int
    k: np.ndarray
    n: np.ndarray
    l: np.ndarray
    lam: np.ndarray
    mass_diag: np.ndarray
    # Coupling between entry i and i+1; zero across (n, l) block boundaries.
    mass_upper: np.ndarray
    indices: tuple = field(repr=False)

    def __len__(self):
        return len(self.k)

    def position(self, idx) -> int:
        k, n, l = idx
        return _block_start(self.N, n, l) + k - 1

    def blocks(self):
        """Yield (n, l, start, stop) for every radial block."""
        pos = 0
        for n in range(self.N - 1):
            K = (self.N - n) // 2
            for l in range(1, 2 * n + 2):
                yield n, l, pos, pos + K
                pos += K


def _block_start(N: int, n: int, l: int) -> int:
    start = sum((2 * m + 1) * ((N - m) // 2) for m in range(n))
    return start + (l - 1) * ((N - n) // 2)


@lru_cache(maxsize=32)
def index_layout(N: int) -> IndexLayout:
    if N < 2:
        raise ValueError(f"V_N needs N >= 2, got {N}")
    ks, ns, ls = [], [], []
    for n in range(N - 1):
        K = (N - n) // 2
        for l in range(1, 2 * n + 2):
            ks.extend(range(1, K + 1))
            ns.extend([n] * K)
            ls.extend([l] * K)
    k = np.array(ks, dtype=np.int64)
    n = np.array(ns, dtype=np.int64)
    l = np.array(ls, dtype=np.int64)
    h = 1.0 / (2.0 * n + 4.0 * k + 3.0)
    h_prev = 1.0 / (2.0 * n + 4.0 * (k - 1) + 3.0)
    same_block = np.zeros(len(k), dtype=bool)
    same_block[:-1] = (n[1:] == n[:-1]) & (l[1:] == l[:-1])
    upper = np.where(same_block, -h, 0.0)
    lam = 2.0 * n + 4.0 * k + 1.0
    indices = tuple(BasisIndex(int(a), int(b), int(c)) for a, b, c in zip(k, n, l))
    for arr in (k, n, l, lam, h, upper):
        arr.setflags(write=False)
    diag = h + h_prev
    diag.setflags(write=False)
    return IndexLayout(N, k, n, l, lam, diag, upper, indices)
