"""Real orthonormal spherical harmonics built from Jacobi polynomials.

Indexing follows the 1-based order convention ``1 <= l <= 2n + 1``:

* ``l = 1`` is the zonal harmonic,
* ``l = 2j`` carries ``cos(j phi)``,
* ``l = 2j + 1`` carries ``sin(j phi)``.

The polar factor is ``C[n, j] sin(theta)^j P_{n-j}^{(j, j)}(cos theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .jacobi import JacobiParams, eval_jacobi, gauss_jacobi_rule

__all__ = [
    "HarmonicIndex",
    "SphericalPoint",
    "AngularGrid",
    "GridTooCoarseError",
    "harmonic_indices",
    "flat_harmonic",
    "decode_order",
    "harmonic_constant",
    "polar_factor",
    "azimuthal_factor",
    "eval_harmonic",
    "build_angular_grid",
    "angular_analyze",
    "angular_analyze_array",
    "harmonic_matrix",
    "polar_table",
]


class GridTooCoarseError(ValueError):
    """The quadrature grid cannot integrate the requested products exactly."""


class HarmonicIndex(NamedTuple):
    n: int
    l: int

    def validate(self) -> "HarmonicIndex":
        if self.n < 0 or not 1 <= self.l <= 2 * self.n + 1:
            raise ValueError(f"harmonic index out of range: n={self.n}, l={self.l}")
        return self


class SphericalPoint(NamedTuple):
    theta: float
    phi: float


def harmonic_indices(n_max: int) -> list[HarmonicIndex]:
    """All (n, l) with n <= n_max, ascending n then l."""
    return [HarmonicIndex(n, l) for n in range(n_max + 1) for l in range(1, 2 * n + 2)]


def flat_harmonic(n: int, l: int) -> int:
    """Position of (n, l) in :func:`harmonic_indices` order."""
    return n * n + l - 1


def decode_order(l: int) -> tuple[int, str]:
    """Map the order ``l`` to ``(j, kind)`` with kind in {"zonal", "cos", "sin"}."""
    if l == 1:
        return 0, "zonal"
    return l // 2, ("cos" if l % 2 == 0 else "sin")


@lru_cache(maxsize=None)
def harmonic_constant(n: int, j: int) -> float:
    """Normalisation constant of the (n, j) polar factor.

    For j = 0 this is the zonal constant sqrt((2n + 1) / 4 pi).
    """
    if j == 0:
        return math.sqrt((2 * n + 1) / (4.0 * math.pi))
    log_c = 0.5 * (
        math.log(2 * n + 1)
        + math.lgamma(n - j + 1)
        + math.lgamma(n + j + 1)
        - math.log(2.0 * math.pi)
        - 2.0 * math.lgamma(n + 1)
    ) - j * math.log(2.0)
    return math.exp(log_c)


def polar_factor(n: int, j: int, cos_theta, sin_theta=None):
    """C[n, j] sin^j P_{n-j}^{(j, j)}(cos theta), vectorised over the angle."""
    cos_theta = np.asarray(cos_theta, dtype=float)
    if sin_theta is None:
        sin_theta = np.sqrt(np.clip(1.0 - cos_theta * cos_theta, 0.0, None))
    jac = eval_jacobi(n - j, JacobiParams(j, j), cos_theta, clamp=True)
    return harmonic_constant(n, j) * sin_theta**j * jac


def azimuthal_factor(l: int, phi):
    j, kind = decode_order(l)
    phi = np.asarray(phi, dtype=float)
    if kind == "zonal":
        return np.ones_like(phi)
    return np.cos(j * phi) if kind == "cos" else np.sin(j * phi)


def eval_harmonic(idx, theta, phi=None):
    """Evaluate Y_l^n at polar angle ``theta`` and azimuth ``phi``.

    ``idx`` is a :class:`HarmonicIndex` or an ``(n, l)`` pair; ``theta`` may
    also be a :class:`SphericalPoint`, in which case ``phi`` is omitted.
    """
    n, l = HarmonicIndex(*idx).validate()
    if phi is None:
        theta, phi = theta
    scalar = np.ndim(theta) == 0 and np.ndim(phi) == 0
    j, _ = decode_order(l)
    val = polar_factor(n, j, np.cos(theta), np.abs(np.sin(theta))) * azimuthal_factor(l, phi)
    return float(val) if scalar else val


@dataclass(frozen=True)
class AngularGrid:
    """Gauss-Legendre in cos(theta) times the uniform trapezoid rule in phi."""

    cos_theta: np.ndarray
    theta_weights: np.ndarray
    phi: np.ndarray

    @property
    def L_theta(self) -> int:
        return len(self.cos_theta)

    @property
    def L_phi(self) -> int:
        return len(self.phi)

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.cos_theta)

    @property
    def sin_theta(self) -> np.ndarray:
        return np.sqrt(1.0 - self.cos_theta**2)

    @property
    def phi_weight(self) -> float:
        return 2.0 * math.pi / self.L_phi

    @property
    def exact_degree(self) -> int:
        """Highest spherical-polynomial degree integrated exactly."""
        return min(2 * self.L_theta - 1, self.L_phi - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return self.L_theta, self.L_phi

    def weights(self) -> np.ndarray:
        """Tensor weights with shape (L_theta, L_phi)."""
        return np.outer(self.theta_weights, np.full(self.L_phi, self.phi_weight))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(theta, phi) arrays of shape (L_theta, L_phi)."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def integrate(self, samples) -> float:
        return float(np.sum(self.weights() * samples))


def build_angular_grid(L_theta: int, L_phi: int) -> AngularGrid:
    if L_theta < 1 or L_phi < 1:
        raise ValueError("angular grid sizes must be positive")
    rule = gauss_jacobi_rule(L_theta, JacobiParams(0.0, 0.0))
    phi = 2.0 * math.pi * np.arange(L_phi) / L_phi
    return AngularGrid(np.asarray(rule.nodes), np.asarray(rule.weights), phi)


@lru_cache(maxsize=64)
def _polar_table(n_max: int, cos_theta: bytes, size: int) -> np.ndarray:
    # table[n, j, q] = polar factor at node q, zero for j > n.
    ct = np.frombuffer(cos_theta, dtype=float, count=size)
    st = np.sqrt(1.0 - ct * ct)
    table = np.zeros((n_max + 1, n_max + 1, size))
    for n in range(n_max + 1):
        for j in range(n + 1):
            table[n, j] = polar_factor(n, j, ct, st)
    return table


def polar_table(grid: AngularGrid, n_max: int) -> np.ndarray:
    return _polar_table(n_max, np.ascontiguousarray(grid.cos_theta).tobytes(), grid.L_theta)


def angular_analyze_array(samples, grid: AngularGrid, n_max: int) -> np.ndarray:
    """Harmonic coefficients of ``samples`` (shape ``(..., L_theta, L_phi)``).

    Returns an array of shape ``(..., (n_max + 1)**2)`` in
    :func:`harmonic_indices` order. The phi sums are done first (one
    cos/sin table per azimuthal frequency), then the polar sums per (n, j).
    """
    if 2 * n_max > grid.exact_degree:
        raise GridTooCoarseError(
            f"angular grid {grid.L_theta}x{grid.L_phi} integrates degree {grid.exact_degree}, "
            f"analysis to n_max={n_max} needs {2 * n_max}"
        )
    samples = np.asarray(samples, dtype=float)
    lead = samples.shape[:-2]
    j = np.arange(n_max + 1)
    ang = np.outer(grid.phi, j)
    w_phi = grid.phi_weight
    a_cos = samples @ (np.cos(ang) * w_phi)  # (..., L_theta, n_max+1)
    a_sin = samples @ (np.sin(ang) * w_phi)
    table = polar_table(grid, n_max) * grid.theta_weights  # (n, j, q)
    # c_cos[..., n, j] = sum_q table[n, j, q] a_cos[..., q, j]
    c_cos = np.einsum("njq,...qj->...nj", table, a_cos)
    c_sin = np.einsum("njq,...qj->...nj", table, a_sin)
    out = np.zeros(lead + ((n_max + 1) ** 2,))
    for n in range(n_max + 1):
        base = n * n
        out[..., base] = c_cos[..., n, 0]
        out[..., base + 1 : base + 2 * n + 1 : 2] = c_cos[..., n, 1 : n + 1]
        out[..., base + 2 : base + 2 * n + 2 : 2] = c_sin[..., n, 1 : n + 1]
    return out


def angular_analyze(samples, grid: AngularGrid, n_max: int) -> dict[HarmonicIndex, float]:
    """Coefficients c[n, l] = integral of f Y_l^n over the sphere, by quadrature."""
    coeffs = angular_analyze_array(samples, grid, n_max)
    return {idx: float(coeffs[i]) for i, idx in enumerate(harmonic_indices(n_max))}


def harmonic_matrix(grid: AngularGrid, n_max: int) -> np.ndarray:
    """Values of every Y_l^n (n <= n_max) on the grid, shape (H, L_theta, L_phi)."""
    table = polar_table(grid, n_max)
    j = np.arange(n_max + 1)
    ang = np.outer(j, grid.phi)
    cos_j, sin_j = np.cos(ang), np.sin(ang)
    out = np.empty(((n_max + 1) ** 2, grid.L_theta, grid.L_phi))
    for n in range(n_max + 1):
        base = n * n
        out[base] = table[n, 0][:, None] * cos_j[0][None, :]
        for jj in range(1, n + 1):
            out[base + 2 * jj - 1] = table[n, jj][:, None] * cos_j[jj][None, :]
            out[base + 2 * jj] = table[n, jj][:, None] * sin_j[jj][None, :]
    return out
