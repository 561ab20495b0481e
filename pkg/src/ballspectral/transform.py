"""Quadrature on the unit ball, analysis onto V_N and synthesis from coefficients.

Radial quadrature lives in ``t = 2 r^2 - 1``: with that substitution

    int_0^1 F(r) r^2 dr = 1/(4 sqrt 2) int_{-1}^{1} F(r(t)) (1 + t)^{1/2} dt,

so a Gauss-Jacobi (0, 1/2) rule in ``t`` integrates the radial factors of
ball polynomials exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .ballbasis import BasisIndex, IndexLayout, index_layout, radial_generalized, to_spherical
from .harmonics import (
    AngularGrid,
    GridTooCoarseError,
    angular_analyze_array,
    build_angular_grid,
    polar_factor,
    polar_table,
)
from .jacobi import JacobiParams, gauss_jacobi_rule

__all__ = [
    "BallGrid",
    "CoefficientField",
    "NonFiniteSampleError",
    "build_ball_grid",
    "default_orders",
    "analyze",
    "analyze_direct",
    "synthesize",
    "synthesize_on_grid",
    "radial_table",
]

_RADIAL_SCALE = 1.0 / (4.0 * math.sqrt(2.0))


class NonFiniteSampleError(ValueError):
    """A sampled field value is NaN or infinite."""


@dataclass(frozen=True)
class BallGrid:
    t: np.ndarray
    radial_weights: np.ndarray
    angular: AngularGrid

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(0.5 * (1.0 + self.t))

    @property
    def M_r(self) -> int:
        return len(self.t)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.M_r,) + self.angular.shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def exact_degree(self) -> int:
        """Highest total polynomial degree on the ball integrated exactly."""
        return min(4 * self.M_r - 2, self.angular.exact_degree)

    @property
    def orders(self) -> dict:
        return {"M_r": self.M_r, "L_theta": self.angular.L_theta, "L_phi": self.angular.L_phi}

    def weights(self) -> np.ndarray:
        return self.radial_weights[:, None, None] * self.angular.weights()[None]

    def points(self) -> np.ndarray:
        """Cartesian grid points with shape (M_r, L_theta, L_phi, 3)."""
        r = self.r[:, None, None]
        ct = self.angular.cos_theta[None, :, None]
        st = self.angular.sin_theta[None, :, None]
        ph = self.angular.phi[None, None, :]
        return np.stack(
            np.broadcast_arrays(r * st * np.cos(ph), r * st * np.sin(ph), r * ct), axis=-1
        )

    def integrate(self, samples) -> float:
        return float(np.sum(self.weights() * samples))

    def sample(self, f: Callable) -> np.ndarray:
        """Evaluate ``f`` (vectorised over an array of points (..., 3)) on the grid."""
        values = np.asarray(f(self.points()), dtype=float)
        if values.shape != self.shape:
            values = np.broadcast_to(values, self.shape).copy()
        return values


def build_ball_grid(M_r: int, L_theta: int, L_phi: int) -> BallGrid:
    if M_r < 1:
        raise ValueError("M_r must be positive")
    rule = gauss_jacobi_rule(M_r, JacobiParams(0.0, 0.5))
    return BallGrid(
        np.asarray(rule.nodes), np.asarray(rule.weights) * _RADIAL_SCALE, build_angular_grid(L_theta, L_phi)
    )


def default_orders(N: int, refine: int = 1) -> dict:
    """Quadrature orders used for a degree-N solve; ``refine=2`` gives the error grid."""
    return {"M_r": refine * (N + 8), "L_theta": refine * (N + 8), "L_phi": 2 * N + 16}


class CoefficientField:
    """Coefficients over :func:`ballbasis.index_set` in its fixed n-major order."""

    def __init__(self, N: int, values=None):
        self.layout: IndexLayout = index_layout(N)
        if values is None:
            values = np.zeros(len(self.layout))
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.layout),):
            raise ValueError(f"expected {len(self.layout)} coefficients for N={N}, got shape {values.shape}")
        self.values = values

    @property
    def degree(self) -> int:
        return self.layout.N

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx) -> float:
        return float(self.values[self._pos(idx)])

    def __setitem__(self, idx, value):
        self.values[self._pos(idx)] = value

    def _pos(self, idx) -> int:
        idx = BasisIndex(*idx).validate(self.degree)
        return self.layout.position(idx)

    def __iter__(self):
        return iter(self.layout.indices)

    def items(self):
        return zip(self.layout.indices, self.values.tolist())

    def to_dict(self) -> dict[BasisIndex, float]:
        return dict(self.items())

    @classmethod
    def from_mapping(cls, N: int, mapping: Mapping) -> "CoefficientField":
        field = cls(N)
        for idx, value in mapping.items():
            field[idx] = value
        return field

    def to_json_obj(self) -> dict:
        return {
            "degree": self.degree,
            "ordering": "n-major",
            "entries": [[int(k), int(n), int(l), float(v)] for (k, n, l), v in self.items()],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "CoefficientField":
        if obj.get("ordering", "n-major") != "n-major":
            raise ValueError(f"unsupported ordering {obj.get('ordering')!r}")
        field = cls(int(obj["degree"]))
        seen = set()
        for k, n, l, v in obj["entries"]:
            idx = (int(k), int(n), int(l))
            if idx in seen:
                raise ValueError(f"duplicate entry {idx}")
            seen.add(idx)
            field[idx] = v
        return field

    @classmethod
    def from_json(cls, text: str) -> "CoefficientField":
        return cls.from_json_obj(json.loads(text))

    def copy(self) -> "CoefficientField":
        return CoefficientField(self.degree, self.values.copy())

    def __repr__(self):
        return f"CoefficientField(N={self.degree}, size={len(self)})"


def radial_table(N: int, n: int, r, t=None) -> np.ndarray:
    """Radial factors of B^{-1,n}_{k,.} for k = 1..(N - n)//2, shape (K, len(r))."""
    K = (N - n) // 2
    return np.array([radial_generalized(k, n, r, t) for k in range(1, K + 1)]).reshape(K, -1)


def _require_exact(grid: BallGrid, N: int):
    if grid.exact_degree < 2 * N:
        raise GridTooCoarseError(
            f"ball grid {grid.orders} integrates degree {grid.exact_degree}; products in V_{N} need {2 * N}"
        )


def _samples(f, grid: BallGrid) -> np.ndarray:
    values = np.asarray(f, dtype=float) if not callable(f) else grid.sample(f)
    if values.shape != grid.shape:
        raise ValueError(f"samples have shape {values.shape}, grid expects {grid.shape}")
    bad = ~np.isfinite(values)
    if bad.any():
        q, i, j = np.argwhere(bad)[0]
        point = grid.points()[q, i, j].tolist()
        raise NonFiniteSampleError(f"non-finite sample {values[q, i, j]!r} at grid point {point}")
    return values


def analyze(f, N: int, grid: BallGrid) -> CoefficientField:
    """Inner products (f, B^{-1,n}_{k,l}) for every index of V_N.

    ``f`` is either a callable on points of shape (..., 3) or an array of
    samples on ``grid``.  Each radial shell is expanded in spherical
    harmonics first, then every (n, l) mode is integrated radially.
    """
    _require_exact(grid, N)
    values = _samples(f, grid)
    n_max = N - 2
    shell = angular_analyze_array(values, grid.angular, n_max)  # (M_r, H)
    shell *= grid.radial_weights[:, None]
    out = np.empty(len(index_layout(N)))
    pos = 0
    r = grid.r
    for n in range(n_max + 1):
        R = radial_table(N, n, r, grid.t)  # (K, M_r)
        block = R @ shell[:, n * n : (n + 1) ** 2]  # (K, 2n+1)
        size = block.size
        out[pos : pos + size] = block.T.ravel()
        pos += size
    return CoefficientField(N, out)


def analyze_direct(f, N: int, grid: BallGrid) -> CoefficientField:
    """Fused summation of f * B over the whole grid, one basis function at a time.

    Slow reference path for cross-checking :func:`analyze`.
    """
    _require_exact(grid, N)
    values = _samples(f, grid) * grid.weights()
    pts = grid.points()
    out = CoefficientField(N)
    from .ballbasis import eval_generalized

    for i, idx in enumerate(out.layout.indices):
        out.values[i] = np.sum(values * eval_generalized(idx, pts))
    return out


def _radial_combine(c: CoefficientField, r, t=None) -> np.ndarray:
    """g[h, p] = sum_k c[k, n, l] R_{k,n}(r_p) for every harmonic h = (n, l)."""
    N = c.degree
    r = np.asarray(r, dtype=float)
    g = np.zeros(((N - 1) ** 2, r.size))
    pos = 0
    for n in range(N - 1):
        K = (N - n) // 2
        block = c.values[pos : pos + K * (2 * n + 1)].reshape(2 * n + 1, K)
        g[n * n : (n + 1) ** 2] = block @ radial_table(N, n, r.ravel(), None if t is None else t.ravel())
        pos += K * (2 * n + 1)
    return g


def synthesize(c: CoefficientField, points) -> np.ndarray:
    """Point values of sum_i c_i B_i at ``points`` of shape (P, 3) (or (3,))."""
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts2 = pts.reshape(-1, 3)
    r, cos_t, sin_t, phi = to_spherical(pts2)
    g = _radial_combine(c, r)
    out = np.zeros(len(pts2))
    for n in range(c.degree - 1):
        base = n * n
        out += g[base] * polar_factor(n, 0, cos_t, sin_t)
        for j in range(1, n + 1):
            pj = polar_factor(n, j, cos_t, sin_t)
            out += g[base + 2 * j - 1] * pj * np.cos(j * phi)
            out += g[base + 2 * j] * pj * np.sin(j * phi)
    if scalar:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def synthesize_on_grid(c: CoefficientField, grid: BallGrid) -> np.ndarray:
    """Values of the expansion on every grid point, shape (M_r, L_theta, L_phi)."""
    N = c.degree
    n_max = N - 2
    g = _radial_combine(c, grid.r, grid.t)  # (H, M_r)
    table = polar_table(grid.angular, n_max)  # (n, j, L_theta)
    a_cos = np.zeros((grid.M_r, grid.angular.L_theta, n_max + 1))
    a_sin = np.zeros_like(a_cos)
    for n in range(n_max + 1):
        base = n * n
        a_cos[:, :, 0] += np.outer(g[base], table[n, 0])
        for j in range(1, n + 1):
            a_cos[:, :, j] += np.outer(g[base + 2 * j - 1], table[n, j])
            a_sin[:, :, j] += np.outer(g[base + 2 * j], table[n, j])
    ang = np.outer(np.arange(n_max + 1), grid.angular.phi)
    return a_cos @ np.cos(ang) + a_sin @ np.sin(ang)

