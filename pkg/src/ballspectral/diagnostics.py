"""Quadrature checks of the basis: gradient Gram, mass Gram, boundary values.

These exist to audit the closed forms used by the solver; the solver itself
never evaluates gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ballbasis import _angular, eval_generalized, index_layout, radial_generalized
from .harmonics import decode_order, harmonic_constant
from .jacobi import JacobiParams, eval_jacobi, eval_jacobi_deriv
from .transform import BallGrid, build_ball_grid

__all__ = [
    "BasisCheckReport",
    "basis_gradients",
    "basis_values",
    "gradient_gram",
    "mass_gram",
    "check_grid",
    "basis_check",
    "random_sphere_points",
    "closed_form_mass",
]


def check_grid(N: int) -> BallGrid:
    """Grid that integrates every product of two members of V_N exactly."""
    return build_ball_grid(N + 4, N + 4, 2 * N + 8)


def _grid_coords(grid: BallGrid):
    r = grid.r[:, None, None]
    t = grid.t[:, None, None]
    ct = grid.angular.cos_theta[None, :, None]
    st = grid.angular.sin_theta[None, :, None]
    ph = grid.angular.phi[None, None, :]
    return r, t, ct, st, ph


def basis_values(N: int, grid: BallGrid) -> np.ndarray:
    """Every basis function of V_N on the grid, shape (dof, M_r, L_theta, L_phi)."""
    r, t, ct, st, ph = _grid_coords(grid)
    layout = index_layout(N)
    out = np.empty((len(layout),) + grid.shape)
    for i, idx in enumerate(layout.indices):
        out[i] = radial_generalized(idx.k, idx.n, r, t) * _angular(idx.n, idx.l, ct, st, ph)
    return out


def basis_gradients(N: int, grid: BallGrid) -> np.ndarray:
    """Cartesian gradients of every basis function, shape (dof, M_r, L_theta, L_phi, 3).

    Built from closed-form derivatives in spherical coordinates; the grid
    must avoid the origin and the poles, which Gauss nodes always do.
    """
    r, t, ct, st, ph = _grid_coords(grid)
    e_r = np.stack(np.broadcast_arrays(st * np.cos(ph), st * np.sin(ph), ct), axis=-1)
    e_t = np.stack(np.broadcast_arrays(ct * np.cos(ph), ct * np.sin(ph), -st), axis=-1)
    e_p = np.stack(np.broadcast_arrays(-np.sin(ph), np.cos(ph), 0.0 * ct), axis=-1)
    layout = index_layout(N)
    grads = np.empty((len(layout),) + grid.shape + (3,))
    for i, (k, n, l) in enumerate(layout.indices):
        params = JacobiParams(0.0, n + 0.5)
        d = eval_jacobi(k, params, t) - eval_jacobi(k - 1, params, t)
        dd = eval_jacobi_deriv(k, params, t) - eval_jacobi_deriv(k - 1, params, t)
        drad = (n * r ** (n - 1) * d if n else 0.0) + r**n * dd * 4.0 * r
        rad_over_r = r ** (n - 1) * d

        j, kind = decode_order(l)
        c = harmonic_constant(n, j)
        pj = eval_jacobi(n - j, JacobiParams(j, j), ct)
        dpj = eval_jacobi_deriv(n - j, JacobiParams(j, j), ct)
        theta_f = c * st**j * pj
        dtheta_f = c * ((j * st ** (j - 1) * ct * pj if j else 0.0) - st ** (j + 1) * dpj)
        theta_over_sin = c * st ** (j - 1) * pj if j else 0.0
        if kind == "zonal":
            phi_f, dphi_f = 1.0 + 0.0 * ph, 0.0 * ph
        elif kind == "cos":
            phi_f, dphi_f = np.cos(j * ph), -j * np.sin(j * ph)
        else:
            phi_f, dphi_f = np.sin(j * ph), j * np.cos(j * ph)

        g_r = drad * theta_f * phi_f
        g_t = rad_over_r * dtheta_f * phi_f
        g_p = rad_over_r * theta_over_sin * dphi_f
        grads[i] = g_r[..., None] * e_r + g_t[..., None] * e_t + g_p[..., None] * e_p
    return grads


def gradient_gram(N: int, grid: BallGrid | None = None) -> np.ndarray:
    """Quadrature Gram matrix a(B_i, B_j) over index_set(N)."""
    grid = grid if grid is not None else check_grid(N)
    g = basis_gradients(N, grid)
    w = grid.weights()
    flat = g.reshape(len(g), -1)
    wf = np.repeat(w.reshape(-1), 3)
    return (flat * wf) @ flat.T


def mass_gram(N: int, grid: BallGrid | None = None) -> np.ndarray:
    """Quadrature Gram matrix (B_i, B_j) over index_set(N)."""
    grid = grid if grid is not None else check_grid(N)
    v = basis_values(N, grid).reshape(len(index_layout(N)), -1)
    return (v * grid.weights().reshape(-1)) @ v.T


def closed_form_mass(N: int) -> np.ndarray:
    layout = index_layout(N)
    M = np.diag(np.asarray(layout.mass_diag, dtype=float))
    up = np.asarray(layout.mass_upper)
    M += np.diag(up[:-1], 1) + np.diag(up[:-1], -1)
    return M


def random_sphere_points(count: int, seed: int = 0) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class BasisCheckReport:
    N: int
    dof: int
    stiffness_offdiag: float
    stiffness_diag_error: float
    mass_error: float
    boundary_max: float
    tolerances: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json_obj(self) -> dict:
        return {
            "degree": self.N,
            "dof": self.dof,
            "max_stiffness_offdiag": self.stiffness_offdiag,
            "max_stiffness_diag_rel_error": self.stiffness_diag_error,
            "max_mass_deviation": self.mass_error,
            "max_boundary_value": self.boundary_max,
            "tolerances": self.tolerances,
            "failures": self.failures,
            "ok": self.ok,
        }


TOLERANCES = {"stiffness_offdiag": 1e-10, "stiffness_diag": 1e-10, "mass": 1e-12, "boundary": 1e-12}


def basis_check(N: int, lambda_perturbation: float = 0.0, n_boundary: int = 100, seed: int = 0) -> BasisCheckReport:
    """Compare the closed-form operators with quadrature at degree N.

    ``lambda_perturbation`` shifts the closed-form stiffness values before the
    comparison; it exists so the failure path can be exercised.
    """
    grid = check_grid(N)
    layout = index_layout(N)
    S = gradient_gram(N, grid)
    diag = np.diag(S)
    off = S - np.diag(diag)
    off_rel = float(np.max(np.abs(off)) / np.max(np.abs(diag))) if len(S) > 1 else 0.0
    expected = np.asarray(layout.lam) + lambda_perturbation
    diag_err = float(np.max(np.abs(diag - expected) / expected))
    mass_err = float(np.max(np.abs(mass_gram(N, grid) - closed_form_mass(N))))
    pts = random_sphere_points(n_boundary, seed)
    bmax = max(float(np.max(np.abs(eval_generalized(idx, pts)))) for idx in layout.indices)

    failures = []
    if off_rel > TOLERANCES["stiffness_offdiag"]:
        failures.append("stiffness off-diagonal entries")
    if diag_err > TOLERANCES["stiffness_diag"]:
        failures.append("stiffness diagonal mismatch")
    if mass_err > TOLERANCES["mass"]:
        failures.append("mass matrix mismatch")
    if bmax > TOLERANCES["boundary"]:
        failures.append("boundary values")
    return BasisCheckReport(N, len(layout), off_rel, diag_err, mass_err, bmax, dict(TOLERANCES), failures)

