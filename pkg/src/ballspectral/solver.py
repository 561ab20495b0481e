"""Mixed spectral-Galerkin solve of the simply supported biharmonic problem.

With sigma = -Lap u the problem splits into two Poisson solves in V_N:

    a(sigma_N, v) = (f, v),        a(u_N, tau) = (sigma_N, tau).

The stiffness matrix of the generalized ball basis is diagonal, so after the
right-hand side is analysed the algebra is an O(dof) sweep: a diagonal divide
for sigma, then a tridiagonal mass multiply and a second divide for u.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .ballbasis import index_layout
from .transform import (
    BallGrid,
    CoefficientField,
    analyze,
    build_ball_grid,
    default_orders,
    synthesize_on_grid,
)

__all__ = [
    "ManufacturedCase",
    "SolveResult",
    "ErrorRow",
    "ErrorReport",
    "SeminormError",
    "manufactured_case",
    "solve_biharmonic",
    "ritz_project",
    "compute_errors",
    "convergence_rate",
    "run_convergence_study",
    "mass_apply",
    "time_algebra",
    "radial_field",
]

CASE_IDS = ("case1", "case2")


class SeminormError(ArithmeticError):
    """A squared seminorm came out negative beyond round-off."""


# ---------------------------------------------------------------- cases


def _sinc_pi(r):
    """sin(pi r) / r with the removable singularity at the origin."""
    r = np.asarray(r, dtype=float)
    small = r < 1e-4
    safe = np.where(small, 1.0, r)
    series = np.pi * (1.0 - (np.pi * r) ** 2 / 6.0 + (np.pi * r) ** 4 / 120.0)
    return np.where(small, series, np.sin(np.pi * safe) / safe)


def _case1():
    pi2 = np.pi**2
    return ManufacturedCase(
        "case1",
        u=_sinc_pi,
        sigma=lambda r: pi2 * _sinc_pi(r),
        f=lambda r: pi2 * pi2 * _sinc_pi(r),
        description="u = sin(pi r) / r",
    )


def _case2():
    e = math.e

    def u(r):
        r = np.asarray(r, dtype=float)
        return np.exp(r * r) - 5.0 * e / 3.0 * r * r + 2.0 * e / 3.0

    def sigma(r):
        r = np.asarray(r, dtype=float)
        return 10.0 * e - (6.0 + 4.0 * r * r) * np.exp(r * r)

    def f(r):
        r = np.asarray(r, dtype=float)
        r2 = r * r
        return (60.0 + 80.0 * r2 + 16.0 * r2 * r2) * np.exp(r2)

    return ManufacturedCase("case2", u=u, sigma=sigma, f=f, description="u = exp(r^2) - 5e/3 r^2 + 2e/3")


@dataclass(frozen=True)
class ManufacturedCase:
    """Radial exact solution with sigma = -Lap u and f = Lap^2 u."""

    identifier: str
    u: Callable
    sigma: Callable
    f: Callable
    description: str = ""

    def field(self, name: str) -> Callable:
        """The named radial profile lifted to a function of Cartesian points."""
        return radial_field(getattr(self, name))


def radial_field(profile: Callable) -> Callable:
    def on_points(x):
        x = np.asarray(x, dtype=float)
        return profile(np.sqrt(np.sum(x * x, axis=-1)))

    return on_points


def manufactured_case(case_id) -> ManufacturedCase:
    key = str(case_id).lower()
    if key in ("1", "case1"):
        return _case1()
    if key in ("2", "case2"):
        return _case2()
    raise ValueError(f"unknown case {case_id!r}; expected one of {CASE_IDS}")


# ---------------------------------------------------------------- algebra


@njit(cache=True)
def _mass_apply(x, diag, upper, out):
    m = x.size
    for i in range(m):
        acc = diag[i] * x[i]
        if i + 1 < m:
            acc += upper[i] * x[i + 1]
        if i > 0:
            acc += upper[i - 1] * x[i - 1]
        out[i] = acc


@njit(cache=True)
def _two_stage(f_hat, lam, diag, upper, sigma, u):
    m = f_hat.size
    for i in range(m):
        sigma[i] = f_hat[i] / lam[i]
    for i in range(m):
        acc = diag[i] * sigma[i]
        if i + 1 < m:
            acc += upper[i] * sigma[i + 1]
        if i > 0:
            acc += upper[i - 1] * sigma[i - 1]
        u[i] = acc / lam[i]


def mass_apply(c: CoefficientField) -> CoefficientField:
    """Product of the blockwise tridiagonal mass matrix with ``c``."""
    layout = c.layout
    out = np.empty_like(c.values)
    _mass_apply(c.values, layout.mass_diag, layout.mass_upper, out)
    return CoefficientField(c.degree, out)


def _algebra(f_hat: np.ndarray, N: int):
    layout = index_layout(N)
    sigma = np.empty_like(f_hat)
    u = np.empty_like(f_hat)
    _two_stage(f_hat, layout.lam, layout.mass_diag, layout.mass_upper, sigma, u)
    return sigma, u


_WARM = False


def _warm_up():
    # Compile the kernels on a tiny problem so timings exclude JIT cost.
    global _WARM
    if not _WARM:
        _algebra(np.zeros(len(index_layout(2))), 2)
        _WARM = True


@njit(cache=True)
def _two_stage_batch(count, f_hat, lam, diag, upper, sigma, u):
    for _ in range(count):
        _two_stage(f_hat, lam, diag, upper, sigma, u)


def time_algebra(N: int, repeats: int = 50, seed: int = 0) -> float:
    """Per-solve wall time (seconds) of the stage-2 algebra at degree N.

    Solves are run in compiled batches sized to roughly a millisecond so the
    Python call overhead does not dominate small N; the best batch wins.
    """
    layout = index_layout(N)
    f_hat = np.random.default_rng(seed).standard_normal(len(layout))
    sigma = np.empty_like(f_hat)
    u = np.empty_like(f_hat)
    args = (f_hat, layout.lam, layout.mass_diag, layout.mass_upper, sigma, u)
    _two_stage_batch(1, *args)
    batch = max(1, int(2e5 // len(layout)))
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        _two_stage_batch(batch, *args)
        best = min(best, (time.perf_counter() - t0) / batch)
    return best


# ---------------------------------------------------------------- solve


@dataclass
class SolveResult:
    sigma_hat: CoefficientField
    u_hat: CoefficientField
    degree: int
    orders: dict
    timings: dict = field(default_factory=dict)
    f_hat: CoefficientField | None = field(default=None, repr=False)

    def to_json_obj(self) -> dict:
        return {
            "degree": self.degree,
            "quadrature": dict(self.orders),
            "timings": dict(self.timings),
            "sigma_hat": self.sigma_hat.to_json_obj(),
            "u_hat": self.u_hat.to_json_obj(),
        }


def _grid_for(N: int, grid: BallGrid | None, orders: dict | None) -> BallGrid:
    if grid is not None:
        return grid
    o = default_orders(N)
    if orders:
        o.update({k: v for k, v in orders.items() if v is not None})
    return build_ball_grid(o["M_r"], o["L_theta"], o["L_phi"])


def solve_biharmonic(f, N: int, grid: BallGrid | None = None, orders: dict | None = None) -> SolveResult:
    """Solve Lap^2 u = f with u = Lap u = 0 on the sphere in V_N.

    ``f`` is a callable on points (..., 3) or samples on ``grid``.
    """
    if N < 2:
        raise ValueError(f"V_N needs N >= 2, got {N}")
    grid = _grid_for(N, grid, orders)
    _warm_up()
    t0 = time.perf_counter()
    f_hat = analyze(f, N, grid)
    t1 = time.perf_counter()
    sigma, u = _algebra(f_hat.values, N)
    t2 = time.perf_counter()
    return SolveResult(
        sigma_hat=CoefficientField(N, sigma),
        u_hat=CoefficientField(N, u),
        degree=N,
        orders=grid.orders,
        timings={"analysis": t1 - t0, "algebra": t2 - t1},
        f_hat=f_hat,
    )


def ritz_project(neg_laplacian, N: int, grid: BallGrid | None = None, orders: dict | None = None) -> CoefficientField:
    """Coefficients of the a-orthogonal projection of v onto V_N, given -Lap v.

    Uses a(v, B) = (-Lap v, B), valid because every basis function vanishes on
    the sphere.
    """
    grid = _grid_for(N, grid, orders)
    rhs = analyze(neg_laplacian, N, grid)
    return CoefficientField(N, rhs.values / rhs.layout.lam)


# ---------------------------------------------------------------- errors


@dataclass
class ErrorRow:
    N: int
    h1_sigma: float
    h1_u: float
    l2_sigma: float
    l2_u: float
    rate_sigma: float | None = None
    rate_u: float | None = None
    seminorm_sigma: float | None = None
    seminorm_u: float | None = None


def _clamp_square(value: float, scale: float, what: str) -> float:
    if value >= 0.0:
        return value
    if value >= -1e-14 * max(1.0, scale):
        return 0.0
    raise SeminormError(f"squared {what} seminorm is negative: {value!r}")


def error_grid(N: int) -> BallGrid:
    """Quadrature used for error norms: twice the solve orders in every direction."""
    o = default_orders(N, refine=2)
    o["L_phi"] = 2 * o["L_phi"]
    return build_ball_grid(o["M_r"], o["L_theta"], o["L_phi"])


def _h1_seminorms(case, result, grid, tail_degree, method):
    N = result.degree
    lam_full = index_layout(tail_degree).lam
    inside = np.array([idx.degree <= N for idx in index_layout(tail_degree).indices])
    f_big = analyze(case.field("f"), tail_degree, grid).values
    s_big = analyze(case.field("sigma"), tail_degree, grid).values
    layout = index_layout(N)
    # Positions of V_N inside the enriched ordering.
    pos = np.array([index_layout(tail_degree).position(idx) for idx in layout.indices])
    sig, u = result.sigma_hat.values, result.u_hat.values

    if method == "tail":
        # a-orthogonality: |v - v_N|^2 = |v - P v|^2 + |P v - v_N|^2 with P the
        # Ritz projection; both pieces are sums of squares in coefficient space.
        ritz_sigma = f_big / lam_full
        ritz_u = s_big / lam_full
        out = ~inside
        semi_sigma2 = np.sum(lam_full[out] * ritz_sigma[out] ** 2) + np.sum(
            layout.lam * (ritz_sigma[pos] - sig) ** 2
        )
        semi_u2 = np.sum(lam_full[out] * ritz_u[out] ** 2) + np.sum(layout.lam * (ritz_u[pos] - u) ** 2)
        return math.sqrt(semi_sigma2), math.sqrt(semi_u2)

    if method == "identity":
        w = grid.weights()
        r = np.sqrt(np.sum(grid.points() ** 2, axis=-1))
        uu = float(np.sum(w * case.sigma(r) * case.u(r)))
        ss = float(np.sum(w * case.f(r) * case.sigma(r)))
        semi_u2 = uu - 2.0 * np.dot(u, s_big[pos]) + np.dot(layout.lam, u * u)
        semi_sigma2 = ss - 2.0 * np.dot(sig, f_big[pos]) + np.dot(layout.lam, sig * sig)
        return (
            math.sqrt(_clamp_square(semi_sigma2, ss, "sigma")),
            math.sqrt(_clamp_square(semi_u2, uu, "u")),
        )
    raise ValueError(f"unknown H1 method {method!r}")


def compute_errors(
    case: ManufacturedCase,
    result: SolveResult,
    grid: BallGrid | None = None,
    tail_degree: int | None = None,
    method: str = "tail",
) -> ErrorRow:
    """L2 and H1 errors of sigma_N and u_N against the exact fields.

    L2 errors come from quadrature of the pointwise difference on ``grid``
    (by default twice as fine as the solve grid).  H1 seminorms never
    differentiate u_N: with ``method="tail"`` they are assembled in
    coefficient space from Ritz coefficients of the exact fields on the
    enriched space V_M, M = ``tail_degree`` (default N + 16).  The
    ``"identity"`` method expands |v - v_N|^2 directly and is limited by
    cancellation to roughly 1e-7.
    """
    N = result.degree
    grid = grid if grid is not None else error_grid(N)
    tail_degree = tail_degree if tail_degree is not None else N + 16
    if tail_degree < N:
        raise ValueError("tail_degree must be at least N")
    w = grid.weights()
    r = np.sqrt(np.sum(grid.points() ** 2, axis=-1))
    err_s = case.sigma(r) - synthesize_on_grid(result.sigma_hat, grid)
    err_u = case.u(r) - synthesize_on_grid(result.u_hat, grid)
    l2_s = math.sqrt(float(np.sum(w * err_s * err_s)))
    l2_u = math.sqrt(float(np.sum(w * err_u * err_u)))
    semi_s, semi_u = _h1_seminorms(case, result, grid, tail_degree, method)
    return ErrorRow(
        N=N,
        h1_sigma=math.hypot(l2_s, semi_s),
        h1_u=math.hypot(l2_u, semi_u),
        l2_sigma=l2_s,
        l2_u=l2_u,
        seminorm_sigma=semi_s,
        seminorm_u=semi_u,
    )


def convergence_rate(errors: Sequence[tuple[int, float]]) -> list[float]:
    """ln(E_{i-1} / E_i) / (N_i - N_{i-1}) for each consecutive pair."""
    rates = []
    for (n0, e0), (n1, e1) in zip(errors, errors[1:]):
        if e0 <= 0 or e1 <= 0:
            raise ValueError("errors must be positive to form a rate")
        if n1 <= n0:
            raise ValueError("degrees must be strictly increasing")
        rates.append(math.log(e0 / e1) / (n1 - n0))
    return rates


# ---------------------------------------------------------------- report

_COLUMNS = ("N", "h1_sigma", "h1_u", "l2_sigma", "l2_u", "rate_sigma", "rate_u")
_MD_HEADER = (
    "N",
    "‖σ − σ_N‖_H¹",
    "‖u − u_N‖_H¹",
    "‖σ − σ_N‖",
    "‖u − u_N‖",
    "Rate_σ",
    "Rate_u",
)


@dataclass
class ErrorReport:
    case: str
    rows: list[ErrorRow]
    rate_source: str = "L2"
    config: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [getattr(row, name) for row in self.rows]

    def row(self, N: int) -> ErrorRow:
        for row in self.rows:
            if row.N == N:
                return row
        raise KeyError(N)

    def to_json_obj(self) -> dict:
        return {
            "case": self.case,
            "rate_source": self.rate_source,
            "columns": list(_COLUMNS),
            "rows": [asdict(r) for r in self.rows],
            "config": self.config,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(_COLUMNS)
        for r in self.rows:
            writer.writerow(
                [r.N]
                + [_sci(v) for v in (r.h1_sigma, r.h1_u, r.l2_sigma, r.l2_u)]
                + [_rate(v, "") for v in (r.rate_sigma, r.rate_u)]
            )
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [
            "| " + " | ".join(_MD_HEADER) + " |",
            "|" + "|".join(["---"] * len(_MD_HEADER)) + "|",
        ]
        for r in self.rows:
            cells = [str(r.N)] + [_sci(v) for v in (r.h1_sigma, r.h1_u, r.l2_sigma, r.l2_u)]
            cells += [_rate(v, "--") for v in (r.rate_sigma, r.rate_u)]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json(indent=2) + "\n"
        if fmt == "md":
            return self.to_markdown()
        raise ValueError(f"unknown format {fmt!r}")


def _sci(v: float) -> str:
    return f"{v:.6e}"


def _rate(v, missing: str) -> str:
    return missing if v is None else f"{v:.4f}"


def _one_degree(case: ManufacturedCase, N: int, orders: dict | None) -> tuple[SolveResult, ErrorRow]:
    result = solve_biharmonic(case.field("f"), N, orders=orders)
    t0 = time.perf_counter()
    row = compute_errors(case, result)
    result.timings["errors"] = time.perf_counter() - t0
    return result, row


def run_convergence_study(
    case_id,
    degrees: Sequence[int],
    orders: dict | None = None,
    threads: int | None = None,
) -> ErrorReport:
    """Solve at each degree and tabulate errors with L2-based rates."""
    degrees = [int(d) for d in degrees]
    if not degrees:
        raise ValueError("at least one degree is required")
    if any(d < 2 for d in degrees):
        raise ValueError("every degree must be at least 2")
    if any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ValueError("degrees must be strictly ascending")
    case = manufactured_case(case_id)
    workers = max(1, min(threads or 1, len(degrees)))
    if workers == 1:
        outcomes = [_one_degree(case, N, orders) for N in degrees]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda N: _one_degree(case, N, orders), degrees))
    rows = [row for _, row in outcomes]
    rs = convergence_rate([(r.N, r.l2_sigma) for r in rows])
    ru = convergence_rate([(r.N, r.l2_u) for r in rows])
    for row, a, b in zip(rows[1:], rs, ru):
        row.rate_sigma, row.rate_u = a, b
    timings = {str(res.degree): res.timings for res, _ in outcomes}
    return ErrorReport(case.identifier, rows, config={"degrees": degrees, "orders": orders or {}, "timings": timings})
