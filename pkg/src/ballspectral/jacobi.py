"""Jacobi polynomials, their norms and derivatives, and Gauss-Jacobi rules.

Everything here is evaluated with the ascending three-term recurrence and
log-Gamma constants so that degrees up to a few hundred stay finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "JacobiParams",
    "QuadratureRule1D",
    "QuadratureError",
    "eval_jacobi",
    "eval_jacobi_deriv",
    "jacobi_norm",
    "jacobi_total_mass",
    "gauss_jacobi_rule",
]


class QuadratureError(RuntimeError):
    """Raised when Newton polishing of a Gauss-Jacobi node fails."""


@dataclass(frozen=True)
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(
                f"Jacobi parameters must satisfy alpha, beta > -1, got ({self.alpha}, {self.beta})"
            )

    def shifted(self, da: float = 1.0, db: float = 1.0) -> "JacobiParams":
        return JacobiParams(self.alpha + da, self.beta + db)


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    params: JacobiParams

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values) -> float:
        """Weighted sum of ``values`` sampled at the nodes."""
        return float(np.dot(self.weights, values))


def _as_params(params) -> JacobiParams:
    if isinstance(params, JacobiParams):
        return params
    return JacobiParams(*params)


def _check_domain(t, clamp: bool):
    t = np.asarray(t, dtype=float)
    if clamp:
        return np.clip(t, -1.0, 1.0)
    if np.any(np.abs(t) > 1.0) or not np.all(np.isfinite(t)):
        bad = t[~(np.abs(t) <= 1.0)]
        raise ValueError(f"Jacobi argument outside [-1, 1]: {bad.ravel()[0]!r}")
    return t


def _recurrence(n: int, a: float, b: float, t: np.ndarray):
    """Return (P_n, P_{n-1}) at ``t``; P_{-1} is reported as zeros."""
    p_prev = np.zeros_like(t)
    p = np.ones_like(t)
    if n == 0:
        return p, p_prev
    p_prev, p = p, 0.5 * (a + b + 2.0) * t + 0.5 * (a - b)
    ab = a + b
    for m in range(2, n + 1):
        s = 2.0 * m + ab
        c1 = 2.0 * m * (m + ab) * (s - 2.0)
        c2 = (s - 1.0) * (s * (s - 2.0) * t + a * a - b * b)
        c3 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * s
        p_prev, p = p, (c2 * p - c3 * p_prev) / c1
    return p, p_prev


def eval_jacobi(n: int, params, t, clamp: bool = False):
    """Evaluate P_n^{(alpha, beta)}(t).

    ``t`` may be a scalar or an array. Arguments outside [-1, 1] raise
    ``ValueError`` unless ``clamp`` is set, in which case they are clipped
    (meant for boundary round-off like 1 + 1e-16).
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    p = _as_params(params)
    scalar = np.ndim(t) == 0
    x = _check_domain(t, clamp)
    val, _ = _recurrence(int(n), p.alpha, p.beta, np.atleast_1d(x))
    return float(val[0]) if scalar else val.reshape(x.shape)


def eval_jacobi_deriv(n: int, params, t, clamp: bool = False):
    """d/dt P_n^{(alpha, beta)}(t) = (n + alpha + beta + 1)/2 * P_{n-1}^{(alpha+1, beta+1)}(t)."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    p = _as_params(params)
    if n == 0:
        x = _check_domain(t, clamp)
        return 0.0 if np.ndim(t) == 0 else np.zeros_like(x)
    scale = 0.5 * (n + p.alpha + p.beta + 1.0)
    return scale * eval_jacobi(n - 1, p.shifted(), t, clamp=clamp)


@lru_cache(maxsize=4096)
def _log_norm(n: int, a: float, b: float) -> float:
    if n == 0:
        return (
            (a + b + 1.0) * math.log(2.0)
            + math.lgamma(a + 1.0)
            + math.lgamma(b + 1.0)
            - math.lgamma(a + b + 2.0)
        )
    return (
        (a + b + 1.0) * math.log(2.0)
        - math.log(2.0 * n + a + b + 1.0)
        + math.lgamma(n + a + 1.0)
        + math.lgamma(n + b + 1.0)
        - math.lgamma(n + 1.0)
        - math.lgamma(n + a + b + 1.0)
    )


def jacobi_norm(n: int, params) -> float:
    """Squared weighted L2 norm of P_n^{(alpha, beta)} on (-1, 1)."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    p = _as_params(params)
    return math.exp(_log_norm(int(n), p.alpha, p.beta))


def jacobi_total_mass(params) -> float:
    """Integral of the weight (1 - t)^alpha (1 + t)^beta over (-1, 1)."""
    return jacobi_norm(0, params)


def _end_angles(count: int, rho: float, a: float, b: float) -> np.ndarray:
    # Chebyshev-type angles with the Gatteschi-Pittaluga correction, measured
    # from the t = 1 end (parameter ``a`` governs that end).
    i = np.arange(1, count + 1)
    phi = (i + 0.5 * a - 0.25) * np.pi / rho
    corr = ((0.25 - a * a) / np.tan(0.5 * phi) - (0.25 - b * b) * np.tan(0.5 * phi)) / (4.0 * rho * rho)
    return np.clip(phi + corr, 1e-300, np.pi - 1e-16)


def _initial_guesses(m: int, a: float, b: float) -> np.ndarray:
    rho = m + 0.5 * (a + b + 1.0)
    upper = m // 2 + m % 2
    near_one = np.cos(_end_angles(upper, rho, a, b))
    near_minus_one = -np.cos(_end_angles(m - upper, rho, b, a))
    return np.sort(np.concatenate([near_one, near_minus_one]))


_MAX_NEWTON = 100
_MIN_GAP = 1e-10


def _newton(m, a, b, x, lo=None, hi=None):
    """Polish all nodes at once; returns (nodes, P_m'(nodes), index of first failure or -1).

    With brackets ``lo``/``hi`` the iteration is safeguarded: a Newton step that
    leaves the bracket is replaced by bisection.
    """
    x = x.copy()
    done = np.zeros(m, dtype=bool)
    for _ in range(_MAX_NEWTON):
        pm, pm1 = _recurrence(m, a, b, x)
        d = _deriv_from_pair(m, a, b, x, pm, pm1)
        step = pm / d
        new = x - step
        if lo is not None:
            left = np.sign(_recurrence(m, a, b, lo)[0])
            moved_left = np.sign(pm) == left
            lo = np.where(moved_left, x, lo)
            hi = np.where(moved_left, hi, x)
            outside = ~((new > lo) & (new < hi)) | ~np.isfinite(new)
            new = np.where(outside, 0.5 * (lo + hi), new)
            step = np.where(outside, hi - lo, step)
        x = np.where(done, x, new)
        done |= np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(x))
        if done.all():
            break
    pm, pm1 = _recurrence(m, a, b, x)
    dp = _deriv_from_pair(m, a, b, x, pm, pm1)
    failed = np.flatnonzero(~done | ~np.isfinite(x) | (np.abs(x) >= 1.0))
    return x, dp, int(failed[0]) if failed.size else -1


def _nodes_by_interlacing(m, a, b):
    # Zeros of P_{m-1} separate those of P_m, giving one bracket per node.
    prev = np.array([]) if m == 1 else _rule(m - 1, a, b)[0]
    edges = np.concatenate([[-1.0], prev, [1.0]])
    lo, hi = edges[:-1].copy(), edges[1:].copy()
    return _newton(m, a, b, 0.5 * (lo + hi), lo, hi)


@lru_cache(maxsize=512)
def _rule(m: int, a: float, b: float):
    nodes, dp, bad = _newton(m, a, b, _initial_guesses(m, a, b))
    # Two seeds polished onto the same zero leave a gap at round-off level.
    if bad >= 0 or np.any(np.diff(nodes) <= _MIN_GAP):
        nodes, dp, bad = _nodes_by_interlacing(m, a, b)
        if bad >= 0:
            raise QuadratureError(
                f"Newton iteration for node {bad} of the {m}-point ({a}, {b}) rule did not converge"
            )
        if np.any(np.diff(nodes) <= _MIN_GAP):
            q = int(np.argmin(np.diff(nodes)))
            raise QuadratureError(
                f"node {q} of the {m}-point ({a}, {b}) rule collapsed onto a neighbour"
            )

    log_c = (
        (a + b + 1.0) * math.log(2.0)
        + math.lgamma(m + a + 1.0)
        + math.lgamma(m + b + 1.0)
        - math.lgamma(m + a + b + 1.0)
        - math.lgamma(m + 1.0)
    )
    weights = math.exp(log_c) / ((1.0 - nodes * nodes) * dp * dp)
    weights *= jacobi_total_mass(JacobiParams(a, b)) / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _deriv_from_pair(m, a, b, x, pm, pm1):
    # (2m+a+b)(1-x^2) P_m' = m[(a-b) - (2m+a+b) x] P_m + 2(m+a)(m+b) P_{m-1}
    s = 2.0 * m + a + b
    return (m * ((a - b) - s * x) * pm + 2.0 * (m + a) * (m + b) * pm1) / (s * (1.0 - x * x))


def gauss_jacobi_rule(m: int, params) -> QuadratureRule1D:
    """m-point Gauss-Jacobi rule, exact through degree 2m - 1.

    Nodes come back in ascending order. Rules are cached per (m, alpha, beta).
    """
    if m < 1:
        raise ValueError("a quadrature rule needs at least one node")
    p = _as_params(params)
    nodes, weights = _rule(int(m), float(p.alpha), float(p.beta))
    return QuadratureRule1D(nodes, weights, p)
