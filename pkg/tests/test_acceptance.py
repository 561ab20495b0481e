"""End-to-end acceptance criteria, one test per criterion.

Reference values are the published error tables for the two manufactured
solutions.  Each test records a PASS/FAIL line shown in the pytest summary.
"""
import contextlib
import io
import json
import time

import numpy as np
import pytest

from ballspectral.ballbasis import BallPolySpec, ball_norm, eval_ball, index_layout, index_set
from ballspectral.cli import main
from ballspectral.diagnostics import gradient_gram, random_sphere_points
from ballspectral.harmonics import build_angular_grid, harmonic_matrix
from ballspectral.jacobi import JacobiParams, eval_jacobi, gauss_jacobi_rule, jacobi_norm
from ballspectral.solver import manufactured_case, solve_biharmonic, time_algebra
from ballspectral.transform import build_ball_grid, synthesize

from .oracles import dense_galerkin, fd_sigma_and_f

COLUMNS = ("h1_sigma", "h1_u", "l2_sigma", "l2_u")

TABLE_1 = {
    4: (8.182848e-01, 9.950927e-02, 2.259174e-01, 2.428087e-02, None, None),
    8: (1.857498e-03, 1.949815e-04, 1.884392e-04, 1.941540e-05, 1.7723, 1.7828),
    12: (6.497892e-07, 6.664685e-08, 3.650210e-08, 3.727417e-09, 2.1373, 2.1395),
    16: (6.151159e-11, 7.033383e-12, 2.469976e-12, 2.499720e-13, 2.4002, 2.4025),
}
TABLE_2 = {
    4: (1.222364e00, 3.533737e-02, 3.205838e-01, 1.417889e-02, None, None),
    8: (1.330501e-02, 4.220701e-04, 1.309173e-03, 4.418767e-05, 1.3752, 1.4420),
    12: (4.421004e-05, 1.165379e-06, 2.431017e-06, 6.526781e-08, 1.5722, 1.6294),
    16: (6.996362e-08, 1.543859e-09, 2.536715e-09, 5.630076e-11, 1.7163, 1.7639),
}
TABLES = {"1": TABLE_1, "2": TABLE_2}


def run_table(case, out_dir):
    """Run the convergence command as a user would and parse the JSON it writes."""
    out = out_dir / f"case{case}.json"
    argv = ["convergence", "--case", case, "--degrees", "4,8,12,16", "--format", "json", "--out", str(out)]
    t0 = time.perf_counter()
    with contextlib.redirect_stdout(io.StringIO()):
        status = main(argv)
    elapsed = time.perf_counter() - t0
    assert status == 0
    rows = {row["N"]: row for row in json.loads(out.read_text())["rows"]}
    return rows, elapsed


@pytest.fixture(scope="module")
def tables(tmp_path_factory):
    return {case: run_table(case, tmp_path_factory.mktemp(f"case{case}")) for case in ("1", "2")}


def ratio(measured, reference):
    return max(measured / reference, reference / measured)


def test_criterion_1_table_one(tables, criterion):
    rows, elapsed = tables["1"]
    worst_all = max(ratio(rows[N][c], TABLE_1[N][i]) for N in TABLE_1 for i, c in enumerate(COLUMNS))
    worst_low = max(ratio(rows[N][c], TABLE_1[N][i]) for N in (4, 8) for i, c in enumerate(COLUMNS))
    ok = worst_all <= 100 and worst_low <= 3 and elapsed < 10
    criterion(
        1,
        ok,
        f"worst factor {worst_all:.3g} (<=100), at N in {{4,8}} {worst_low:.3g} (<=3), "
        f"L2(u) at N=16 {rows[16]['l2_u']:.4e}, runtime {elapsed:.2f}s (<10s)",
    )


def test_criterion_2_table_two(tables, criterion):
    rows, _ = tables["2"]
    sigma8 = ratio(rows[8]["l2_sigma"], TABLE_2[8][2])
    worst16 = max(ratio(rows[16][c], TABLE_2[16][i]) for i, c in enumerate(COLUMNS))
    worst_all = max(ratio(rows[N][c], TABLE_2[N][i]) for N in TABLE_2 for i, c in enumerate(COLUMNS))
    # Not a threshold here: the explicit N = 8 check above replaces the
    # factor-3 rule of table one.  Reported so the H1 gap stays visible.
    low = max(ratio(rows[N][c], TABLE_2[N][i]) for N in (4, 8) for i, c in enumerate(COLUMNS))
    ok = sigma8 <= 3 and worst16 <= 100 and worst_all <= 100
    criterion(
        2,
        ok,
        f"L2(sigma) at N=8 factor {sigma8:.4g} (<=3), N=16 worst factor {worst16:.3g} (<=100), "
        f"all rows worst factor {worst_all:.3g} (<=100); info: N in {{4,8}} worst factor {low:.3g}",
    )


def test_criterion_3_rates(tables, criterion):
    worst = 0.0
    for case, table in TABLES.items():
        rows, _ = tables[case]
        for N in (8, 12, 16):
            worst = max(worst, abs(rows[N]["rate_sigma"] - table[N][4]), abs(rows[N]["rate_u"] - table[N][5]))
    criterion(3, worst <= 0.15, f"max rate deviation {worst:.4f} (<=0.15)")


def test_criterion_4_stiffness(criterion):
    S = gradient_gram(6)
    diag = np.diag(S)
    off = np.max(np.abs(S - np.diag(diag))) / np.max(diag)
    lam = index_layout(6).lam
    diag_err = np.max(np.abs(diag - lam) / lam)
    criterion(4, off <= 1e-10 and diag_err <= 1e-10, f"off-diagonal {off:.2e}, diagonal rel error {diag_err:.2e}")


def test_criterion_5_orthogonality(criterion):
    worst_jacobi = 0.0
    params = [JacobiParams(0, 0), JacobiParams(0, 0.5), JacobiParams(1, 1)] + [JacobiParams(0, n + 0.5) for n in range(7)]
    for p in params:
        for m in (1, 2, 3, 5, 8, 13, 21, 30, 40):
            rule = gauss_jacobi_rule(m, p)
            V = np.array([eval_jacobi(i, p, rule.nodes) for i in range(m)])
            G = (V * rule.weights) @ V.T
            h = np.array([jacobi_norm(i, p) for i in range(m)])
            worst_jacobi = max(worst_jacobi, float(np.max(np.abs(G - np.diag(h)) / np.maximum.outer(h, h))))

    grid = build_angular_grid(10, 20)
    Y = harmonic_matrix(grid, 8).reshape(81, -1)
    worst_sph = float(np.max(np.abs((Y * grid.weights().reshape(-1)) @ Y.T - np.eye(81))))

    bgrid = build_ball_grid(10, 10, 20)
    specs = [(k, n, l) for n in range(9) for l in range(1, 2 * n + 2) for k in range((8 - n) // 2 + 1)]
    B = np.array([eval_ball(BallPolySpec(0, k, n, l), bgrid.points()) for k, n, l in specs]).reshape(len(specs), -1)
    G = (B * bgrid.weights().reshape(-1)) @ B.T
    worst_ball = float(np.max(np.abs(G - np.diag([ball_norm(0, k, n) for k, n, _ in specs]))))

    ok = worst_jacobi <= 1e-12 and worst_sph <= 1e-12 and worst_ball <= 1e-12
    criterion(5, ok, f"Jacobi {worst_jacobi:.2e}, harmonics {worst_sph:.2e}, ball {worst_ball:.2e} (all <=1e-12)")


def test_criterion_6_dense_oracle(criterion):
    worst = 0.0
    for case in ("case1", "case2"):
        f = manufactured_case(case).field("f")
        for N in (4, 6):
            res = solve_biharmonic(f, N)
            sigma, u = dense_galerkin(f, N)
            for fast, dense in ((res.sigma_hat.values, sigma), (res.u_hat.values, u)):
                scale = np.max(np.abs(dense))
                # coefficients of n >= 1 vanish by symmetry; measure them against the field scale
                denom = np.maximum(np.abs(dense), scale * (np.abs(dense) <= 1e-10 * scale))
                worst = max(worst, float(np.max(np.abs(fast - dense) / denom)))
    criterion(6, worst <= 1e-9, f"max relative coefficient difference {worst:.2e} (<=1e-9)")


def test_criterion_7_boundary(criterion):
    pts = random_sphere_points(50, seed=2024)
    worst = 0.0
    for case in ("case1", "case2"):
        res = solve_biharmonic(manufactured_case(case).field("f"), 16)
        for field in (res.u_hat, res.sigma_hat):
            worst = max(worst, float(np.max(np.abs(synthesize(field, pts)))))
    criterion(7, worst <= 1e-10, f"max |u_N|, |sigma_N| on the sphere {worst:.2e} (<=1e-10)")


def test_criterion_8_manufactured_data(criterion):
    radii = np.linspace(0.02, 0.98, 50)
    worst = 0.0
    for case in ("case1", "case2"):
        m = manufactured_case(case)
        for r in radii:
            sigma, f = fd_sigma_and_f(case, r)
            worst = max(worst, abs(float(m.sigma(r)) - sigma) / abs(sigma), abs(float(m.f(r)) - f) / abs(f))
    criterion(8, worst <= 1e-7, f"max relative deviation from finite differences {worst:.2e} (<=1e-7)")


def test_criterion_9_linear_algebra_cost(criterion):
    degrees = (16, 32, 64)
    dofs = [len(index_set(N)) for N in degrees]
    times = [time_algebra(N) for N in degrees]
    slope = float(np.polyfit(np.log(dofs), np.log(times), 1)[0])
    detail = ", ".join(f"N={N}: {t:.2e}s" for N, t in zip(degrees, times))
    criterion(9, 0.8 <= slope <= 1.3, f"fit exponent {slope:.3f} in [0.8, 1.3] ({detail})")
