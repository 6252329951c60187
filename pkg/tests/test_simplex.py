import random

import numpy as np
import pytest

from oracles import rational_lp
from tpossp.colgen import Column, build_rmp, initial_columns
from tpossp.simplex import EQ, GE, LE, TOL_DUAL, TOL_FEAS, LinearProgram, solve_lp, warm_start


def test_tolerances_visible():
    assert TOL_FEAS == TOL_DUAL == 1e-7


def test_one_variable():
    lp = LinearProgram()
    x = lp.add_var("x", 1.0)
    lp.add_row({x: 1.0}, GE, 3.0)
    sol = solve_lp(lp)
    assert sol.optimal and sol.x[0] == pytest.approx(3) and sol.objective == pytest.approx(3)
    assert sol.duals[0] == pytest.approx(1)


def test_infeasible():
    lp = LinearProgram()
    x = lp.add_var("x", 0.0)
    lp.add_row({x: 1.0}, LE, -1.0)
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = LinearProgram()
    x = lp.add_var("x", -1.0)
    lp.add_row({x: 1.0}, GE, 0.0)
    assert solve_lp(lp).status == "unbounded"


def test_dual_signs():
    lp = LinearProgram()
    x = lp.add_var("x", -1.0)
    y = lp.add_var("y", -1.0)
    lp.add_row({x: 1.0, y: 2.0}, LE, 4.0)
    lp.add_row({x: 3.0, y: 1.0}, LE, 6.0)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(-2.8)
    assert np.all(sol.duals <= 1e-9)


def _micro3_rmp(m3d, extra=True):
    cols = initial_columns(m3d)
    if extra:
        cols += [Column(0, m3d.make_path(0, (0, 1))), Column(0, m3d.make_path(0, (2,)))]
    return build_rmp(m3d, cols)


def test_micro3_master(m3d):
    rmp = _micro3_rmp(m3d)
    sol = solve_lp(rmp.lp)
    assert sol.objective == pytest.approx(130_000)
    assert sol.x[rmp.y[1]] == pytest.approx(1)
    assert ("v", ("y", 1)) in sol.basis.basic


def test_warm_start_same_lp(m3d):
    rmp = _micro3_rmp(m3d)
    first = solve_lp(rmp.lp)
    again = warm_start(rmp.lp, first.basis)
    assert again.warm_started and again.iterations == 0
    assert again.objective == pytest.approx(first.objective)


def test_added_columns(m3d):
    one = build_rmp(m3d, initial_columns(m3d) + [Column(0, m3d.make_path(0, (0, 1)))])
    s1 = solve_lp(one.lp)
    two = _micro3_rmp(m3d)
    s2 = solve_lp(two.lp, s1.basis)
    assert s2.objective <= s1.objective + 1e-9
    # a column with positive reduced cost leaves the optimum alone
    lp = two.lp
    j = lp.add_var("dear", 1e9)
    lp.rows[-1][j] = 1.0
    s3 = solve_lp(lp, s2.basis)
    assert s3.objective == pytest.approx(s2.objective) and s3.x[j] == 0


def test_bad_basis_falls_back(m3d):
    rmp = _micro3_rmp(m3d)
    basis = solve_lp(rmp.lp).basis
    basis.basic = basis.basic[:-1] + [("v", "nonexistent")]
    sol = solve_lp(rmp.lp, basis)
    assert sol.optimal and not sol.warm_started and sol.message.startswith("cold start")


def _random_lp(rng):
    n = rng.randint(1, 4)
    m = rng.randint(1, 3)
    c = [rng.randint(-5, 5) for _ in range(n)]
    A = [[rng.randint(-4, 4) for _ in range(n)] for _ in range(m)]
    senses = [rng.choice((LE, GE, EQ)) for _ in range(m)]
    b = [rng.randint(-6, 10) for _ in range(m)]
    lb = [rng.randint(-3, 1) for _ in range(n)]
    ub = [l + rng.randint(0, 6) for l in lb]
    return c, A, senses, b, lb, ub


@pytest.mark.parametrize("seed", range(300))
def test_against_rational_reference(seed):
    rng = random.Random(seed)
    c, A, senses, b, lb, ub = _random_lp(rng)
    lp = LinearProgram()
    for j in range(len(c)):
        lp.add_var(j, c[j], lb[j], ub[j])
    for row, s, rhs in zip(A, senses, b):
        lp.add_row(dict(enumerate(row)), s, rhs)
    sol = solve_lp(lp)
    status, ref = rational_lp(c, A, senses, b, lb, ub)
    assert sol.status == status
    if status == "optimal":
        assert sol.objective == pytest.approx(float(ref), rel=1e-6, abs=1e-6)
        # weak duality with bounded variables: b.y + bound terms of the reduced costs
        d = sol.reduced_costs
        dual_obj = float(np.dot(b, sol.duals)) + sum(
            lb[j] * d[j] if d[j] > 0 else ub[j] * d[j] for j in range(len(c)))
        assert sol.objective >= dual_obj - 1e-6
