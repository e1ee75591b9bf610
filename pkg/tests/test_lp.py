import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from otscuts.lp import (INF, INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, check_farkas,
                        read_lp_text, solve_lp, write_lp_text)


def random_lp(seed: int, m: int = None, n: int = None, density: float = 0.6,
              free_share: float = 0.1) -> LinearProgram:
    rng = random.Random(seed)
    m = m if m is not None else rng.randint(1, 6)
    n = n if n is not None else rng.randint(1, 6)
    lp = LinearProgram(rng.choice(("min", "max")))
    for j in range(n):
        if rng.random() < free_share:
            lo, hi = -INF, INF
        else:
            lo = rng.randint(-3, 1)
            hi = rng.choice((lo + rng.randint(0, 4), INF))
        lp.add_column(f"x{j}", lo, hi, rng.randint(-5, 5))
    for i in range(m):
        coefs = {j: rng.randint(-4, 4) for j in range(n) if rng.random() < density}
        lp.add_row(f"r{i}", coefs, rng.choice(("<=", "=", ">=")), rng.randint(-6, 6))
    return lp


def scipy_reference(lp: LinearProgram):
    sign = 1 if lp.sense == "min" else -1
    c = [sign * float(v) for v in lp.col_obj]
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for coefs, sense, rhs in zip(lp.row_coefs, lp.row_sense, lp.row_rhs):
        row = [0.0] * lp.num_cols
        for j, v in coefs.items():
            row[j] = float(v)
        if sense == "=":
            A_eq.append(row)
            b_eq.append(float(rhs))
        elif sense == "<=":
            A_ub.append(row)
            b_ub.append(float(rhs))
        else:
            A_ub.append([-v for v in row])
            b_ub.append(-float(rhs))
    bounds = [(None if lo == -INF else float(lo), None if hi == INF else float(hi))
              for lo, hi in zip(lp.col_lower, lp.col_upper)]
    res = linprog(c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq or None,
                  b_eq=b_eq or None, bounds=bounds, method="highs")
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[res.status]
    if status == INFEASIBLE:
        # HiGHS presolve can report an unbounded LP as infeasible
        feas = linprog([0.0] * lp.num_cols, A_ub=A_ub or None, b_ub=b_ub or None,
                       A_eq=A_eq or None, b_eq=b_eq or None, bounds=bounds, method="highs")
        if feas.status == 0:
            status = UNBOUNDED
    obj = sign * res.fun + float(lp.objective_offset) if status == OPTIMAL else None
    return status, obj


def assert_feasible(lp, x, tol=1e-7):
    for j, v in enumerate(x):
        assert lp.col_lower[j] - tol <= v <= lp.col_upper[j] + tol
    for act, sense, rhs in zip(lp.row_activity(x), lp.row_sense, lp.row_rhs):
        if sense in ("<=", "="):
            assert act <= rhs + tol
        if sense in (">=", "="):
            assert act >= rhs - tol


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9))
def test_float_matches_highs(seed):
    lp = random_lp(seed)
    want_status, want_obj = scipy_reference(lp)
    sol = solve_lp(lp)
    assert sol.status == want_status
    if sol.status == OPTIMAL:
        assert sol.objective == pytest.approx(want_obj, rel=1e-7, abs=1e-7)
        assert_feasible(lp, sol.x)
    elif sol.status == INFEASIBLE:
        assert check_farkas(lp, sol.farkas_ray)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_exact_mode_is_exact(seed):
    lp = random_lp(seed)
    f = solve_lp(lp)
    q = solve_lp(lp, "exact")
    assert q.status == f.status
    if q.status == OPTIMAL:
        assert isinstance(q.objective, Fraction)
        assert float(q.objective) == pytest.approx(float(f.objective), rel=1e-9, abs=1e-9)
        assert_feasible(lp, q.x, tol=0)


@pytest.mark.parametrize("m", [150, 260])
def test_sparse_factorization_path(m):
    # above the sparse threshold; compare with HiGHS
    for seed in range(3):
        lp = random_lp(1000 * m + seed, m=m, n=m + 40, density=0.03, free_share=0.0)
        want_status, want_obj = scipy_reference(lp)
        sol = solve_lp(lp)
        assert sol.status == want_status
        if sol.status == OPTIMAL:
            assert sol.objective == pytest.approx(want_obj, rel=1e-7, abs=1e-6)


def test_warm_start_reaches_same_optimum():
    lp = random_lp(7, m=8, n=8)
    cold = solve_lp(lp)
    assert cold.status == OPTIMAL
    lp2 = lp.copy()
    lp2.row_rhs[0] = lp2.row_rhs[0] + 1
    warm = solve_lp(lp2, basis=cold.basis)
    assert (warm.status, warm.objective) == pytest.approx(
        (solve_lp(lp2).status, solve_lp(lp2).objective))


def test_small_known_lp():
    lp = LinearProgram("max")
    x = lp.add_column("x", 0, INF, 3)
    y = lp.add_column("y", 0, INF, 2)
    lp.add_row("a", {x: 1, y: 1}, "<=", 4)
    lp.add_row("b", {x: 1, y: 3}, "<=", 6)
    lp.add_row("c", {x: 1}, "<=", 3)
    sol = solve_lp(lp, "exact")
    assert sol.objective == 11
    assert list(sol.x) == [3, 1]


def test_infeasible_certificate():
    lp = LinearProgram()
    x = lp.add_column("x", 0, 1)
    y = lp.add_column("y", 0, 1)
    lp.add_row("sum", {x: 1, y: 1}, ">=", 3)
    sol = solve_lp(lp)
    assert sol.status == INFEASIBLE
    assert check_farkas(lp, sol.farkas_ray)
    assert not check_farkas(lp, np.zeros(1))


def test_unbounded():
    lp = LinearProgram("max")
    x = lp.add_column("x", 0, INF, 1)
    lp.add_row("r", {x: -1}, "<=", 0)
    assert solve_lp(lp).status == UNBOUNDED


def test_empty_box_is_infeasible():
    lp = LinearProgram()
    lp.add_column("x", 0, 1)
    assert solve_lp(lp, lower=[2], upper=[1]).status == INFEASIBLE


def test_exact_column_cap():
    lp = random_lp(3, m=2, n=5)
    with pytest.raises(ValueError):
        solve_lp(lp, "exact", exact_column_cap=4)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_lp_text_round_trip(seed):
    lp = random_lp(seed)
    lp.col_obj[0] = Fraction(1, 3)
    back = read_lp_text(write_lp_text(lp))
    assert back.sense == lp.sense
    assert back.col_names == lp.col_names
    assert list(back.col_lower) == list(lp.col_lower)
    assert list(back.col_upper) == list(lp.col_upper)
    assert [Fraction(v) for v in back.col_obj] == [Fraction(v) for v in lp.col_obj]
    assert back.row_sense == lp.row_sense
    assert [Fraction(v) for v in back.row_rhs] == [Fraction(v) for v in lp.row_rhs]
    assert ([{j: Fraction(v) for j, v in r.items() if v} for r in back.row_coefs]
            == [{j: Fraction(v) for j, v in r.items() if v} for r in lp.row_coefs])


def test_rejects_nonfinite_coefficients():
    lp = LinearProgram()
    x = lp.add_column("x")
    with pytest.raises(ValueError):
        lp.add_row("r", {x: float("nan")}, "<=", 1)
