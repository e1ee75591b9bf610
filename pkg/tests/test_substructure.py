import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from otscuts.generators import random_network, random_spec
from otscuts.milp import solve_fixed
from otscuts.network import build_ots_milp
from otscuts.polytope import exact_vertices
from otscuts.substructure import (EnumerationCapError, LinearObjective, PointOptimizer,
                                  SubstructureSpec, bound_values, compute_value_sets,
                                  dc_node_optimum, dump_spec, enumerate_extreme_points,
                                  extract_substructures, load_spec, optimize_over_points,
                                  subset_sum_brute_force, subset_sum_reduction, uniform_spec)

seeds = st.integers(0, 10**9)


def fixed_x_vertices(spec: SubstructureSpec):
    """Union over binary x of the vertices of the fixed-x slice."""
    n = spec.n
    out = set()
    for x in itertools.product((0, 1), repeat=n):
        xs = (1,) + x
        A_ub, b_ub = [], []
        for j in range(n + 1):
            e = [0] * (n + 1)
            e[j] = 1
            A_ub.append(e)
            b_ub.append(spec.upper(j) * xs[j])
            A_ub.append([-v for v in e])
            b_ub.append(-spec.lower(j) * xs[j])
        for v in exact_vertices(A_ub, b_ub, [[1] * (n + 1)], [spec.demand]):
            out.add((x, tuple(Fraction(c) for c in v)))
    return out


@settings(max_examples=120, deadline=None)
@given(seeds)
def test_extreme_points_match_vertex_oracle(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(0, 4))
    got = {(p.x, p.f) for p in enumerate_extreme_points(spec)}
    assert got == fixed_x_vertices(spec)


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_extreme_points_are_members_with_one_interior(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(1, 5))
    for p in enumerate_extreme_points(spec):
        assert spec.contains(p.x, p.f)
        xs = (1,) + p.x
        interior = [j for j in range(spec.n + 1)
                    if xs[j] and spec.lower(j) < p.f[j] < spec.upper(j)]
        assert len(interior) <= 1
        assert p.interior_index == (interior[0] if interior else None)


def test_strict_filter_removes_nothing():
    rng = random.Random(5)
    for _ in range(10):
        spec = random_spec(rng, rng.randint(1, 3))
        assert (enumerate_extreme_points(spec, strict=True)
                == enumerate_extreme_points(spec))


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_extreme_points(uniform_spec(17, 1, 0))


def test_empty_set():
    spec = SubstructureSpec(10, 0, 0, (1, 1))
    assert not spec.is_feasible
    assert enumerate_extreme_points(spec) == []
    assert PointOptimizer([])([0, 0], [0, 0, 0]) is None


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_point_optimizer_matches_scan(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(1, 4))
    pts = enumerate_extreme_points(spec)
    opt = PointOptimizer(pts)
    cx = [Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(spec.n)]
    cf = [Fraction(rng.randint(-9, 9), rng.randint(1, 7)) for _ in range(spec.n + 1)]
    for sense in ("min", "max"):
        assert opt(cx, cf, sense) == optimize_over_points(pts, cx, cf, sense)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_value_sets_brute_force(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(0, 5))
    vs = compute_value_sets(spec)
    for k in range(spec.n + 1):
        others = [bound_values(spec, j) for j in range(spec.n + 1) if j != k]
        want = set()
        for combo in itertools.product(*others):
            v = spec.demand - sum(combo, Fraction(0))
            if spec.lower(k) <= v <= spec.upper(k):
                want.add(v)
        assert set(vs.V[k]) == want
        assert list(vs.V[k]) == sorted(want)


def test_value_set_cap():
    spec = SubstructureSpec(0, 0, 0, tuple(Fraction(1, 2 ** j) for j in range(14)))
    with pytest.raises(EnumerationCapError):
        compute_value_sets(spec, cap=100)


def test_spec_file_round_trip(tmp_path):
    spec = SubstructureSpec(Fraction(3, 2), -1, 2, (Fraction(1, 3), 2))
    dump_spec(spec, tmp_path / "s.json")
    assert load_spec(tmp_path / "s.json") == spec
    with pytest.raises(ValueError):
        SubstructureSpec.from_dict({"fbar": ["1"]})


def test_negated_mirrors_points():
    rng = random.Random(2)
    spec = random_spec(rng, 3)
    pts = {(p.x, p.f) for p in enumerate_extreme_points(spec)}
    neg = {(p.x, tuple(-v for v in p.f)) for p in enumerate_extreme_points(spec.negated())}
    assert pts == neg


def test_bus_restrictions_lie_in_substructures():
    for seed in range(8):
        net = random_network(6, seed)
        model = build_ots_milp(net)
        rng = random.Random(seed)
        x = {ln.id: int(rng.random() < 0.8) for ln in net.lines}
        inc, _ = solve_fixed(model, x)
        if inc is None:
            continue
        for spec in extract_substructures(net):
            o = spec.origin
            gens = [k for k, g in enumerate(net.generators) if g.bus == o.bus]
            f = [sum(inc.dispatch[k] for k in gens)]
            f += [s * inc.flows[lid] for s, lid in zip(o.signs, o.line_ids)]
            xs = [x[lid] for lid in o.line_ids]
            assert sum(f) == pytest.approx(float(spec.demand), abs=1e-7)
            for j in range(spec.n + 1):
                on = 1 if j == 0 else xs[j - 1]
                assert float(spec.lower(j)) * on - 1e-7 <= f[j] <= float(spec.upper(j)) * on + 1e-7


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_dc_node_methods_agree(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(1, 6))
    if 0 in spec.line_bounds:
        return
    obj = LinearObjective(tuple(Fraction(rng.randint(-5, 5)) for _ in range(spec.n)),
                          tuple(Fraction(rng.randint(-5, 5), 2) for _ in range(spec.n + 1)))
    assert dc_node_optimum(spec, obj, "enumerate") == dc_node_optimum(spec, obj, "network")


@given(st.lists(st.integers(1, 6), min_size=1, max_size=6), st.integers(1, 30))
def test_subset_sum_reduction_small(a, b):
    spec, obj, thr = subset_sum_reduction(a, b)
    best = dc_node_optimum(spec, obj, "enumerate")
    assert (best is not None and best <= thr) == subset_sum_brute_force(a, b)


def test_subset_sum_reduction_rejects_bad_data():
    with pytest.raises(ValueError):
        subset_sum_reduction([1, 0], 1)
    with pytest.raises(ValueError):
        subset_sum_reduction([1, 2], 0)


def test_frozen_two_line_example():
    spec = uniform_spec(2, 1, Fraction(1, 2))
    got = {(p.x, p.f) for p in enumerate_extreme_points(spec)}
    h = Fraction(1, 2)
    assert got == {((1, 0), (0, h, 0)), ((0, 1), (0, 0, h)),
                   ((1, 1), (0, 1, -h)), ((1, 1), (0, -h, 1))}
    assert set(compute_value_sets(spec).V[1]) == {-h, h}


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 5))
def test_uniform_value_sets(n, fbar, dnum):
    fbar = Fraction(fbar)
    d = fbar * Fraction(dnum, 6)
    vs = compute_value_sets(uniform_spec(n, fbar, d))
    for k in range(1, n + 1):
        assert set(vs.V[k]) == ({d, d - fbar} if n > 1 else {d})


def test_uniform_value_sets_zero_demand():
    """At d = 0 the value d + fbar coincides with the bound fbar and is kept."""
    vs = compute_value_sets(uniform_spec(3, 2, 0))
    assert all(set(vs.V[k]) == {-2, 0, 2} for k in (1, 2, 3))


def test_frozen_subset_sum_example():
    spec, obj, thr = subset_sum_reduction([2, 3], 5)
    assert spec.contains((1, 1), (0, 2, 3))
    assert dc_node_optimum(spec, obj, "enumerate") == 0 == thr


@settings(max_examples=80, deadline=None)
@given(seeds)
def test_value_sets_are_realized(seed):
    rng = random.Random(seed)
    spec = random_spec(rng, rng.randint(1, 4))
    pts = enumerate_extreme_points(spec)
    vs = compute_value_sets(spec)
    for k in range(spec.n + 1):
        for v in vs.V[k]:
            assert (any(p.interior_index == k and p.f[k] == v for p in pts)
                    or v in bound_values(spec, k))
