import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from otscuts.generators import random_network, triangle_network
from otscuts.lp import INFEASIBLE, OPTIMAL, solve_lp
from otscuts.milp import solve_fixed
from otscuts.network import (CostFunction, InstanceError, build_dcopf_lp, build_ots_milp,
                             dump_instance, load_instance, network_from_dict,
                             network_to_dict, piecewise_linearize)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize("name", ["triangle", "radial", "net118"])
def test_fixture_round_trip(name, tmp_path):
    net = load_instance(FIXTURES / f"{name}.json")
    out = tmp_path / "copy.json"
    dump_instance(net, out)
    assert load_instance(out) == net
    assert out.read_text() == (FIXTURES / f"{name}.json").read_text()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_generator_deterministic_and_round_trips(buses, seed):
    a = random_network(buses, seed)
    assert a == random_network(buses, seed)
    assert network_from_dict(json.loads(json.dumps(network_to_dict(a)))) == a


def _base():
    return network_to_dict(triangle_network())


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["lines"].__setitem__(0, {**d["lines"][0], "to": 99}), "lines[0].to"),
    (lambda d: d["generators"][0].__setitem__("bus", 42), "generators[0].bus"),
    (lambda d: d["lines"][1].__setitem__("limit", "0"), "lines[1].limit"),
    (lambda d: d["lines"][1].__setitem__("limit", "-5"), "lines[1].limit"),
    (lambda d: d["lines"][0].__setitem__("susceptance", "0"), "lines[0].susceptance"),
    (lambda d: d["buses"][1].__setitem__("id", 1), "buses[1].id"),
    (lambda d: d["lines"][0].pop("limit"), "lines[0].limit"),
    (lambda d: d["buses"][0].__setitem__("load", 1.5), "buses[0].load"),
    (lambda d: d.__setitem__("format", "v0"), "format"),
])
def test_validation_names_field(mutate, field):
    data = _base()
    mutate(data)
    with pytest.raises(InstanceError, match=field.replace("[", r"\[").replace("]", r"\]")):
        network_from_dict(data)


def test_missing_file_is_reported(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_instance(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(InstanceError, match="invalid JSON"):
        load_instance(bad)


def test_negative_quadratic_cost_rejected():
    with pytest.raises(InstanceError):
        CostFunction(0, 1, -1)


@given(st.integers(1, 40), st.fractions(0, 5, max_denominator=8),
       st.fractions(-3, 3, max_denominator=8))
def test_piecewise_deviation_bound(segments, c2, c1):
    cost = CostFunction(0, c1, c2)
    pieces, dev = piecewise_linearize(cost, segments, 0, 10)
    for k in range(41):
        p = Fraction(k, 4)
        under = max(s * p + b for s, b in pieces)
        assert under <= cost(p)
        assert cost(p) - under <= dev


def test_big_m_matches_explicit_dcopf():
    """With all lines closed and angles well inside the bound the big-M
    model has the DC-OPF optimum."""
    for seed in range(15):
        net = random_network(6, seed)
        model = build_ots_milp(net)
        ones = {ln.id: 1 for ln in net.lines}
        inc, sol = solve_fixed(model, ones)
        ref = solve_lp(build_dcopf_lp(net, ones))
        if ref.status != OPTIMAL:
            assert inc is None
            continue
        assert inc is not None
        if model.max_angle_gap(sol.x) < 0.5 * float(model.angle_bound):
            assert inc.objective == pytest.approx(float(ref.objective), rel=1e-9, abs=1e-9)
        else:
            assert inc.objective >= float(ref.objective) - 1e-7


def test_open_lines_carry_no_flow():
    net = triangle_network()
    model = build_ots_milp(net)
    x = {1: 1, 2: 0, 3: 1}
    inc, _ = solve_fixed(model, x)
    assert inc is not None
    assert inc.flows[2] == pytest.approx(0, abs=1e-9)
    ref = solve_lp(build_dcopf_lp(net, x))
    assert inc.objective == pytest.approx(float(ref.objective))


def test_model_layout():
    net = triangle_network()
    model = build_ots_milp(net)
    assert len(model.binary_columns) == len(net.lines)
    ref = net.reference_bus
    j = model.theta[ref]
    assert model.lp.col_lower[j] == model.lp.col_upper[j] == 0
    for ln in net.lines:
        assert model.big_m[ln.id] == model.angle_bound * ln.susceptance


def test_all_open_is_infeasible_with_load():
    net = triangle_network()
    model = build_ots_milp(net)
    inc, sol = solve_fixed(model, {ln.id: 0 for ln in net.lines})
    assert inc is None and sol.status == INFEASIBLE


def test_too_small_angle_bound_changes_the_closed_optimum(caplog):
    net = triangle_network()
    ones = {ln.id: 1 for ln in net.lines}
    ref = solve_lp(build_dcopf_lp(net, ones))
    loose, _ = solve_fixed(build_ots_milp(net), ones)
    tight_model = build_ots_milp(net, angle_bound=Fraction(1, 2))
    tight, sol = solve_fixed(tight_model, ones)
    assert loose.objective == pytest.approx(float(ref.objective)) == pytest.approx(415)
    assert tight.objective == pytest.approx(550)
    assert tight_model.warn_if_angle_tight(sol.x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_big_m_rows_exact_within_angle_range(seed):
    """x = 0: both big-M rows hold for every admissible angle pair with p = 0.
    x = 1: the pair of rows is equivalent to p = B (theta_i - theta_j)."""
    import random
    rng = random.Random(seed)
    net = random_network(5, seed)
    model = build_ots_milp(net)
    lp = model.lp
    bound = float(model.angle_bound)
    for ln in net.lines:
        rows = {lp.row_names[i]: i for i in range(lp.num_rows)}
        up, lo = rows[f"bmu[{ln.id}]"], rows[f"bml[{ln.id}]"]
        p, x = model.flow[ln.id], model.status[ln.id]
        ti, tj = model.theta[ln.from_bus], model.theta[ln.to_bus]
        B = float(ln.susceptance)
        for _ in range(5):
            gap = rng.uniform(-bound, bound)
            z = [0.0] * lp.num_cols
            z[ti], z[tj] = gap, 0.0
            if ti == tj:
                continue
            for xv, pv in ((0, 0.0), (1, B * gap), (1, B * gap + 1.0)):
                z[x], z[p] = xv, pv
                act_u = sum(float(v) * z[j] for j, v in lp.row_coefs[up].items())
                act_l = sum(float(v) * z[j] for j, v in lp.row_coefs[lo].items())
                ok = (act_u <= float(lp.row_rhs[up]) + 1e-9
                      and act_l >= float(lp.row_rhs[lo]) - 1e-9)
                assert ok == (xv == 0 or abs(pv - B * gap) < 1e-9)
