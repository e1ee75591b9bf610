"""DC-OTS instances: data model, JSON I/O and the big-M MILP."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .lp import INF, LinearProgram
from .numerics import format_rational, to_rational

log = logging.getLogger(__name__)

FORMAT = "ots-v1"
TWO_PI = Fraction(math.tau)  # binary value of 2*pi as a rational


class InstanceError(ValueError):
    """Invalid instance data; the message names the offending field."""


@dataclass(frozen=True)
class CostFunction:
    c0: Fraction = Fraction(0)
    c1: Fraction = Fraction(0)
    c2: Fraction = Fraction(0)

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            object.__setattr__(self, name, to_rational(getattr(self, name)))
        if self.c2 < 0:
            raise InstanceError("quadratic cost coefficient c2 must be >= 0")

    @property
    def kind(self) -> str:
        return "quadratic" if self.c2 != 0 else "linear"

    def __call__(self, p):
        return self.c0 + self.c1 * p + self.c2 * p * p


@dataclass(frozen=True)
class Bus:
    id: int
    load: Fraction = Fraction(0)


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: Fraction
    p_max: Fraction
    cost: CostFunction = field(default_factory=CostFunction)


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: Fraction
    thermal_limit: Fraction


@dataclass(frozen=True)
class PowerNetwork:
    buses: Tuple[Bus, ...]
    generators: Tuple[Generator, ...]
    lines: Tuple[Line, ...]

    def __post_init__(self):
        _validate(self)

    @property
    def bus_ids(self) -> List[int]:
        return [b.id for b in self.buses]

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def generators_at(self, bus_id: int) -> List[Generator]:
        return [g for g in self.generators if g.bus == bus_id]

    def incident_lines(self, bus_id: int) -> List[Line]:
        return [ln for ln in self.lines if bus_id in (ln.from_bus, ln.to_bus)]

    @property
    def reference_bus(self) -> int:
        return min(self.bus_ids)


def _validate(net: PowerNetwork) -> None:
    ids = set()
    for k, b in enumerate(net.buses):
        if b.id in ids:
            raise InstanceError(f"buses[{k}].id: duplicate bus id {b.id}")
        ids.add(b.id)
    for k, g in enumerate(net.generators):
        if g.bus not in ids:
            raise InstanceError(f"generators[{k}].bus: dangling bus reference {g.bus}")
        if g.p_min > g.p_max:
            raise InstanceError(f"generators[{k}]: pmin exceeds pmax")
    line_ids = set()
    for k, ln in enumerate(net.lines):
        if ln.id in line_ids:
            raise InstanceError(f"lines[{k}].id: duplicate line id {ln.id}")
        line_ids.add(ln.id)
        for attr, value in (("from", ln.from_bus), ("to", ln.to_bus)):
            if value not in ids:
                raise InstanceError(f"lines[{k}].{attr}: dangling bus reference {value}")
        if ln.from_bus == ln.to_bus:
            raise InstanceError(f"lines[{k}]: from and to bus coincide")
        if ln.susceptance <= 0:
            raise InstanceError(f"lines[{k}].susceptance: must be positive")
        if ln.thermal_limit <= 0:
            raise InstanceError(f"lines[{k}].limit: nonpositive limit")


# ---------------------------------------------------------------------------
# JSON


def _num(obj, key, where):
    if key not in obj:
        raise InstanceError(f"{where}.{key}: missing field")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise InstanceError(f"{where}.{key}: expected a decimal string")
    try:
        return to_rational(value)
    except ValueError as exc:
        raise InstanceError(f"{where}.{key}: {exc}") from None


def _int(obj, key, where):
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError(f"{where}.{key}: expected an integer")
    return value


def network_from_dict(data: dict) -> PowerNetwork:
    if not isinstance(data, dict):
        raise InstanceError("top level: expected an object")
    fmt = data.get("format", FORMAT)
    if fmt != FORMAT:
        raise InstanceError(f"format: unsupported format {fmt!r}")
    for key in ("buses", "generators", "lines"):
        if not isinstance(data.get(key), list):
            raise InstanceError(f"{key}: expected a list")
    buses = []
    for k, b in enumerate(data["buses"]):
        where = f"buses[{k}]"
        buses.append(Bus(_int(b, "id", where), _num(b, "load", where)))
    gens = []
    for k, g in enumerate(data["generators"]):
        where = f"generators[{k}]"
        cost = g.get("cost", {})
        if not isinstance(cost, dict):
            raise InstanceError(f"{where}.cost: expected an object")
        c = tuple(_num(cost, key, f"{where}.cost") if key in cost else Fraction(0)
                  for key in ("c0", "c1", "c2"))
        try:
            cf = CostFunction(*c)
        except InstanceError as exc:
            raise InstanceError(f"{where}.cost: {exc}") from None
        gens.append(Generator(_int(g, "bus", where), _num(g, "pmin", where),
                              _num(g, "pmax", where), cf))
    lines = []
    for k, ln in enumerate(data["lines"]):
        where = f"lines[{k}]"
        lines.append(Line(_int(ln, "id", where), _int(ln, "from", where), _int(ln, "to", where),
                          _num(ln, "susceptance", where), _num(ln, "limit", where)))
    buses.sort(key=lambda b: b.id)
    return PowerNetwork(tuple(buses), tuple(gens), tuple(lines))


def network_to_dict(net: PowerNetwork) -> dict:
    f = format_rational
    return {
        "format": FORMAT,
        "buses": [{"id": b.id, "load": f(b.load)} for b in net.buses],
        "generators": [
            {"bus": g.bus, "pmin": f(g.p_min), "pmax": f(g.p_max),
             "cost": {"c0": f(g.cost.c0), "c1": f(g.cost.c1), "c2": f(g.cost.c2)}}
            for g in net.generators
        ],
        "lines": [
            {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
             "susceptance": f(ln.susceptance), "limit": f(ln.thermal_limit)}
            for ln in net.lines
        ],
    }


def load_instance(path) -> PowerNetwork:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from None
    return network_from_dict(data)


def dump_instance(net: PowerNetwork, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n")


# ---------------------------------------------------------------------------
# costs


def piecewise_linearize(cost: CostFunction, segments: int, lo, hi):
    """Tangent lines at the midpoints of ``segments`` equal pieces of [lo, hi].

    Returns ``(pieces, max_deviation)`` where ``pieces`` is a list of
    ``(slope, intercept)``; the maximum of the tangents under-estimates the
    cost by at most ``max_deviation`` on the range.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    lo, hi = to_rational(lo), to_rational(hi)
    if lo > hi:
        raise ValueError("empty range")
    if cost.c2 == 0:
        return [(cost.c1, cost.c0)], Fraction(0)
    if lo == hi:
        segments = 1
    h = (hi - lo) / segments
    pieces = []
    for k in range(segments):
        p0 = lo + h * (2 * k + 1) / 2
        pieces.append((2 * cost.c2 * p0 + cost.c1, cost.c0 - cost.c2 * p0 * p0))
    # largest gap sits at the range ends and at tangent crossings: c2*(h/2)^2
    return pieces, cost.c2 * (h / 2) ** 2


# ---------------------------------------------------------------------------
# the MILP


@dataclass
class OtsModel:
    """Big-M DC-OTS model plus the column/row maps needed to read it."""

    net: PowerNetwork
    lp: LinearProgram
    angle_bound: Fraction
    theta: Dict[int, int]
    dispatch: List[int]
    flow: Dict[int, int]
    status: Dict[int, int]
    big_m: Dict[int, Fraction]
    cost_deviation: Fraction = Fraction(0)

    @property
    def binary_columns(self) -> List[int]:
        return [self.status[ln.id] for ln in self.net.lines]

    def fixed_bounds(self, x: Dict[int, int]):
        """Column bounds with line statuses fixed to the 0/1 values in ``x``."""
        lower, upper = list(self.lp.col_lower), list(self.lp.col_upper)
        for line_id, v in x.items():
            j = self.status[line_id]
            lower[j] = upper[j] = v
        return lower, upper

    def max_angle_gap(self, values) -> float:
        gap = 0.0
        for ln in self.net.lines:
            d = abs(float(values[self.theta[ln.from_bus]]) - float(values[self.theta[ln.to_bus]]))
            gap = max(gap, d)
        return gap

    def warn_if_angle_tight(self, values) -> bool:
        gap = self.max_angle_gap(values)
        if gap >= 0.99 * float(self.angle_bound):
            log.warning("angle difference %.6g within 1%% of the bound %.6g; "
                        "big-M may be too tight", gap, float(self.angle_bound))
            return True
        return False


def build_ots_milp(net: PowerNetwork, angle_bound=TWO_PI, segments: int = 16) -> OtsModel:
    """Big-M MILP of DC-OTS.

    Columns ``theta[i]``, ``pg[k]``, ``p[l]``, ``x[l]`` (plus ``cost[k]``
    epigraph columns for quadratic generators). The angle of the lowest-id
    bus is fixed to 0 and every line carries ``|theta_i - theta_j| <=
    angle_bound``, which is the range on which the big-M rows are exact.
    """
    angle_bound = to_rational(angle_bound)
    if angle_bound <= 0:
        raise ValueError("angle_bound must be positive")
    lp = LinearProgram("min", "dc-ots")
    ref = net.reference_bus
    theta = {}
    for b in net.buses:
        if b.id == ref:
            theta[b.id] = lp.add_column(f"theta[{b.id}]", 0, 0)
        else:
            theta[b.id] = lp.add_column(f"theta[{b.id}]", -INF, INF)
    dispatch = []
    offset = Fraction(0)
    deviation = Fraction(0)
    for k, g in enumerate(net.generators):
        j = lp.add_column(f"pg[{k}]", g.p_min, g.p_max)
        dispatch.append(j)
        if g.cost.c2 == 0:
            lp.col_obj[j] = g.cost.c1
            offset += g.cost.c0
        else:
            pieces, dev = piecewise_linearize(g.cost, segments, g.p_min, g.p_max)
            deviation = max(deviation, dev)
            t = lp.add_column(f"cost[{k}]", -INF, INF, 1)
            for s, (slope, icpt) in enumerate(pieces):
                lp.add_row(f"pwl[{k},{s}]", {t: 1, j: -slope}, ">=", icpt)
    lp.objective_offset = offset
    flow, status, big_m = {}, {}, {}
    for ln in net.lines:
        flow[ln.id] = lp.add_column(f"p[{ln.id}]", -INF, INF)
        status[ln.id] = lp.add_column(f"x[{ln.id}]", 0, 1)
    for b in net.buses:
        coefs: Dict[int, object] = {}
        for k, g in enumerate(net.generators):
            if g.bus == b.id:
                coefs[dispatch[k]] = 1
        for ln in net.lines:
            if ln.from_bus == b.id:
                coefs[flow[ln.id]] = coefs.get(flow[ln.id], 0) - 1
            elif ln.to_bus == b.id:
                coefs[flow[ln.id]] = coefs.get(flow[ln.id], 0) + 1
        lp.add_row(f"bal[{b.id}]", coefs, "=", b.load)
    for ln in net.lines:
        p, x = flow[ln.id], status[ln.id]
        ti, tj = theta[ln.from_bus], theta[ln.to_bus]
        B, M = ln.susceptance, angle_bound * ln.susceptance
        big_m[ln.id] = M
        lp.add_row(f"thu[{ln.id}]", {p: 1, x: -ln.thermal_limit}, "<=", 0)
        lp.add_row(f"thl[{ln.id}]", {p: -1, x: -ln.thermal_limit}, "<=", 0)
        lp.add_row(f"bmu[{ln.id}]", {p: 1, ti: -B, tj: B, x: M}, "<=", M)
        lp.add_row(f"bml[{ln.id}]", {p: 1, ti: -B, tj: B, x: -M}, ">=", -M)
        lp.add_row(f"angu[{ln.id}]", {ti: 1, tj: -1}, "<=", angle_bound)
        lp.add_row(f"angl[{ln.id}]", {ti: 1, tj: -1}, ">=", -angle_bound)
    return OtsModel(net, lp, angle_bound, theta, dispatch, flow, status, big_m, deviation)


def build_dcopf_lp(net: PowerNetwork, statuses: Optional[Dict[int, int]] = None,
                   segments: int = 16) -> LinearProgram:
    """DC-OPF with explicit ``p = B (theta_i - theta_j)`` on closed lines.

    No angle-difference limit; open lines carry no flow and impose nothing.
    Used as an oracle for the big-M model.
    """
    statuses = statuses or {}
    lp = LinearProgram("min", "dc-opf")
    ref = net.reference_bus
    theta = {b.id: (lp.add_column(f"theta[{b.id}]", 0, 0) if b.id == ref
                    else lp.add_column(f"theta[{b.id}]", -INF, INF)) for b in net.buses}
    dispatch = []
    offset = Fraction(0)
    for k, g in enumerate(net.generators):
        j = lp.add_column(f"pg[{k}]", g.p_min, g.p_max)
        dispatch.append(j)
        if g.cost.c2 == 0:
            lp.col_obj[j] = g.cost.c1
            offset += g.cost.c0
        else:
            pieces, _ = piecewise_linearize(g.cost, segments, g.p_min, g.p_max)
            t = lp.add_column(f"cost[{k}]", -INF, INF, 1)
            for s, (slope, icpt) in enumerate(pieces):
                lp.add_row(f"pwl[{k},{s}]", {t: 1, j: -slope}, ">=", icpt)
    lp.objective_offset = offset
    flow = {}
    for ln in net.lines:
        on = statuses.get(ln.id, 1)
        lim = ln.thermal_limit if on else 0
        flow[ln.id] = lp.add_column(f"p[{ln.id}]", -lim, lim)
    for b in net.buses:
        coefs: Dict[int, object] = {}
        for k, g in enumerate(net.generators):
            if g.bus == b.id:
                coefs[dispatch[k]] = 1
        for ln in net.lines:
            if ln.from_bus == b.id:
                coefs[flow[ln.id]] = coefs.get(flow[ln.id], 0) - 1
            elif ln.to_bus == b.id:
                coefs[flow[ln.id]] = coefs.get(flow[ln.id], 0) + 1
        lp.add_row(f"bal[{b.id}]", coefs, "=", b.load)
    for ln in net.lines:
        if statuses.get(ln.id, 1):
            lp.add_row(f"ohm[{ln.id}]", {flow[ln.id]: 1, theta[ln.from_bus]: -ln.susceptance,
                                         theta[ln.to_bus]: ln.susceptance}, "=", 0)
    return lp
