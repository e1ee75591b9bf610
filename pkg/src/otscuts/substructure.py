"""The single-bus mixed-integer set and its extreme points.

For one bus with dispatch ``f_0`` and ``n`` incident lines the set is::

    S = {(x, f) in {0,1}^n x R^(n+1):  sum_j f_j = d,
         lo_j x_j <= f_j <= hi_j x_j  (j = 0..n, x_0 = 1)}

with ``lo_j = -hi_j`` for the lines. All data are exact rationals.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .numerics import format_rational, to_rational


class EnumerationCapError(RuntimeError):
    """A configured size cap was exceeded; results would be truncated."""


@dataclass(frozen=True)
class BusOrigin:
    """Where a substructure came from in a network.

    ``signs[j]`` maps the node flow of line ``line_ids[j]`` to the line
    variable: ``f_j = signs[j] * p_line``. ``negated`` records the global
    sign flip applied to buses with negative load.
    """

    bus: int
    line_ids: Tuple[int, ...]
    signs: Tuple[int, ...]
    negated: bool = False


@dataclass(frozen=True)
class SubstructureSpec:
    demand: Fraction
    f0_lower: Fraction
    f0_upper: Fraction
    line_bounds: Tuple[Fraction, ...]
    origin: Optional[BusOrigin] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "demand", to_rational(self.demand))
        object.__setattr__(self, "f0_lower", to_rational(self.f0_lower))
        object.__setattr__(self, "f0_upper", to_rational(self.f0_upper))
        object.__setattr__(self, "line_bounds", tuple(to_rational(v) for v in self.line_bounds))
        if self.f0_lower > self.f0_upper:
            raise ValueError("f0_lower exceeds f0_upper")
        if any(v < 0 for v in self.line_bounds):
            raise ValueError("line bounds must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.line_bounds)

    @property
    def d(self) -> Fraction:
        return self.demand

    def lower(self, j: int) -> Fraction:
        return self.f0_lower if j == 0 else -self.line_bounds[j - 1]

    def upper(self, j: int) -> Fraction:
        return self.f0_upper if j == 0 else self.line_bounds[j - 1]

    @property
    def is_feasible(self) -> bool:
        total = sum(self.line_bounds, Fraction(0))
        return self.f0_lower - total <= self.demand <= self.f0_upper + total

    @property
    def is_uniform(self) -> bool:
        """Common line bound, no dispatch and ``0 <= d < fbar``."""
        if self.n == 0 or self.f0_lower != 0 or self.f0_upper != 0:
            return False
        fbar = self.line_bounds[0]
        return all(v == fbar for v in self.line_bounds) and 0 <= self.demand < fbar

    def negated(self) -> "SubstructureSpec":
        """The mirror image ``(x, -f)``, which is the set for demand ``-d``."""
        origin = self.origin
        if origin is not None:
            origin = BusOrigin(origin.bus, origin.line_ids, tuple(-s for s in origin.signs),
                               not origin.negated)
        return SubstructureSpec(-self.demand, -self.f0_upper, -self.f0_lower,
                                self.line_bounds, origin)

    def contains(self, x: Sequence, f: Sequence) -> bool:
        if len(x) != self.n or len(f) != self.n + 1:
            raise ValueError("dimension mismatch")
        if any(v not in (0, 1) for v in x):
            return False
        if sum(f) != self.demand:
            return False
        xs = (1,) + tuple(x)
        return all(self.lower(j) * xs[j] <= f[j] <= self.upper(j) * xs[j]
                   for j in range(self.n + 1))

    def to_dict(self) -> dict:
        return {"d": format_rational(self.demand),
                "f0": [format_rational(self.f0_lower), format_rational(self.f0_upper)],
                "fbar": [format_rational(v) for v in self.line_bounds]}

    @classmethod
    def from_dict(cls, data: dict) -> "SubstructureSpec":
        try:
            f0 = data.get("f0", ["0", "0"])
            return cls(to_rational(data["d"]), to_rational(f0[0]), to_rational(f0[1]),
                       tuple(to_rational(v) for v in data["fbar"]))
        except (KeyError, IndexError, TypeError) as exc:
            raise ValueError(f"malformed substructure file: {exc}") from None


def uniform_spec(n: int, fbar, d) -> SubstructureSpec:
    return SubstructureSpec(to_rational(d), Fraction(0), Fraction(0), (to_rational(fbar),) * n)


def load_spec(path) -> SubstructureSpec:
    return SubstructureSpec.from_dict(json.loads(Path(path).read_text()))


def dump_spec(spec: SubstructureSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def extract_substructures(net) -> List[SubstructureSpec]:
    """One spec per bus; flows are oriented into the bus."""
    specs = []
    for b in net.buses:
        gens = net.generators_at(b.id)
        lo = sum((g.p_min for g in gens), Fraction(0))
        hi = sum((g.p_max for g in gens), Fraction(0))
        lines = net.incident_lines(b.id)
        signs = tuple(1 if ln.to_bus == b.id else -1 for ln in lines)
        origin = BusOrigin(b.id, tuple(ln.id for ln in lines), signs)
        specs.append(SubstructureSpec(b.load, lo, hi,
                                      tuple(ln.thermal_limit for ln in lines), origin))
    return specs


# ---------------------------------------------------------------------------
# extreme points


@dataclass(frozen=True)
class ExtremePoint:
    x: Tuple[int, ...]
    f: Tuple[Fraction, ...]
    interior_index: Optional[int] = None

    def objective(self, cx: Sequence, cf: Sequence):
        return sum(c * v for c, v in zip(cx, self.x)) + sum(c * v for c, v in zip(cf, self.f))


def enumerate_extreme_points(spec: SubstructureSpec, cap: int = 16,
                             strict: bool = False) -> List[ExtremePoint]:
    """Extreme points of conv(S): the union over binary x of the vertices of
    the fixed-x polytope, each with at most one coordinate off its bounds.

    ``strict=True`` additionally drops any point lying in the convex hull of
    the others (exact LP); that filter should never remove anything.
    """
    n = spec.n
    if n > cap:
        raise EnumerationCapError(f"n = {n} exceeds the enumeration cap {cap}")
    seen = set()
    points: List[ExtremePoint] = []
    for x in itertools.product((0, 1), repeat=n):
        active = [0] + [j + 1 for j in range(n) if x[j]]
        for k in active:
            others = [j for j in active if j != k]
            choices = [sorted({spec.lower(j), spec.upper(j)}) for j in others]
            for vals in itertools.product(*choices):
                fk = spec.demand - sum(vals, Fraction(0))
                if not spec.lower(k) <= fk <= spec.upper(k):
                    continue
                f = [Fraction(0)] * (n + 1)
                for j, v in zip(others, vals):
                    f[j] = v
                f[k] = fk
                key = (x, tuple(f))
                if key in seen:
                    continue
                seen.add(key)
                points.append(ExtremePoint(x, tuple(f), _interior_index(spec, x, f)))
    points.sort(key=lambda p: (p.x, p.f))
    if strict:
        points = _drop_dominated(points)
    return points


def _interior_index(spec, x, f) -> Optional[int]:
    xs = (1,) + tuple(x)
    for j in range(spec.n + 1):
        if xs[j] and spec.lower(j) < f[j] < spec.upper(j):
            return j
    return None


def _drop_dominated(points: List[ExtremePoint]) -> List[ExtremePoint]:
    from .lp import LinearProgram, solve_lp

    keep = []
    for i, p in enumerate(points):
        others = [q for k, q in enumerate(points) if k != i]
        if not others:
            keep.append(p)
            continue
        lp = LinearProgram("min", "hull-membership")
        for k in range(len(others)):
            lp.add_column(f"lam[{k}]", 0, 1)
        lp.add_row("convex", {k: 1 for k in range(len(others))}, "=", 1)
        coords = list(p.x) + list(p.f)
        for c, target in enumerate(coords):
            row = {}
            for k, q in enumerate(others):
                v = (list(q.x) + list(q.f))[c]
                if v != 0:
                    row[k] = v
            lp.add_row(f"coord[{c}]", row, "=", target)
        sol = solve_lp(lp, "exact", exact_column_cap=max(60, len(others)))
        if sol.status != "optimal":
            keep.append(p)
    return keep


def optimize_over_points(points: Iterable[ExtremePoint], cx: Sequence, cf: Sequence,
                         sense: str = "min"):
    pts = list(points)
    if not pts:
        return None
    values = [p.objective(cx, cf) for p in pts]
    return min(values) if sense == "min" else max(values)


def _lcm_of(values) -> int:
    L = 1
    for v in values:
        L = L * v.denominator // math.gcd(L, v.denominator)
    return L


class PointOptimizer:
    """Exact linear optimization over a fixed point list, many objectives.

    Points are scaled once to an integer matrix; each objective is scaled
    to integers too, so one call is a single integer matrix product. Falls
    back to :func:`optimize_over_points` when int64 could overflow.
    """

    _LIMIT = 2 ** 62

    def __init__(self, points: Iterable[ExtremePoint]):
        self.points = list(points)
        self.L = _lcm_of(v for p in self.points for v in p.f)
        rows = [list(p.x) + [int(v * self.L) for v in p.f] for p in self.points]
        self.matrix = np.array(rows, dtype=np.int64) if rows else None
        self.peak = int(np.abs(self.matrix).max()) if rows else 0

    def __call__(self, cx: Sequence, cf: Sequence, sense: str = "min"):
        if not self.points:
            return None
        cx = [Fraction(v) for v in cx]
        cf = [Fraction(v) for v in cf]
        M = _lcm_of(cx + cf)
        w = [int(v * M) * self.L for v in cx] + [int(v * M) for v in cf]
        if self.peak * max(map(abs, w), default=0) * len(w) >= self._LIMIT:
            return optimize_over_points(self.points, cx, cf, sense)
        values = self.matrix @ np.array(w, dtype=np.int64)
        best = int(values.min() if sense == "min" else values.max())
        return Fraction(best, self.L * M)


# ---------------------------------------------------------------------------
# value sets


@dataclass(frozen=True)
class ValueSets:
    E: Tuple[Tuple[Fraction, ...], ...]
    V: Tuple[Tuple[Fraction, ...], ...]


def bound_values(spec: SubstructureSpec, j: int) -> Tuple[Fraction, ...]:
    if j == 0:
        return tuple(sorted({spec.f0_lower, spec.f0_upper}))
    fbar = spec.line_bounds[j - 1]
    return tuple(sorted({-fbar, Fraction(0), fbar}))


def common_denominator(spec: SubstructureSpec) -> int:
    """Smallest ``L`` such that ``L`` times every datum of ``spec`` is an integer."""
    L = 1
    for v in (spec.demand, spec.f0_lower, spec.f0_upper) + spec.line_bounds:
        L = L * v.denominator // math.gcd(L, v.denominator)
    return L


def _bits(mask: int, offset: int) -> List[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1 - offset)
        mask ^= low
    return out


def _scaled_value_sets(spec: SubstructureSpec, cap: int):
    """Value sets in units of ``1/L`` as Python ints: ``(L, E, V)``.

    Reachable partial sums are kept as bitsets (bit ``s + off`` set when
    ``s`` is reachable) so that Minkowski sums become shifts and ors.
    """
    L = common_denominator(spec)
    n = spec.n
    E = [sorted({int(spec.lower(j) * L), int(spec.upper(j) * L)} | ({0} if j else set()))
         for j in range(n + 1)]
    off = sum(max(abs(e) for e in Ej) for Ej in E)

    def step(mask, Ej):
        out = 0
        for e in Ej:
            out |= mask << e if e >= 0 else mask >> -e
        if out.bit_count() > cap:
            raise EnumerationCapError(f"reachable-sum set exceeds {cap} values")
        return out

    prefix = [1 << off]
    for j in range(n + 1):
        prefix.append(step(prefix[-1], E[j]))
    suffix = [1 << off]
    for j in range(n, -1, -1):
        suffix.append(step(suffix[-1], E[j]))
    suffix.reverse()  # suffix[j] = sums over coordinates j..n; suffix[n+1] = {0}
    dL = int(spec.demand * L)
    V = []
    for k in range(n + 1):
        P, Q = prefix[k], suffix[k + 1]
        if P.bit_count() * Q.bit_count() > cap * 16:
            raise EnumerationCapError(f"reachable-sum set for V_{k} exceeds {cap} values")
        others = 0
        for q in _bits(Q, off):
            others |= P << q if q >= 0 else P >> -q
        if others.bit_count() > cap:
            raise EnumerationCapError(f"reachable-sum set for V_{k} exceeds {cap} values")
        lo, hi = E[k][0], E[k][-1]
        # v = dL - t with lo <= v <= hi, i.e. t in [dL - hi, dL - lo]
        t_lo, t_hi = dL - hi + off, dL - lo + off
        if t_hi < 0:
            V.append([])
            continue
        window = (others >> max(t_lo, 0)) & ((1 << (t_hi - max(t_lo, 0) + 1)) - 1)
        ts = _bits(window, off - max(t_lo, 0))
        V.append(sorted(dL - t for t in ts))
    return L, E, V


def compute_value_sets(spec: SubstructureSpec, cap: int = 10**6) -> ValueSets:
    """``V_k``: values ``d - sum_{j != k} e_j`` with ``e_j`` from the bound
    values of coordinate ``j``, kept if inside the bounds of ``k``.

    Reachable partial sums are built from both ends in integer units of the
    common denominator; more than ``cap`` distinct sums raises
    :class:`EnumerationCapError`.
    """
    L, E, V = _scaled_value_sets(spec, cap)
    return ValueSets(tuple(tuple(Fraction(e, L) for e in Ej) for Ej in E),
                     tuple(tuple(Fraction(v, L) for v in Vk) for Vk in V))


# ---------------------------------------------------------------------------
# Subset-Sum


@dataclass(frozen=True)
class LinearObjective:
    """Coefficients on ``x`` (length n) and ``f`` (length n+1)."""

    x: Tuple[Fraction, ...]
    f: Tuple[Fraction, ...]

    def to_dict(self) -> dict:
        return {"x": [format_rational(v) for v in self.x],
                "f": [format_rational(v) for v in self.f]}


def subset_sum_reduction(a: Sequence[int], b: int):
    """DC-Node instance from a Subset-Sum instance ``(a, b)``.

    Returns ``(spec, objective, threshold)``: some point of S has objective
    value <= threshold iff some subset of ``a`` sums to ``b``.
    """
    if b < 1 or any(int(v) != v or v < 1 for v in a):
        raise ValueError("Subset-Sum data must be positive integers")
    spec = SubstructureSpec(Fraction(b), Fraction(0), Fraction(0),
                            tuple(Fraction(v) for v in a))
    objective = LinearObjective(tuple(Fraction(v) for v in a),
                                (Fraction(0),) + (Fraction(-1),) * len(a))
    return spec, objective, Fraction(0)


def dc_node_optimum(spec: SubstructureSpec, objective: LinearObjective,
                    method: str = "auto", cap: int = 8):
    """Exact minimum of the objective over S, or ``None`` if S is empty.

    ``method="enumerate"`` scans the extreme points; ``"network"`` runs a
    shortest path over the layered network, whose paths are the extreme
    points. ``"auto"`` enumerates up to ``cap`` lines.
    """
    if method == "auto":
        method = "enumerate" if spec.n <= cap else "network"
    if method == "enumerate":
        pts = enumerate_extreme_points(spec, cap=max(cap, spec.n))
        return optimize_over_points(pts, objective.x, objective.f)
    if method == "network":
        from .extform import network_optimum

        return network_optimum(spec, objective.x, objective.f)
    raise ValueError(f"unknown method {method!r}")


def dc_node_feasible(spec: SubstructureSpec, objective: LinearObjective, threshold,
                     method: str = "auto") -> bool:
    best = dc_node_optimum(spec, objective, method)
    return best is not None and best <= threshold


def subset_sum_brute_force(a: Sequence[int], b: int) -> bool:
    """Scan every sub-multiset of ``a`` (equal values are interchangeable)."""
    counts: dict = {}
    for v in a:
        counts[v] = counts.get(v, 0) + 1
    values = list(counts)
    for picks in itertools.product(*(range(counts[v] + 1) for v in values)):
        if sum(k * v for k, v in zip(picks, values)) == b:
            return True
    return False
