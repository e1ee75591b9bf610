"""Valid inequalities for the single-bus set and their separation.

Two families:

* partition cuts, indexed by a partition ``(J1, J2, J3)`` of the lines and
  valid when ``f_0 = 0``, all line bounds equal ``fbar`` and ``0 <= d < fbar``::

      sum_J1 (fbar-d)(fbar x_j + f_j) + sum_J2 (fbar-d) d x_j
        + sum_J3 d (fbar x_j - f_j) >= (fbar-d) d

* hull cuts, read off the duals of an elastic membership LP over the
  layered-network extended formulation. The LP minimises the l1 distance
  from the point to conv(S); a positive optimum yields a separating
  hyperplane whose violation equals that distance.

Node-space cuts are lifted to the network model through the orientation
signs stored on each substructure.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .extform import ExtendedFormulation, build_extended_formulation, build_layered_network
from .lp import INF, OPTIMAL, LinearProgram, LpBasis, LpError, solve_lp
from .numerics import format_rational
from .substructure import EnumerationCapError, SubstructureSpec

log = logging.getLogger(__name__)

PARTITION = "partition"
CGLP = "cglp"
FAMILIES = (PARTITION, CGLP)


class PremiseError(ValueError):
    """The partition family is not valid for this substructure."""


# ---------------------------------------------------------------------------
# partition cuts


@dataclass(frozen=True)
class PartitionCut:
    """One partition inequality; ``J*`` hold 1-based line indices."""

    J1: FrozenSet[int]
    J2: FrozenSet[int]
    J3: FrozenSet[int]
    fbar: Fraction
    d: Fraction
    spec: Optional[SubstructureSpec] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        parts = (set(self.J1), set(self.J2), set(self.J3))
        n = len(parts[0]) + len(parts[1]) + len(parts[2])
        if set().union(*parts) != set(range(1, n + 1)):
            raise ValueError("J1, J2, J3 must partition 1..n")
        if not 0 <= self.d < self.fbar:
            raise PremiseError("partition cuts need 0 <= d < fbar")

    @property
    def n(self) -> int:
        return len(self.J1) + len(self.J2) + len(self.J3)

    @property
    def rhs(self) -> Fraction:
        return (self.fbar - self.d) * self.d

    def coefficients(self) -> Tuple[List[Fraction], List[Fraction]]:
        """``(cx, cf)`` of the ``>=`` form, ``cf`` over lines ``1..n``."""
        fb, d = self.fbar, self.d
        cx = [Fraction(0)] * self.n
        cf = [Fraction(0)] * self.n
        for j in self.J1:
            cx[j - 1], cf[j - 1] = (fb - d) * fb, fb - d
        for j in self.J2:
            cx[j - 1] = (fb - d) * d
        for j in self.J3:
            cx[j - 1], cf[j - 1] = d * fb, -d
        return cx, cf


def evaluate_cut(cut: PartitionCut, x: Sequence, f: Sequence):
    """``lhs - rhs``; negative means violated.

    ``f`` holds the line flows, optionally preceded by the dispatch
    ``f_0`` (which has coefficient zero).
    """
    n = cut.n
    if len(x) != n or len(f) not in (n, n + 1):
        raise ValueError(f"dimension mismatch: cut has n={n}, got |x|={len(x)}, |f|={len(f)}")
    lines = list(f[1:]) if len(f) == n + 1 else list(f)
    cx, cf = cut.coefficients()
    lhs = sum(a * v for a, v in zip(cx, x)) + sum(a * v for a, v in zip(cf, lines))
    return lhs - cut.rhs


def _line_flows(spec: SubstructureSpec, f: Sequence) -> List:
    n = spec.n
    if len(f) == n + 1:
        return list(f[1:])
    if len(f) == n:
        return list(f)
    raise ValueError("dimension mismatch")


def _check_uniform(spec: SubstructureSpec) -> Fraction:
    if not spec.is_uniform:
        raise PremiseError("partition separation needs f0 = 0, a common line bound "
                           "and 0 <= d < fbar")
    return spec.line_bounds[0]


def partition_alphas(spec: SubstructureSpec, x: Sequence, f: Sequence):
    fb, d = _check_uniform(spec), spec.demand
    f = _line_flows(spec, f)
    return [((fb - d) * (fb * xj + fj), (fb - d) * d * xj, d * (fb * xj - fj))
            for xj, fj in zip(x, f)]


def separate_partition(spec: SubstructureSpec, x: Sequence, f: Sequence,
                       threshold=1e-6) -> Optional[PartitionCut]:
    """Most violated partition cut in linear time, or ``None``.

    Each line goes to the part with the smallest term; ties prefer J1,
    then J2.
    """
    if len(x) != spec.n:
        raise ValueError("dimension mismatch")
    alphas = partition_alphas(spec, x, f)
    J1, J2, J3 = set(), set(), set()
    total = 0
    for j, (a1, a2, a3) in enumerate(alphas, start=1):
        if a1 <= a2 and a1 <= a3:
            J1.add(j)
            total += a1
        elif a2 < a1 and a2 <= a3:
            J2.add(j)
            total += a2
        else:
            J3.add(j)
            total += a3
    rhs = (spec.line_bounds[0] - spec.demand) * spec.demand
    if not total < rhs - threshold:
        return None
    return PartitionCut(frozenset(J1), frozenset(J2), frozenset(J3),
                        spec.line_bounds[0], spec.demand, spec)


def brute_force_partition(spec: SubstructureSpec, x: Sequence, f: Sequence):
    """Scan all ``3^n`` partitions; returns ``(cut, violation)`` of the best.

    Per-line terms are read off the coefficients of the three single-part
    cuts and scaled to integers so the scan itself is integer addition;
    the winner is re-evaluated exactly. Ties keep the first labelling in
    lexicographic order (J1 < J2 < J3 per line).
    """
    fb = _check_uniform(spec)
    n = spec.n
    lines = _line_flows(spec, f)
    everything = frozenset(range(1, n + 1))
    empty = frozenset()
    table = []
    for parts in ((everything, empty, empty), (empty, everything, empty), (empty, empty, everything)):
        cx, cf = PartitionCut(*parts, fb, spec.demand).coefficients()
        table.append([Fraction(cx[j]) * Fraction(x[j]) + Fraction(cf[j]) * Fraction(lines[j])
                      for j in range(n)])
    L = 1
    for col in table:
        for v in col:
            L = L * v.denominator // math.gcd(L, v.denominator)
    scaled = [[int(table[k][j] * L) for k in range(3)] for j in range(n)]
    best_labels, best_sum = None, None
    for labels in itertools.product(range(3), repeat=n):
        total = sum(scaled[j][k] for j, k in enumerate(labels))
        if best_sum is None or total < best_sum:
            best_labels, best_sum = labels, total
    parts = [frozenset(j + 1 for j, k in enumerate(best_labels) if k == lab) for lab in range(3)]
    cut = PartitionCut(*parts, fb, spec.demand, spec)
    return cut, -evaluate_cut(cut, x, f)


def all_partition_cuts(spec: SubstructureSpec) -> Iterable[PartitionCut]:
    fb = _check_uniform(spec)
    for labels in itertools.product((1, 2, 3), repeat=spec.n):
        parts = [frozenset(j + 1 for j, lab in enumerate(labels) if lab == k) for k in (1, 2, 3)]
        yield PartitionCut(*parts, fb, spec.demand, spec)


def partition_polytope(spec: SubstructureSpec):
    """LP over the polytope cut out by the base rows and all ``3^n``
    partition inequalities: ``(lp, x_cols, f_cols)`` with ``f_cols[0]``
    the dispatch, fixed to zero.

    Base rows: ``0 <= x <= 1``, ``sum f = d`` and ``|f_j| <= fbar x_j``.
    """
    fb = _check_uniform(spec)
    n = spec.n
    lp = LinearProgram("min", "partition-polytope")
    x_cols = [lp.add_column(f"x[{j}]", 0, 1) for j in range(1, n + 1)]
    f_cols = [lp.add_column("f[0]", 0, 0)]
    f_cols += [lp.add_column(f"f[{j}]", -INF, INF) for j in range(1, n + 1)]
    lp.add_row("bal", {c: 1 for c in f_cols}, "=", spec.demand)
    for j in range(n):
        lp.add_row(f"up[{j + 1}]", {f_cols[j + 1]: 1, x_cols[j]: -fb}, "<=", 0)
        lp.add_row(f"lo[{j + 1}]", {f_cols[j + 1]: 1, x_cols[j]: fb}, ">=", 0)
    for k, cut in enumerate(all_partition_cuts(spec)):
        cx, cf = cut.coefficients()
        coefs = {x_cols[j]: cx[j] for j in range(n)}
        for j in range(n):
            if cf[j]:
                coefs[f_cols[j + 1]] = cf[j]
        lp.add_row(f"part[{k}]", coefs, ">=", cut.rhs)
    return lp, x_cols, f_cols


# ---------------------------------------------------------------------------
# hull cuts from the extended formulation


@dataclass(frozen=True)
class HullCut:
    """``pi_x . x + pi_f . f <= pi_0`` in node space, ``max|pi| = 1``.

    ``pi_f`` has length n+1 (index 0 is the dispatch).
    """

    pi_x: Tuple[float, ...]
    pi_f: Tuple[float, ...]
    pi_0: float
    violation: float

    def slack(self, x: Sequence, f: Sequence) -> float:
        lhs = sum(a * float(v) for a, v in zip(self.pi_x, x))
        lhs += sum(a * float(v) for a, v in zip(self.pi_f, f))
        return self.pi_0 - lhs


class _Cglp:
    """Elastic membership LP for one extended formulation, reused across points."""

    def __init__(self, ef: ExtendedFormulation):
        self.ef = ef
        n = ef.netw.n
        lp = LinearProgram("min", "cglp")
        for k in range(len(ef.y_cols)):
            lp.add_column(f"Y[{k}]", 0, INF)
        base = ef.lp
        y_index = {c: k for k, c in enumerate(ef.y_cols)}

        def y_part(row):
            return {y_index[c]: v for c, v in base.row_coefs[row].items() if c in y_index}

        self.src = lp.add_row("src", y_part(ef.src_row), "=", 1)
        for r in ef.flow_rows:
            lp.add_row(base.row_names[r], y_part(r), "=", 0)
        self.defx, self.deff = [], []
        for i, r in enumerate(ef.defx_rows, start=1):
            sp = lp.add_column(f"sx+[{i}]", 0, INF, 1)
            sm = lp.add_column(f"sx-[{i}]", 0, INF, 1)
            self.defx.append(lp.add_row(f"defx[{i}]", {**y_part(r), sp: 1, sm: -1}, "=", 1))
        for i, r in enumerate(ef.deff_rows):
            # deff in ``ef`` reads f_i - sum v Y = 0; here sum v Y + t+ - t- = f_i
            coefs = {k: -v for k, v in y_part(r).items()}
            tp = lp.add_column(f"sf+[{i}]", 0, INF, 1)
            tm = lp.add_column(f"sf-[{i}]", 0, INF, 1)
            self.deff.append(lp.add_row(f"deff[{i}]", {**coefs, tp: 1, tm: -1}, "=", 0))
        self.lp = lp
        self.basis: Optional[LpBasis] = None
        self.n = n

    def solve(self, x: Sequence, f: Sequence):
        lp = self.lp.copy()
        for i, r in enumerate(self.defx):
            lp.row_rhs[r] = 1 - float(x[i])
        for i, r in enumerate(self.deff):
            lp.row_rhs[r] = float(f[i])
        sol = solve_lp(lp, basis=self.basis)
        if sol.status != OPTIMAL:
            raise LpError(f"membership LP ended with status {sol.status}")
        self.basis = sol.basis
        return sol


def separate_cglp(ef: ExtendedFormulation, x: Sequence, f: Sequence,
                  threshold: float = 1e-6) -> Optional[HullCut]:
    """Separate ``(x, f)`` from conv(S), or ``None`` if it is (nearly) inside.

    ``f`` has length n+1. Raises :class:`LpError` on numerical failure.
    """
    n = ef.netw.n
    if len(x) != n or len(f) != n + 1:
        raise ValueError("dimension mismatch")
    if not ef.netw.arcs:
        raise ValueError("substructure is empty; nothing to separate against")
    cg = getattr(ef, "_cglp", None)
    if cg is None:
        cg = _Cglp(ef)
        ef._cglp = cg
    sol = cg.solve(x, f)
    if sol.objective <= threshold:
        return None
    y = sol.duals
    pi_x = np.array([-y[r] for r in cg.defx])
    pi_f = np.array([y[r] for r in cg.deff])
    pi_0 = -y[cg.src] - sum(y[r] for r in cg.defx)
    scale = max(np.abs(pi_x).max(initial=0.0), np.abs(pi_f).max(initial=0.0))
    if scale <= 1e-12:
        raise LpError("membership LP returned a zero certificate")
    pi_x, pi_f, pi_0 = pi_x / scale, pi_f / scale, pi_0 / scale
    # drop LP noise; relax pi_0 by the most a dropped term can contribute
    spec = ef.netw.spec
    fmax = [float(max(abs(spec.lower(j)), abs(spec.upper(j)))) for j in range(n + 1)]
    tiny_x, tiny_f = np.abs(pi_x) < 1e-12, np.abs(pi_f) < 1e-12
    pi_0 += float(np.abs(pi_x[tiny_x]).sum() + (np.abs(pi_f) * fmax)[tiny_f].sum())
    pi_x[tiny_x], pi_f[tiny_f] = 0.0, 0.0
    viol = float(pi_x @ np.asarray(x, float) + pi_f @ np.asarray(f, float) - pi_0)
    if viol <= threshold:
        return None
    return HullCut(tuple(float(v) for v in pi_x), tuple(float(v) for v in pi_f),
                   float(pi_0), viol)


# ---------------------------------------------------------------------------
# global cuts and the pool


@dataclass(frozen=True)
class GlobalCut:
    """``sum coefs[j] * z_j <= rhs`` over columns of the network model."""

    coefs: Tuple[Tuple[int, float], ...]
    rhs: float
    family: str
    bus: int
    violation: float = 0.0
    parts: Optional[Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]] = None

    def slack(self, z: Sequence) -> float:
        return self.rhs - sum(a * float(z[j]) for j, a in self.coefs)

    def key(self):
        scale = max(abs(a) for _, a in self.coefs) if self.coefs else 1.0
        scale = scale or 1.0
        return (tuple((j, round(a / scale, 9)) for j, a in sorted(self.coefs)),
                round(self.rhs / scale, 9))

    def dump(self) -> str:
        if self.parts is None:
            parts = "J1=- J2=- J3=-"
        else:
            parts = " ".join(f"J{k}=" + ",".join(str(v) for v in p)
                             for k, p in enumerate(self.parts, start=1))
        return f"bus={self.bus} family={self.family} {parts} viol={self.violation:.6g}"


@dataclass
class CutPoolConfig:
    rounds: int = 5
    families: FrozenSet[str] = frozenset({PARTITION})
    per_round_cap: int = 1000
    violation_threshold: float = 1e-6
    max_arcs: int = 20000  # skip hull separation above this network size

    def __post_init__(self):
        self.families = frozenset(self.families)
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        unknown = self.families - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown cut families {sorted(unknown)}")


class CutPool:
    """Append-only store with duplicate suppression."""

    def __init__(self):
        self.cuts: List[GlobalCut] = []
        self._keys: Set = set()

    def add(self, cut: GlobalCut) -> bool:
        k = cut.key()
        if k in self._keys:
            return False
        self._keys.add(k)
        self.cuts.append(cut)
        return True

    def __len__(self) -> int:
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def violated_by(self, z: Sequence, tol: float) -> List[GlobalCut]:
        return [c for c in self.cuts if c.slack(z) < -tol]

    def dump(self) -> str:
        return "".join(c.dump() + "\n" for c in self.cuts)


def bus_substructure(model, bus: int) -> SubstructureSpec:
    from .substructure import extract_substructures

    cache = getattr(model, "_specs", None)
    if cache is None:
        cache = {s.origin.bus: s for s in extract_substructures(model.net)}
        model._specs = cache
    return cache[bus]


def _node_point(model, spec: SubstructureSpec, z: Sequence):
    origin = spec.origin
    x = [float(z[model.status[lid]]) for lid in origin.line_ids]
    f_lines = [s * float(z[model.flow[lid]]) for s, lid in zip(origin.signs, origin.line_ids)]
    gens = [model.dispatch[k] for k, g in enumerate(model.net.generators) if g.bus == origin.bus]
    f0 = sum(float(z[j]) for j in gens)
    if origin.negated:
        f0 = -f0
    return x, [f0] + f_lines, gens


def _lift(model, spec, gens, cx, cf, rhs, sense_ge: bool):
    """Map node coefficients to model columns; the result is in ``<=`` form."""
    origin = spec.origin
    sign = -1.0 if sense_ge else 1.0
    coefs: Dict[int, float] = {}

    def add(j, v):
        if v != 0:
            coefs[j] = coefs.get(j, 0.0) + sign * float(v)

    for k, lid in enumerate(origin.line_ids):
        add(model.status[lid], cx[k])
        add(model.flow[lid], cf[k + 1] * origin.signs[k])
    if cf[0] != 0:
        for j in gens:
            add(j, cf[0] * (-1 if origin.negated else 1))
    coefs = {j: v for j, v in coefs.items() if v != 0}
    return tuple(sorted(coefs.items())), sign * float(rhs)


def _extended_formulation(model, bus: int, spec: SubstructureSpec, max_arcs: int):
    cache = getattr(model, "_efs", None)
    if cache is None:
        cache = {}
        model._efs = cache
    if bus not in cache:
        try:
            netw = build_layered_network(spec)
        except (EnumerationCapError, ValueError) as exc:
            log.info("bus %s: hull separation skipped (%s)", bus, exc)
            cache[bus] = None
        else:
            if len(netw.arcs) > max_arcs or not netw.arcs:
                log.info("bus %s: hull separation skipped (%d arcs)", bus, len(netw.arcs))
                cache[bus] = None
            else:
                cache[bus] = build_extended_formulation(netw)
    return cache[bus]


def apply_cuts_to_bus(model, bus: int, point: Sequence, config: CutPoolConfig) -> List[GlobalCut]:
    """Separate the LP point ``point`` (values of model columns) at ``bus``.

    Partition cuts are tried only at buses without generators, after
    relaxing all line bounds to their maximum and flipping the sign of a
    negative demand. Hull cuts use the exact substructure.
    """
    spec = bus_substructure(model, bus)
    out: List[GlobalCut] = []
    thr = config.violation_threshold
    if PARTITION in config.families:
        cut = _partition_at_bus(model, bus, spec, point, thr)
        if cut is not None:
            out.append(cut)
    if CGLP in config.families and spec.n >= 1:
        ef = _extended_formulation(model, bus, spec, config.max_arcs)
        if ef is not None:
            x, f, gens = _node_point(model, spec, point)
            hc = separate_cglp(ef, x, f, thr)
            if hc is not None:
                coefs, rhs = _lift(model, spec, gens, hc.pi_x, hc.pi_f, hc.pi_0, False)
                out.append(GlobalCut(coefs, rhs, CGLP, bus, hc.violation))
    return out


def _partition_at_bus(model, bus, spec, point, thr) -> Optional[GlobalCut]:
    if spec.f0_lower != 0 or spec.f0_upper != 0 or model.net.generators_at(bus):
        log.debug("bus %s: partition family skipped (generator present)", bus)
        return None
    if spec.n == 0:
        return None
    work = spec.negated() if spec.demand < 0 else spec
    fbar = max(work.line_bounds)
    relaxed = SubstructureSpec(work.demand, 0, 0, (fbar,) * work.n, work.origin)
    if not relaxed.is_uniform:
        log.info("bus %s: partition family skipped (need 0 <= d < fbar, d=%s fbar=%s)",
                 bus, format_rational(relaxed.demand), format_rational(fbar))
        return None
    x, f, gens = _node_point(model, relaxed, point)
    cut = separate_partition(relaxed, x, f, thr)
    if cut is None:
        return None
    viol = -float(evaluate_cut(cut, x, f))
    cx, cf = cut.coefficients()
    coefs, rhs = _lift(model, relaxed, gens, cx, [0] + cf, cut.rhs, True)
    lid = relaxed.origin.line_ids
    parts = tuple(tuple(sorted(lid[j - 1] for j in J)) for J in (cut.J1, cut.J2, cut.J3))
    return GlobalCut(coefs, rhs, PARTITION, bus, viol, parts)
