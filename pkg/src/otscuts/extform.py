"""Layered-network extended formulation of conv(S) and its outer relaxation.

Layer ``i`` of the network fixes ``f_i``. A node records the demand served
so far (``delta``, kept symbolic in ``d``) and whether some earlier
coordinate was chosen as the interior one. Source-to-sink paths are in
bijection with the extreme points of conv(S), so flow over the network
projects onto the hull.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .lp import INF, LinearProgram, LpSolution, solve_lp
from .numerics import AffineInD, format_rational
from .polytope import exact_vertices
from .substructure import (EnumerationCapError, SubstructureSpec, ValueSets,
                           _scaled_value_sets, compute_value_sets)

ZERO = AffineInD(Fraction(0), 0)


@dataclass(frozen=True, order=True)
class LayeredNode:
    layer: int
    delta: AffineInD
    tag: Optional[int] = None

    @property
    def has_interior(self) -> bool:
        # an interior value is the only way a d-term enters delta
        return self.delta.d_coefficient != 0

    def label(self) -> str:
        tag = "-" if self.tag is None else str(self.tag)
        if self.tag is None and self.has_interior:
            tag = "*"
        return f"({self.layer},{self.delta},{tag})"


@dataclass(frozen=True)
class Arc:
    """``unchanged`` arcs keep both delta and tag; they encode ``x_i = 0``."""

    tail: LayeredNode
    head: LayeredNode
    value: Fraction
    interior: bool
    unchanged: bool

    @property
    def layer(self) -> int:
        return self.head.layer


@dataclass
class LayeredNetwork:
    spec: SubstructureSpec
    layers: Tuple[Tuple[LayeredNode, ...], ...]  # K_{-1}, K_0, ..., K_n
    arcs: Tuple[Arc, ...]
    lower_bounds: Tuple[Fraction, ...]
    upper_bounds: Tuple[Fraction, ...]
    value_sets: ValueSets
    raw_node_count: int
    node_identity: str = "emptiness"

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def source(self) -> LayeredNode:
        return self.layers[0][0]

    def nodes(self, layer: int) -> Tuple[LayeredNode, ...]:
        return self.layers[layer + 1]

    @property
    def node_count(self) -> int:
        """Nodes in layers 0..n (the source is not counted)."""
        return sum(len(k) for k in self.layers[1:])

    def out_arcs(self) -> Dict[LayeredNode, List[Arc]]:
        out: Dict[LayeredNode, List[Arc]] = {}
        for a in self.arcs:
            out.setdefault(a.tail, []).append(a)
        return out

    def paths(self) -> Iterator[Tuple[Arc, ...]]:
        out = self.out_arcs()
        stack: List[Tuple[LayeredNode, Tuple[Arc, ...]]] = [(self.source, ())]
        while stack:
            node, path = stack.pop()
            if node.layer == self.n:
                yield path
                continue
            for a in reversed(out.get(node, [])):
                stack.append((a.head, path + (a,)))

    def path_point(self, path: Sequence[Arc]) -> Tuple[Tuple[int, ...], Tuple[Fraction, ...]]:
        f = tuple(a.value for a in path)
        x = tuple(0 if a.unchanged else 1 for a in path[1:])
        return x, f

    def to_dot(self) -> str:
        ids = {}
        lines = ["digraph layered {", "  rankdir=LR;"]
        for layer in self.layers:
            for node in layer:
                ids[node] = f"n{len(ids)}"
                lines.append(f'  {ids[node]} [label="{node.label()}"];')
        for a in self.arcs:
            style = ", style=dashed" if a.unchanged else ""
            lines.append(f'  {ids[a.tail]} -> {ids[a.head]} '
                         f'[label="{format_rational(a.value)}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def layer_bounds(spec: SubstructureSpec):
    """Forward bounds on the demand served after layers ``0..i``."""
    n = spec.n
    lo = [spec.lower(j) for j in range(n + 1)]
    hi = [spec.upper(j) for j in range(n + 1)]
    d = spec.demand
    lower, upper = [], []
    for i in range(n + 1):
        lower.append(max(sum(lo[:i + 1], Fraction(0)), d - sum(hi[i + 1:], Fraction(0))))
        upper.append(min(sum(hi[:i + 1], Fraction(0)), d - sum(lo[i + 1:], Fraction(0))))
    return tuple(lower), tuple(upper)


def _scaled_layer_bounds(lo: List[int], hi: List[int], dL: int):
    """:func:`layer_bounds` on integer-scaled data."""
    m = len(lo)
    pre_lo, pre_hi = list(itertools.accumulate(lo)), list(itertools.accumulate(hi))
    tot_lo, tot_hi = pre_lo[-1], pre_hi[-1]
    lower = [max(pre_lo[i], dL - (tot_hi - pre_hi[i])) for i in range(m)]
    upper = [min(pre_hi[i], dL - (tot_lo - pre_lo[i])) for i in range(m)]
    return lower, upper


def _raw_network(spec: SubstructureSpec, value_cap: int, node_identity: str):
    """Integer-scaled construction shared by the builders below.

    Returns ``(L, E, V, layers, arcs, raw_count)``: ``layers[i]`` maps a raw
    node ``(delta constant, d coefficient, tag)`` of layer ``i-1`` to its
    index and ``arcs[i]`` lists surviving ``(tail, head, value, interior)``
    into layer ``i``, all values in units of ``1/L``.
    """
    if node_identity not in ("emptiness", "index"):
        raise ValueError(f"unknown node identity {node_identity!r}")
    if any(v == 0 for v in spec.line_bounds):
        raise ValueError("zero line bound: the line can carry no flow and should be removed")
    L, E, V = _scaled_value_sets(spec, value_cap)
    n = spec.n
    dL = int(spec.demand * L)
    lo_s, up_s = _scaled_layer_bounds([e[0] for e in E], [e[-1] for e in E], dL)
    layers: List[Dict[tuple, int]] = [{(0, 0, None): 0}]
    raw_arcs: List[List[tuple]] = []
    for i in range(n + 1):
        ends = (E[i][0], E[i][-1])
        interior = [v for v in V[i] if v not in ends]
        nxt: Dict[tuple, int] = {}
        arcs_i = []
        for node, t in layers[-1].items():
            c, k, tag = node
            base = c + k * dL
            for e in E[i]:
                if lo_s[i] <= base + e <= up_s[i]:
                    h = nxt.setdefault((c + e, k, tag), len(nxt))
                    arcs_i.append((t, h, e, False))
            if k:
                continue
            for v in interior:
                if lo_s[i] <= base + v <= up_s[i]:
                    head = (c + v - dL, 1, i if node_identity == "index" else None)
                    h = nxt.setdefault(head, len(nxt))
                    arcs_i.append((t, h, v, True))
        layers.append(nxt)
        raw_arcs.append(arcs_i)
    raw = sum(len(k) for k in layers[1:])

    alive = [set() for _ in layers]
    alive[-1] = {h for (c, k, _), h in layers[-1].items() if c + k * dL == dL}
    kept: List[List[tuple]] = [[] for _ in raw_arcs]
    for i in range(n, -1, -1):
        for arc in raw_arcs[i]:
            if arc[1] in alive[i + 1]:
                alive[i].add(arc[0])
                kept[i].append(arc)
        kept[i].sort()
    if 0 not in alive[0]:
        alive = [{0}] + [set() for _ in layers[1:]]
        kept = [[] for _ in raw_arcs]
    layers = [{node: h for node, h in layer.items() if h in alive[i]}
              for i, layer in enumerate(layers)]
    return L, E, V, layers, kept, raw


def build_layered_network(spec: SubstructureSpec, value_cap: int = 10**6,
                          node_identity: str = "emptiness") -> LayeredNetwork:
    """Forward construction with bound pruning, then backward dead-end pruning.

    ``node_identity="emptiness"`` merges nodes that only differ in which
    coordinate was interior; ``"index"`` keeps the index in the tag.
    Construction runs on integers in units of the common denominator.
    """
    L, E, V, layers, kept, raw = _raw_network(spec, value_cap, node_identity)
    values: Dict[int, Fraction] = {}

    def frac(v):
        if v not in values:
            values[v] = Fraction(v, L)
        return values[v]

    objs: List[Dict[int, LayeredNode]] = [
        {h: LayeredNode(i - 1, AffineInD(frac(c), k), tag) for (c, k, tag), h in layer.items()}
        for i, layer in enumerate(layers)]
    arcs = [Arc(objs[i][t], objs[i + 1][h], frac(v), interior, not interior and v == 0)
            for i in range(spec.n + 1) for (t, h, v, interior) in kept[i]]
    pruned = tuple(tuple(objs[i][h] for h in sorted(objs[i])) for i in range(len(layers)))
    vsets = ValueSets(tuple(tuple(frac(e) for e in Ej) for Ej in E),
                      tuple(tuple(frac(v) for v in Vk) for Vk in V))
    lower, upper = layer_bounds(spec)
    return LayeredNetwork(spec, pruned, tuple(arcs), lower, upper, vsets, raw, node_identity)


def network_optimum(spec: SubstructureSpec, cx: Sequence, cf: Sequence,
                    sense: str = "min", value_cap: int = 10**6):
    """Optimum over conv(S) by a shortest path on the integer-scaled network.

    Same answer as :func:`optimize_over_network` but fused into one forward
    pass over ``(delta constant, d coefficient)`` states: dead ends never
    reach a sink state, so no backward pruning or arc objects are needed.
    Returns ``None`` when S is empty.
    """
    if any(v == 0 for v in spec.line_bounds):
        raise ValueError("zero line bound: the line can carry no flow and should be removed")
    L, E, V = _scaled_value_sets(spec, value_cap)
    dL = int(spec.demand * L)
    lo_s, up_s = _scaled_layer_bounds([e[0] for e in E], [e[-1] for e in E], dL)
    cx = [Fraction(v) for v in cx]
    cf = [Fraction(v) for v in cf]
    M = 1
    for v in cx + cf:
        M = M * v.denominator // math.gcd(M, v.denominator)
    sign = 1 if sense == "min" else -1
    # costs in units of 1/(L*M)
    ax = [0] + [sign * int(v * M) * L for v in cx]
    af = [sign * int(v * M) for v in cf]
    best: Dict[tuple, int] = {(0, 0): 0}
    for i in range(spec.n + 1):
        lo, up, a_i, x_i = lo_s[i], up_s[i], af[i], ax[i]
        ends = (E[i][0], E[i][-1])
        moves = [(e, a_i * e + (x_i if e else 0)) for e in E[i]]
        inner = [(v, a_i * v + x_i) for v in V[i] if v not in ends]
        nxt: Dict[tuple, int] = {}
        for (c, k), cost in best.items():
            base = c + k * dL
            for e, w in moves:
                if lo <= base + e <= up:
                    key = (c + e, k)
                    val = cost + w
                    old = nxt.get(key)
                    if old is None or val < old:
                        nxt[key] = val
            if k:
                continue
            for v, w in inner:
                if lo <= base + v <= up:
                    key = (c + v - dL, 1)
                    val = cost + w
                    old = nxt.get(key)
                    if old is None or val < old:
                        nxt[key] = val
        best = nxt
    final = [cost for (c, k), cost in best.items() if c + k * dL == dL]
    if not final:
        return None
    return sign * Fraction(min(final), L * M)


# ---------------------------------------------------------------------------
# extended formulation


@dataclass
class ExtendedFormulation:
    """LP over arc flows ``Y`` with linking columns ``x`` and ``f``.

    Rows: ``src`` (unit outflow), ``flow[i,k]`` (conservation at node ``k``
    of layer ``i``), ``defx[i]`` and ``deff[i]`` defining the projections.
    """

    netw: LayeredNetwork
    lp: LinearProgram
    y_cols: List[int]
    x_cols: List[int]   # index i-1 holds x_i
    f_cols: List[int]   # index i holds f_i
    src_row: int
    flow_rows: List[int]
    defx_rows: List[int]
    deff_rows: List[int]

    def optimize(self, cx: Sequence, cf: Sequence, mode: str = "float",
                 sense: str = "min", **kw) -> LpSolution:
        lp = self.lp.copy()
        lp.sense = sense
        coefs = {c: v for c, v in zip(self.x_cols, cx) if v != 0}
        for c, v in zip(self.f_cols, cf):
            if v != 0:
                coefs[c] = coefs.get(c, 0) + v
        lp.set_objective(coefs)
        kw.setdefault("exact_column_cap", max(60, lp.num_cols))
        return solve_lp(lp, mode, **kw)


def build_extended_formulation(netw: LayeredNetwork) -> ExtendedFormulation:
    n = netw.n
    lp = LinearProgram("min", "extended-formulation")
    y_cols = [lp.add_column(f"Y[{k}]", 0, INF) for k in range(len(netw.arcs))]
    x_cols = [lp.add_column(f"x[{i}]", 0, 1) for i in range(1, n + 1)]
    f_cols = [lp.add_column(f"f[{i}]", -INF, INF) for i in range(n + 1)]

    src = {y: 1 for y, a in zip(y_cols, netw.arcs) if a.tail == netw.source}
    src_row = lp.add_row("src", src, "=", 1)

    inflow: Dict[LayeredNode, Dict[int, int]] = {}
    for y, a in zip(y_cols, netw.arcs):
        inflow.setdefault(a.head, {})[y] = 1
    for y, a in zip(y_cols, netw.arcs):
        if a.tail != netw.source:
            inflow.setdefault(a.tail, {})[y] = -1
    flow_rows = []
    for i in range(0, n):
        for k, node in enumerate(netw.nodes(i)):
            flow_rows.append(lp.add_row(f"flow[{i},{k}]", inflow.get(node, {}), "=", 0))

    defx_rows = []
    for i in range(1, n + 1):
        coefs = {x_cols[i - 1]: 1}
        for y, a in zip(y_cols, netw.arcs):
            if a.layer == i and a.unchanged:
                coefs[y] = 1
        defx_rows.append(lp.add_row(f"defx[{i}]", coefs, "=", 1))
    deff_rows = []
    for i in range(n + 1):
        coefs = {f_cols[i]: 1}
        for y, a in zip(y_cols, netw.arcs):
            if a.layer == i and a.value != 0:
                coefs[y] = -a.value
        deff_rows.append(lp.add_row(f"deff[{i}]", coefs, "=", 0))
    return ExtendedFormulation(netw, lp, y_cols, x_cols, f_cols, src_row, flow_rows,
                               defx_rows, deff_rows)


# ---------------------------------------------------------------------------
# outer approximation


@dataclass
class OuterApproximation:
    """Hull of the union over ``k`` of the sets where ``f_k`` is interior.

    One copy ``(x^k, f^k, lambda_k)`` per nonempty ``V_k``; the copies sum
    to the aggregate ``(x, f)`` columns.
    """

    spec: SubstructureSpec
    lp: LinearProgram
    x_cols: List[int]
    f_cols: List[int]
    disjuncts: List[int] = field(default_factory=list)

    def optimize(self, cx: Sequence, cf: Sequence, mode: str = "float",
                 sense: str = "min", **kw) -> LpSolution:
        lp = self.lp.copy()
        lp.sense = sense
        coefs = {c: v for c, v in zip(self.x_cols, cx) if v != 0}
        for c, v in zip(self.f_cols, cf):
            if v != 0:
                coefs[c] = coefs.get(c, 0) + v
        lp.set_objective(coefs)
        kw.setdefault("exact_column_cap", max(60, lp.num_cols))
        return solve_lp(lp, mode, **kw)


def build_outer_approximation(spec: SubstructureSpec,
                              vsets: Optional[ValueSets] = None) -> OuterApproximation:
    vsets = vsets or compute_value_sets(spec)
    n, d = spec.n, spec.demand
    ks = [k for k in range(n + 1) if vsets.V[k]]
    if not ks:
        raise ValueError("every value set is empty; S has no point with an interior coordinate")
    lp = LinearProgram("min", "outer-approximation")
    x_cols = [lp.add_column(f"x[{i}]", 0, 1) for i in range(1, n + 1)]
    f_cols = [lp.add_column(f"f[{i}]", -INF, INF) for i in range(n + 1)]
    agg_x = {i: {x_cols[i - 1]: 1} for i in range(1, n + 1)}
    agg_f = {i: {f_cols[i]: 1} for i in range(n + 1)}
    lam_all = {}
    for k in ks:
        lam = lp.add_column(f"lam[{k}]", 0, 1)
        lam_all[lam] = 1
        xk = {i: lp.add_column(f"x[{k}][{i}]", 0, 1) for i in range(1, n + 1)}
        fk = {i: lp.add_column(f"f[{k}][{i}]", -INF, INF) for i in range(n + 1)}
        lp.add_row(f"bal[{k}]", {**{fk[i]: 1 for i in fk}, lam: -d}, "=", 0)
        for j in range(n + 1):
            xj = lam if j == 0 else xk[j]
            if j == 0:
                lp.add_row(f"lo[{k}][0]", {fk[0]: 1, lam: -spec.lower(0)}, ">=", 0)
                lp.add_row(f"up[{k}][0]", {fk[0]: 1, lam: -spec.upper(0)}, "<=", 0)
            else:
                lp.add_row(f"lo[{k}][{j}]", {fk[j]: 1, xj: -spec.lower(j)}, ">=", 0)
                lp.add_row(f"up[{k}][{j}]", {fk[j]: 1, xj: -spec.upper(j)}, "<=", 0)
                lp.add_row(f"xub[{k}][{j}]", {xj: 1, lam: -1}, "<=", 0)
        vlo, vhi = min(vsets.V[k]), max(vsets.V[k])
        lp.add_row(f"vlo[{k}]", {fk[k]: 1, lam: -vlo}, ">=", 0)
        lp.add_row(f"vhi[{k}]", {fk[k]: 1, lam: -vhi}, "<=", 0)
        if k >= 1:
            lp.add_row(f"on[{k}]", {xk[k]: 1, lam: -1}, "=", 0)
        for i in range(1, n + 1):
            agg_x[i][xk[i]] = -1
        for i in range(n + 1):
            agg_f[i][fk[i]] = -1
    lp.add_row("convex", lam_all, "=", 1)
    for i in range(1, n + 1):
        lp.add_row(f"aggx[{i}]", agg_x[i], "=", 0)
    for i in range(n + 1):
        lp.add_row(f"aggf[{i}]", agg_f[i], "=", 0)
    return OuterApproximation(spec, lp, x_cols, f_cols, ks)


# ---------------------------------------------------------------------------
# integrality of the aggregated polytope


@dataclass
class Lemma7Report:
    m: int
    fbar: Fraction
    d_prime: Fraction
    premise_holds: bool
    vertices: List[Tuple[Fraction, ...]]
    fractional: List[Tuple[Fraction, ...]]

    @property
    def integral(self) -> bool:
        return not self.fractional

    def summary(self) -> str:
        verdict = "integral in x" if self.integral else "integrality fails"
        premise = "premise holds" if self.premise_holds else "premise violated"
        return (f"m={self.m} fbar={format_rational(self.fbar)} "
                f"d'={format_rational(self.d_prime)}: {premise}, {verdict} "
                f"({len(self.vertices)} vertices, {len(self.fractional)} fractional)")


def check_lemma7_integrality(m: int, fbar, kappa=None, d_prime=None,
                             cap: int = 6) -> Lemma7Report:
    """Vertices of ``{(x, f) in [0,1]^m x R^m : d'-fbar <= sum f <= d',
    -fbar x_j <= f_j <= fbar x_j}`` and whether all have binary ``x``.

    Pass ``kappa`` (``d' = kappa * fbar``) or ``d_prime`` directly; the
    latter allows negative controls with non-integral ``d'/fbar``.
    """
    if m > cap:
        raise EnumerationCapError(f"m = {m} exceeds the vertex enumeration cap {cap}")
    fbar = Fraction(fbar)
    if (kappa is None) == (d_prime is None):
        raise ValueError("give exactly one of kappa and d_prime")
    d_prime = Fraction(kappa) * fbar if d_prime is None else Fraction(d_prime)
    ratio = d_prime / fbar
    premise = ratio.denominator == 1 and -m + 1 <= ratio <= m
    dim = 2 * m
    A, b = [], []

    def row(xc=None, fc=None, rhs=0):
        r = [Fraction(0)] * dim
        for j, v in (xc or {}).items():
            r[j] = Fraction(v)
        for j, v in (fc or {}).items():
            r[m + j] = Fraction(v)
        A.append(r)
        b.append(Fraction(rhs))

    for j in range(m):
        row({j: 1}, rhs=1)
        row({j: -1}, rhs=0)
        row({j: -fbar}, {j: 1})
        row({j: -fbar}, {j: -1})
    row(fc={j: 1 for j in range(m)}, rhs=d_prime)
    row(fc={j: -1 for j in range(m)}, rhs=fbar - d_prime)
    verts = exact_vertices(A, b)
    frac = [v for v in verts if any(c.denominator != 1 for c in v[:m])]
    return Lemma7Report(m, fbar, d_prime, premise, verts, frac)


def optimize_over_network(netw: LayeredNetwork, cx: Sequence, cf: Sequence,
                          sense: str = "min"):
    """Exact optimum of ``cx.x + cf.f`` over source-to-sink paths.

    Paths correspond one-to-one to extreme points, so this equals the
    optimum over conv(S). Returns ``None`` when S is empty.
    """
    if not netw.arcs:
        return None
    sign = 1 if sense == "min" else -1
    cx = [sign * Fraction(v) for v in cx]
    cf = [sign * Fraction(v) for v in cf]
    # nodes are shared objects, so identity is a cheap key
    best = {id(netw.source): Fraction(0)}
    for a in netw.arcs:  # stored layer by layer
        t = best.get(id(a.tail))
        if t is None:
            continue
        v = t + cf[a.layer] * a.value if a.value else t
        if a.layer >= 1 and not a.unchanged:
            v += cx[a.layer - 1]
        h = id(a.head)
        old = best.get(h)
        if old is None or v < old:
            best[h] = v
    sinks = [best[id(v)] for v in netw.nodes(netw.n) if id(v) in best]
    return sign * min(sinks) if sinks else None
