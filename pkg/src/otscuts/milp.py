"""Branch-and-bound for DC-OTS with root-node cut rounds.

The LP relaxation of the big-M model is tightened at the root by a fixed
number of separation rounds, then explored best-first. Integer nodes are
turned into incumbents by re-solving the model with the statuses fixed,
so incumbents satisfy the flow equations exactly up to LP tolerance.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cuts import CGLP, PARTITION, CutPool, CutPoolConfig, GlobalCut, apply_cuts_to_bus
from .lp import INFEASIBLE, OPTIMAL, LpBasis, LpError, solve_lp
from .network import TWO_PI, OtsModel, PowerNetwork, build_ots_milp
from .numerics import DEFAULT_TOLERANCES, TolerancePolicy

log = logging.getLogger(__name__)

RESULT_SCHEMA = "ots-result-v1"

SETTINGS = {
    "plain": frozenset(),
    "cuts-hull": frozenset({CGLP}),
    "cuts-partition": frozenset({PARTITION}),
    "cuts-both": frozenset({CGLP, PARTITION}),
}
BRANCHING = ("most-fractional", "pseudo-cost")

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_TIME_LIMIT = "time-limit"
STATUS_NODE_LIMIT = "node-limit"


class CapError(RuntimeError):
    """Instance too large for the exhaustive oracle."""


@dataclass
class SolveConfig:
    setting: str = "plain"
    cut_config: CutPoolConfig = field(default_factory=CutPoolConfig)
    time_limit_s: float = 3600.0
    rel_gap: float = 1e-3
    branching: str = "most-fractional"
    node_limit: int = 1_000_000
    tree_cuts: bool = False
    heuristic_every: int = 20
    angle_bound: Fraction = TWO_PI
    segments: int = 16
    tolerances: TolerancePolicy = DEFAULT_TOLERANCES

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; choose from {sorted(SETTINGS)}")
        if self.branching not in BRANCHING:
            raise ValueError(f"unknown branching rule {self.branching!r}")
        if self.time_limit_s <= 0 or self.rel_gap < 0 or self.node_limit < 1:
            raise ValueError("time_limit_s and node_limit must be positive, rel_gap >= 0")

    @property
    def families(self) -> frozenset:
        return SETTINGS[self.setting]


@dataclass
class SolveStats:
    status: str = STATUS_OPTIMAL
    opt_time_s: float = 0.0
    sep_time_s: float = 0.0
    total_time_s: float = 0.0
    nodes: int = 0
    cuts_added: int = 0
    root_lp: Optional[float] = None
    root_lp_after_cuts: Optional[float] = None
    best_bound: Optional[float] = None
    best_incumbent: Optional[float] = None
    gap_closed_pct: Optional[float] = None
    root_rounds: int = 0
    separation_nodes: int = 0
    incumbents_checked: int = 0
    cut_violations: int = 0
    round_log: List[str] = field(default_factory=list)

    @property
    def unsolved(self) -> bool:
        return self.status in (STATUS_TIME_LIMIT, STATUS_NODE_LIMIT)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["unsolved"] = self.unsolved
        return d


@dataclass
class Incumbent:
    x: Dict[int, int]
    dispatch: List[float]
    flows: Dict[int, float]
    angles: Dict[int, float]
    objective: float
    values: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"x": {str(k): v for k, v in self.x.items()},
                "dispatch": list(self.dispatch),
                "flows": {str(k): v for k, v in self.flows.items()},
                "angles": {str(k): v for k, v in self.angles.items()},
                "objective": self.objective}


def gap_closed(ub, lp, lp_after) -> Optional[float]:
    """Share of the root gap ``ub - lp`` removed by cuts, in percent.

    ``None`` (reported as n/a) when the gap is not positive. Bound moves
    and gaps below ``1e-9`` relative to the objective scale are solver
    round-off and count as zero.
    """
    if ub is None or lp is None or lp_after is None:
        return None
    scale = 1e-9 * max(1.0, abs(ub), abs(lp))
    if ub - lp <= scale:
        return None
    moved = lp_after - lp
    if abs(moved) <= scale:
        moved = 0.0
    return 100.0 * moved / (ub - lp)


def _incumbent(model: OtsModel, x: Dict[int, int], values) -> Incumbent:
    values = np.asarray(values, dtype=float)
    return Incumbent(
        dict(x),
        [float(values[j]) for j in model.dispatch],
        {lid: float(values[j]) for lid, j in model.flow.items()},
        {bid: float(values[j]) for bid, j in model.theta.items()},
        0.0, values)


def solve_fixed(model: OtsModel, x: Dict[int, int], basis=None):
    """LP of the model with all statuses fixed; ``(Incumbent|None, solution)``."""
    lower, upper = model.fixed_bounds(x)
    sol = solve_lp(model.lp, lower=lower, upper=upper, basis=basis)
    if sol.status != OPTIMAL:
        return None, sol
    inc = _incumbent(model, x, sol.x)
    inc.objective = float(sol.objective)
    return inc, sol


def exhaustive_ots(net: PowerNetwork, cap: int = 12, angle_bound=TWO_PI,
                   segments: int = 16) -> Optional[Incumbent]:
    """Best switching over all ``2^|L|`` status vectors (``None`` if all are infeasible)."""
    if len(net.lines) > cap:
        raise CapError(f"|L| = {len(net.lines)} exceeds the exhaustive cap {cap}")
    model = build_ots_milp(net, angle_bound, segments)
    best = None
    basis = None
    ids = [ln.id for ln in net.lines]
    for bits in itertools.product((1, 0), repeat=len(ids)):
        inc, sol = solve_fixed(model, dict(zip(ids, bits)), basis)
        if inc is None:
            continue
        basis = sol.basis
        if best is None or inc.objective < best.objective - 1e-12:
            best = inc
    return best


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixes: Dict[int, int] = field(compare=False)
    basis: Optional[LpBasis] = field(compare=False, default=None)
    branch: Optional[Tuple[int, int, float, float]] = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


class _PseudoCosts:
    def __init__(self):
        self.sum = {}
        self.cnt = {}

    def update(self, lid, direction, frac_move, gain):
        if frac_move <= 1e-9:
            return
        key = (lid, direction)
        self.sum[key] = self.sum.get(key, 0.0) + max(gain, 0.0) / frac_move
        self.cnt[key] = self.cnt.get(key, 0) + 1

    def estimate(self, lid, direction):
        key = (lid, direction)
        if self.cnt.get(key):
            return self.sum[key] / self.cnt[key]
        known = [self.sum[k] / self.cnt[k] for k in self.cnt if k[1] == direction]
        return sum(known) / len(known) if known else 1.0


class _Solver:
    def __init__(self, net: PowerNetwork, config: SolveConfig, pool: Optional[CutPool] = None):
        self.net = net
        self.cfg = config
        self.tol = config.tolerances
        self.model = build_ots_milp(net, config.angle_bound, config.segments)
        self.lp = self.model.lp.copy()
        self.pool = CutPool() if pool is None else pool
        self.stats = SolveStats()
        self.best: Optional[Incumbent] = None
        self.pc = _PseudoCosts()
        self.limits = {ln.id: ln.thermal_limit for ln in net.lines}
        self.t0 = time.perf_counter()

    # helpers -------------------------------------------------------------

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def node_lp(self, fixes: Dict[int, int], basis=None):
        lower, upper = list(self.lp.col_lower), list(self.lp.col_upper)
        for lid, v in fixes.items():
            j = self.model.status[lid]
            lower[j] = upper[j] = v
        return solve_lp(self.lp, lower=lower, upper=upper, basis=basis)

    def fractional(self, values) -> List[Tuple[int, float]]:
        out = []
        for ln in self.net.lines:
            v = float(values[self.model.status[ln.id]])
            if min(v, 1 - v) > self.tol.integrality:
                out.append((ln.id, v))
        return out

    def abs_gap(self) -> float:
        ub = self.best.objective if self.best else math.inf
        return self.cfg.rel_gap * max(1.0, abs(ub))

    def offer(self, x: Dict[int, int], basis=None, source: str = "") -> bool:
        inc, _ = solve_fixed(self.model, x, basis)
        if inc is None:
            return False
        self.check_validity(inc)
        if self.best is None or inc.objective < self.best.objective - 1e-9:
            self.best = inc
            log.debug("incumbent %.9g from %s", inc.objective, source)
            return True
        return False

    def check_validity(self, inc: Incumbent):
        self.stats.incumbents_checked += 1
        bad = self.pool.violated_by(inc.values, self.tol.primal_feasibility)
        if bad:
            self.stats.cut_violations += len(bad)
            for c in bad:
                log.error("pooled cut violated by an integer-feasible point: %s "
                          "(slack %.3g)", c.dump(), c.slack(inc.values))

    def rounding(self, values, basis=None, source="rounding"):
        x = {ln.id: int(float(values[self.model.status[ln.id]]) >= 0.5) for ln in self.net.lines}
        self.offer(x, basis, source)

    # separation ------------------------------------------------------------

    def separate(self, values) -> List[GlobalCut]:
        cc = self.cfg.cut_config
        cc = CutPoolConfig(cc.rounds, self.cfg.families, cc.per_round_cap,
                           cc.violation_threshold, cc.max_arcs)
        found = []
        for b in self.net.buses:
            try:
                found.extend(apply_cuts_to_bus(self.model, b.id, values, cc))
            except LpError as exc:
                log.warning("bus %s: separation failed numerically (%s)", b.id, exc)
        found.sort(key=lambda c: -c.violation)
        added = []
        for c in found:
            if len(added) >= cc.per_round_cap:
                break
            if self.pool.add(c):
                added.append(c)
        for c in added:
            self.lp.add_row(f"cut[{self.lp.num_rows}]", dict(c.coefs), "<=", c.rhs)
        return added

    def root(self):
        st = self.stats
        sol = self.node_lp({})
        if sol.status == INFEASIBLE:
            return None
        if sol.status != OPTIMAL:
            raise LpError(f"root LP ended with status {sol.status}")
        st.root_lp = float(sol.objective)
        self.offer({ln.id: 1 for ln in self.net.lines}, None, "all-closed")
        self.rounding(sol.x, None, "root rounding")
        rounds = self.cfg.cut_config.rounds if self.cfg.families else 0
        bound = st.root_lp
        for r in range(1, rounds + 1):
            if self.elapsed() > self.cfg.time_limit_s:
                break
            t = time.perf_counter()
            added = self.separate(sol.x)
            st.sep_time_s += time.perf_counter() - t
            st.root_rounds = r
            if not added:
                msg = f"root round {r}/{rounds}: no violated cuts, stopping"
                st.round_log.append(msg)
                log.info(msg)
                break
            st.cuts_added += len(added)
            new = self.node_lp({}, sol.basis)
            if new.status != OPTIMAL:
                if new.status == INFEASIBLE:
                    log.error("root LP infeasible after cuts; the instance is infeasible")
                    return None
                raise LpError(f"root LP ended with status {new.status} after cuts")
            fam = {f: sum(1 for c in added if c.family == f) for f in sorted(self.cfg.families)}
            msg = (f"root round {r}/{rounds}: added {len(added)} cuts "
                   f"({', '.join(f'{k}={v}' for k, v in fam.items())}), "
                   f"LP bound {bound:.9g} -> {float(new.objective):.9g}")
            st.round_log.append(msg)
            log.info(msg)
            bound = float(new.objective)
            sol = new
        if rounds:
            st.separation_nodes = 1
        st.root_lp_after_cuts = float(sol.objective)
        if self.cfg.families and not self.cfg.tree_cuts:
            msg = "separation is root-only; tree nodes use the pooled cuts"
            st.round_log.append(msg)
            log.info(msg)
        return sol

    # tree ------------------------------------------------------------------

    def choose(self, frac: List[Tuple[int, float]]) -> Tuple[int, float]:
        if self.cfg.branching == "pseudo-cost":
            def score(item):
                lid, v = item
                down = self.pc.estimate(lid, 0) * v
                up = self.pc.estimate(lid, 1) * (1 - v)
                return (max(down, 1e-6) * max(up, 1e-6), self.limits[lid], -lid)
            return max(frac, key=score)
        return max(frac, key=lambda it: (min(it[1], 1 - it[1]), self.limits[it[0]], -it[0]))

    def run(self):
        st = self.stats
        root = self.root()
        if root is None:
            st.status = STATUS_INFEASIBLE
            self.best = None
            return self.finish(None)
        seq = itertools.count()
        heap: List[_Node] = [_Node(float(root.objective), next(seq), {}, root.basis)]
        first = True
        status = STATUS_OPTIMAL
        while heap:
            if self.best is not None and heap[0].bound >= self.best.objective - self.abs_gap():
                break
            if self.elapsed() > self.cfg.time_limit_s:
                status = STATUS_TIME_LIMIT
                break
            if st.nodes >= self.cfg.node_limit:
                status = STATUS_NODE_LIMIT
                break
            node = heapq.heappop(heap)
            st.nodes += 1
            if first:
                sol, first = root, False
            else:
                sol = self.node_lp(node.fixes, node.basis)
            if node.branch is not None and sol.status == OPTIMAL:
                lid, direction, move, parent = node.branch
                self.pc.update(lid, direction, move, float(sol.objective) - parent)
            if sol.status == INFEASIBLE:
                continue
            if sol.status != OPTIMAL:
                raise LpError(f"node LP ended with status {sol.status}")
            obj = float(sol.objective)
            if self.best is not None and obj >= self.best.objective - self.abs_gap():
                continue
            if self.cfg.tree_cuts and self.cfg.families and node.depth > 0:
                t = time.perf_counter()
                added = self.separate(sol.x)
                st.sep_time_s += time.perf_counter() - t
                st.separation_nodes += 1
                if added:
                    st.cuts_added += len(added)
                    sol = self.node_lp(node.fixes, sol.basis)
                    if sol.status != OPTIMAL:
                        continue
                    obj = float(sol.objective)
            frac = self.fractional(sol.x)
            if not frac:
                x = {ln.id: int(round(float(sol.x[self.model.status[ln.id]])))
                     for ln in self.net.lines}
                self.offer(x, None, f"node {st.nodes}")
                continue
            if st.nodes % self.cfg.heuristic_every == 0:
                self.rounding(sol.x, None, f"rounding at node {st.nodes}")
            lid, v = self.choose(frac)
            for direction, move in ((0, v), (1, 1 - v)):
                fixes = dict(node.fixes)
                fixes[lid] = direction
                heapq.heappush(heap, _Node(obj, next(seq), fixes, sol.basis,
                                           (lid, direction, move, obj), node.depth + 1))
        ub = self.best.objective if self.best else math.inf
        best_bound = min([n.bound for n in heap] + [ub])
        if status == STATUS_OPTIMAL and self.best is None:
            status = STATUS_INFEASIBLE
        st.status = status
        st.best_bound = best_bound if math.isfinite(best_bound) else None
        return self.finish(st.best_bound)

    def finish(self, bound):
        st = self.stats
        st.total_time_s = self.elapsed()
        st.opt_time_s = max(st.total_time_s - st.sep_time_s, 0.0)
        if self.best is not None:
            st.best_incumbent = self.best.objective
            self.model.warn_if_angle_tight(self.best.values)
            if st.root_lp_after_cuts is None:
                st.root_lp_after_cuts = st.root_lp
            st.gap_closed_pct = gap_closed(self.best.objective, st.root_lp,
                                           st.root_lp_after_cuts)
        return self.best, st


def solve_ots(net: PowerNetwork, config: Optional[SolveConfig] = None,
              pool: Optional[CutPool] = None):
    """Returns ``(Incumbent or None, SolveStats)``.

    Pass an empty ``pool`` to receive the cuts added at the root.
    """
    solver = _Solver(net, config or SolveConfig(), pool)
    return solver.run()


def result_document(name: str, config: SolveConfig, inc: Optional[Incumbent],
                    stats: SolveStats) -> dict:
    return {
        "schema": RESULT_SCHEMA,
        "instance": name,
        "setting": config.setting,
        "rounds": config.cut_config.rounds,
        "rel_gap": config.rel_gap,
        "time_limit_s": config.time_limit_s,
        "stats": stats.to_dict(),
        "incumbent": inc.to_dict() if inc is not None else None,
    }
