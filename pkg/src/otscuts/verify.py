"""Property suites behind ``otscuts verify``.

Each suite draws seeded random instances, checks one structural property
against an independent oracle and returns a :class:`SuiteResult`.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

from .cuts import brute_force_partition, evaluate_cut, partition_polytope, separate_partition
from .extform import (build_extended_formulation, build_layered_network,
                      build_outer_approximation, check_lemma7_integrality)
from .generators import random_spec, subset_sum_vectors
from .lp import OPTIMAL, solve_lp
from .substructure import (PointOptimizer, SubstructureSpec, dc_node_optimum,
                           enumerate_extreme_points, subset_sum_brute_force,
                           subset_sum_reduction, uniform_spec)

log = logging.getLogger(__name__)


@dataclass
class SuiteResult:
    name: str
    anchor: str
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    seconds: float = 0.0
    failures: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def record(self, good: bool, what: str = "") -> None:
        if good:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < 20:
                self.failures.append(what)

    def line(self) -> str:
        verdict = "PASS" if self.ok else "FAIL"
        return (f"{verdict} {self.name} [{self.anchor}]: {self.passed} passed, "
                f"{self.failed} failed, {self.skipped} skipped ({self.seconds:.2f}s)")

    def to_dict(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "passed": self.passed,
                "failed": self.failed, "skipped": self.skipped, "seconds": self.seconds,
                "failures": self.failures, "notes": self.notes}


def random_objective(rng: random.Random, n: int):
    cx = [Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for _ in range(n)]
    cf = [Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for _ in range(n + 1)]
    return cx, cf


def _close(a: float, b: float, rel: float) -> bool:
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# suites


def suite_hull(trials: int = 200, seed: int = 0, objectives: int = 50,
               exact_every: int = 10, max_n: int = 5) -> SuiteResult:
    """Extended-formulation LP optima against vertex-enumeration optima."""
    res = SuiteResult("hull", "network extended formulation equals conv(S)")
    rng = random.Random(seed)
    for t in range(trials):
        spec = random_spec(rng, rng.randint(1, max_n))
        vertex_opt = PointOptimizer(enumerate_extreme_points(spec))
        ef = build_extended_formulation(build_layered_network(spec))
        exact = exact_every > 0 and t % exact_every == 0
        basis = None
        for _ in range(objectives):
            cx, cf = random_objective(rng, spec.n)
            want = vertex_opt(cx, cf)
            sol = ef.optimize(cx, cf, basis=basis)
            if want is None:
                res.record(sol.status != OPTIMAL, f"trial {t}: LP feasible but S is empty")
                continue
            basis = sol.basis
            good = sol.status == OPTIMAL and _close(float(sol.objective), float(want), 1e-7)
            res.record(good, f"trial {t} float: {sol.status} {sol.objective} vs {want}")
            if exact:
                sol_q = ef.optimize(cx, cf, mode="exact", basis=sol.basis)
                res.record(sol_q.status == OPTIMAL and sol_q.objective == want,
                           f"trial {t} exact: {sol_q.objective} vs {want}")
    return res


def lemma7_grid(m_max: int = 4, fbars=(Fraction(1), Fraction(3, 2), Fraction(2))):
    return [(m, kappa, fb) for m in range(1, m_max + 1)
            for kappa in range(-m + 1, m + 1) for fb in fbars]


def suite_lemma7(trials: Optional[int] = None, seed: int = 0, m_max: int = 4) -> SuiteResult:
    """Every vertex of the aggregated polytope has binary x when
    ``d' / fbar`` is an integer in ``[-m+1, m]``; a non-integer ratio
    yields fractional vertices."""
    res = SuiteResult("lemma7", "integral aggregated polytope for integer d'/fbar")
    grid = lemma7_grid(m_max)
    if trials is not None and trials < len(grid):
        grid = random.Random(seed).sample(grid, trials)
    for m, kappa, fb in grid:
        rep = check_lemma7_integrality(m, fb, kappa=kappa)
        res.record(rep.premise_holds and rep.integral, rep.summary())
    control = check_lemma7_integrality(2, 1, d_prime=Fraction(1, 2))
    res.record(bool(control.fractional), "negative control: " + control.summary())
    res.notes.append("negative control: " + control.summary())
    return res


def suite_prop8(trials: int = 50, seed: int = 0, objectives: int = 5, max_n: int = 4,
                inject_nonuniform: bool = False) -> SuiteResult:
    """In the uniform regime the outer approximation, the partition polytope
    and conv(S) give the same optimum (exact arithmetic).

    With ``inject_nonuniform`` the bounds are perturbed; only containment
    (outer approximation optimum <= conv(S) optimum) is asserted.
    """
    res = SuiteResult("prop8", "outer approximation = partition polytope = conv(S) "
                               "in the uniform regime")
    rng = random.Random(seed)
    for t in range(trials):
        n = rng.randint(1, max_n)
        fbar = Fraction(rng.randint(1, 6), rng.choice((1, 2, 3)))
        d = fbar * Fraction(rng.randrange(0, 6), 6)
        spec = uniform_spec(n, fbar, d)
        if inject_nonuniform:
            bounds = tuple(fbar + Fraction(rng.randint(0, 3), 2) for _ in range(n))
            spec = SubstructureSpec(d, 0, 0, bounds)
        vertex_opt = PointOptimizer(enumerate_extreme_points(spec))
        oa = build_outer_approximation(spec)
        uniform = spec.is_uniform
        if uniform:
            xlp, xc, fc = partition_polytope(spec)
        elif not res.notes:
            msg = "non-uniform bounds: partition polytope and equality checks skipped"
            log.info(msg)
            res.notes.append(msg)
        for _ in range(objectives):
            cx, cf = random_objective(rng, n)
            want = vertex_opt(cx, cf)
            got_oa = oa.optimize(cx, cf, mode="exact")
            if not uniform:
                res.skipped += 1
                res.record(got_oa.status == OPTIMAL and got_oa.objective <= want,
                           f"trial {t}: outer approximation {got_oa.objective} > {want}")
                continue
            lp = xlp.copy()
            obj = {c: v for c, v in zip(xc, cx) if v}
            for c, v in zip(fc, cf):
                if v:
                    obj[c] = obj.get(c, 0) + v
            lp.set_objective(obj)
            got_x = solve_lp(lp, "exact", exact_column_cap=max(60, lp.num_cols))
            good = (got_oa.status == OPTIMAL and got_x.status == OPTIMAL
                    and got_oa.objective == want and got_x.objective == want)
            res.record(good, f"trial {t} {spec.to_dict()}: outer {got_oa.objective}, "
                             f"partition {got_x.objective}, vertices {want}")
    return res


def random_fractional_point(rng: random.Random, spec: SubstructureSpec):
    fbar = spec.line_bounds[0]
    x = [Fraction(rng.randint(0, 8), 8) for _ in range(spec.n)]
    f = [Fraction(0)] + [fbar * xj * Fraction(rng.randint(-8, 8), 8) for xj in x]
    return x, f


def suite_separation(trials: int = 500, seed: int = 0, max_n: int = 8) -> SuiteResult:
    """Linear-time separation against the ``3^n`` scan: same verdict, same
    maximum violation (exact)."""
    res = SuiteResult("separation", "linear-time partition separation is exact")
    rng = random.Random(seed)
    for t in range(trials):
        n = rng.randint(1, max_n)
        fbar = Fraction(rng.randint(1, 6), rng.choice((1, 2)))
        spec = uniform_spec(n, fbar, fbar * Fraction(rng.randrange(0, 8), 8))
        x, f = random_fractional_point(rng, spec)
        cut = separate_partition(spec, x, f, threshold=0)
        best, viol = brute_force_partition(spec, x, f)
        if cut is None:
            res.record(viol <= 0, f"trial {t}: missed a cut of violation {viol}")
        else:
            res.record(-evaluate_cut(cut, x, f) == viol,
                       f"trial {t}: violation {-evaluate_cut(cut, x, f)} vs best {viol}")
    return res


def suite_reduction(trials: Optional[int] = None, seed: int = 0, total: int = 25,
                    sweep_total: int = 8) -> SuiteResult:
    """DC-Node decisions on reduced Subset-Sum instances against brute force.

    Every vector with sum <= ``total`` is tried with ``b = floor(sum/2)``;
    vectors with sum <= ``sweep_total`` are tried with every ``b`` in
    ``[1, sum + 1]``. ``trials`` caps the number of vectors (seeded sample).
    """
    res = SuiteResult("reduction", "Subset-Sum reduces to DC-Node")
    vectors = subset_sum_vectors(total)
    if trials is not None and trials < len(vectors):
        vectors = random.Random(seed).sample(vectors, trials)
    pairs = [(a, max(1, sum(a) // 2)) for a in vectors]
    pairs += [(a, b) for a in vectors if sum(a) <= sweep_total
              for b in range(1, sum(a) + 2) if b != max(1, sum(a) // 2)]
    yes = 0
    for a, b in pairs:
        spec, obj, thr = subset_sum_reduction(a, b)
        best = dc_node_optimum(spec, obj, "network")
        got = best is not None and best <= thr
        want = subset_sum_brute_force(a, b)
        yes += want
        res.record(got == want, f"a={a} b={b}: DC-Node {got}, Subset-Sum {want}")
    res.notes.append(f"{len(pairs)} instances, {yes} feasible")
    return res


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "hull": suite_hull,
    "lemma7": suite_lemma7,
    "prop8": suite_prop8,
    "separation": suite_separation,
    "reduction": suite_reduction,
}


def run_suite(name: str, trials: Optional[int] = None, seed: int = 0, **kw) -> SuiteResult:
    fn = SUITES[name]
    t0 = time.perf_counter()
    if trials is not None:
        kw["trials"] = trials
    res = fn(seed=seed, **kw)
    res.seconds = time.perf_counter() - t0
    return res
