"""Deterministic instance generators and small hand-built fixtures."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import List, Optional, Sequence

from .network import Bus, CostFunction, Generator, Line, PowerNetwork
from .substructure import SubstructureSpec, uniform_spec


def random_network(buses: int, seed: int = 0, *, lines: Optional[int] = None,
                   generators: Optional[int] = None, mean_degree: float = 2.5,
                   kappa_fraction: float = 0.8, kappa_bar: int = 3,
                   base_limit: int = 20, load_range=(2, 12),
                   quadratic_fraction: float = 0.0,
                   capacity_range=(1.2, 2.0)) -> PowerNetwork:
    """Connected random network; identical arguments give identical output.

    A random spanning tree is completed with extra edges until ``lines``
    (default about ``mean_degree * buses / 2``). A share ``kappa_fraction``
    of the thermal limits are integer multiples ``kappa * base_limit`` with
    ``kappa <= kappa_bar``; the rest are drawn freely. Total generation
    capacity is the total load times a factor drawn from ``capacity_range``.
    """
    if buses < 1:
        raise ValueError("need at least one bus")
    rng = random.Random(seed)
    if lines is not None:
        n_lines = lines
    else:
        n_lines = max(buses - 1, round(mean_degree * buses / 2)) if buses > 1 else 0
    n_gens = generators if generators is not None else max(1, buses // 4)
    if n_lines < buses - 1:
        raise ValueError("too few lines for a connected network")
    if n_gens > buses:
        raise ValueError("more generators than buses")
    ids = list(range(1, buses + 1))
    edges = []
    order = ids[:]
    rng.shuffle(order)
    for k in range(1, buses):
        edges.append((order[rng.randrange(k)], order[k]))
    pairs = {tuple(sorted(e)) for e in edges}
    attempts = 0
    while len(edges) < n_lines:
        a, b = rng.sample(ids, 2) if buses > 1 else (1, 1)
        attempts += 1
        if buses < 2:
            raise ValueError("a single bus admits no lines")
        if tuple(sorted((a, b))) in pairs and attempts < 50 * n_lines:
            continue
        pairs.add(tuple(sorted((a, b))))
        edges.append((a, b))
    gen_buses = sorted(rng.sample(ids, n_gens))
    bus_objs = []
    for i in ids:
        load = Fraction(0) if i in gen_buses and rng.random() < 0.5 else \
            Fraction(rng.randint(*load_range))
        bus_objs.append(Bus(i, load))
    total_load = sum((b.load for b in bus_objs), Fraction(0))
    gens = []
    for i in gen_buses:
        cap = Fraction(1 + round(float(total_load) * rng.uniform(*capacity_range) / n_gens))
        c1 = Fraction(rng.randint(1, 40))
        c2 = Fraction(rng.randint(1, 10), 100) if rng.random() < quadratic_fraction else Fraction(0)
        gens.append(Generator(i, Fraction(0), cap, CostFunction(Fraction(0), c1, c2)))
    line_objs = []
    for k, (a, b) in enumerate(edges, start=1):
        if rng.random() < kappa_fraction:
            limit = Fraction(base_limit * rng.randint(1, kappa_bar))
        else:
            limit = Fraction(rng.randint(base_limit // 2, base_limit * kappa_bar))
        susceptance = Fraction(rng.randint(5, 40) * 10)  # MW per radian
        line_objs.append(Line(k, a, b, susceptance, limit))
    return PowerNetwork(tuple(bus_objs), tuple(gens), tuple(line_objs))


def triangle_network() -> PowerNetwork:
    """Three buses where opening the weak line 1-2 lowers the cost.

    Bus 1 has a cheap generator, bus 2 an expensive one, bus 3 the load.
    With all lines closed, the weak line caps the cheap output at 65 (cost
    415); with line 1-2 open, the cheap unit serves everything (cost 100).
    """
    buses = (Bus(1, Fraction(0)), Bus(2, Fraction(0)), Bus(3, Fraction(100)))
    gens = (Generator(1, Fraction(0), Fraction(200), CostFunction(0, 1, 0)),
            Generator(2, Fraction(0), Fraction(200), CostFunction(0, 10, 0)))
    lines = (Line(1, 1, 2, Fraction(100), Fraction(10)),
             Line(2, 1, 3, Fraction(100), Fraction(200)),
             Line(3, 2, 3, Fraction(100), Fraction(200)))
    return PowerNetwork(buses, gens, lines)


def radial_network() -> PowerNetwork:
    """A path 1-2-3-4 fed from bus 1; every line is needed."""
    buses = (Bus(1, Fraction(0)), Bus(2, Fraction(10)), Bus(3, Fraction(5)), Bus(4, Fraction(7)))
    gens = (Generator(1, Fraction(0), Fraction(50), CostFunction(0, 2, 0)),)
    lines = (Line(1, 1, 2, Fraction(200), Fraction(40)),
             Line(2, 2, 3, Fraction(100), Fraction(20)),
             Line(3, 3, 4, Fraction(300), Fraction(10)))
    return PowerNetwork(buses, gens, lines)


def random_kappa_spec(rng: random.Random, n: int, kappa_bar: int, d=None) -> SubstructureSpec:
    """Spec with no dispatch, bounds ``kappa_j in [1, kappa_bar]`` and ``d in [0, 1)``."""
    bounds = tuple(Fraction(rng.randint(1, kappa_bar)) for _ in range(n))
    if d is None:
        d = Fraction(rng.randrange(0, 12), 12)
    return SubstructureSpec(Fraction(d), Fraction(0), Fraction(0), bounds)


def random_spec(rng: random.Random, n: int, dispatch: bool = True,
                denominators: Sequence[int] = (1, 2, 3)) -> SubstructureSpec:
    bounds = tuple(Fraction(rng.randint(1, 6), rng.choice(denominators)) for _ in range(n))
    lo = hi = Fraction(0)
    if dispatch and rng.random() < 0.5:
        lo = Fraction(rng.randint(-3, 0))
        hi = lo + Fraction(rng.randint(0, 5))
    total = sum(bounds, Fraction(0))
    span = int(total + max(abs(lo), abs(hi))) + 1
    d = Fraction(rng.randint(-4 * span, 4 * span), 4)
    return SubstructureSpec(d, lo, hi, bounds)


def random_uniform_spec(rng: random.Random, n: int) -> SubstructureSpec:
    fbar = Fraction(rng.randint(1, 6), rng.choice((1, 2)))
    d = fbar * Fraction(rng.randrange(0, 8), 8)
    return uniform_spec(n, fbar, d)


def subset_sum_vectors(total: int) -> List[tuple]:
    """All nondecreasing positive-integer vectors with sum at most ``total``."""
    out: List[tuple] = []

    def extend(prefix, remaining, smallest):
        if prefix:
            out.append(tuple(prefix))
        for v in range(smallest, remaining + 1):
            extend(prefix + [v], remaining - v, v)

    extend([], total, 1)
    return out
