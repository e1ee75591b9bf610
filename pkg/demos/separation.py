"""Separating a fractional bus point with partition cuts and a hull cut.

Run: python3 demos/separation.py
"""

from fractions import Fraction

from otscuts.cuts import evaluate_cut, separate_cglp, separate_partition
from otscuts.extform import build_extended_formulation, build_layered_network
from otscuts.substructure import enumerate_extreme_points, uniform_spec


def main():
    spec = uniform_spec(3, 2, Fraction(1, 2))
    print(f"three lines, bound 2, demand 1/2: "
          f"{len(enumerate_extreme_points(spec))} extreme points")

    x = [Fraction(1, 2)] * 3
    f = [Fraction(-1, 2), 1, Fraction(1, 2), Fraction(-1, 2)]
    cut = separate_partition(spec, x, f)
    print(f"partition cut J1={sorted(cut.J1)} J2={sorted(cut.J2)} J3={sorted(cut.J3)}, "
          f"violation {-evaluate_cut(cut, x, f)}")

    netw = build_layered_network(spec)
    print(f"layered network: {netw.node_count} nodes, {len(netw.arcs)} arcs")
    hull = separate_cglp(build_extended_formulation(netw), [float(v) for v in x],
                         [float(v) for v in f])
    print(f"hull cut violation {hull.violation:.4f} (max-norm 1)")


if __name__ == "__main__":
    main()
