"""Subset-Sum instances decided through a single-bus switching problem.

Run: python3 demos/subset_sum.py
"""

from otscuts.substructure import dc_node_optimum, subset_sum_brute_force, subset_sum_reduction


def main():
    for a, b in (([2, 3], 5), ([3, 5, 7], 8), ([3, 5, 7], 9), ([4, 6, 10], 13)):
        spec, obj, thr = subset_sum_reduction(a, b)
        best = dc_node_optimum(spec, obj, "network")
        decided = best is not None and best <= thr
        print(f"a={a} b={b}: bus optimum {best}, threshold {thr} -> "
              f"{'yes' if decided else 'no'} (brute force: "
              f"{'yes' if subset_sum_brute_force(a, b) else 'no'})")


if __name__ == "__main__":
    main()
