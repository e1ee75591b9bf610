"""Command-line interface: ``otscuts <command> ...``.

Exit codes: 0 success (optimal for ``solve``), 1 usage or input error,
2 limit hit, 3 infeasible. ``OTS_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .cuts import (CGLP, FAMILIES, PARTITION, CutPool, CutPoolConfig, PremiseError,
                   evaluate_cut, separate_cglp, separate_partition)
from .extform import build_extended_formulation, build_layered_network
from .generators import random_network
from .lp import write_lp_text
from .milp import (BRANCHING, RESULT_SCHEMA, SETTINGS, STATUS_INFEASIBLE, STATUS_OPTIMAL,
                   SolveConfig, result_document, solve_ots)
from .network import InstanceError, dump_instance, load_instance
from .numerics import format_rational, to_rational
from .substructure import (EnumerationCapError, SubstructureSpec, dump_spec,
                           enumerate_extreme_points, load_spec, subset_sum_reduction,
                           uniform_spec)
from .verify import SUITES, run_suite

log = logging.getLogger("otscuts")

EXIT_OK, EXIT_ERROR, EXIT_LIMIT, EXIT_INFEASIBLE = 0, 1, 2, 3
CSV_COLUMNS = ["Instance", "Setting", "Unsolved", "SepTime", "#Cuts", "OptTime", "#Nodes",
               "TotalTime"]
GA_FLOOR = 0.01


class CliError(Exception):
    """Reported as ``error: ...`` with exit code 1."""


def _setup_logging() -> None:
    level = os.environ.get("OTS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _rationals(text: str) -> List[Fraction]:
    try:
        return [to_rational(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"cannot parse numbers from {text!r}: {exc}") from None


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_spec(path) -> SubstructureSpec:
    try:
        return load_spec(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except (ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# solve


def csv_row(name: str, setting: str, stats: dict) -> Dict[str, object]:
    return {"Instance": name, "Setting": setting, "Unsolved": int(bool(stats["unsolved"])),
            "SepTime": f"{stats['sep_time_s']:.3f}", "#Cuts": stats["cuts_added"],
            "OptTime": f"{stats['opt_time_s']:.3f}", "#Nodes": stats["nodes"],
            "TotalTime": f"{stats['total_time_s']:.3f}"}


def _csv_text(rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def cmd_solve(args) -> int:
    try:
        net = load_instance(args.instance)
    except FileNotFoundError:
        raise CliError(f"{args.instance}: no such file") from None
    except InstanceError as exc:
        raise CliError(str(exc)) from None
    families = SETTINGS[args.setting]
    cut_cfg = CutPoolConfig(rounds=args.rounds, families=families or frozenset({PARTITION}))
    cfg = SolveConfig(setting=args.setting, cut_config=cut_cfg, time_limit_s=args.time_limit,
                      rel_gap=args.gap, branching=args.branching, node_limit=args.node_limit,
                      tree_cuts=args.tree_cuts, angle_bound=to_rational(args.angle_bound),
                      segments=args.segments)
    if args.threads != 1:
        log.warning("--threads %d requested; branch-and-bound runs sequentially", args.threads)
    pool = CutPool()
    inc, stats = solve_ots(net, cfg, pool)
    name = Path(args.instance).stem
    doc = result_document(name, cfg, inc, stats)
    doc["seed"] = args.seed
    out = args.out or f"{name}.{args.setting}.result.json"
    _write_json(out, doc)
    if args.dump_cuts:
        Path(args.dump_cuts).write_text(pool.dump())
    sys.stdout.write(_csv_text([csv_row(name, args.setting, doc["stats"])]))
    err = sys.stderr
    for line in stats.round_log:
        print(line, file=err)
    gap = "n/a" if stats.gap_closed_pct is None else f"{stats.gap_closed_pct:.2f}%"
    obj = "-" if inc is None else f"{inc.objective:.6f}"
    print(f"{name}: {stats.status}, objective {obj}, root LP {stats.root_lp}, "
          f"root LP after cuts {stats.root_lp_after_cuts}, gap closed {gap}, "
          f"{stats.nodes} nodes, {stats.cuts_added} cuts; result written to {out}", file=err)
    if stats.cut_violations:
        print(f"warning: {stats.cut_violations} pooled cut violations on incumbents", file=err)
    if stats.status == STATUS_OPTIMAL:
        return EXIT_OK
    if stats.status == STATUS_INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


# ---------------------------------------------------------------------------
# substructure commands


def _result_path(args, suffix: str) -> str:
    return args.out or f"{Path(args.spec).stem}.{suffix}.json"


def _record(doc, path) -> None:
    _write_json(path, doc)
    print(f"result written to {path}", file=sys.stderr)


def cmd_enumerate(args) -> int:
    spec = _load_spec(args.spec)
    try:
        pts = enumerate_extreme_points(spec, cap=args.cap, strict=args.strict)
    except EnumerationCapError as exc:
        raise CliError(str(exc)) from None
    for p in pts:
        f = " ".join(format_rational(v) for v in p.f)
        tag = "-" if p.interior_index is None else str(p.interior_index)
        print(f"x=({' '.join(map(str, p.x))}) f=({f}) interior={tag}")
    print(f"{len(pts)} extreme points", file=sys.stderr)
    _record({"spec": spec.to_dict(), "count": len(pts),
             "points": [{"x": list(p.x), "f": [format_rational(v) for v in p.f],
                         "interior": p.interior_index} for p in pts]},
            _result_path(args, "points"))
    return EXIT_OK


def cmd_hull(args) -> int:
    spec = _load_spec(args.spec)
    try:
        netw = build_layered_network(spec, node_identity=args.node_identity)
    except (EnumerationCapError, ValueError) as exc:
        raise CliError(str(exc)) from None
    ef = build_extended_formulation(netw)
    if args.dot:
        Path(args.dot).write_text(netw.to_dot())
    if args.lp:
        Path(args.lp).write_text(write_lp_text(ef.lp))
    print(f"layered network: {netw.node_count} nodes ({netw.raw_node_count} before pruning), "
          f"{len(netw.arcs)} arcs; extended formulation {ef.lp.num_rows} rows x "
          f"{ef.lp.num_cols} columns")
    _record({"spec": spec.to_dict(), "node_identity": args.node_identity,
             "nodes": netw.node_count, "raw_nodes": netw.raw_node_count, "arcs": len(netw.arcs),
             "layer_sizes": [len(layer) for layer in netw.layers],
             "lp_rows": ef.lp.num_rows, "lp_cols": ef.lp.num_cols},
            _result_path(args, "hull"))
    return EXIT_OK


def cmd_separate(args) -> int:
    spec = _load_spec(args.spec)
    x = _rationals(args.x)
    f = _rationals(args.f)
    if len(x) != spec.n or len(f) not in (spec.n, spec.n + 1):
        raise CliError(f"point has |x|={len(x)}, |f|={len(f)}; spec has n={spec.n}")
    if len(f) == spec.n:
        f = [Fraction(0)] + f
    doc = {"spec": spec.to_dict(), "family": args.family, "x": [format_rational(v) for v in x],
           "f": [format_rational(v) for v in f], "cut": None}
    if args.family == PARTITION:
        try:
            cut = separate_partition(spec, x, f, args.threshold)
        except PremiseError as exc:
            raise CliError(str(exc)) from None
        if cut is None:
            print("no violated partition cut")
        else:
            viol = format_rational(-evaluate_cut(cut, x, f))
            parts = [sorted(p) for p in (cut.J1, cut.J2, cut.J3)]
            text = " ".join(f"J{k}={','.join(map(str, p)) or '-'}"
                            for k, p in enumerate(parts, start=1))
            print(f"partition cut {text} violation={viol}")
            doc["cut"] = {"J1": parts[0], "J2": parts[1], "J3": parts[2], "violation": viol}
    else:
        ef = build_extended_formulation(build_layered_network(spec))
        cut = separate_cglp(ef, x, f, args.threshold)
        if cut is None:
            print("point lies in conv(S); no hull cut")
        else:
            px = " ".join(f"{v:.6g}" for v in cut.pi_x)
            pf = " ".join(f"{v:.6g}" for v in cut.pi_f)
            print(f"hull cut pi_x=({px}) pi_f=({pf}) pi_0={cut.pi_0:.6g} "
                  f"violation={cut.violation:.6g}")
            doc["cut"] = {"pi_x": list(cut.pi_x), "pi_f": list(cut.pi_f), "pi_0": cut.pi_0,
                          "violation": cut.violation}
    _record(doc, _result_path(args, "separate"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = []
    for name in names:
        kw = {}
        if name == "prop8" and args.inject_nonuniform:
            kw["inject_nonuniform"] = True
        res = run_suite(name, args.trials, args.seed, **kw)
        results.append(res)
        print(res.line())
        for note in res.notes:
            print(f"  note: {note}")
        for failure in res.failures:
            print(f"  failure: {failure}")
    _record({"suites": [r.to_dict() for r in results], "seed": args.seed,
             "trials": args.trials}, args.out or "verify.result.json")
    return EXIT_OK if all(r.ok for r in results) else EXIT_ERROR


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    if args.kind == "random-net":
        net = random_network(args.buses, args.seed, lines=args.lines, generators=args.generators,
                             mean_degree=args.degree, kappa_fraction=args.kappa_fraction,
                             kappa_bar=args.kappa_bar, base_limit=args.base_limit,
                             load_range=(args.load_min, args.load_max),
                             quadratic_fraction=args.quadratic_fraction)
        out = args.out or f"net{args.buses}-s{args.seed}.json"
        dump_instance(net, out)
        print(f"wrote {out}: {len(net.buses)} buses, {len(net.lines)} lines, "
              f"{len(net.generators)} generators")
        return EXIT_OK
    if args.kind == "subset-sum":
        if not args.a or args.b is None:
            raise CliError("--kind subset-sum needs --a and --b")
        try:
            a = [int(tok) for tok in args.a.split(",")]
            spec, obj, thr = subset_sum_reduction(a, args.b)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        stem = args.out or "subset-sum"
        dump_spec(spec, f"{stem}.spec.json")
        _write_json(f"{stem}.objective.json", {**obj.to_dict(), "threshold": format_rational(thr)})
        print(f"wrote {stem}.spec.json and {stem}.objective.json")
        return EXIT_OK
    if args.n is None or args.d is None:
        raise CliError("--kind uniform-spec needs --n and --d")
    spec = uniform_spec(args.n, to_rational(args.fbar), to_rational(args.d))
    if not spec.is_uniform:
        raise CliError("uniform-spec needs 0 <= d < fbar")
    out = args.out or "uniform.spec.json"
    dump_spec(spec, out)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def geometric_mean(values: Sequence[float], floor: float = GA_FLOOR) -> float:
    """Geometric mean of ``max(v, floor)``."""
    return math.exp(sum(math.log(max(v, floor)) for v in values) / len(values))


def load_results(paths: Sequence[str]) -> List[dict]:
    docs = []
    for p in paths:
        try:
            doc = json.loads(Path(p).read_text())
        except FileNotFoundError:
            raise CliError(f"{p}: no such file") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"{p}: invalid JSON ({exc})") from None
        if doc.get("schema") != RESULT_SCHEMA:
            raise CliError(f"{p}: expected schema {RESULT_SCHEMA!r}, got {doc.get('schema')!r}")
        docs.append(doc)
    return docs


def summary_rows(rows: List[Dict[str, object]]) -> List[Dict[str, object]]:
    """GA and AA rows over all rows and over solved rows only."""
    out = []
    numeric = ["SepTime", "#Cuts", "OptTime", "#Nodes", "TotalTime"]
    groups = [("all", rows), ("solved", [r for r in rows if not int(r["Unsolved"])])]
    for label, group in groups:
        for kind in ("GA", "AA"):
            row: Dict[str, object] = {"Instance": f"{kind} ({label})", "Setting": "",
                                      "Unsolved": sum(int(r["Unsolved"]) for r in group)}
            for col in numeric:
                vals = [float(r[col]) for r in group]
                if not vals:
                    row[col] = "n/a"
                elif kind == "GA":
                    row[col] = f"{geometric_mean(vals):.3f}"
                else:
                    row[col] = f"{sum(vals) / len(vals):.3f}"
            out.append(row)
    return out


def aligned_table(rows: Sequence[Dict[str, object]]) -> str:
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in CSV_COLUMNS}
    lines = ["  ".join(c.rjust(widths[c]) for c in CSV_COLUMNS)]
    for r in rows:
        lines.append("  ".join(str(r[c]).rjust(widths[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    if not args.results:
        raise CliError("report needs at least one result file")
    docs = load_results(args.results)
    rows = [csv_row(d["instance"], d["setting"], d["stats"]) for d in docs]
    summary = summary_rows(rows)
    text = _csv_text(rows + summary)
    out = args.csv or "report.csv"
    Path(out).write_text(text)
    sys.stdout.write(aligned_table(rows + summary))
    print(f"GA uses max(value, {GA_FLOOR}); 'all' averages every row, 'solved' only rows "
          f"that finished within the limits")
    print(f"CSV written to {out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for limit hits."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="otscuts", description="DC optimal transmission switching "
                                "with single-bus cutting planes")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="branch-and-bound with root cut rounds")
    s.add_argument("instance")
    s.add_argument("--setting", choices=sorted(SETTINGS), default="plain")
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--time-limit", type=float, default=3600.0)
    s.add_argument("--gap", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=0,
                   help="recorded in the result; the solver itself is deterministic")
    s.add_argument("--node-limit", type=int, default=1_000_000)
    s.add_argument("--branching", choices=BRANCHING, default="most-fractional")
    s.add_argument("--tree-cuts", action="store_true", help="separate at every node")
    s.add_argument("--angle-bound", default="6.283185307179586")
    s.add_argument("--segments", type=int, default=16)
    s.add_argument("--threads", type=int, default=1,
                   help="accepted for interface compatibility; the search is sequential")
    s.add_argument("--out", help="result JSON (default <instance>.<setting>.result.json)")
    s.add_argument("--dump-cuts", help="write the cut pool, one cut per line")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("enumerate", help="extreme points of conv(S)")
    e.add_argument("spec")
    e.add_argument("--cap", type=int, default=16)
    e.add_argument("--strict", action="store_true")
    e.add_argument("--out", help="result JSON (default <spec>.points.json)")
    e.set_defaults(func=cmd_enumerate)

    h = sub.add_parser("hull", help="layered network and extended formulation")
    h.add_argument("spec")
    h.add_argument("--node-identity", choices=("emptiness", "index"), default="emptiness")
    h.add_argument("--dot")
    h.add_argument("--lp")
    h.add_argument("--out", help="result JSON (default <spec>.hull.json)")
    h.set_defaults(func=cmd_hull)

    c = sub.add_parser("separate", help="separate a point from conv(S)")
    c.add_argument("spec")
    c.add_argument("--x", required=True, help="comma-separated x values")
    c.add_argument("--f", required=True, help="comma-separated f values (dispatch first optional)")
    c.add_argument("--family", choices=FAMILIES, default=PARTITION)
    c.add_argument("--threshold", type=float, default=1e-6)
    c.add_argument("--out", help="result JSON (default <spec>.separate.json)")
    c.set_defaults(func=cmd_separate)

    v = sub.add_parser("verify", help="property suites")
    v.add_argument("--suite", choices=sorted(SUITES) + ["all"], default="all")
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--inject-nonuniform", action="store_true",
                   help="prop8 only: perturb the bounds and check containment")
    v.add_argument("--out", help="result JSON (default verify.result.json)")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate instances")
    g.add_argument("--kind", choices=("random-net", "subset-sum", "uniform-spec"), required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--buses", type=int, default=8)
    g.add_argument("--lines", type=int)
    g.add_argument("--generators", type=int)
    g.add_argument("--degree", type=float, default=2.5)
    g.add_argument("--kappa-fraction", type=float, default=0.8)
    g.add_argument("--kappa-bar", type=int, default=3)
    g.add_argument("--base-limit", type=int, default=20)
    g.add_argument("--load-min", type=int, default=2)
    g.add_argument("--load-max", type=int, default=12)
    g.add_argument("--quadratic-fraction", type=float, default=0.0)
    g.add_argument("--a", help="Subset-Sum weights, comma-separated")
    g.add_argument("--b", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--fbar", default="1")
    g.add_argument("--d")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("report", help="aggregate result files")
    r.add_argument("results", nargs="*")
    r.add_argument("--csv", help="CSV output (default report.csv)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
