"""``ccmst`` command line: generate graphs, run the pipelines, run claim campaigns."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cc import connected_components
from .claims import SUITES, run_suite
from .graph import (Graph, GraphInputError, WeightedGraph, format_graph,
                    gen_gnp, gen_path, gen_planted, gen_weights, oracle_components, oracle_mst,
                    read_graph)
from .mst import mst
from .placement import PipelineParams
from .runtime import SimulationError

OUT_ENV = "CCMST_OUT_DIR"


class ConfigError(ValueError):
    pass


def _parse_params(items: list[str]) -> PipelineParams:
    kv = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--params expects key=value, got {it!r}")
        k, v = it.split("=", 1)
        kv[k.strip()] = v.strip()
    try:
        return PipelineParams().with_overrides(**kv)
    except (KeyError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _sizes(text: str | None, n: int) -> list[int]:
    if not text:
        return [n // 2, n - n // 2] if n > 1 else [n]
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as e:
        raise ConfigError(f"bad --sizes {text!r}") from e


def make_graph(args, seed: int) -> Graph:
    if args.graph:
        return read_graph(args.graph)
    if args.n is None or args.n < 1:
        raise ConfigError("--n must be a positive integer when no --graph is given")
    if args.model == "gnp":
        p = args.p if args.p is not None else 2.0 / args.n
        if not 0 <= p <= 1:
            raise ConfigError("--p must lie in [0, 1]")
        return gen_gnp(args.n, p, seed)
    if args.model == "planted":
        return gen_planted(args.n, _sizes(args.sizes, args.n), seed, p_extra=args.p or 0.0)
    if args.model == "path":
        return gen_path(args.n, seed)
    raise ConfigError(f"unknown model {args.model!r}")


def _weighted(g: Graph, seed: int) -> WeightedGraph:
    return g if isinstance(g, WeightedGraph) else gen_weights(g, seed + 1)


def _seeds(args) -> list[int]:
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    return [args.seed + r for r in range(args.reps)]


def _config(args) -> dict:
    keys = ("command", "n", "model", "p", "sizes", "seed", "reps", "graph", "params", "suite")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def cmd_cc(args) -> tuple[dict, list[dict], bool]:
    base = _parse_params(args.params)
    rows = []
    for sd in _seeds(args):
        g = make_graph(args, sd)
        params = replace(base, seed=sd)
        res = connected_components(g, params)
        tr = res.rt.metrics()
        truth = oracle_components(g)
        rows.append({"seed": sd, "n": g.n, "m": int(len(g.edges)), "match": res.partition == truth,
                     "components": res.partition.num_components, "rounds": tr.rounds_charged,
                     "total_words": tr.total_words, "max_load": tr.max_node_round_load,
                     "phase_rounds": {k: v["rounds"] for k, v in sorted(tr.per_phase.items())}})
    ok = all(r["match"] for r in rows)
    return {"match": ok, "runs": rows}, rows, ok


def cmd_mst(args) -> tuple[dict, list[dict], bool]:
    base = _parse_params(args.params)
    rows = []
    for sd in _seeds(args):
        g = _weighted(make_graph(args, sd), sd)
        if not g.distinct_weights() and not args.tie_break:
            print("warning: duplicate edge weights; ties broken by (weight, edge id)", file=sys.stderr)
        params = replace(base, seed=sd)
        res = mst(g, params)
        truth = oracle_mst(g)
        row = {"seed": sd, "n": g.n, "m": int(len(g.edges)),
               "match": bool(np.array_equal(res.edges, truth))}
        row.update(res.to_dict())
        rows.append(row)
    ok = all(r["match"] for r in rows)
    return {"match": ok, "runs": rows}, rows, ok


def cmd_claims(args) -> tuple[dict, list[dict], bool]:
    names = SUITES if not args.suite or "all" in args.suite else args.suite
    reports = []
    for name in names:
        reports += run_suite(name, reps=args.reps_given, seed=args.seed, n=args.n)
    for r in reports:
        print(r.line(), file=sys.stderr)
    rows = [{"suite": r.name, "reps": r.reps, "passed": r.passed, "rate": r.rate,
             "threshold": r.threshold, "ok": r.ok} for r in reports]
    ok = all(r.ok for r in reports)
    return {"ok": ok, "suites": [r.to_dict() for r in reports]}, rows, ok


def cmd_bench(args) -> tuple[dict, list[dict], bool]:
    base = _parse_params(args.params)
    ns = args.sizes_n or [256, 1024, 4096]
    rows = []
    for n in ns:
        args.n = n
        g = make_graph(args, args.seed)
        params = replace(base, seed=args.seed)
        for kind in ("cc", "mst"):
            res = connected_components(g, params) if kind == "cc" else mst(_weighted(g, args.seed), params)
            tr = res.rt.metrics()
            rows.append({"pipeline": kind, "n": n, "m": int(len(g.edges)), "rounds": tr.rounds_charged,
                         "total_words": tr.total_words, "total_bits": tr.total_bits,
                         "max_load": tr.max_node_round_load})
    same = all(len({r["rounds"] for r in rows if r["pipeline"] == k}) == 1 for k in ("cc", "mst"))
    return {"rounds_constant": same, "rows": rows}, rows, True


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    flat = [{k: json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v for k, v in r.items()}
            for r in rows]
    w = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(flat)
    return buf.getvalue()


def _emit(args, report: dict) -> None:
    rows = report.pop("_rows", None)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    out = args.out
    if out is None and os.environ.get(OUT_ENV):
        out = str(Path(os.environ[OUT_ENV]) / f"{args.command}.json")
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    if rows is not None:
        path.with_suffix(".csv").write_text(_csv(rows))


def cmd_gen(args) -> int:
    g = make_graph(args, args.seed)
    if args.weights:
        g = gen_weights(g, args.seed + 1)
    text = format_graph(g)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ccmst", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, reps_default=1):
        p.add_argument("--n", type=int)
        p.add_argument("--model", choices=["gnp", "planted", "path"], default="gnp")
        p.add_argument("--p", type=float, help="edge probability (gnp) or extra in-block density (planted)")
        p.add_argument("--sizes", help="comma-separated block sizes for the planted model")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reps", type=int, default=reps_default)
        p.add_argument("--out", help=f"report path (JSON, plus a CSV beside it); default ${OUT_ENV}/<command>.json or stdout")
        p.add_argument("--params", action="append", default=[], metavar="K=V", help="PipelineParams override")
        p.add_argument("--graph", help="read the graph from a file instead of generating one")

    g = sub.add_parser("gen", help="write a generated graph in the text format")
    common(g)
    g.add_argument("--weights", action="store_true", help="attach distinct random weights")
    c = sub.add_parser("cc", help="connected components, checked against the oracle")
    common(c)
    m = sub.add_parser("mst", help="minimum spanning forest, checked against Kruskal")
    common(m)
    m.add_argument("--tie-break", action="store_true", help="accept duplicate weights silently")
    cl = sub.add_parser("claims", help="run claim campaigns; exit code reflects pass/fail")
    common(cl, reps_default=0)
    cl.add_argument("--suite", action="append", choices=list(SUITES) + ["all"])
    b = sub.add_parser("bench", help="round and load metrics across n")
    common(b)
    b.add_argument("--ns", dest="sizes_n", type=int, nargs="+")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "claims":
            args.reps_given = args.reps or None
        handler = {"cc": cmd_cc, "mst": cmd_mst, "claims": cmd_claims, "bench": cmd_bench}[args.command]
        report, rows, ok = handler(args)
    except (GraphInputError, ConfigError, OSError) as e:
        err = {"error": {"type": type(e).__name__, "message": str(e)}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    except SimulationError as e:
        err = {"error": {"type": type(e).__name__, "message": str(e)}}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 3
    report = {"config": _config(args), **report, "_rows": rows}
    _emit(args, report)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
