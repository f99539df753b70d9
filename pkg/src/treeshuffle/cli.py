"""Configuration-driven experiment runner.

Subcommands: ``run`` executes a protocol over seeded trials and emits one CSV
row per trial, ``bounds`` tabulates every applicable lower bound, ``validate``
checks input files and reports what normalization would rewrite.

File formats (JSON):
  topology      {"symmetric": true, "nodes": [{"id": 0, "compute": true}, ...],
                 "edges": [{"from": 0, "to": 4, "bw": "2"}, ...]}
                ``bw`` is a decimal/fraction string, a number, or "inf".  For
                symmetric files a missing reverse edge is mirrored.
  distribution  [{"node": 0, "r": [3, 7], "s": 4}, ...]
                element lists give explicit keys; an integer count synthesizes
                globally distinct keys; a {"key": mult} object gives per-key
                multiplicities (joins).

Generator specs replace a distribution file: ``gen:uniform,n=256``,
``gen:zipf:1.2,n=512``, ``gen:adversarial,n=128``.

Exit codes: 0 ok, 2 configuration error, 3 protocol produced wrong output.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import bounds as bounds_mod
from .asymstar import asym_star_intersect, rf_star_intersect, sf_star_intersect
from .cartesian import (generalized_star_cartesian, star_cartesian,
                        tree_cartesian, whc_unequal)
from .intersect import star_intersect, tree_intersect
from .joinstar import star_join
from .oracle import opt_one_round
from .rational import INF, dec12, format_bw, is_inf, parse_bw
from .simkernel import (Distribution, REL_R, REL_S, adversarial_sort_instance,
                        cost, skewed_join_instance, uniform_instance,
                        verify_cartesian, verify_intersection, verify_join,
                        verify_sorted)
from .sortnet import default_root, send_all_to_max, terasort, valid_ordering, wts_sort
from .topology import COMPUTE, ROUTER, Topology, normalize_tree

CSV_HEADER = "trial,task,algo,rounds,tuple_cost,bit_cost,lb_value,lb_kind,ratio,seed"


class ConfigError(Exception):
    pass


def load_topology(path: str) -> Topology:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}")
    try:
        kinds = {int(n["id"]): (COMPUTE if n.get("compute") else ROUTER)
                 for n in doc["nodes"]}
        edges = {}
        for e in doc["edges"]:
            edges[(int(e["from"]), int(e["to"]))] = parse_bw(e["bw"])
        symmetric = bool(doc.get("symmetric", False))
        if symmetric:
            for (u, v), bw in list(edges.items()):
                edges.setdefault((v, u), bw)
        return Topology(kinds, edges, symmetric)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad topology: {exc}")


def load_distribution(path: str, topo: Topology) -> Distribution:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}")
    if not isinstance(doc, list):
        raise ConfigError(f"{path}: expected a list of node entries")
    r_parts: Dict[int, List[int]] = {}
    s_parts: Dict[int, List[int]] = {}
    fresh = [10 ** 9]

    def expand(value) -> List[int]:
        if value is None:
            return []
        if isinstance(value, int):
            out = list(range(fresh[0], fresh[0] + value))
            fresh[0] += value
            return out
        if isinstance(value, dict):
            out = []
            for key, mult in sorted(value.items()):
                out.extend([int(key)] * int(mult))
            return out
        return [int(x) for x in value]

    try:
        for entry in doc:
            v = int(entry["node"])
            if v not in topo.kinds or not topo.is_compute(v):
                raise ConfigError(f"{path}: node {v} is not a compute node")
            r_parts[v] = expand(entry.get("r"))
            s_parts[v] = expand(entry.get("s"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad distribution: {exc}")
    return Distribution(topo.compute_nodes, r_parts, s_parts)


def build_generated(spec: str, topo: Topology, task: str, seed: int) -> Distribution:
    body = spec[len("gen:"):] if spec.startswith("gen:") else spec
    head, _, rest = body.partition(",")
    name, _, inline = head.partition(":")
    params: Dict[str, str] = {}
    if inline:
        params["param"] = inline
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        params[k.strip()] = v.strip()
    try:
        n = int(params.get("n", "256"))
        if name == "uniform":
            n_r = int(params.get("r", str(n // 2)))
            n_s = int(params.get("s", str(n - n // 2)))
            if task == "sort":
                return uniform_instance(topo, n, 0, seed, overlap=False)
            return uniform_instance(topo, n_r, n_s, seed)
        if name == "zipf":
            z = float(params.get("param", params.get("s", "1.2")))
            return skewed_join_instance(topo, n, z, seed)
        if name == "adversarial":
            order = valid_ordering(topo, default_root(topo))
            base, extra = divmod(n, len(order))
            sizes = {v: base + (1 if i < extra else 0) for i, v in enumerate(order)}
            return adversarial_sort_instance(topo, sizes, order)
    except ValueError as exc:
        raise ConfigError(f"bad generator spec {spec!r}: {exc}")
    raise ConfigError(f"unknown generator {name!r}")


ALGOS = {
    ("intersect", "star"): ("star", lambda t, d, s: star_intersect(t, d, s)[:2]),
    ("intersect", "tree"): ("tree", lambda t, d, s: tree_intersect(t, d, s)[:2]),
    ("intersect", "asym-sf"): ("star", lambda t, d, s: sf_star_intersect(t, d, s)[:2]),
    ("intersect", "asym-rf"): ("star", lambda t, d, s: rf_star_intersect(t, d)[:2]),
    ("intersect", "asym-general"): ("star", lambda t, d, s: asym_star_intersect(t, d, s)[:2]),
    ("cartesian", "star"): ("star", lambda t, d, s: star_cartesian(t, d)),
    ("cartesian", "tree"): ("tree", lambda t, d, s: tree_cartesian(t, d)),
    ("cartesian", "unequal"): ("star", lambda t, d, s: whc_unequal(t, d)),
    ("cartesian", "generalized"): ("star", lambda t, d, s: generalized_star_cartesian(t, d)[:2]),
    ("sort", "wts"): ("tree", lambda t, d, s: wts_sort(t, d, s)[:2]),
    ("sort", "terasort"): ("tree", lambda t, d, s: terasort(t, d, s)),
    ("sort", "converge"): ("tree", lambda t, d, s: send_all_to_max(t, d)),
    ("join", "star"): ("star", lambda t, d, s: star_join(t, d, s)),
}


def pick_bound(task: str, algo: str, t: Topology, dist: Distribution):
    if task == "intersect":
        if algo == "asym-sf":
            return bounds_mod.lb_asym_star(t, dist, bounds_mod.VARIANT_SENDING_FREE)
        if algo == "asym-rf":
            return bounds_mod.lb_asym_star(t, dist, bounds_mod.VARIANT_RECEIVING_FREE)
        if algo == "asym-general":
            return bounds_mod.lb_asym_star(t, dist, bounds_mod.VARIANT_GENERAL)
        return bounds_mod.lb_intersect_tree(t, dist)
    if task == "cartesian":
        if algo in ("unequal", "generalized"):
            return bounds_mod.lb_cp_unequal(t, dist)
        cut = bounds_mod.lb_cartesian_cut(t, dist)
        cover = bounds_mod.lb_cartesian_cover(t, dist)
        if cover.value is not None and cover.value > cut.value:
            return cover
        return cut
    if task == "sort":
        return bounds_mod.lb_sorting(t, dist)
    return bounds_mod.lb_join_star(t, dist)


def verify_run(task: str, t: Topology, dist: Distribution, state) -> bool:
    if task == "intersect":
        return verify_intersection(state, dist)[0]
    if task == "cartesian":
        return verify_cartesian(state, dist)[0]
    if task == "join":
        return verify_join(state, dist)[0]
    return verify_sorted(state, dist, valid_ordering(t, default_root(t)))


def cmd_run(args) -> int:
    key = (args.task, args.algo)
    if key not in ALGOS:
        print(f"error: no algorithm {args.algo!r} for task {args.task!r}", file=sys.stderr)
        return 2
    shape, runner = ALGOS[key]
    try:
        topo = load_topology(args.topo)
        if shape == "star" and not topo.is_star():
            raise ConfigError(f"algorithm {args.algo!r} requires a star topology")
        if shape == "tree":
            if not topo.symmetric or not topo.is_tree():
                raise ConfigError("tree algorithms require a symmetric tree")
            topo = normalize_tree(topo)
        rows = []
        trace_rows: Dict[int, List[str]] = {}
        for trial in range(args.trials):
            trial_seed = args.seed + trial
            if args.dist.startswith("gen:"):
                dist = build_generated(args.dist, topo, args.task, trial_seed)
            else:
                dist = load_distribution(args.dist, topo)
            trace, state = runner(topo, dist, trial_seed)
            trace.element_width_bits = args.width_bits
            if not verify_run(args.task, topo, dist, state):
                print(f"error: trial {trial}: output verification failed", file=sys.stderr)
                return 3
            report = cost(trace, topo, seed=trial_seed)
            lb = pick_bound(args.task, args.algo, topo, dist)
            lb_value = lb.value if lb.value is not None else None
            if lb_value is not None and not is_inf(lb_value) and lb_value > 0 \
                    and not is_inf(report.tuple_cost):
                ratio_txt = dec12(report.tuple_cost / lb_value)
            else:
                ratio_txt = ""
            row = [str(trial), args.task, args.algo, str(report.rounds),
                   dec12(report.tuple_cost), dec12(report.bit_cost),
                   dec12(lb_value) if lb_value is not None else "",
                   lb.kind, ratio_txt, str(trial_seed)]
            if args.oracle:
                if dist.total <= 8 and len(dist.nodes) <= 3 and args.task != "sort":
                    opt = opt_one_round(topo, dist, args.task).opt_cost
                    certified = lb.certified if lb.value is not None else None
                    ok = (certified is None or certified <= opt) and opt <= report.tuple_cost
                    row.extend([dec12(opt), "1" if ok else "0"])
                else:
                    row.extend(["", ""])
            rows.append(",".join(row))
            if args.trace:
                lines = ["round,edge_from,edge_to,tuples"]
                for rnd, charges in enumerate(trace.rounds):
                    for (u, v) in sorted(charges):
                        lines.append(f"{rnd},{u},{v},{charges[(u, v)]}")
                trace_rows[trial] = lines
        header = CSV_HEADER + (",oracle_opt,sandwich_ok" if args.oracle else "")
        text = "\n".join([header] + rows) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if args.trace:
            for trial, lines in trace_rows.items():
                path = args.trace if trial == 0 else f"{args.trace}.{trial}"
                with open(path, "w") as fh:
                    fh.write("\n".join(lines) + "\n")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def cmd_bounds(args) -> int:
    try:
        topo = load_topology(args.topo)
        if topo.symmetric and topo.is_tree():
            topo = normalize_tree(topo)
        if args.dist.startswith("gen:"):
            dist = build_generated(args.dist, topo, "join", args.seed)
        else:
            dist = load_distribution(args.dist, topo)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reports = []
    if topo.symmetric and topo.is_tree():
        reports.append(bounds_mod.lb_intersect_tree(topo, dist))
        reports.append(bounds_mod.lb_cartesian_cut(topo, dist))
        reports.append(bounds_mod.lb_cartesian_cover(topo, dist))
        reports.append(bounds_mod.lb_sorting(topo, dist))
    if topo.is_star():
        if topo.symmetric:
            reports.append(bounds_mod.lb_join_star(topo, dist))
            reports.append(bounds_mod.lb_cp_unequal(topo, dist))
        for variant in (bounds_mod.VARIANT_SENDING_FREE,
                        bounds_mod.VARIANT_RECEIVING_FREE,
                        bounds_mod.VARIANT_GENERAL):
            reports.append(bounds_mod.lb_asym_star(topo, dist, variant))
    lines = ["kind,value,certified,witness,note"]
    for rep in reports:
        value = dec12(rep.value) if rep.value is not None else ""
        cert = dec12(rep.certified) if rep.value is not None else ""
        witness = "" if rep.witness is None else str(rep.witness).replace(",", ";")
        lines.append(f"{rep.kind},{value},{cert},{witness},{rep.note}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args) -> int:
    problems = []
    try:
        topo = load_topology(args.topo)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"nodes: {len(topo.node_ids)} ({len(topo.compute_nodes)} compute)")
    print(f"symmetric: {topo.symmetric}")
    if topo.symmetric and topo.is_tree():
        norm = normalize_tree(topo)
        fused = set(topo.node_ids) - set(norm.node_ids)
        added = set(norm.node_ids) - set(topo.node_ids)
        internal = [v for v in topo.compute_nodes
                    if topo.degree(v) > 1 and len(topo.node_ids) > 1]
        if internal:
            print(f"normalize: compute nodes made leaves: {sorted(internal)}")
        if fused:
            print(f"normalize: nodes fused or pruned: {sorted(fused)}")
        if added:
            print(f"normalize: routers added: {sorted(added)}")
        if not internal and not fused and not added:
            print("normalize: already normalized")
    elif not topo.is_tree():
        problems.append("topology is not a tree")
    if args.dist:
        try:
            dist = load_distribution(args.dist, topo)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for rel in (REL_R, REL_S):
            keys = list(dist.keys(rel))
            dupes = sorted({k for k in keys if keys.count(k) > 1}) if len(keys) < 10000 else []
            if dupes:
                print(f"warning: duplicate {rel}-keys across nodes: {dupes[:8]}")
        if dist.total == 0:
            print("warning: empty distribution")
        print(f"elements: |R|={dist.n_r} |S|={dist.n_s}")
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="treeshuffle",
                                     description="simulate shuffle protocols on "
                                                 "bandwidth-annotated tree networks")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a protocol over seeded trials")
    run.add_argument("--task", required=True,
                     choices=["intersect", "cartesian", "sort", "join"])
    run.add_argument("--algo", required=True)
    run.add_argument("--topo", required=True)
    run.add_argument("--dist", required=True, help="distribution file or gen:SPEC")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--width-bits", type=int, default=64)
    run.add_argument("--out")
    run.add_argument("--trace")
    run.add_argument("--oracle", action="store_true",
                     help="append brute-force sandwich columns on tiny instances")
    run.set_defaults(func=cmd_run)

    bnd = sub.add_parser("bounds", help="evaluate every applicable lower bound")
    bnd.add_argument("--topo", required=True)
    bnd.add_argument("--dist", required=True)
    bnd.add_argument("--seed", type=int, default=0)
    bnd.add_argument("--out")
    bnd.set_defaults(func=cmd_bounds)

    val = sub.add_parser("validate", help="check input files and report rewrites")
    val.add_argument("--topo", required=True)
    val.add_argument("--dist")
    val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
