"""Brute-force optimal one-round costs on tiny instances.

The oracle is data-aware: it minimizes over destination assignments for the
concrete instance, under the same multicast charging rule as the simulator.
That makes it a valid lower bound on any worst-case optimum and the middle
term of the bound/algorithm sandwich checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .rational import Cost, INF, ZERO, is_inf, ratio
from .simkernel import Distribution, REL_R, REL_S
from .topology import Topology

TASK_INTERSECT = "intersect"
TASK_CARTESIAN = "cartesian"
TASK_JOIN = "join"


@dataclass
class OracleResult:
    opt_cost: Cost
    witness: Dict[Tuple[str, int], FrozenSet[int]]
    states: int


class _Search:
    def __init__(self, t: Topology, dist: Distribution, max_states: int):
        self.t = t
        self.dist = dist
        self.max_states = max_states
        self.states = 0
        self.best: Cost = INF
        self.best_witness: Optional[Dict] = None
        self.edge_sets: Dict[Tuple[int, FrozenSet[int]], List] = {}

    def edges_for(self, src: int, dests: FrozenSet[int]):
        key = (src, dests)
        if key not in self.edge_sets:
            self.edge_sets[key] = sorted(self.t.steiner_edges(src, dests))
        return self.edge_sets[key]


def _element_list(dist: Distribution, task: str) -> List[Tuple[str, int]]:
    elems = []
    if task == TASK_INTERSECT or task == TASK_JOIN:
        shared = dist.key_set(REL_R) & dist.key_set(REL_S)
        for rel in (REL_R, REL_S):
            for uid in range(dist.count(rel, None)):
                if dist.key_of(rel, uid) in shared:
                    elems.append((rel, uid))
    else:
        for rel in (REL_R, REL_S):
            elems.extend((rel, uid) for uid in range(dist.count(rel, None)))
    return elems


def _feasible(dist: Distribution, task: str,
              holdings: Dict[str, Dict[int, Set[int]]]) -> bool:
    nodes = dist.nodes
    if task == TASK_CARTESIAN:
        for i in range(dist.n_r):
            for j in range(dist.n_s):
                if not any(i in holdings[REL_R][v] and j in holdings[REL_S][v]
                           for v in nodes):
                    return False
        return True
    shared = dist.key_set(REL_R) & dist.key_set(REL_S)
    if task == TASK_INTERSECT:
        for key in shared:
            r_uids = dist.uids_by_key(REL_R, key)
            s_uids = dist.uids_by_key(REL_S, key)
            if not any(any(u in holdings[REL_R][v] for u in r_uids)
                       and any(u in holdings[REL_S][v] for u in s_uids)
                       for v in nodes):
                return False
        return True
    for key in shared:
        for i in dist.uids_by_key(REL_R, key):
            for j in dist.uids_by_key(REL_S, key):
                if not any(i in holdings[REL_R][v] and j in holdings[REL_S][v]
                           for v in nodes):
                    return False
    return True


def opt_one_round(t: Topology, dist: Distribution, task: str,
                  max_states: int = 10 ** 8) -> OracleResult:
    """Exhaustive minimum over per-element destination subsets, with
    branch-and-bound pruning on the running bottleneck edge."""
    nodes = dist.nodes
    if dist.total > 8 or len(nodes) > 3:
        raise ValueError("oracle limited to 8 elements on 3 compute nodes")
    elems = _element_list(dist, task)
    search = _Search(t, dist, max_states)
    subsets: List[FrozenSet[int]] = [frozenset(c)
                                     for size in range(len(nodes) + 1)
                                     for c in combinations(nodes, size)]

    holdings = {REL_R: {v: set(dist.uids(REL_R, v)) for v in nodes},
                REL_S: {v: set(dist.uids(REL_S, v)) for v in nodes}}
    loads: Dict[Tuple[int, int], int] = {}
    assignment: Dict[Tuple[str, int], FrozenSet[int]] = {}

    def recurse(idx: int, running: Cost) -> None:
        search.states += 1
        if search.states > search.max_states:
            raise RuntimeError("oracle state guard exceeded")
        if idx == len(elems):
            if _feasible(dist, task, holdings):
                if running < search.best or search.best_witness is None:
                    search.best = running
                    search.best_witness = dict(assignment)
            return
        rel, uid = elems[idx]
        holder = dist.holder_of(rel, uid)
        for dests in subsets:
            extra = dests - {holder}
            edges = search.edges_for(holder, frozenset(extra)) if extra else []
            worst = running
            for e in edges:
                load = loads.get(e, 0) + 1
                loads[e] = load
                worst = max(worst, ratio(load, t.bw(*e)))
            if worst < search.best or search.best_witness is None:
                for d in extra:
                    holdings[rel][d].add(uid)
                assignment[(rel, uid)] = dests
                recurse(idx + 1, worst)
                del assignment[(rel, uid)]
                for d in extra:
                    holdings[rel][d].discard(uid)
            for e in edges:
                loads[e] -= 1
                if not loads[e]:
                    del loads[e]

    recurse(0, ZERO)
    assert search.best_witness is not None, "converging everything is always feasible"
    return OracleResult(opt_cost=search.best, witness=search.best_witness,
                        states=search.states)


def _pareto_allocations(n_pairs_needed: int, cap: int, n_nodes: int) -> List[Tuple[int, ...]]:
    """Component-minimal integer load vectors y (as nonincreasing tuples) with
    sum_v y*min(y, cap) >= n_pairs_needed.

    Loads above ``cap`` are never needed: a single full copy of the key
    already witnesses every pair.
    """
    def produced(y: int) -> int:
        return y * min(y, cap)

    results: List[Tuple[int, ...]] = []

    def rec(prefix: List[int], got: int, bound: int) -> None:
        if got >= n_pairs_needed:
            results.append(tuple(prefix + [0] * (n_nodes - len(prefix))))
            return
        if len(prefix) == n_nodes:
            return
        for y in range(1, bound + 1):
            rec(prefix + [y], got + produced(y), y)

    rec([], 0, cap)
    if n_pairs_needed <= 0:
        return [tuple([0] * n_nodes)]
    pareto: List[Tuple[int, ...]] = []
    for cand in sorted(set(results)):
        dominated = any(o != cand and all(a <= b for a, b in zip(o, cand))
                        for o in results)
        if not dominated:
            pareto.append(cand)
    return pareto


def opt_packcp_assignment(key_sizes: Sequence[int],
                          budgets: Dict[int, Fraction]) -> OracleResult:
    """Counting-relaxation optimum for packing per-key products.

    y(v, a) tuples of key a at node v can witness at most y*min(y, N_a)
    output pairs; each key needs its full (N_a/2)^2 grid.  Minimizes the
    bottleneck max_v load_v / w_v over integer assignments.
    """
    if len(key_sizes) > 4 or len(budgets) > 4 or any(s > 16 for s in key_sizes):
        raise ValueError("assignment oracle limited to 4 keys x 4 nodes")
    nodes = sorted(budgets)
    per_key = []
    for size in key_sizes:
        need = (size // 2) * (size - size // 2)
        per_key.append(_pareto_allocations(need, size, len(nodes)))

    best: List[Cost] = [INF]
    best_loads: List[Optional[Tuple[int, ...]]] = [None]
    states = [0]

    def cost_of(loads: Sequence[int]) -> Cost:
        return max((ratio(load, budgets[v]) for v, load in zip(nodes, loads)),
                   default=ZERO)

    def rec(idx: int, loads: List[int]) -> None:
        states[0] += 1
        if cost_of(loads) >= best[0] and best_loads[0] is not None:
            return
        if idx == len(per_key):
            c = cost_of(loads)
            if c < best[0] or best_loads[0] is None:
                best[0] = c
                best_loads[0] = tuple(loads)
            return
        for vec in per_key[idx]:
            # allocations are node-anonymous; try them in every node order
            for perm in _distinct_permutations(vec):
                rec(idx + 1, [a + b for a, b in zip(loads, perm)])

    rec(0, [0] * len(nodes))
    witness = {("load", i): frozenset({best_loads[0][i]}) for i in range(len(nodes))} \
        if best_loads[0] else {}
    return OracleResult(opt_cost=best[0], witness=witness, states=states[0])


def _distinct_permutations(vec: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    from itertools import permutations
    return sorted(set(permutations(vec)))


def sandwich_check(t: Topology, dist: Distribution, task: str,
                   lb_certified: Cost, alg_cost: Cost) -> Dict[str, object]:
    """Assert certified-lower-bound <= oracle optimum <= algorithm cost."""
    opt = opt_one_round(t, dist, task).opt_cost
    ok = lb_certified <= opt <= alg_cost
    return {"lb": lb_certified, "opt": opt, "alg": alg_cost, "ok": ok}
