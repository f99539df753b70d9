"""Binary equi-join on a symmetric star: bandwidth-weighted hashing for the
light keys, skew splitting plus a packing dynamic program for the heavy ones.

Costs that involve square roots are carried as exact squares; two nonnegative
costs compare the same way their squares do, so the DP stays rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .asymstar import star_links
from .cartesian import pack_squares
from .rational import Cost, INF, ZERO, ceil_pow2_sqrt, is_inf
from .simkernel import (Distribution, NodeState, REL_R, REL_S, Runtime,
                        TrafficTrace, make_hash)
from .topology import Topology


@dataclass
class KeyStats:
    """Per-key tuple counts over the trimmed sub-instance used by the join."""

    degree_r: Dict[int, int]
    degree_s: Dict[int, int]
    trimmed_total: int          # |R'| + |S'|
    heavy_threshold: Cost
    heavy: Set[int]


def key_stats(dist: Distribution, kept_s_nodes: Sequence[int], total_bw: Cost) -> KeyStats:
    degree_r: Dict[int, int] = {}
    degree_s: Dict[int, int] = {}
    for key in dist.keys(REL_R):
        degree_r[key] = degree_r.get(key, 0) + 1
    kept = set(kept_s_nodes)
    for v in dist.nodes:
        if v in kept:
            for key in dist.part(REL_S, v):
                degree_s[key] = degree_s.get(key, 0) + 1
    trimmed = sum(degree_r.values()) + sum(degree_s.values())
    n_nodes = max(2, len(dist.nodes))
    if is_inf(total_bw):
        threshold: Cost = Fraction(1)
    else:
        # a key with one tuple per relation never needs packing
        threshold = max(Fraction(1),
                        Fraction(trimmed) * Fraction(math.log2(n_nodes)) / total_bw)
    heavy = {a for a in set(degree_r) | set(degree_s)
             if degree_r.get(a, 0) > threshold or degree_s.get(a, 0) > threshold}
    return KeyStats(degree_r, degree_s, trimmed, threshold, heavy)


# -- bandwidth-weighted hashing ------------------------------------------------


def hash_probabilities(weights: Dict[int, Cost]) -> Dict[int, Fraction]:
    """Per-node assignment probabilities proportional to bandwidth, dropping
    nodes whose link is too thin to be worth loading."""
    nodes = sorted(weights)
    if any(is_inf(weights[v]) for v in nodes):
        free = [v for v in nodes if is_inf(weights[v])]
        return {v: Fraction(1, len(free)) for v in free}
    total = sum((Fraction(weights[v]) for v in nodes), ZERO)
    m = len(nodes)
    if m >= 2 and math.log2(m) > 0:
        cutoff = total / Fraction(2 * m) / Fraction(math.log2(m))
        eligible = [v for v in nodes if Fraction(weights[v]) >= cutoff]
    else:
        eligible = nodes
    mass = sum((Fraction(weights[v]) for v in eligible), ZERO)
    return {v: Fraction(weights[v]) / mass for v in eligible}


def weighted_hash_join(t: Topology, dist: Distribution, seed: int
                       ) -> Tuple[TrafficTrace, NodeState]:
    """One-round hash join; keys land on a node with probability proportional
    to its link bandwidth.  Callers must have separated out heavy keys."""
    center, up, down = star_links(t)
    stats = key_stats(dist, dist.nodes, sum((Fraction(down[v]) for v in dist.nodes), ZERO)
                      if not any(is_inf(down[v]) for v in dist.nodes) else INF)
    if stats.heavy:
        raise ValueError(f"keys exceed the light threshold: {sorted(stats.heavy)[:4]}")
    h = make_hash(seed, "weighted-hash-join", hash_probabilities(down))
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    for rel in (REL_R, REL_S):
        for v in dist.nodes:
            groups: Dict[int, List[int]] = {}
            for uid in dist.uids(rel, v):
                groups.setdefault(h(dist.key_of(rel, uid)), []).append(uid)
            for target, uids in sorted(groups.items()):
                rt.send_uids(rnd, v, [target], rel, uids)
    return rt.trace, rt.state


# -- skew splitting -------------------------------------------------------------


@dataclass(frozen=True)
class VirtualKey:
    """One equal-sided slice of a key's output grid: the smaller side in full
    against one chunk of the larger side."""

    key: int
    chunk: int
    r_uids: Tuple[int, ...]
    s_uids: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.r_uids) + len(self.s_uids)


def split_skew(r_uids_by_key: Dict[int, Sequence[int]],
               s_uids_by_key: Dict[int, Sequence[int]]) -> List[VirtualKey]:
    """Slice each key into near-square pieces: the larger side is chunked to
    the smaller side's length (last chunk may run short); keys missing a side
    produce no output and are dropped."""
    out: List[VirtualKey] = []
    for key in sorted(set(r_uids_by_key) | set(s_uids_by_key)):
        r = tuple(r_uids_by_key.get(key, ()))
        s = tuple(s_uids_by_key.get(key, ()))
        if not r or not s:
            continue
        if len(r) <= len(s):
            for i in range(0, len(s), len(r)):
                out.append(VirtualKey(key, i // len(r), r, s[i:i + len(r)]))
        else:
            for i in range(0, len(r), len(s)):
                out.append(VirtualKey(key, i // len(s), r[i:i + len(s)], s))
    return out


# -- the packing dynamic program -------------------------------------------------


@dataclass
class PackStep:
    kind: str                 # "absorb" or "spread"
    keys: Tuple[int, ...]     # indices into the sorted key list
    nodes: Tuple[int, ...]    # node ids participating


@dataclass
class PackStrategy:
    value_sq: Fraction
    steps: List[PackStep]
    key_order: List[int]      # sorted virtual-key indices, ascending size
    node_order: List[int]     # node ids, ascending budget


def packcp(sizes: Sequence[int], budgets: Dict[int, Fraction]) -> PackStrategy:
    """Minimize the bottleneck of packing per-key products onto nodes.

    Each recurrence step either parks a suffix of the keys wholly on the
    biggest remaining node or spreads the largest key over a suffix of the
    nodes; costs are compared through their squares so the spread branch's
    square root stays exact.
    """
    key_order = sorted(range(len(sizes)), key=lambda i: (sizes[i], i))
    node_order = sorted(budgets, key=lambda v: (budgets[v], v))
    n_keys, n_nodes = len(key_order), len(node_order)
    suffix_sizes = [0] * (n_keys + 1)
    for i in range(n_keys - 1, -1, -1):
        suffix_sizes[i] = suffix_sizes[i + 1] + sizes[key_order[i]]
    suffix_wsq = [ZERO] * (n_nodes + 1)
    for i in range(n_nodes - 1, -1, -1):
        w = Fraction(budgets[node_order[i]])
        suffix_wsq[i] = suffix_wsq[i + 1] + w * w

    memo: Dict[Tuple[int, int], Tuple[Cost, Optional[Tuple[str, int]]]] = {}

    def solve(k: int, n: int) -> Tuple[Cost, Optional[Tuple[str, int]]]:
        if k == 0:
            return ZERO, None
        if n == 0:
            return INF, None
        if (k, n) in memo:
            return memo[(k, n)]
        best: Cost = INF
        choice: Optional[Tuple[str, int]] = None
        w_top = Fraction(budgets[node_order[n - 1]])
        for i in range(1, k + 1):
            park = suffix_sizes[i - 1] - suffix_sizes[k]
            cost_sq = (Fraction(park) / w_top) ** 2
            rest, _ = solve(i - 1, n - 1)
            val = max(cost_sq, rest)
            if val < best:
                best, choice = val, ("absorb", i)
        top_size = Fraction(sizes[key_order[k - 1]])
        for i in range(1, n + 1):
            denom = suffix_wsq[i - 1] - suffix_wsq[n]
            if denom == 0:
                continue
            cost_sq = top_size ** 2 / denom
            rest, _ = solve(k - 1, i - 1)
            val = max(cost_sq, rest)
            if val < best:
                best, choice = val, ("spread", i)
        memo[(k, n)] = (best, choice)
        return memo[(k, n)]

    value, _ = solve(n_keys, n_nodes)
    steps: List[PackStep] = []
    k, n = n_keys, n_nodes
    while k > 0:
        _, choice = solve(k, n)
        if choice is None:
            raise ValueError("infeasible packing: keys remain but no nodes do")
        kind, i = choice
        if kind == "absorb":
            steps.append(PackStep("absorb", tuple(key_order[i - 1:k]),
                                  (node_order[n - 1],)))
            k, n = i - 1, n - 1
        else:
            steps.append(PackStep("spread", (key_order[k - 1],),
                                  tuple(node_order[i - 1:n])))
            k, n = k - 1, i - 1
    if is_inf(value):
        raise ValueError("infeasible packing: no nodes available")
    return PackStrategy(value_sq=value, steps=steps, key_order=key_order,
                        node_order=node_order)


def recost_plan(plan: PackStrategy, sizes: Sequence[int],
                budgets: Dict[int, Fraction]) -> Fraction:
    """Squared bottleneck cost of a realized plan, recomputed step by step."""
    worst = ZERO
    for step in plan.steps:
        if step.kind == "absorb":
            load = sum(sizes[i] for i in step.keys)
            worst = max(worst, (Fraction(load) / Fraction(budgets[step.nodes[0]])) ** 2)
        else:
            denom = sum((Fraction(budgets[v]) ** 2 for v in step.nodes), ZERO)
            worst = max(worst, Fraction(sizes[step.keys[0]]) ** 2 / denom)
    return worst


def pack_eqcp(keys: Sequence[int], n: int, scale: Fraction,
              budgets: Dict[int, Fraction]) -> Optional[List[PackStep]]:
    """Equal-size specialisation: park whole keys on the biggest node while
    its budget lasts, else peel off a node subset whose squared budget mass
    sits in [n^2/2L^2, n^2/L^2) and spread the key there.

    Returns None when the scale is infeasible.
    """
    if n <= 0:
        return []
    remaining = {v: Fraction(budgets[v]) for v in budgets}
    steps: List[PackStep] = []
    lo = Fraction(n * n) / (2 * scale * scale)
    hi = Fraction(n * n) / (scale * scale)
    for key in keys:
        if not remaining:
            return None
        j = max(remaining, key=lambda v: (remaining[v], -v))
        if scale * remaining[j] >= n:
            steps.append(PackStep("absorb", (key,), (j,)))
            remaining[j] -= Fraction(n) / scale
            if remaining[j] <= 0:
                del remaining[j]
            continue
        single = [v for v in sorted(remaining) if remaining[v] ** 2 >= lo]
        if single:
            pick = [min(single, key=lambda v: (remaining[v], v))]
        else:
            pick = []
            acc = ZERO
            for v in sorted(remaining, key=lambda v: (remaining[v], v)):
                pick.append(v)
                acc += remaining[v] ** 2
                if acc >= lo:
                    break
            if acc < lo:
                return None
        steps.append(PackStep("spread", (key,), tuple(sorted(pick))))
        for v in pick:
            del remaining[v]
    return steps


# -- the composed join ------------------------------------------------------------


def _spread_regions(vkey: VirtualKey, nodes: Sequence[int],
                    budgets: Dict[int, Fraction]) -> Dict[int, Tuple[range, range]]:
    """Grid regions for one spread step: an equal-sided hypercube plan on the
    participating nodes, scaled to the slice's own grid."""
    n_rows, n_cols = len(vkey.r_uids), len(vkey.s_uids)
    n = max(n_rows, n_cols)
    wsq = sum((Fraction(budgets[v]) ** 2 for v in nodes), ZERO)
    sides = {v: ceil_pow2_sqrt(Fraction(4 * n * n) * Fraction(budgets[v]) ** 2 / wsq)
             for v in nodes}
    order = sorted(nodes)
    pos, covered = pack_squares([sides[v] for v in order],
                                weights=[budgets[v] for v in order])
    assert covered >= n
    out = {}
    for v, (x, y) in zip(order, pos):
        rows = range(min(x, n_rows), min(x + sides[v], n_rows))
        cols = range(min(y, n_cols), min(y + sides[v], n_cols))
        out[v] = (rows, cols)
    return out


def star_join(t: Topology, dist: Distribution, seed: int
              ) -> Tuple[TrafficTrace, NodeState]:
    """Equi-join on a symmetric star, one communication round.

    If a node already holds a full large-relation's worth, converge there.
    Otherwise the small relation is replicated to the big-data nodes, light
    keys are hashed bandwidth-proportionally, and heavy keys are sliced and
    packed.  Destination sets per tuple are unioned before sending so every
    shared path is charged once.
    """
    center, up, down = star_links(t)
    nodes = dist.nodes
    small, large = (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)
    n_small, n_large = dist.count(small, None), dist.count(large, None)
    sizes = dist.sizes()
    total = dist.total

    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if nodes and max(sizes.values()) >= n_large:
        target = max(nodes, key=lambda v: (sizes[v], -v))
        for v in nodes:
            if v != target:
                rt.send_uids(rnd, v, [target], REL_R, list(dist.uids(REL_R, v)))
                rt.send_uids(rnd, v, [target], REL_S, list(dist.uids(REL_S, v)))
        return rt.trace, rt.state

    beta = [v for v in nodes if min(sizes[v], total - sizes[v]) >= n_small]
    kept_large_nodes = [v for v in nodes if sizes[v] <= n_small]
    if any(is_inf(down[v]) for v in nodes):
        total_bw: Cost = INF
    else:
        total_bw = sum((Fraction(down[v]) for v in nodes), ZERO)

    small_by_key: Dict[int, List[int]] = {}
    large_by_key: Dict[int, List[int]] = {}
    for v in nodes:
        for uid in dist.uids(small, v):
            small_by_key.setdefault(dist.key_of(small, uid), []).append(uid)
    for v in kept_large_nodes:
        for uid in dist.uids(large, v):
            large_by_key.setdefault(dist.key_of(large, uid), []).append(uid)

    degree_small = {a: len(u) for a, u in small_by_key.items()}
    degree_large = {a: len(u) for a, u in large_by_key.items()}
    trimmed = sum(degree_small.values()) + sum(degree_large.values())
    m = max(2, len(nodes))
    threshold: Cost = Fraction(1) if is_inf(total_bw) else \
        max(Fraction(1), Fraction(trimmed) * Fraction(math.log2(m)) / total_bw)
    heavy_keys = {a for a in set(degree_small) | set(degree_large)
                  if degree_small.get(a, 0) > threshold or degree_large.get(a, 0) > threshold}

    h = make_hash(seed, "star-join-light", hash_probabilities(down))

    dest_small: Dict[int, Set[int]] = {uid: set(beta) for uids in small_by_key.values()
                                       for uid in uids}
    dest_large: Dict[int, Set[int]] = {}
    for a, uids in sorted(small_by_key.items()):
        if a not in heavy_keys:
            target = h(a)
            for uid in uids:
                dest_small[uid].add(target)
    for a, uids in sorted(large_by_key.items()):
        if a not in heavy_keys:
            target = h(a)
            for uid in uids:
                dest_large.setdefault(uid, set()).add(target)

    if heavy_keys:
        vkeys = split_skew({a: small_by_key.get(a, []) for a in sorted(heavy_keys)},
                           {a: large_by_key.get(a, []) for a in sorted(heavy_keys)})
        if vkeys:
            budgets = {v: Fraction(down[v]) if not is_inf(down[v]) else None
                       for v in nodes}
            if any(b is None for b in budgets.values()):
                budgets = {v: Fraction(1) for v in nodes}  # free links: any split works
            plan = packcp([vk.size for vk in vkeys], budgets)
            # split_skew received the small relation in the first slot
            uids_small_of = {i: vk.r_uids for i, vk in enumerate(vkeys)}
            uids_large_of = {i: vk.s_uids for i, vk in enumerate(vkeys)}
            for step in plan.steps:
                if step.kind == "absorb":
                    target = step.nodes[0]
                    for ki in step.keys:
                        for uid in uids_small_of[ki]:
                            dest_small[uid].add(target)
                        for uid in uids_large_of[ki]:
                            dest_large.setdefault(uid, set()).add(target)
                else:
                    ki = step.keys[0]
                    vk = vkeys[ki]
                    regions = _spread_regions(vk, step.nodes, budgets)
                    small_side = uids_small_of[ki]
                    large_side = uids_large_of[ki]
                    for v, (rows, cols) in sorted(regions.items()):
                        for pos in rows:
                            if pos < len(small_side):
                                dest_small[small_side[pos]].add(v)
                        for pos in cols:
                            if pos < len(large_side):
                                dest_large.setdefault(large_side[pos], set()).add(v)

    for rel, dest_map in ((small, dest_small), (large, dest_large)):
        groups: Dict[Tuple[int, Tuple[int, ...]], List[int]] = {}
        for uid, dests in dest_map.items():
            if not dests:
                continue
            holder = dist.holder_of(rel, uid)
            groups.setdefault((holder, tuple(sorted(dests))), []).append(uid)
        for (holder, dests), uids in sorted(groups.items()):
            rt.send_uids(rnd, holder, dests, rel, sorted(uids))
    return rt.trace, rt.state
