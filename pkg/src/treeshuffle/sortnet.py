"""Distributed sorting on symmetric trees: proportional redistribution, the
bandwidth-oblivious four-round sampling sort, and baselines.

The target layout is a left-to-right traversal order of the compute nodes;
after a run, node i's items are locally sorted and no larger than node j's
for i < j.
"""
from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .simkernel import Distribution, NodeState, Runtime, TrafficTrace
from .topology import Topology


def valid_ordering(t: Topology, root: int) -> List[int]:
    """Compute nodes in depth-first order from the root, children visited in
    id order."""
    order: List[int] = []
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        if t.is_compute(v):
            order.append(v)
        for w in reversed(t.neighbors(v)):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return order


def default_root(t: Topology) -> int:
    routers = [v for v in t.node_ids if not t.is_compute(v)]
    return routers[0] if routers else t.node_ids[0]


def proportional(heavy_sizes: Sequence[int], n_u: int) -> List[int]:
    """Split n_u items across the heavy nodes proportionally to their sizes,
    carrying the rounding slack so any window over-allocates by at most one.
    """
    if not heavy_sizes:
        if n_u > 0:
            raise ValueError("no heavy nodes to receive data")
        return []
    if any(s <= 0 for s in heavy_sizes):
        raise ValueError("heavy sizes must be positive")
    total = sum(heavy_sizes)
    delta = Fraction(0)
    out: List[int] = []
    for size in heavy_sizes:
        x = Fraction(size * n_u, total)
        frac = x - (x.numerator // x.denominator)
        floor_x = x.numerator // x.denominator
        if delta >= frac:
            out.append(floor_x)
            delta -= frac
        else:
            out.append(floor_x + 1)
            delta += 1 - frac
    return out


@dataclass
class SortPlan:
    heavy: List[int]
    light: List[int]
    rho: float
    splitters: List[float]
    sample_count: int
    interval_counts: List[int]
    post_round1_sizes: Dict[int, int]


def _sample_rate(n_nodes: int, n: int) -> float:
    if n <= 0:
        return 0.0
    return min(1.0, 4.0 * n_nodes / n * math.log(max(2, n_nodes * n)))


def _route_by_splitters(rt: Runtime, rnd: int, senders: Sequence[int],
                        targets: Sequence[int], inner: List[float]) -> None:
    for v in senders:
        buckets: Dict[int, List[int]] = {}
        for x in list(rt.state.items[v]):
            idx = bisect_right(inner, x)
            buckets.setdefault(targets[idx], []).append(x)
        for u, values in sorted(buckets.items()):
            if u != v:
                rt.move_items(rnd, v, u, values)
    for u in targets:
        rt.state.items[u].sort()


def wts_sort(t: Topology, dist: Distribution, seed: int
             ) -> Tuple[TrafficTrace, NodeState, SortPlan]:
    """Four-round sampling sort.

    Light nodes first drain proportionally into the heavy ones; splitter
    positions are then weighted by the heavy nodes' post-drain loads, so each
    heavy node keeps roughly what it already holds.
    """
    rng = random.Random(seed)
    nodes = dist.nodes
    n = dist.n_r
    k_nodes = len(nodes)
    order = valid_ordering(t, default_root(t))
    threshold_num = n  # heavy iff 2 * |V_C| * N_v >= N
    heavy = [v for v in order if 2 * k_nodes * dist.count("r", v) >= threshold_num and n > 0]
    light = [v for v in order if v not in set(heavy)]
    if not heavy and n > 0:
        heavy = [max(order, key=lambda v: (dist.count("r", v), -v))]
        light = [v for v in order if v != heavy[0]]

    rt = Runtime(t, dist)
    r1 = rt.new_round()
    heavy_sizes = [dist.count("r", v) for v in heavy]
    for u in light:
        items = sorted(rt.state.items[u])
        if not items:
            continue
        shares = proportional(heavy_sizes, len(items))
        off = 0
        for v, share in zip(heavy, shares):
            chunk = items[off:off + share]
            off += share
            if chunk:
                rt.move_items(r1, u, v, chunk)
    m_sizes = {v: len(rt.state.items[v]) for v in heavy}

    r2 = rt.new_round()
    rho = _sample_rate(k_nodes, n)
    samples: List[int] = []
    coordinator = heavy[0] if heavy else (order[0] if order else None)
    for v in heavy:
        mine = [x for x in rt.state.items[v] if rng.random() < rho]
        samples.extend(mine)
        if v != coordinator and mine:
            rt.send_count(r2, v, [coordinator], len(mine))

    r3 = rt.new_round()
    samples.sort()
    s = len(samples)
    step = max(1, math.ceil(s / max(1, k_nodes)))
    counts = [math.ceil(k_nodes * m_sizes[v] / n) if n else 0 for v in heavy]
    inner: List[float] = []
    acc = 0
    for c in counts[:-1]:
        acc += c
        idx = min(acc * step, s)
        inner.append(float(samples[idx - 1]) if idx >= 1 and s else math.inf)
    if heavy and len(heavy) > 1:
        rt.send_count(r3, coordinator, [v for v in heavy if v != coordinator],
                      len(inner) + 2)

    r4 = rt.new_round()
    if heavy:
        _route_by_splitters(rt, r4, heavy, heavy, inner)
    plan = SortPlan(heavy=heavy, light=light, rho=rho,
                    splitters=[-math.inf] + inner + [math.inf],
                    sample_count=s, interval_counts=counts,
                    post_round1_sizes=m_sizes)
    return rt.trace, rt.state, plan


def terasort(t: Topology, dist: Distribution, seed: int
             ) -> Tuple[TrafficTrace, NodeState]:
    """Three-round uniform-splitter baseline: sample, broadcast evenly spaced
    splitters, route."""
    rng = random.Random(seed)
    nodes = dist.nodes
    order = valid_ordering(t, default_root(t))
    n = dist.n_r
    k_nodes = len(nodes)
    coordinator = min(nodes)

    rt = Runtime(t, dist)
    r1 = rt.new_round()
    rho = _sample_rate(k_nodes, n)
    samples: List[int] = []
    for v in order:
        mine = [x for x in rt.state.items[v] if rng.random() < rho]
        samples.extend(mine)
        if v != coordinator and mine:
            rt.send_count(r1, v, [coordinator], len(mine))

    r2 = rt.new_round()
    samples.sort()
    s = len(samples)
    step = max(1, math.ceil(s / max(1, k_nodes)))
    inner = []
    for i in range(1, k_nodes):
        idx = min(i * step, s)
        inner.append(float(samples[idx - 1]) if idx >= 1 and s else math.inf)
    if k_nodes > 1:
        rt.send_count(r2, coordinator, [v for v in order if v != coordinator],
                      k_nodes + 1)

    r3 = rt.new_round()
    _route_by_splitters(rt, r3, order, order, inner)
    return rt.trace, rt.state


def send_all_to_max(t: Topology, dist: Distribution) -> Tuple[TrafficTrace, NodeState]:
    """Single-round convergence used when one node already dominates."""
    target = max(dist.nodes, key=lambda v: (dist.count("r", v), -v))
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    for v in dist.nodes:
        if v != target:
            rt.move_items(rnd, v, target, list(rt.state.items[v]))
    rt.state.items[target].sort()
    return rt.trace, rt.state
