"""Set intersection on symmetric stars and trees.

The tree algorithm partitions compute nodes into blocks that each hold at
least a small-relation's worth of data, hashes the small relation into every
block and each large-relation element within its own block.  Routing depends
only on the topology and the initial data sizes, never on bandwidths.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .simkernel import (Distribution, NodeState, REL_R, REL_S, Runtime,
                        TrafficTrace, make_hash)
from .topology import Edge, Topology, edge_cut


def _relation_order(dist: Distribution) -> Tuple[str, str]:
    """(smaller, larger) relation tags; ties keep R first."""
    return (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)


@dataclass
class EdgeClasses:
    """Tree edges split by whether a cut side holds less than a
    small-relation's worth of data."""

    alpha: FrozenSet[Edge]  # canonical (min,max) pairs
    beta: FrozenSet[Edge]


def classify_edges(t: Topology, dist: Distribution) -> EdgeClasses:
    small, _ = _relation_order(dist)
    n_small = dist.count(small, None)
    alpha, beta = set(), set()
    for e in t.undirected_edges():
        cut = edge_cut(t, e)
        minus = sum(dist.size(v) for v in cut.minus)
        plus = sum(dist.size(v) for v in cut.plus)
        (alpha if min(minus, plus) < n_small else beta).add(e)
    return EdgeClasses(alpha=frozenset(alpha), beta=frozenset(beta))


@dataclass
class Partition:
    """Blocks of compute nodes plus the tree edges spanning each block."""

    blocks: List[FrozenSet[int]]
    spanning_edges: List[FrozenSet[Edge]]
    visits: int = 0  # work counter for the construction pass


def _spanning_edges(t: Topology, members: FrozenSet[int]) -> FrozenSet[Edge]:
    edges: Set[Edge] = set()
    members = sorted(members)
    for v in members[1:]:
        nodes = t.path_nodes(members[0], v)
        for a, b in zip(nodes, nodes[1:]):
            edges.add((min(a, b), max(a, b)))
    return frozenset(edges)


def balanced_partition(t: Topology, dist: Distribution) -> Partition:
    """Group compute nodes so every block carries at least a small-relation's
    worth of data and no tree edge serves two blocks.

    Works leaf-inward over the subtree spanned by the heavy cut edges,
    merging underweight groups into their unique neighbor.
    """
    small, _ = _relation_order(dist)
    n_small = dist.count(small, None)
    classes = classify_edges(t, dist)
    if not classes.beta or n_small == 0:
        members = frozenset(dist.nodes)
        return Partition(blocks=[members], spanning_edges=[_spanning_edges(t, members)],
                         visits=len(t.node_ids))

    beta_adj: Dict[int, Set[int]] = {}
    for (a, b) in classes.beta:
        beta_adj.setdefault(a, set()).add(b)
        beta_adj.setdefault(b, set()).add(a)
    beta_nodes = set(beta_adj)

    # group(x): compute nodes reachable from x without touching a beta edge
    group: Dict[int, Set[int]] = {}
    for x in sorted(beta_nodes):
        seen = {x}
        stack = [x]
        reach = {x} if t.is_compute(x) else set()
        while stack:
            u = stack.pop()
            for w in t.neighbors(u):
                key = (min(u, w), max(u, w))
                if key in classes.beta or w in seen:
                    continue
                seen.add(w)
                stack.append(w)
                if t.is_compute(w):
                    reach.add(w)
        group[x] = reach

    weight = {x: sum(dist.size(v) for v in group[x]) for x in beta_nodes}
    visits = len(beta_nodes)
    blocks: List[FrozenSet[int]] = []
    remaining = set(beta_nodes)
    while remaining:
        visits += 1
        leaves = [x for x in remaining if len(beta_adj[x] & remaining) <= 1]
        x = min(leaves, key=lambda v: (weight[v], v))
        if weight[x] >= n_small or len(remaining) == 1:
            assert weight[x] >= n_small, "last group must carry a full block"
            blocks.append(frozenset(group[x]))
        else:
            (y,) = beta_adj[x] & remaining
            group[y] |= group[x]
            weight[y] += weight[x]
        remaining.discard(x)

    blocks.sort(key=lambda b: tuple(sorted(b)))
    return Partition(blocks=blocks,
                     spanning_edges=[_spanning_edges(t, b) for b in blocks],
                     visits=visits)


def _block_hashes(dist: Distribution, blocks: List[FrozenSet[int]], seed: int):
    hashes = []
    for i, block in enumerate(blocks):
        total = sum(dist.size(v) for v in block)
        probs = {v: Fraction(dist.size(v), total) for v in sorted(block) if dist.size(v)}
        hashes.append(make_hash(seed, f"block-{i}", probs))
    return hashes


def tree_intersect(t: Topology, dist: Distribution, seed: int
                   ) -> Tuple[TrafficTrace, NodeState]:
    """One-round intersection on a normalized symmetric tree."""
    small, large = _relation_order(dist)
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if dist.count(small, None) == 0:
        return rt.trace, rt.state
    part = balanced_partition(t, dist)
    hashes = _block_hashes(dist, part.blocks, seed)
    block_of = {v: i for i, block in enumerate(part.blocks) for v in block}

    for v in dist.nodes:
        groups: Dict[Tuple[int, ...], List[int]] = {}
        for uid in dist.uids(small, v):
            key = dist.key_of(small, uid)
            dests = tuple(sorted({h(key) for h in hashes}))
            groups.setdefault(dests, []).append(uid)
        for dests, uids in sorted(groups.items()):
            rt.send_uids(rnd, v, dests, small, uids)
        h_own = hashes[block_of[v]]
        large_groups: Dict[int, List[int]] = {}
        for uid in dist.uids(large, v):
            large_groups.setdefault(h_own(dist.key_of(large, uid)), []).append(uid)
        for dest, uids in sorted(large_groups.items()):
            rt.send_uids(rnd, v, [dest], large, uids)
    return rt.trace, rt.state


def star_intersect(t: Topology, dist: Distribution, seed: int
                   ) -> Tuple[TrafficTrace, NodeState]:
    """One-round intersection on a symmetric star.

    Nodes already holding a small-relation's worth on both cut sides gather
    the whole small relation; everything else is hashed proportionally to
    local data size.
    """
    small, large = _relation_order(dist)
    n_small = dist.count(small, None)
    sizes = dist.sizes()
    total = dist.total
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if n_small == 0:
        return rt.trace, rt.state

    alpha = [v for v in dist.nodes if min(sizes[v], total - sizes[v]) < n_small]
    beta = [v for v in dist.nodes if v not in set(alpha)]
    scaled = n_small + sum(dist.count(large, v) for v in alpha)
    probs: Dict[int, Fraction] = {}
    for v in alpha:
        if sizes[v]:
            probs[v] = Fraction(sizes[v], scaled)
    for v in beta:
        if dist.count(small, v):
            probs[v] = Fraction(dist.count(small, v), scaled)
    h = make_hash(seed, "star-intersect", probs)

    for v in dist.nodes:
        groups: Dict[Tuple[int, ...], List[int]] = {}
        for uid in dist.uids(small, v):
            dests = tuple(sorted(set(beta) | {h(dist.key_of(small, uid))}))
            groups.setdefault(dests, []).append(uid)
        for dests, uids in sorted(groups.items()):
            rt.send_uids(rnd, v, dests, small, uids)
        if v in set(alpha):
            large_groups: Dict[int, List[int]] = {}
            for uid in dist.uids(large, v):
                large_groups.setdefault(h(dist.key_of(large, uid)), []).append(uid)
            for dest, uids in sorted(large_groups.items()):
                rt.send_uids(rnd, v, [dest], large, uids)
    return rt.trace, rt.state
