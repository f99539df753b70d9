"""Set intersection on asymmetric stars, plus the subset optimizers shared
with the lower-bound evaluation.

Three regimes: sending-free (infinite uplinks, the cost sits on downlinks),
receiving-free (infinite downlinks) and the general star with finite
bandwidth both ways.  Each algorithm prices a small set of strategies
analytically, executes the cheapest, and reports the choice.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .rational import Cost, INF, ZERO, is_inf, ratio
from .simkernel import (Distribution, NodeState, REL_R, REL_S, Runtime,
                        TrafficTrace, make_hash)
from .topology import Topology


@dataclass(frozen=True)
class SplitResult:
    chosen: FrozenSet[int]
    value: Cost


def opt_split(entries: Dict[int, Tuple[Cost, Cost]]) -> SplitResult:
    """Minimize max_{v in X} f(v) + sum_{v not in X} g(v) over subsets X.

    The optimal X has threshold form in f: adding an element with smaller f
    never raises the max and only sheds g-mass, so a sorted sweep over the
    n+1 prefixes is exact.
    """
    if not entries:
        return SplitResult(frozenset(), ZERO)
    order = sorted(entries, key=lambda v: (entries[v][0], v))
    suffix_g: List[Cost] = [ZERO] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        g = entries[order[i]][1]
        suffix_g[i] = INF if (is_inf(g) or is_inf(suffix_g[i + 1])) else g + suffix_g[i + 1]
    best_value: Cost = suffix_g[0]
    best_prefix = 0
    for i in range(1, len(order) + 1):
        f = entries[order[i - 1]][0]
        value = INF if (is_inf(f) or is_inf(suffix_g[i])) else f + suffix_g[i]
        if value < best_value:
            best_value, best_prefix = value, i
    return SplitResult(frozenset(order[:best_prefix]), best_value)


def opt_split3(entries: Dict[int, Tuple[Cost, Cost, Cost]]) -> SplitResult:
    """Minimize max_{v in X} f + max_{v not in X} g + sum_{v not in X} h."""
    if not entries:
        return SplitResult(frozenset(), ZERO)
    order = sorted(entries, key=lambda v: (entries[v][0], v))
    n = len(order)
    suffix_g: List[Cost] = [ZERO] * (n + 1)
    suffix_h: List[Cost] = [ZERO] * (n + 1)
    for i in range(n - 1, -1, -1):
        _, g, h = entries[order[i]]
        suffix_g[i] = max(g, suffix_g[i + 1])
        suffix_h[i] = INF if (is_inf(h) or is_inf(suffix_h[i + 1])) else h + suffix_h[i + 1]
    def total(i: int) -> Cost:
        f = entries[order[i - 1]][0] if i else ZERO
        parts = [f, suffix_g[i], suffix_h[i]]
        if any(is_inf(p) for p in parts):
            return INF
        return sum(parts, ZERO)
    best_value = total(0)
    best_prefix = 0
    for i in range(1, n + 1):
        value = total(i)
        if value < best_value:
            best_value, best_prefix = value, i
    return SplitResult(frozenset(order[:best_prefix]), best_value)


# -- shared star plumbing -----------------------------------------------------

def star_links(t: Topology) -> Tuple[int, Dict[int, Cost], Dict[int, Cost]]:
    """(center, uplink bw per compute node, downlink bw per compute node)."""
    center = t.star_center()
    if center is None:
        if len(t.compute_nodes) == 1:
            v = t.compute_nodes[0]
            return v, {v: INF}, {v: INF}
        raise ValueError("star topology required")
    up = {v: t.bw(v, center) for v in t.compute_nodes}
    down = {v: t.bw(center, v) for v in t.compute_nodes}
    return center, up, down


def _sum_finite(values) -> Cost:
    total = ZERO
    for x in values:
        if is_inf(x):
            return INF
        total += x
    return total


@dataclass
class StrategyChoice:
    chosen: str
    analytic: Dict[str, Cost]


def _converge_all(rt: Runtime, rnd: int, target: int) -> None:
    for v in rt.dist.nodes:
        if v == target:
            continue
        rt.send_uids(rnd, v, [target], REL_R, list(rt.dist.uids(REL_R, v)))
        rt.send_uids(rnd, v, [target], REL_S, list(rt.dist.uids(REL_S, v)))


def _hash_round(rt: Runtime, rnd: int, h, rel: str, holders: Sequence[int],
                extra_dests: FrozenSet[int] = frozenset()) -> None:
    """Send each element of ``rel`` held by ``holders`` to extra_dests plus
    its hashed node, grouping by destination so multicast paths are charged
    once."""
    for v in holders:
        groups: Dict[int, List[int]] = {}
        for uid in rt.dist.uids(rel, v):
            groups.setdefault(h(rt.dist.key_of(rel, uid)), []).append(uid)
        for target, uids in sorted(groups.items()):
            rt.send_uids(rnd, v, set(extra_dests) | {target}, rel, uids)


# -- sending-free star --------------------------------------------------------

def sf_star_intersect(t: Topology, dist: Distribution, seed: int
                      ) -> Tuple[TrafficTrace, NodeState, StrategyChoice]:
    """Intersection when uplinks are free; downlink bandwidth is the budget.

    Prices three strategies: converge everything to the cheapest receiver,
    or pin one relation onto a receiver subset and hash the residual with
    probability proportional to downlink bandwidth.
    """
    center, _, down = star_links(t)
    nodes = dist.nodes
    W = _sum_finite(down.values())
    n_r, n_s = dist.n_r, dist.n_s
    sizes = dist.sizes()

    def conv_cost(v: int) -> Cost:
        return ratio(dist.total - sizes[v], down[v])

    u1 = min(nodes, key=lambda v: (conv_cost(v), v))
    c1 = conv_cost(u1)

    v1_set = [v for v in nodes if n_r - dist.count(REL_R, v) > n_s - dist.count(REL_S, v)]
    v2_set = [v for v in nodes if v not in set(v1_set)]
    split1 = opt_split({v: (ratio(n_s - dist.count(REL_S, v), down[v]),
                            ratio(dist.count(REL_R, v), W)) for v in v1_set})
    c2 = _sum_finite([split1.value, ratio(n_s, W),
                      ratio(sum(dist.count(REL_R, v) for v in v2_set), W)])
    split2 = opt_split({v: (ratio(n_r - dist.count(REL_R, v), down[v]),
                            ratio(dist.count(REL_S, v), W)) for v in v2_set})
    c3 = _sum_finite([split2.value, ratio(n_r, W),
                      ratio(sum(dist.count(REL_S, v) for v in v1_set), W)])

    analytic = {"converge": c1, "pin-s": c2, "pin-r": c3}
    chosen = min(analytic, key=lambda k: (analytic[k], ("converge", "pin-s", "pin-r").index(k)))

    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if chosen == "converge":
        _converge_all(rt, rnd, u1)
    else:
        if is_inf(W):
            inf_nodes = [v for v in nodes if is_inf(down[v])]
            probs = {v: Fraction(1, len(inf_nodes)) for v in inf_nodes}
        else:
            probs = {v: Fraction(down[v]) / W for v in nodes}
        h = make_hash(seed, "sfhj", probs)
        if chosen == "pin-s":
            pinned = split1.chosen
            _hash_round(rt, rnd, h, REL_S, nodes, extra_dests=pinned)
            _hash_round(rt, rnd, h, REL_R, [v for v in nodes if v not in pinned])
        else:
            pinned = split2.chosen
            _hash_round(rt, rnd, h, REL_R, nodes, extra_dests=pinned)
            _hash_round(rt, rnd, h, REL_S, [v for v in nodes if v not in pinned])
    return rt.trace, rt.state, StrategyChoice(chosen, analytic)


# -- receiving-free star ------------------------------------------------------

def rf_star_intersect(t: Topology, dist: Distribution
                      ) -> Tuple[TrafficTrace, NodeState, StrategyChoice]:
    """Intersection when downlinks are free; fully deterministic.

    Either all-but-the-most-loaded node ship everything to it, or the
    cheaper relation is broadcast everywhere.
    """
    center, up, _ = star_links(t)
    nodes = dist.nodes
    sizes = dist.sizes()

    target = max(nodes, key=lambda v: (ratio(sizes[v], up[v]), -v))
    second = max((ratio(sizes[v], up[v]) for v in nodes if v != target), default=ZERO)
    analytic = {
        "converge": second,
        "broadcast-r": max((ratio(dist.count(REL_R, v), up[v]) for v in nodes), default=ZERO),
        "broadcast-s": max((ratio(dist.count(REL_S, v), up[v]) for v in nodes), default=ZERO),
    }
    order = ("converge", "broadcast-r", "broadcast-s")
    chosen = min(analytic, key=lambda k: (analytic[k], order.index(k)))

    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if chosen == "converge":
        _converge_all(rt, rnd, target)
    else:
        rel = REL_R if chosen == "broadcast-r" else REL_S
        for v in nodes:
            others = [u for u in nodes if u != v]
            if others:
                rt.send_uids(rnd, v, others, rel, list(dist.uids(rel, v)))
    return rt.trace, rt.state, StrategyChoice(chosen, analytic)


# -- general asymmetric star --------------------------------------------------

def asym_star_intersect(t: Topology, dist: Distribution, seed: int
                        ) -> Tuple[TrafficTrace, NodeState, StrategyChoice]:
    """Intersection under arbitrary per-direction star bandwidths.

    The hashed residual is routed with probability proportional to downlink
    bandwidth (the binding resource of the analytic cost expressions).
    """
    center, up, down = star_links(t)
    nodes = dist.nodes
    sizes = dist.sizes()
    D = _sum_finite(down.values())
    n_r, n_s = dist.n_r, dist.n_s

    def conv_cost(v: int) -> Cost:
        recv = ratio(dist.total - sizes[v], down[v])
        sent = max((ratio(sizes[u], up[u]) for u in nodes if u != v), default=ZERO)
        return max(recv, sent)

    u1 = min(nodes, key=lambda v: (conv_cost(v), v))
    c1 = conv_cost(u1)

    split1 = opt_split3({v: (ratio(n_s - dist.count(REL_S, v), down[v]),
                             ratio(dist.count(REL_R, v), up[v]),
                             ratio(dist.count(REL_R, v), D)) for v in nodes})
    split2 = opt_split3({v: (ratio(n_r - dist.count(REL_R, v), down[v]),
                             ratio(dist.count(REL_S, v), up[v]),
                             ratio(dist.count(REL_S, v), D)) for v in nodes})

    def strategy_cost(pinned: FrozenSet[int], pin_rel: str) -> Cost:
        other = REL_S if pin_rel == REL_R else REL_R
        residual = sum(dist.count(other, v) for v in nodes if v not in pinned)
        send_side = _sum_finite([
            max((ratio(dist.count(pin_rel, v), up[v]) for v in nodes), default=ZERO),
            max((ratio(dist.count(other, v), up[v]) for v in nodes if v not in pinned),
                default=ZERO),
        ])
        recv_side = _sum_finite([
            max((ratio(dist.count(pin_rel, None) - dist.count(pin_rel, v), down[v])
                 for v in pinned), default=ZERO),
            ratio(dist.count(pin_rel, None) + residual, D),
        ])
        return max(send_side, recv_side)

    c2 = strategy_cost(split1.chosen, REL_S)
    c3 = strategy_cost(split2.chosen, REL_R)
    analytic = {"converge": c1, "pin-s": c2, "pin-r": c3}
    order = ("converge", "pin-s", "pin-r")
    chosen = min(analytic, key=lambda k: (analytic[k], order.index(k)))

    rt = Runtime(t, dist)
    rnd = rt.new_round()
    if chosen == "converge":
        _converge_all(rt, rnd, u1)
    else:
        if is_inf(D):
            inf_nodes = [v for v in nodes if is_inf(down[v])]
            probs = {v: Fraction(1, len(inf_nodes)) for v in inf_nodes}
        else:
            probs = {v: Fraction(down[v]) / D for v in nodes}
        h = make_hash(seed, "swhj", probs)
        if chosen == "pin-s":
            _hash_round(rt, rnd, h, REL_S, nodes, extra_dests=split1.chosen)
            _hash_round(rt, rnd, h, REL_R, [v for v in nodes if v not in split1.chosen])
        else:
            _hash_round(rt, rnd, h, REL_R, nodes, extra_dests=split2.chosen)
            _hash_round(rt, rnd, h, REL_S, [v for v in nodes if v not in split2.chosen])
    return rt.trace, rt.state, StrategyChoice(chosen, analytic)
