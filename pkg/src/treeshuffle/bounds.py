"""Communication lower bounds, evaluated exactly over a topology and an
initial data distribution.

Every report carries the raw formula value plus ``proof_constant``: dividing
the value by that constant gives a quantity certified to sit below the true
optimal cost (the asymptotic statements shed explicit small constants in
their derivations, and the oracle sandwich tests must respect them).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .asymstar import opt_split, star_links
from .rational import Cost, INF, ZERO, is_inf, min_feasible, ratio
from .simkernel import Distribution, REL_R, REL_S
from .topology import Cover, Edge, OrientedTree, Topology, edge_cut, enumerate_minimal_covers, orient

VARIANT_SENDING_FREE = "sending-free"
VARIANT_RECEIVING_FREE = "receiving-free"
VARIANT_GENERAL = "general"


@dataclass
class BoundReport:
    value: Optional[Cost]
    kind: str
    witness: object = None
    note: str = ""
    proof_constant: int = 1
    value_sq: Optional[Cost] = None
    parts: Optional[Dict[str, Cost]] = None

    @property
    def certified(self) -> Optional[Cost]:
        """Value guaranteed to lower-bound the optimal cost."""
        if self.value is None or is_inf(self.value):
            return self.value
        return self.value / self.proof_constant


def _side_sums(t: Topology, dist: Distribution, e: Edge) -> Tuple[int, int]:
    cut = edge_cut(t, e)
    minus = sum(dist.size(v) for v in cut.minus)
    plus = sum(dist.size(v) for v in cut.plus)
    return minus, plus


def _max_over_edges(t: Topology, numerator) -> Tuple[Cost, Optional[Edge]]:
    best: Cost = ZERO
    witness: Optional[Edge] = None
    for e in t.undirected_edges():
        num = numerator(e)
        val = ratio(num, t.bw(*e))
        if witness is None or val > best:
            best, witness = val, e
    return best, witness


def lb_intersect_tree(t: Topology, dist: Distribution) -> BoundReport:
    """Cut bound for set intersection: min of the relation sizes and the two
    side sums, maximised over edges."""
    n_r, n_s = dist.n_r, dist.n_s

    def num(e: Edge) -> int:
        minus, plus = _side_sums(t, dist, e)
        return min(n_r, n_s, minus, plus)

    value, witness = _max_over_edges(t, num)
    return BoundReport(value, "intersect-cut", witness, proof_constant=2)


def lb_cartesian_cut(t: Topology, dist: Distribution) -> BoundReport:
    def num(e: Edge) -> int:
        minus, plus = _side_sums(t, dist, e)
        return min(minus, plus)

    value, witness = _max_over_edges(t, num)
    return BoundReport(value, "cartesian-cut", witness, proof_constant=2)


def lb_sorting(t: Topology, dist: Distribution) -> BoundReport:
    report = lb_cartesian_cut(t, dist)
    return BoundReport(report.value, "sorting-cut", report.witness, proof_constant=2)


EXHAUSTIVE = "exhaustive"


def lb_cartesian_cover(t: Topology, dist: Distribution,
                       cover=EXHAUSTIVE) -> BoundReport:
    """Counting bound N / sqrt(sum of squared outgoing bandwidths) over a
    minimal cover of the oriented tree.

    Reported exactly as (value_sq = N^2 / sum w^2, value = decimal-free
    rational only when the square root is exact); the ``value`` field holds
    the exact square so downstream comparisons stay rational: compare
    ``value_sq`` against squared quantities.  For convenience ``value`` is a
    Fraction approximation within 2^-30 relative error.
    """
    if dist.n_r != dist.n_s:
        return BoundReport(None, "cartesian-cover", note="requires |R| == |S|")
    ot = orient(t, dist.sizes())
    if t.is_compute(ot.root):
        return BoundReport(None, "cartesian-cover",
                           note="oriented root is a compute node; converge is optimal "
                                "and the cover bound does not apply")
    n_total = dist.total

    def cover_value_sq(members: FrozenSet[int]) -> Cost:
        sq = ZERO
        for v in members:
            w = ot.out_bw(t, v)
            if is_inf(w):
                return ZERO
            sq += w * w
        if sq == 0:
            return INF
        return Fraction(n_total * n_total) / sq

    if cover == EXHAUSTIVE:
        candidates = [c.members for c in enumerate_minimal_covers(ot)
                      if c.members != frozenset({ot.root})]
    else:
        members = cover.members if isinstance(cover, Cover) else frozenset(cover)
        if members == frozenset({ot.root}):
            return BoundReport(None, "cartesian-cover", note="cover {root} excluded")
        candidates = [members]
    if not candidates:
        return BoundReport(None, "cartesian-cover", note="no admissible cover")
    best = max(candidates, key=lambda m: (cover_value_sq(m), tuple(sorted(m))))
    value_sq = cover_value_sq(best)
    value = _sqrt_approx(value_sq)
    report = BoundReport(value, "cartesian-cover", Cover(best), proof_constant=4)
    report.value_sq = value_sq
    return report


def _sqrt_approx(value_sq: Cost) -> Cost:
    if is_inf(value_sq):
        return INF
    if value_sq == 0:
        return ZERO
    lo, hi = ZERO, max(Fraction(1), Fraction(value_sq))
    return min_feasible(lambda x: x * x >= value_sq, lo, hi)


def lb_join_star(t: Topology, dist: Distribution) -> BoundReport:
    """Star join bound: per-node cut part plus, when no node already holds a
    full relation's worth, the aggregate-receive part over a trimmed
    sub-instance."""
    center, up, down = star_links(t)
    nodes = dist.nodes
    small, large = (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)
    n_small, n_large = dist.count(small, None), dist.count(large, None)
    sizes = dist.sizes()
    total = dist.total

    best: Cost = ZERO
    witness = None
    for v in nodes:
        val = ratio(min(n_small, sizes[v], total - sizes[v]), down[v])
        if witness is None or val > best:
            best, witness = val, v
    note = ""
    if nodes and max(sizes.values()) < n_large:
        trimmed = sum(sizes[v] if sizes[v] <= n_small
                      else dist.count(small, v) for v in nodes)
        if any(is_inf(down[v]) for v in nodes):
            total_bw: Cost = INF
        else:
            total_bw = sum((down[v] for v in nodes), ZERO)
        agg = ratio(trimmed, total_bw)
        if agg > best:
            best, witness = agg, "aggregate"
    else:
        note = "aggregate part omitted: a node already holds a full large relation"
    return BoundReport(best, "join-star", witness, note=note, proof_constant=2)


def eq1_minimizer(n_small: int, n_large_part: int, budgets: Sequence[Cost]) -> Cost:
    """Minimal C with sum_v min(C*w_v, n_small) * C*w_v >= n_small * n_large_part.

    The left side is nondecreasing in C, so rational bisection to relative
    precision 2^-30 pins the minimum.
    """
    target = Fraction(n_small * n_large_part)
    if target == 0:
        return ZERO
    finite = [w for w in budgets if not is_inf(w)]
    if len(finite) < len(budgets):
        return ZERO
    if not finite:
        return INF

    def feasible(c: Fraction) -> bool:
        acc = ZERO
        for w in finite:
            acc += min(c * w, Fraction(n_small)) * c * w
            if acc >= target:
                return True
        return acc >= target

    hi = Fraction(n_small + n_large_part) / min(finite)
    return min_feasible(feasible, ZERO, hi)


def lb_cp_unequal(t: Topology, dist: Distribution) -> BoundReport:
    """Cartesian product on a star with |R| != |S| allowed: cut part plus a
    three-term counting part active when no node dominates."""
    center, up, down = star_links(t)
    nodes = dist.nodes
    small, large = (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)
    n_small, n_large = dist.count(small, None), dist.count(large, None)
    sizes = dist.sizes()
    total = dist.total

    cut_best: Cost = ZERO
    witness = None
    for v in nodes:
        val = ratio(min(sizes[v], total - sizes[v], n_small), down[v])
        if witness is None or val > cut_best:
            cut_best, witness = val, v

    parts: Dict[str, Cost] = {"cut": cut_best}
    value = cut_best
    if nodes and 2 * max(sizes.values()) <= total:
        alpha = [v for v in nodes if min(sizes[v], total - sizes[v]) < n_small]
        beta = [v for v in nodes if v not in set(alpha)]
        term1 = ratio(n_large, max(down.values()))
        s_alpha = sum(dist.count(large, v) for v in alpha)
        beta_bw = sum((down[v] for v in beta if not is_inf(down[v])), ZERO)
        if any(is_inf(down[v]) for v in beta):
            term2 = ZERO
        elif beta_bw == 0:
            term2 = INF
        else:
            term2 = Fraction(s_alpha) / (2 * beta_bw)
        term3 = eq1_minimizer(n_small, s_alpha, [down[v] for v in alpha])
        counting = min((term1, term2, term3))
        parts.update({"dominant": term1, "beta-receive": term2, "packing": term3})
        if counting > value:
            value, witness = counting, "counting"
    else:
        parts["counting"] = None
    report = BoundReport(value, "cartesian-unequal", witness, proof_constant=8)
    report.parts = parts
    return report


# -- asymmetric star ----------------------------------------------------------

def _min_max_subset(nodes: Sequence[int], in_max: Dict[int, Cost],
                    out_max: Dict[int, Cost], in_sum: Dict[int, Cost],
                    base_sum: Cost, fixed: Sequence[Cost]) -> Tuple[Cost, FrozenSet[int]]:
    """Exact min over B of max(fixed, max_{v in B} in_max, max_{v not in B}
    out_max, base_sum + sum_{v in B} in_sum).

    The optimal B has threshold form in out_max, so scanning the candidate
    thresholds is exact.
    """
    candidates = sorted(set(out_max.values()) | {ZERO}, key=lambda x: (is_inf(x), x))
    thresholds = [None] + candidates  # None forces everything into B
    best_val: Optional[Cost] = None
    best_set: FrozenSet[int] = frozenset()
    for th in thresholds:
        if th is None:
            chosen = frozenset(nodes)
        else:
            chosen = frozenset(v for v in nodes if out_max[v] > th)
        parts = list(fixed)
        parts.extend(in_max[v] for v in chosen)
        parts.extend(out_max[v] for v in nodes if v not in chosen)
        ssum = base_sum
        for v in chosen:
            ssum = INF if (is_inf(ssum) or is_inf(in_sum[v])) else ssum + in_sum[v]
        parts.append(ssum)
        val = max(parts) if parts else ZERO
        if best_val is None or val < best_val:
            best_val, best_set = val, chosen
    return best_val if best_val is not None else ZERO, best_set


def lb_asym_star(t: Topology, dist: Distribution, variant: str) -> BoundReport:
    center, up, down = star_links(t)
    nodes = dist.nodes
    n_r, n_s = dist.n_r, dist.n_s
    sizes = dist.sizes()
    total = dist.total
    cr = {v: dist.count(REL_R, v) for v in nodes}
    cs = {v: dist.count(REL_S, v) for v in nodes}

    if len(nodes) <= 1:
        return BoundReport(ZERO, f"asym-{variant}", None)

    if variant == VARIANT_RECEIVING_FREE:
        best: Cost = ZERO
        witness = None
        for v in nodes:
            max_s = max((ratio(cs[u], up[u]) for u in nodes if u != v), default=ZERO)
            max_r = max((ratio(cr[u], up[u]) for u in nodes if u != v), default=ZERO)
            val = max(min(ratio(cr[v], up[v]), max_s), min(ratio(cs[v], up[v]), max_r))
            if witness is None or val > best:
                best, witness = val, v
        return BoundReport(best, "asym-receiving-free", witness)

    if variant == VARIANT_SENDING_FREE:
        W = sum((down[v] for v in nodes if not is_inf(down[v])), ZERO)
        if any(is_inf(down[v]) for v in nodes):
            W = INF
        best = None
        witness = None
        for v in nodes:
            head = max(ratio(n_s - cs[v], down[v]), ratio(n_r - cr[v], down[v]))
            val = head + ratio(total - sizes[v], W) if not is_inf(head) else INF
            if best is None or val < best:
                best, witness = val, ("all-but-one", v)
        for tag, full_total, full_counts, opp_counts in (
                ("full-r", n_r, cr, cs), ("full-s", n_s, cs, cr)):
            # the full relation is shipped everywhere; the other side's
            # receiver subset is optimized
            split = opt_split({v: (ratio(full_total - full_counts[v], down[v]),
                                   ratio(opp_counts[v], W)) for v in nodes})
            val = split.value + ratio(full_total, W)
            if best is None or val < best:
                best, witness = val, (tag, split.chosen)
        return BoundReport(best, "asym-sending-free", witness)

    if variant != VARIANT_GENERAL:
        raise ValueError(f"unknown variant {variant!r}")

    D = sum((down[v] for v in nodes if not is_inf(down[v])), ZERO)
    if any(is_inf(down[v]) for v in nodes):
        D = INF

    def constraint_r_keeper(v: int) -> Cost:
        # v keeps an R element: all other S must reach it, all other S must leave
        return max(ratio(n_s - cs[v], down[v]),
                   max((ratio(cs[u], up[u]) for u in nodes if u != v), default=ZERO))

    def constraint_s_keeper(v: int) -> Cost:
        return max(ratio(n_r - cr[v], down[v]),
                   max((ratio(cr[u], up[u]) for u in nodes if u != v), default=ZERO))

    best = None
    witness = None
    for v in nodes:
        rest = [u for u in nodes if u != v]
        parts = [constraint_r_keeper(v), constraint_s_keeper(v)]
        parts.extend(ratio(cr[u], up[u]) for u in rest)
        parts.extend(ratio(cs[u], up[u]) for u in rest)
        parts.append(ratio(total - sizes[v], D))
        val = max(parts)
        if best is None or val < best:
            best, witness = val, ("all-but-one", v)

    # V_alpha = everything: R fully shipped, choose V_beta freely.
    fixed_r = [max((ratio(cr[v], up[v]) for v in nodes), default=ZERO)]
    val, chosen = _min_max_subset(
        nodes,
        in_max={v: ratio(cs[v], up[v]) for v in nodes},
        out_max={v: constraint_s_keeper(v) for v in nodes},
        in_sum={v: ratio(cs[v], D) for v in nodes},
        base_sum=ratio(n_r, D),
        fixed=fixed_r,
    )
    if best is None or val < best:
        best, witness = val, ("full-r", chosen)

    fixed_s = [max((ratio(cs[v], up[v]) for v in nodes), default=ZERO)]
    val, chosen = _min_max_subset(
        nodes,
        in_max={v: ratio(cr[v], up[v]) for v in nodes},
        out_max={v: constraint_r_keeper(v) for v in nodes},
        in_sum={v: ratio(cr[v], D) for v in nodes},
        base_sum=ratio(n_s, D),
        fixed=fixed_s,
    )
    if best is None or val < best:
        best, witness = val, ("full-s", chosen)
    return BoundReport(best, "asym-general", witness)
