"""Cartesian-product protocols: power-of-two square packing, the
bandwidth-weighted hypercube family on stars, and the two-phase tree routing.

Output pairs are mapped onto an integer grid (global contiguous labels per
node, id order).  Each node owns a region of the grid; a tuple travels to
every node whose region needs its row or column.  Regions may stick out past
the grid; only in-grid rows and columns materialise traffic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .rational import Cost, INF, ZERO, ceil_pow2_at_least, ceil_pow2_sqrt, is_inf, min_feasible
from .simkernel import Distribution, NodeState, REL_R, REL_S, Runtime, TrafficTrace
from .topology import OrientedTree, Topology, orient
from .asymstar import star_links


@dataclass(frozen=True)
class GridLabeling:
    """Contiguous global index intervals of each node's local tuples."""

    r_range: Dict[int, range]
    s_range: Dict[int, range]

    @classmethod
    def from_distribution(cls, dist: Distribution) -> "GridLabeling":
        return cls(r_range={v: dist.uids(REL_R, v) for v in dist.nodes},
                   s_range={v: dist.uids(REL_S, v) for v in dist.nodes})


@dataclass
class Region:
    """Axis-aligned block of the output grid assigned to one node.

    Offsets along the column axis may be rational (rectangle widths scale
    with bandwidth); rows are integer-aligned.
    """

    node: int
    row0: Fraction
    col0: Fraction
    height: Fraction
    width: Fraction

    def rows(self, n_rows: int) -> range:
        lo = self.row0
        hi = self.row0 + self.height
        start = max(0, _ceil_int(lo))
        stop = min(n_rows, _ceil_int(hi))
        return range(start, max(start, stop))

    def cols(self, n_cols: int) -> range:
        lo = self.col0
        hi = self.col0 + self.width
        start = max(0, _ceil_int(lo))
        stop = min(n_cols, _ceil_int(hi))
        return range(start, max(start, stop))


def _ceil_int(x) -> int:
    f = Fraction(x)
    return -((-f.numerator) // f.denominator)


@dataclass
class SquarePlan:
    regions: Dict[int, Region]
    n_rows: int
    n_cols: int
    covered_side: int = 0
    scale_sq: Optional[Fraction] = None  # squared per-bandwidth scale (equal case)
    scale: Optional[Fraction] = None     # rational scale (unequal case)


# -- power-of-two square packing ---------------------------------------------


class _Block:
    """A square or a 4-way merge of equal squares, placed as one unit."""

    __slots__ = ("side", "children", "indices", "weight")

    def __init__(self, side: int, children: Tuple["_Block", ...], indices: Tuple[int, ...],
                 weight):
        self.side = side
        self.children = children
        self.indices = indices
        self.weight = weight


def _merge_blocks(sides: Sequence[int], weights: Optional[Sequence] = None) -> List[_Block]:
    """Combine four equal squares into the next size until at most three of
    each size remain.  Higher-weight squares are merged together first so
    they end up inside the block that will anchor the covered corner."""
    if weights is None:
        weights = list(sides)
    by_size: Dict[int, List[_Block]] = {}
    for idx, side in enumerate(sides):
        if side <= 0 or side & (side - 1):
            raise ValueError(f"square side {side} is not a power of two")
        by_size.setdefault(side, []).append(_Block(side, (), (idx,), weights[idx]))
    for size in sorted(by_size):
        group = by_size[size]
        group.sort(key=lambda b: (_weight_key(b.weight), b.indices[0]))
        while len(group) >= 4:
            four = tuple(group[:4])
            del group[:4]
            merged = _Block(size * 2, four,
                            tuple(sorted(i for b in four for i in b.indices)),
                            four[0].weight)
            by_size.setdefault(size * 2, []).append(merged)
    out: List[_Block] = []
    for size in by_size:
        out.extend(by_size[size])
    return out


def _weight_key(w):
    # sort descending; infinities first
    return (0 if is_inf(w) else 1, ZERO if is_inf(w) else -Fraction(w))


def _place_blocks(blocks: List[_Block]) -> Tuple[Dict[int, Tuple[int, int]], int]:
    """Positions for every original square plus the side of the square region
    anchored at the origin that is fully covered."""
    if not blocks:
        return {}, 0
    order = sorted(blocks, key=lambda b: (-b.side, _weight_key(b.weight), b.indices[0]))
    top = order[0].side
    positions: Dict[int, Tuple[int, int]] = {}

    def expand(block: _Block, x: int, y: int) -> None:
        if not block.children:
            positions[block.indices[0]] = (x, y)
            return
        half = block.side // 2
        kids = sorted(block.children, key=lambda b: (_weight_key(b.weight), b.indices[0]))
        for kid, (dx, dy) in zip(kids, ((0, 0), (half, 0), (0, half), (half, half))):
            expand(kid, x + dx, y + dy)

    def place_into(items: List[_Block], x: int, y: int, container: int) -> None:
        if not items:
            return
        half = container // 2
        quads = [(0, 0), (half, 0), (0, half), (half, half)]
        level = [b for b in items if b.side == half]
        rest = [b for b in items if b.side < half]
        assert len(level) <= 3, "merge step must leave at most three per size"
        for block, (dx, dy) in zip(level, quads):
            expand(block, x + dx, y + dy)
        if rest:
            dx, dy = quads[len(level)]
            place_into(rest, x + dx, y + dy, half)

    place_into(order, 0, 0, 2 * top)
    return positions, top


def pack_squares(sides: Sequence[int], weights: Optional[Sequence] = None
                 ) -> Tuple[List[Tuple[int, int]], int]:
    """Pack power-of-two squares without overlap.

    Returns per-input-square top-left positions and the side of the fully
    covered square anchored at the origin, which is always at least half the
    square root of the total area.
    """
    blocks = _merge_blocks(sides, weights)
    positions, covered = _place_blocks(blocks)
    return [positions[i] for i in range(len(sides))], covered


# -- equal-size weighted hypercube on a star ----------------------------------


def equal_grid_plan(weights: Dict[int, Cost], n: int) -> SquarePlan:
    """Square assignments for an n x n grid, sides proportional to bandwidth.

    Side(v) is the smallest power of two whose square is at least
    4 n^2 w_v^2 / sum w^2, so the total area dominates the grid.
    """
    nodes = sorted(weights)
    if any(is_inf(weights[v]) for v in nodes):
        # a free link absorbs the whole grid; everyone else gets a stub
        sides = {v: (ceil_pow2_at_least(Fraction(max(n, 1))) if is_inf(weights[v]) else 1)
                 for v in nodes}
        scale_sq = None
    else:
        sum_sq = sum((Fraction(weights[v]) ** 2 for v in nodes), ZERO)
        if sum_sq == 0:
            raise ValueError("no bandwidth")
        scale_sq = Fraction(4 * n * n) / sum_sq
        sides = {v: ceil_pow2_sqrt(scale_sq * Fraction(weights[v]) ** 2) for v in nodes}
    order = sorted(nodes)
    pos, covered = pack_squares([sides[v] for v in order],
                                weights=[weights[v] for v in order])
    if covered < n:
        raise AssertionError("packing failed to cover the output grid")
    regions = {}
    for v, (x, y) in zip(order, pos):
        d = Fraction(sides[v])
        regions[v] = Region(v, Fraction(x), Fraction(y), d, d)
    return SquarePlan(regions=regions, n_rows=n, n_cols=n, covered_side=covered,
                      scale_sq=scale_sq)


def whc_plan(t: Topology, dist: Distribution) -> SquarePlan:
    if dist.n_r != dist.n_s:
        raise ValueError("equal-size hypercube requires |R| == |S|")
    center, up, down = star_links(t)
    return equal_grid_plan({v: down[v] for v in dist.nodes}, dist.n_r)


def _multicast_by_region(rt: Runtime, rnd: int, plan: SquarePlan) -> None:
    """Route every tuple to each node whose region needs its row/column,
    grouping identical destination sets so shared path edges are charged
    once."""
    for rel, n_axis, picker in ((REL_R, plan.n_rows, "rows"), (REL_S, plan.n_cols, "cols")):
        dest_of: List[List[int]] = [[] for _ in range(n_axis)]
        for v in sorted(plan.regions):
            region = plan.regions[v]
            axis = region.rows(plan.n_rows) if picker == "rows" else region.cols(plan.n_cols)
            for i in axis:
                dest_of[i].append(v)
        groups: Dict[Tuple[int, Tuple[int, ...]], List[int]] = {}
        for uid in range(n_axis):
            dests = dest_of[uid]
            if not dests:
                continue
            holder = rt.dist.holder_of(rel, uid)
            groups.setdefault((holder, tuple(dests)), []).append(uid)
        for (holder, dests), uids in sorted(groups.items()):
            rt.send_uids(rnd, holder, dests, rel, uids)


def whc_execute(t: Topology, dist: Distribution, plan: SquarePlan
                ) -> Tuple[TrafficTrace, NodeState]:
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    _multicast_by_region(rt, rnd, plan)
    return rt.trace, rt.state


def _converge(t: Topology, dist: Distribution, target: int) -> Tuple[TrafficTrace, NodeState]:
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    for v in dist.nodes:
        if v != target:
            rt.send_uids(rnd, v, [target], REL_R, list(dist.uids(REL_R, v)))
            rt.send_uids(rnd, v, [target], REL_S, list(dist.uids(REL_S, v)))
    return rt.trace, rt.state


def star_cartesian(t: Topology, dist: Distribution) -> Tuple[TrafficTrace, NodeState]:
    """One-round product on a symmetric star: converge if one node dominates,
    otherwise run the weighted hypercube."""
    if dist.n_r != dist.n_s:
        raise ValueError("star cartesian requires |R| == |S|")
    sizes = dist.sizes()
    top = max(dist.nodes, key=lambda v: (sizes[v], -v))
    if 2 * sizes[top] > dist.total:
        return _converge(t, dist, top)
    plan = whc_plan(t, dist)
    return whc_execute(t, dist, plan)


# -- balanced packing on trees -------------------------------------------------


@dataclass
class TreeWeights:
    """Effective squared bandwidths and grid fractions along an oriented tree."""

    ot: OrientedTree
    n_total: int
    w_sq: Dict[int, Cost]           # effective squared bandwidth, non-root nodes + root
    l_sq: Dict[int, Fraction]       # squared grid fraction per node
    side: Dict[int, int]            # packed square side per compute leaf
    cover: frozenset                # minimal cover realizing the root weight


def tree_weights(t: Topology, sizes: Dict[int, int], n_total: Optional[int] = None) -> TreeWeights:
    ot = orient(t, sizes)
    if t.is_compute(ot.root):
        raise ValueError("tree packing requires a router root; converge instead")
    n_total = n_total if n_total is not None else sum(sizes.values())

    w_sq: Dict[int, Cost] = {}
    cover_sets: Dict[int, frozenset] = {}
    for v in ot.postorder():
        if v == ot.root:
            continue
        bw = ot.out_bw(t, v)
        own_sq: Cost = INF if is_inf(bw) else Fraction(bw) ** 2
        kids = ot.children[v]
        if not kids:
            w_sq[v] = own_sq
            cover_sets[v] = frozenset({v})
            continue
        child_sum: Cost = ZERO
        for c in kids:
            child_sum = INF if (is_inf(child_sum) or is_inf(w_sq[c])) else child_sum + w_sq[c]
        if own_sq <= child_sum:
            w_sq[v] = own_sq
            cover_sets[v] = frozenset({v})
        else:
            w_sq[v] = child_sum
            cover_sets[v] = frozenset().union(*(cover_sets[c] for c in kids))
    root_kids = ot.children[ot.root]
    root_sum: Cost = ZERO
    for c in root_kids:
        root_sum = INF if (is_inf(root_sum) or is_inf(w_sq[c])) else root_sum + w_sq[c]
    w_sq[ot.root] = root_sum
    cover = frozenset().union(*(cover_sets[c] for c in root_kids)) if root_kids else frozenset()

    l_sq: Dict[int, Fraction] = {ot.root: Fraction(1)}
    for v in ot.postorder()[::-1]:
        kids = ot.children[v]
        if not kids:
            continue
        denom: Cost = ZERO
        for c in kids:
            denom = INF if (is_inf(denom) or is_inf(w_sq[c])) else denom + w_sq[c]
        if is_inf(denom):
            free = [c for c in kids if is_inf(w_sq[c])]
            for c in kids:
                l_sq[c] = l_sq[v] / len(free) if c in free else Fraction(0)
        elif denom == 0:
            for c in kids:
                l_sq[c] = Fraction(0)
        else:
            for c in kids:
                l_sq[c] = l_sq[v] * Fraction(w_sq[c]) / denom

    side: Dict[int, int] = {}
    for v in sorted(t.compute_nodes):
        mass = l_sq.get(v, Fraction(0))
        if mass > 0:
            side[v] = ceil_pow2_sqrt(Fraction(n_total * n_total) * mass)
    return TreeWeights(ot=ot, n_total=n_total, w_sq=w_sq, l_sq=l_sq, side=side, cover=cover)


def tree_pack(weights: TreeWeights) -> Tuple[SquarePlan, Dict[int, List[int]]]:
    """Merge leaf squares bottom-up along the tree and place the result.

    Also returns the per-node merged square multiset (list of sides), whose
    total element count drives the per-edge traffic bound of the routing
    phase.
    """
    ot = weights.ot
    n = weights.n_total // 2
    blocks: Dict[int, List[_Block]] = {}
    multiset: Dict[int, List[int]] = {}
    idx_of: Dict[int, int] = {}
    leaf_order = sorted(weights.side)
    for i, v in enumerate(leaf_order):
        idx_of[v] = i
    for v in ot.postorder():
        kids = ot.children[v]
        if not kids:
            if v in weights.side:
                blk = _Block(weights.side[v], (), (idx_of[v],), weights.l_sq[v])
                blocks[v] = [blk]
            else:
                blocks[v] = []
        else:
            pool: List[_Block] = []
            for c in kids:
                pool.extend(blocks[c])
            blocks[v] = _regroup(pool)
        multiset[v] = sorted((b.side for b in blocks[v]), reverse=True)

    positions, covered = _place_blocks(blocks[ot.root])
    if covered < n:
        raise AssertionError("tree packing failed to cover the output grid")
    regions = {}
    for v in leaf_order:
        if idx_of[v] in positions:
            x, y = positions[idx_of[v]]
            d = Fraction(weights.side[v])
            regions[v] = Region(v, Fraction(x), Fraction(y), d, d)
    plan = SquarePlan(regions=regions, n_rows=n, n_cols=n, covered_side=covered)
    return plan, multiset


def _regroup(pool: List[_Block]) -> List[_Block]:
    by_size: Dict[int, List[_Block]] = {}
    for b in pool:
        by_size.setdefault(b.side, []).append(b)
    for size in sorted(by_size):
        group = by_size[size]
        group.sort(key=lambda b: (_weight_key(b.weight), b.indices[0]))
        while len(group) >= 4:
            four = tuple(group[:4])
            del group[:4]
            merged = _Block(size * 2, four,
                            tuple(sorted(i for b in four for i in b.indices)),
                            four[0].weight)
            by_size.setdefault(size * 2, []).append(merged)
    out: List[_Block] = []
    for size in by_size:
        out.extend(by_size[size])
    return out


def tree_cartesian(t: Topology, dist: Distribution) -> Tuple[TrafficTrace, NodeState]:
    """Two-phase product on a symmetric tree: gather at the oriented root,
    then multicast each tuple to the leaves whose squares need it.

    The root only relays between the phases; if the orientation roots at a
    compute node, plain convergence there is already optimal.
    """
    if dist.n_r != dist.n_s:
        raise ValueError("tree cartesian requires |R| == |S|")
    ot = orient(t, dist.sizes())
    if t.is_compute(ot.root):
        return _converge(t, dist, ot.root)
    weights = tree_weights(t, dist.sizes(), dist.total)
    plan, _ = tree_pack(weights)

    rt = Runtime(t, dist)
    rnd1 = rt.new_round()
    for v in dist.nodes:
        rt.send_uids(rnd1, v, [ot.root], REL_R, list(dist.uids(REL_R, v)))
        rt.send_uids(rnd1, v, [ot.root], REL_S, list(dist.uids(REL_S, v)))
    rnd2 = rt.new_round()
    for rel, n_axis, picker in ((REL_R, plan.n_rows, "rows"), (REL_S, plan.n_cols, "cols")):
        dest_of: List[List[int]] = [[] for _ in range(n_axis)]
        for v in sorted(plan.regions):
            region = plan.regions[v]
            axis = region.rows(plan.n_rows) if picker == "rows" else region.cols(plan.n_cols)
            for i in axis:
                dest_of[i].append(v)
        groups: Dict[Tuple[int, ...], List[int]] = {}
        for uid in range(n_axis):
            if dest_of[uid]:
                groups.setdefault(tuple(dest_of[uid]), []).append(uid)
        for dests, uids in sorted(groups.items()):
            rt.send_uids(rnd2, ot.root, dests, rel, uids)
    return rt.trace, rt.state


# -- unequal sizes on a star ---------------------------------------------------


def _unequal_regions(order: List[Tuple[int, Cost]], scale: Fraction, n_small: int,
                     n_large: int) -> Optional[Dict[int, Region]]:
    """Greedy row-major stacking at a given scale: full-height rectangles for
    budgets spanning the short side, strips of equal power-of-two squares
    below that.  Returns None when the grid is not covered."""
    regions: Dict[int, Region] = {}
    col = Fraction(0)
    strip_side = None
    strip_col = Fraction(0)
    strip_row = 0
    for v, bw in order:
        if col >= n_large:
            break
        if is_inf(bw):
            regions[v] = Region(v, Fraction(0), col, Fraction(n_small), Fraction(n_large))
            col += n_large
            continue
        budget = scale * Fraction(bw)
        if budget >= n_small:
            if strip_side is not None and strip_row < n_small:
                col = strip_col + strip_side  # abandon the partial strip
                strip_side = None
            regions[v] = Region(v, Fraction(0), col, Fraction(n_small), budget)
            col += budget
            continue
        if budget < Fraction(1, 2):
            continue  # too small to round into a useful square
        side = ceil_pow2_at_least(budget)
        if strip_side != side or strip_row >= n_small:
            if strip_side is not None and strip_row < n_small:
                col = strip_col + strip_side
            strip_side, strip_col, strip_row = side, col, 0
            col += side
        regions[v] = Region(v, Fraction(strip_row), strip_col,
                            Fraction(side), Fraction(side))
        strip_row += side
    if strip_side is not None and strip_row < n_small:
        col = strip_col  # last strip incomplete: columns beyond it uncovered
    if col < n_large:
        return None
    return regions


def unequal_plan(t: Topology, dist: Distribution) -> SquarePlan:
    """Rectangle/square assignment for |R| <= |S| on a star.

    The scale is the least rational (to 2^-30 relative precision) at which
    the greedy stacking covers the grid; it is never below the counting
    minimizer, and receive budgets stay within 4 * scale * bandwidth.
    """
    center, up, down = star_links(t)
    small, large = (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)
    n_small, n_large = dist.count(small, None), dist.count(large, None)
    nodes = dist.nodes
    order = sorted(((v, down[v]) for v in nodes),
                   key=lambda item: (_weight_key(item[1]), item[0]))
    if n_small == 0 or n_large == 0:
        plan = SquarePlan(regions={}, n_rows=n_small, n_cols=n_large, scale=ZERO)
        plan.small_rel = small
        return plan
    if any(is_inf(down[v]) for v in nodes):
        regions = _unequal_regions(order, Fraction(1), n_small, n_large)
        scale = ZERO
    else:
        def feasible(c: Fraction) -> bool:
            return _unequal_regions(order, c, n_small, n_large) is not None

        hi = Fraction(n_small + n_large) / min(Fraction(down[v]) for v in nodes)
        scale = min_feasible(feasible, ZERO, hi)
        regions = _unequal_regions(order, scale, n_small, n_large)
    if regions is None:
        raise AssertionError("unequal packing failed to cover the grid")
    plan = SquarePlan(regions=regions, n_rows=n_small, n_cols=n_large, scale=scale)
    plan.small_rel = small
    return plan


def whc_unequal(t: Topology, dist: Distribution) -> Tuple[TrafficTrace, NodeState]:
    """One-round product on a star with unequal relation sizes."""
    plan = unequal_plan(t, dist)
    rt = Runtime(t, dist)
    rnd = rt.new_round()
    small = plan.small_rel
    large = REL_S if small == REL_R else REL_R
    for rel, n_axis, picker in ((small, plan.n_rows, "rows"), (large, plan.n_cols, "cols")):
        dest_of: List[List[int]] = [[] for _ in range(n_axis)]
        for v in sorted(plan.regions):
            region = plan.regions[v]
            axis = region.rows(plan.n_rows) if picker == "rows" else region.cols(plan.n_cols)
            for i in axis:
                dest_of[i].append(v)
        groups: Dict[Tuple[int, Tuple[int, ...]], List[int]] = {}
        for uid in range(n_axis):
            if dest_of[uid]:
                holder = rt.dist.holder_of(rel, uid)
                groups.setdefault((holder, tuple(dest_of[uid])), []).append(uid)
        for (holder, dests), uids in sorted(groups.items()):
            rt.send_uids(rnd, holder, dests, rel, uids)
    return rt.trace, rt.state


# -- generalized star algorithm ------------------------------------------------


def generalized_star_cartesian(t: Topology, dist: Distribution
                               ) -> Tuple[TrafficTrace, NodeState, str]:
    """Unequal-size product on a star: dominate-converge, else pin the small
    relation on the big-data nodes and finish the residual with the cheapest
    of three deterministic continuations."""
    from .simkernel import cost as cost_of
    from .sortnet import proportional

    sizes = dist.sizes()
    total = dist.total
    top = max(dist.nodes, key=lambda v: (sizes[v], -v))
    if 2 * sizes[top] > total:
        trace, state = _converge(t, dist, top)
        return trace, state, "converge-max-data"

    center, up, down = star_links(t)
    small, large = (REL_R, REL_S) if dist.n_r <= dist.n_s else (REL_S, REL_R)
    n_small = dist.count(small, None)
    beta = [v for v in dist.nodes if min(sizes[v], total - sizes[v]) >= n_small]
    alpha = [v for v in dist.nodes if v not in set(beta)]

    def run(strategy: str) -> Runtime:
        rt = Runtime(t, dist)
        rnd1 = rt.new_round()
        for v in dist.nodes:
            others = [u for u in beta if u != v]
            if others:
                rt.send_uids(rnd1, v, others, small, list(dist.uids(small, v)))
        rnd2 = rt.new_round()
        residual = [(v, uid) for v in alpha for uid in dist.uids(large, v)]
        if strategy == "converge-bandwidth":
            target = max(dist.nodes, key=lambda v: (down[v], -v))
            for v in alpha:
                if v != target:
                    rt.send_uids(rnd2, v, [target], large, list(dist.uids(large, v)))
            if target not in set(beta):
                for v in dist.nodes:
                    if v != target:
                        rt.send_uids(rnd2, v, [target], small, list(dist.uids(small, v)))
        elif strategy == "proportional":
            weights = {u: dist.count(large, u) for u in beta}
            if sum(weights.values()) == 0:
                weights = {u: 1 for u in beta}
            heavy = sorted(u for u in beta if weights[u] > 0)
            for v in alpha:
                shares = proportional([weights[u] for u in heavy], dist.count(large, v))
                uids = list(dist.uids(large, v))
                off = 0
                for u, share in zip(heavy, shares):
                    chunk = uids[off:off + share]
                    off += share
                    if chunk:
                        rt.send_uids(rnd2, v, [u], large, chunk)
        else:  # residual hypercube over the alpha nodes
            sub_regions = _alpha_grid(dist, alpha, small, large, down)
            for rel, n_axis, uid_list in ((small, dist.count(small, None),
                                           list(range(dist.count(small, None)))),
                                          (large, len(residual),
                                           [uid for _, uid in residual])):
                dest_of: Dict[int, List[int]] = {}
                for v in sorted(sub_regions):
                    region = sub_regions[v]
                    axis = region.rows(dist.count(small, None)) if rel == small \
                        else region.cols(len(residual))
                    for i in axis:
                        dest_of.setdefault(i, []).append(v)
                groups: Dict[Tuple[int, Tuple[int, ...]], List[int]] = {}
                for pos, uid in enumerate(uid_list):
                    key = pos if rel == large else uid
                    dests = dest_of.get(key)
                    if dests:
                        holder = dist.holder_of(rel, uid)
                        groups.setdefault((holder, tuple(dests)), []).append(uid)
                for (holder, dests), uids in sorted(groups.items()):
                    rt.send_uids(rnd2, holder, dests, rel, uids)
        return rt

    candidates = ["converge-bandwidth"]
    if beta:
        candidates.append("proportional")
    if alpha:
        candidates.append("residual-hypercube")
    best_rt = None
    best_cost = None
    best_name = None
    for name in candidates:
        rt = run(name)
        c = cost_of(rt.trace, t).tuple_cost
        if best_cost is None or c < best_cost:
            best_rt, best_cost, best_name = rt, c, name
    return best_rt.trace, best_rt.state, best_name


def _alpha_grid(dist: Distribution, alpha: List[int], small: str, large: str,
                down: Dict[int, Cost]) -> Dict[int, Region]:
    """Greedy unequal-style regions for the residual grid (small relation
    against the large tuples held on the alpha side)."""
    n_small = dist.count(small, None)
    n_alpha = sum(dist.count(large, v) for v in alpha)
    if n_small == 0 or n_alpha == 0:
        return {}
    order = sorted(((v, down[v]) for v in alpha),
                   key=lambda item: (_weight_key(item[1]), item[0]))
    rows, cols = (n_small, n_alpha) if n_small <= n_alpha else (n_alpha, n_small)
    if any(is_inf(bw) for _, bw in order):
        regions = _unequal_regions(order, Fraction(1), rows, cols)
    else:
        def feasible(c: Fraction) -> bool:
            return _unequal_regions(order, c, rows, cols) is not None

        hi = Fraction(rows + cols) / min(Fraction(bw) for _, bw in order)
        scale = min_feasible(feasible, ZERO, hi)
        regions = _unequal_regions(order, scale, rows, cols)
    assert regions is not None
    if n_small > n_alpha:
        # the grid was built transposed; swap axes back
        regions = {v: Region(v, r.col0, r.row0, r.width, r.height)
                   for v, r in regions.items()}
    return regions
