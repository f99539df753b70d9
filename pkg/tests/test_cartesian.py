import random
from fractions import Fraction

import numpy as np
import pytest

from treeshuffle import (Distribution, INF, build_star, build_symmetric_tree,
                         cost, generalized_star_cartesian, lb_cartesian_cover,
                         lb_cartesian_cut, lb_cp_unequal, orient, pack_squares,
                         star_cartesian, tree_cartesian, tree_pack,
                         tree_weights, verify_cartesian, whc_execute, whc_plan,
                         whc_unequal)
from treeshuffle.cartesian import unequal_plan
from treeshuffle.rational import is_inf
from treeshuffle.simkernel import REL_R, REL_S

from conftest import make_tree4, random_normalized_tree


def balanced_distribution(rng, topo, per_node):
    r_parts, s_parts = {}, {}
    key = [0]

    def take(n):
        out = list(range(key[0], key[0] + n))
        key[0] += n
        return out

    for v in topo.compute_nodes:
        r_parts[v] = take(per_node.get(v, 0))
    for v in topo.compute_nodes:
        s_parts[v] = take(per_node.get(v, 0))
    return Distribution(topo.compute_nodes, r_parts, s_parts)


def paint(positions, sides, size):
    grid = np.zeros((size, size), dtype=np.int32)
    for (x, y), d in zip(positions, sides):
        x2, y2 = min(x + d, size), min(y + d, size)
        if x < size and y < size:
            grid[x:x2, y:y2] += 1
    return grid


# -- square packing ---------------------------------------------------------------


def test_pack_four_equal_squares():
    pos, covered = pack_squares([2, 2, 2, 2])
    assert covered == 4
    assert sorted(pos) == [(0, 0), (0, 2), (2, 0), (2, 2)]


def test_pack_mixed_sizes():
    sides = [4, 2, 2, 2]
    pos, covered = pack_squares(sides)
    assert covered == 4  # the big square alone covers the guaranteed region
    grid = paint(pos, sides, covered)
    assert (grid[:covered, :covered] >= 1).all()


def test_pack_singleton():
    pos, covered = pack_squares([1])
    assert pos == [(0, 0)] and covered == 1


def test_pack_empty():
    pos, covered = pack_squares([])
    assert pos == [] and covered == 0


def test_pack_random_multisets_cover_without_overlap():
    rng = random.Random(2718)
    for _ in range(200):
        sides = [2 ** rng.randint(0, 5) for _ in range(rng.randint(1, 24))]
        pos, covered = pack_squares(sides)
        total = sum(d * d for d in sides)
        assert 4 * covered * covered >= total  # covered >= sqrt(total)/2
        span = max(x + d for (x, y), d in zip(pos, sides)) if sides else 0
        span = max(span, max((y + d for (x, y), d in zip(pos, sides)), default=0))
        grid = paint(pos, sides, span)
        assert grid.max() <= 1  # no overlap anywhere
        assert (grid[:covered, :covered] == 1).all()


# -- equal-size hypercube -----------------------------------------------------------


def test_whc_plan_uniform_star(unit_star4):
    # one element of each relation per node: |R| = |S| = 4
    dist = balanced_distribution(random.Random(0), unit_star4, {v: 1 for v in range(4)})
    plan = whc_plan(unit_star4, dist)
    assert plan.scale_sq == 16
    assert all(r.height == 4 for r in plan.regions.values())
    assert plan.covered_side >= 4


def test_whc_plan_single_node():
    t = build_star([(1, 1)])
    dist = Distribution([0], {0: [1, 2]}, {0: [3, 4]})
    plan = whc_plan(t, dist)
    assert plan.regions[0].height >= 2


def test_whc_plan_bandwidth_scaling():
    t = build_star([(1, 1), (2, 2)])
    dist = Distribution(t.compute_nodes, {0: [1], 1: [2, 3]}, {0: [4, 5], 1: [6]})
    plan = whc_plan(t, dist)
    assert plan.regions[0].height == 4
    assert plan.regions[1].height == 8


def test_whc_execute_correct_and_bounded(unit_star2):
    dist = balanced_distribution(random.Random(1), unit_star2, {0: 2, 1: 2})
    plan = whc_plan(unit_star2, dist)
    trace, state = whc_execute(unit_star2, dist, plan)
    ok, witness = verify_cartesian(state, dist)
    assert ok, witness
    assert trace.round_count() == 1


def test_whc_receive_and_send_bounds():
    rng = random.Random(5150)
    for _ in range(60):
        p = rng.randint(2, 16)
        weights = [rng.randint(1, 8) for _ in range(p)]
        t = build_star([(w, w) for w in weights])
        per = {v: rng.randint(0, 8) + 2 for v in t.compute_nodes}
        dist = balanced_distribution(rng, t, per)
        if dist.n_r < 16:
            continue
        plan = whc_plan(t, dist)
        trace, state = whc_execute(t, dist, plan)
        ok, witness = verify_cartesian(state, dist)
        assert ok, witness
        center = t.star_center()
        scale_sq = plan.scale_sq
        for v in t.compute_nodes:
            received = trace.edge_total((center, v))
            sent = trace.edge_total((v, center))
            w = Fraction(t.bw(v, center))
            assert Fraction(received) ** 2 <= 16 * w * w * scale_sq
            assert sent <= dist.size(v)
        rep = cost(trace, t)
        worst = max(max(Fraction(dist.size(v)) / Fraction(t.bw(v, center))
                        for v in t.compute_nodes) ** 2, scale_sq)
        assert rep.tuple_cost ** 2 <= 16 * worst


def test_star_cartesian_all_at_one_node(unit_star2):
    dist = Distribution([0, 1], {0: [1, 2]}, {0: [3, 4]})
    trace, state = star_cartesian(unit_star2, dist)
    assert cost(trace, unit_star2).tuple_cost == 0
    assert verify_cartesian(state, dist)[0]


def test_star_cartesian_converge_branch_cost():
    t = build_star([(2, 2), (1, 1), (1, 1)])
    dist = Distribution(t.compute_nodes, {0: [1, 2, 3], 1: [4]},
                        {0: [5, 6, 7], 2: [8]})
    # node 0 holds 6 of 8 elements
    trace, state = star_cartesian(t, dist)
    assert verify_cartesian(state, dist)[0]
    expected = max(Fraction(8 - 6, 2), Fraction(1, 1))
    assert cost(trace, t).tuple_cost == expected


def test_star_cartesian_balanced_uses_hypercube(unit_star4):
    dist = balanced_distribution(random.Random(2), unit_star4, {v: 2 for v in range(4)})
    trace, state = star_cartesian(unit_star4, dist)
    assert verify_cartesian(state, dist)[0]
    assert trace.round_count() == 1


# -- tree weights and packing ---------------------------------------------------------


def test_tree_weights_star_reduces_to_uniform(unit_star4):
    sizes = {v: 2 for v in unit_star4.compute_nodes}
    tw = tree_weights(unit_star4, sizes, 8)
    for v in unit_star4.compute_nodes:
        assert tw.l_sq[v] == Fraction(1, 4)
        assert tw.side[v] == 4


def test_tree_weights_single_leaf_under_root():
    kinds = {0: "compute", 1: "compute", 2: "router"}
    edges = {(0, 2): Fraction(1), (1, 2): Fraction(3)}
    t = build_symmetric_tree(kinds, edges)
    tw = tree_weights(t, {0: 2, 1: 2}, 4)
    assert tw.l_sq[0] + tw.l_sq[1] == 1


def test_tree_weights_tree4_hand_trace(tree4):
    sizes = {v: 1 for v in tree4.compute_nodes}
    tw = tree_weights(tree4, sizes, 4)
    assert tw.w_sq[4] == 1 and tw.w_sq[5] == 1
    assert tw.w_sq[6] == 2
    assert tw.l_sq[4] == Fraction(1, 2)
    assert tw.l_sq[0] == Fraction(1, 4)


def test_tree_weights_properties_random():
    rng = random.Random(909)
    checked = 0
    for _ in range(300):
        t = random_normalized_tree(rng, rng.randint(2, 12))
        sizes = {v: rng.randint(0, 6) for v in t.compute_nodes}
        if sum(sizes.values()) == 0:
            sizes[t.compute_nodes[0]] = 2
        ot = orient(t, sizes)
        if t.is_compute(ot.root):
            continue
        checked += 1
        tw = tree_weights(t, sizes, sum(sizes.values()))
        for v in t.node_ids:
            if v == ot.root:
                continue
            bw = ot.out_bw(t, v)
            if not is_inf(bw) and not is_inf(tw.w_sq[v]):
                assert tw.w_sq[v] <= Fraction(bw) ** 2
                if not is_inf(tw.w_sq[ot.root]):
                    assert tw.l_sq[v] * Fraction(tw.w_sq[ot.root]) <= Fraction(tw.w_sq[v])
        # subtree masses add up exactly
        for v in t.node_ids:
            leaves_below = [u for u in ot.subtree(v) if u in t.compute_nodes]
            assert sum((tw.l_sq[u] for u in leaves_below), Fraction(0)) == tw.l_sq[v]
        # the root weight is realized by a minimal cover
        if not is_inf(tw.w_sq[ot.root]):
            total = sum((Fraction(ot.out_bw(t, u)) ** 2 for u in tw.cover
                         if not is_inf(ot.out_bw(t, u))), Fraction(0))
            assert total == tw.w_sq[ot.root]
    assert checked >= 150


def test_tree_pack_merges_four_leaves(unit_star4):
    sizes = {v: 2 for v in unit_star4.compute_nodes}
    tw = tree_weights(unit_star4, sizes, 8)
    plan, multiset = tree_pack(tw)
    assert multiset[4] == [8]
    assert plan.covered_side >= 4


def test_tree_pack_single_leaf_passthrough():
    kinds = {0: "compute", 1: "compute", 2: "router"}
    edges = {(0, 2): Fraction(1), (1, 2): Fraction(1)}
    t = build_symmetric_tree(kinds, edges)
    tw = tree_weights(t, {0: 1, 1: 1}, 2)
    plan, multiset = tree_pack(tw)
    assert sorted(multiset[0]) == [tw.side[0]]


def test_tree_pack_tree4_coverage(tree4):
    sizes = {v: 2 for v in tree4.compute_nodes}
    tw = tree_weights(tree4, sizes, 8)
    plan, _ = tree_pack(tw)
    n = 4
    grid = np.zeros((n, n), dtype=bool)
    for v, region in plan.regions.items():
        rows, cols = region.rows(n), region.cols(n)
        grid[rows.start:rows.stop, cols.start:cols.stop] = True
    assert grid.all()


# -- tree cartesian ----------------------------------------------------------------


def test_tree_cartesian_compute_root_converges(unit_star2):
    dist = Distribution([0, 1], {0: [1], 1: [2]}, {1: [3, 4]})
    trace, state = tree_cartesian(unit_star2, dist)
    assert trace.round_count() == 1
    assert verify_cartesian(state, dist)[0]


def test_tree_cartesian_tree4_bounds(tree4):
    rng = random.Random(3)
    dist = balanced_distribution(rng, tree4, {0: 2, 1: 2, 2: 2, 3: 2})
    trace, state = tree_cartesian(tree4, dist)
    ok, witness = verify_cartesian(state, dist)
    assert ok, witness
    assert trace.round_count() == 2
    ot = orient(tree4, dist.sizes())
    tw = tree_weights(tree4, dist.sizes(), dist.total)
    for v in tree4.node_ids:
        if v == ot.root:
            continue
        p = ot.parent[v]
        from treeshuffle import edge_cut
        cut = edge_cut(tree4, (v, p))
        phase1 = trace.rounds[0].get((v, p), 0) + trace.rounds[0].get((p, v), 0)
        assert phase1 <= min(sum(dist.size(x) for x in cut.minus),
                             sum(dist.size(x) for x in cut.plus))
        phase2 = trace.rounds[1].get((v, p), 0) + trace.rounds[1].get((p, v), 0)
        assert Fraction(phase2) ** 2 <= 256 * Fraction(dist.total) ** 2 * tw.l_sq[v]


def test_tree_cartesian_empty_leaf_still_planned(tree4):
    dist = Distribution(tree4.compute_nodes, {0: [1, 2], 1: [3]},
                        {0: [4], 1: [5, 6]})
    # nodes 2,3 hold nothing but still receive square assignments
    tw = tree_weights(tree4, dist.sizes(), dist.total)
    assert 2 in tw.side and 3 in tw.side
    trace, state = tree_cartesian(tree4, dist)
    assert verify_cartesian(state, dist)[0]


def test_tree_cartesian_random_corpus_bounds():
    rng = random.Random(4096)
    done = 0
    while done < 40:
        t = random_normalized_tree(rng, rng.randint(2, 10))
        per = {v: 2 * rng.randint(1, 4) for v in t.compute_nodes}
        dist = balanced_distribution(rng, t, per)
        ot = orient(t, dist.sizes())
        trace, state = tree_cartesian(t, dist)
        ok, witness = verify_cartesian(state, dist)
        assert ok, witness
        if t.is_compute(ot.root):
            continue
        done += 1
        tw = tree_weights(t, dist.sizes(), dist.total)
        from treeshuffle import edge_cut
        for v in t.node_ids:
            if v == ot.root:
                continue
            p = ot.parent[v]
            cut = edge_cut(t, (v, p))
            phase1 = trace.rounds[0].get((v, p), 0) + trace.rounds[0].get((p, v), 0)
            assert phase1 <= min(sum(dist.size(x) for x in cut.minus),
                                 sum(dist.size(x) for x in cut.plus))
            phase2 = trace.rounds[1].get((v, p), 0) + trace.rounds[1].get((p, v), 0)
            assert Fraction(phase2) ** 2 <= 256 * Fraction(dist.total) ** 2 * tw.l_sq[v]


# -- unequal sizes -----------------------------------------------------------------


def test_unequal_single_full_rectangle():
    t = build_star([(1, 1)])
    dist = Distribution([0], {0: [1, 2]}, {0: list(range(3, 11))})
    plan = unequal_plan(t, dist)
    region = plan.regions[0]
    assert region.height == 2 and region.width >= 8


def test_unequal_two_unit_nodes_scale():
    t = build_star([(1, 1), (1, 1)])
    dist = Distribution(t.compute_nodes, {0: [1, 2]}, {1: list(range(10, 18))})
    plan = unequal_plan(t, dist)
    assert plan.scale == 4  # 2 * min(C,2) * C >= 16 forces C = 4
    trace, state = whc_unequal(t, dist)
    assert verify_cartesian(state, dist)[0]


def test_unequal_receive_within_budget():
    rng = random.Random(88)
    for _ in range(50):
        p = rng.randint(1, 8)
        t = build_star([(w, w) for w in (rng.randint(1, 5) for _ in range(p))])
        n_r = rng.randint(1, 8)
        n_s = rng.randint(n_r, 24)
        dist = Distribution(
            t.compute_nodes,
            {rng.choice(t.compute_nodes): list(range(n_r))},
            {v: [] for v in t.compute_nodes} | {
                rng.choice(t.compute_nodes): list(range(100, 100 + n_s))})
        plan = unequal_plan(t, dist)
        trace, state = whc_unequal(t, dist)
        ok, witness = verify_cartesian(state, dist)
        assert ok, witness
        center = t.star_center()
        if center is None:
            continue
        for v in t.compute_nodes:
            received = trace.edge_total((center, v))
            assert Fraction(received) <= 4 * plan.scale * Fraction(t.bw(center, v))


def test_unequal_matches_equal_hypercube_closely():
    rng = random.Random(321)
    worst = 0.0
    for _ in range(50):
        p = rng.randint(2, 8)
        t = build_star([(w, w) for w in (rng.randint(1, 4) for _ in range(p))])
        per = {v: rng.randint(1, 6) for v in t.compute_nodes}
        dist = balanced_distribution(rng, t, per)
        tr_eq, _ = whc_execute(t, dist, whc_plan(t, dist))
        tr_un, st_un = whc_unequal(t, dist)
        assert verify_cartesian(st_un, dist)[0]
        c_eq = cost(tr_eq, t).tuple_cost
        c_un = cost(tr_un, t).tuple_cost
        if c_eq > 0:
            worst = max(worst, float(c_un / c_eq))
    assert worst <= 2.0


# -- generalized star ---------------------------------------------------------------


def test_generalized_converges_on_dominant_node(unit_star2):
    dist = Distribution([0, 1], {0: [1, 2], 1: [3]}, {0: [4, 5, 6]})
    trace, state, name = generalized_star_cartesian(unit_star2, dist)
    assert name == "converge-max-data"
    assert verify_cartesian(state, dist)[0]


def test_generalized_correct_on_random_instances():
    rng = random.Random(31337)
    for trial in range(100):
        p = rng.randint(2, 8)
        t = build_star([(w, w) for w in (rng.randint(1, 4) for _ in range(p))])
        n_r = rng.randint(1, 8)
        n_s = rng.randint(n_r, 20)
        r_parts, s_parts = {}, {}
        for k in range(n_r):
            r_parts.setdefault(rng.choice(t.compute_nodes), []).append(k)
        for k in range(n_s):
            s_parts.setdefault(rng.choice(t.compute_nodes), []).append(100 + k)
        dist = Distribution(t.compute_nodes, r_parts, s_parts)
        trace, state, name = generalized_star_cartesian(t, dist)
        ok, witness = verify_cartesian(state, dist)
        assert ok, (trial, name, witness)


def test_generalized_cost_tracks_unequal_bound():
    rng = random.Random(555)
    ratios = []
    for trial in range(100):
        p = rng.randint(2, 6)
        t = build_star([(w, w) for w in (rng.randint(1, 4) for _ in range(p))])
        n_r = rng.randint(2, 8)
        n_s = rng.randint(n_r, 24)
        r_parts, s_parts = {}, {}
        for k in range(n_r):
            r_parts.setdefault(rng.choice(t.compute_nodes), []).append(k)
        for k in range(n_s):
            s_parts.setdefault(rng.choice(t.compute_nodes), []).append(100 + k)
        dist = Distribution(t.compute_nodes, r_parts, s_parts)
        trace, state, _ = generalized_star_cartesian(t, dist)
        assert verify_cartesian(state, dist)[0]
        lb = lb_cp_unequal(t, dist)
        c = cost(trace, t).tuple_cost
        if lb.value and lb.value > 0:
            ratios.append(float(c / lb.value))
    assert ratios and max(ratios) <= 8.0
