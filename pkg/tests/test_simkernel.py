import random
from fractions import Fraction

import pytest

from treeshuffle import (Distribution, INF, Runtime, TrafficTrace,
                         adversarial_sort_instance, build_star, cost, make_hash,
                         mpc_star, send, skewed_join_instance, uniform_instance,
                         verify_cartesian, verify_intersection, verify_join,
                         verify_sorted)
from treeshuffle.rational import is_inf
from treeshuffle.simkernel import REL_R, REL_S

from conftest import make_tree4


def test_send_star_multicast(unit_star3):
    trace = TrafficTrace()
    rnd = trace.new_round()
    send(trace, unit_star3, rnd, 0, [1, 2], 5)
    assert trace.rounds[rnd] == {(0, 3): 5, (3, 1): 5, (3, 2): 5}


def test_send_to_self_charges_nothing(unit_star3):
    trace = TrafficTrace()
    rnd = trace.new_round()
    send(trace, unit_star3, rnd, 0, [0], 7)
    assert not trace.rounds[rnd]


def test_send_tree4_steiner_union(tree4):
    trace = TrafficTrace()
    rnd = trace.new_round()
    send(trace, tree4, rnd, 0, [2, 3], 1)
    assert trace.rounds[rnd] == {(0, 4): 1, (4, 6): 1, (6, 5): 1, (5, 2): 1, (5, 3): 1}


def test_send_is_charged_once_per_edge_per_call(tree4):
    trace = TrafficTrace()
    rnd = trace.new_round()
    send(trace, tree4, rnd, 0, [1, 2, 3], 4)
    # shared prefix edges appear once with the full payload
    assert trace.rounds[rnd][(0, 4)] == 4
    assert trace.rounds[rnd][(4, 6)] == 4


def test_cost_round_max():
    t = build_star([(2, 2), (1, 1)])
    trace = TrafficTrace()
    rnd = trace.new_round()
    trace.charge(rnd, (2, 0), 6)  # w=2 -> 3
    trace.charge(rnd, (2, 1), 5)  # w=1 -> 5
    rep = cost(trace, t)
    assert rep.tuple_cost == 5
    assert rep.per_edge_max[0] == ((2, 1), Fraction(5))


def test_cost_empty_trace(unit_star2):
    rep = cost(TrafficTrace(), unit_star2)
    assert rep.tuple_cost == 0
    assert rep.rounds == 0


def test_cost_adds_rounds(unit_star2):
    trace = TrafficTrace()
    r0 = trace.new_round()
    trace.charge(r0, (0, 2), 2)
    r1 = trace.new_round()
    trace.charge(r1, (2, 1), 3)
    assert cost(trace, unit_star2).tuple_cost == 5


def test_cost_infinite_bandwidth_is_free():
    t = mpc_star(2)
    trace = TrafficTrace()
    rnd = trace.new_round()
    trace.charge(rnd, (0, 2), 100)   # uplink, infinite
    trace.charge(rnd, (2, 1), 3)
    assert cost(trace, t).tuple_cost == 3


def test_bit_cost_scales_with_width(unit_star2):
    trace = TrafficTrace(element_width_bits=32)
    rnd = trace.new_round()
    trace.charge(rnd, (0, 2), 3)
    rep = cost(trace, unit_star2)
    assert rep.bit_cost == rep.tuple_cost * 32


def test_cost_monotone_under_extra_send(unit_star3):
    rng = random.Random(5)
    trace = TrafficTrace()
    rnd = trace.new_round()
    for _ in range(10):
        send(trace, unit_star3, rnd, rng.choice([0, 1, 2]), [rng.choice([0, 1, 2])], 2)
    before = cost(trace, unit_star3).tuple_cost
    send(trace, unit_star3, rnd, 0, [1], 3)
    assert cost(trace, unit_star3).tuple_cost >= before


def test_verify_intersection_colocated(unit_star2):
    dist = Distribution([0, 1], {0: [1, 2]}, {1: [2, 3]})
    rt = Runtime(unit_star2, dist)
    rnd = rt.new_round()
    rt.send_uids(rnd, 0, [1], REL_R, list(dist.uids(REL_R, 0)))
    ok, missing = verify_intersection(rt.state, dist)
    assert ok and not missing


def test_verify_intersection_empty_is_vacuous(unit_star2):
    dist = Distribution([0, 1], {0: [1]}, {1: [9]})
    rt = Runtime(unit_star2, dist)
    ok, _ = verify_intersection(rt.state, dist)
    assert ok


def test_verify_intersection_separated(unit_star2):
    dist = Distribution([0, 1], {0: [2]}, {1: [2]})
    rt = Runtime(unit_star2, dist)
    ok, missing = verify_intersection(rt.state, dist)
    assert not ok and missing == [2]


def test_verify_cartesian_all_at_one_node(unit_star2):
    dist = Distribution([0, 1], {0: [1, 2]}, {0: [5, 6]})
    rt = Runtime(unit_star2, dist)
    ok, witness = verify_cartesian(rt.state, dist)
    assert ok and witness is None


def test_verify_cartesian_missing_pair(unit_star2):
    dist = Distribution([0, 1], {0: [1]}, {1: [5]})
    rt = Runtime(unit_star2, dist)
    ok, witness = verify_cartesian(rt.state, dist)
    assert not ok and witness == (0, 0)


def test_verify_cartesian_matches_pairwise_oracle(unit_star2):
    rng = random.Random(3)
    for _ in range(20):
        dist = Distribution([0, 1], {0: rng.sample(range(50), 4)},
                            {1: rng.sample(range(50, 99), 4)})
        rt = Runtime(unit_star2, dist)
        rnd = rt.new_round()
        for uid in range(dist.n_r):
            if rng.random() < 0.7:
                rt.send_uids(rnd, 0, [1], REL_R, [uid])
        for uid in range(dist.n_s):
            if rng.random() < 0.7:
                rt.send_uids(rnd, 1, [0], REL_S, [uid])
        ok, _ = verify_cartesian(rt.state, dist)
        brute = all(
            any(i in rt.state.held[REL_R][v] and j in rt.state.held[REL_S][v]
                for v in (0, 1))
            for i in range(dist.n_r) for j in range(dist.n_s))
        assert ok == brute


def test_verify_join_per_key(unit_star2):
    dist = Distribution([0, 1], {0: [7, 7]}, {1: [7]})
    rt = Runtime(unit_star2, dist)
    rnd = rt.new_round()
    rt.send_uids(rnd, 1, [0], REL_S, [0])
    ok, witness = verify_join(rt.state, dist)
    assert ok and witness is None


def test_verify_join_detects_missing_copy(unit_star2):
    dist = Distribution([0, 1], {0: [7, 7]}, {1: [7]})
    rt = Runtime(unit_star2, dist)
    rnd = rt.new_round()
    rt.send_uids(rnd, 0, [1], REL_R, [0])  # second copy of key 7 never meets S
    ok, witness = verify_join(rt.state, dist)
    assert not ok and witness == (7, 1, 0)


def test_verify_sorted_single_node():
    t = build_star([(1, 1)])
    dist = Distribution([0], {0: [1, 2, 3]}, {})
    rt = Runtime(t, dist)
    assert verify_sorted(rt.state, dist, [0])


def test_verify_sorted_rejects_out_of_order(unit_star2):
    dist = Distribution([0, 1], {0: [3], 1: [1]}, {})
    rt = Runtime(unit_star2, dist)
    assert not verify_sorted(rt.state, dist, [0, 1])


def test_conservation_under_sends(tree4):
    rng = random.Random(9)
    dist = Distribution(tree4.compute_nodes, {0: [1, 2], 1: [3], 2: [4]}, {3: [1, 4]})
    rt = Runtime(tree4, dist)
    rnd = rt.new_round()
    for _ in range(20):
        src = rng.choice(dist.nodes)
        rel = rng.choice([REL_R, REL_S])
        uids = list(dist.uids(rel, src))
        if uids:
            rt.send_uids(rnd, src, [rng.choice(dist.nodes)], rel, uids)
    for rel in (REL_R, REL_S):
        for v in dist.nodes:
            assert set(dist.uids(rel, v)) <= rt.state.held[rel][v]


def test_make_hash_point_mass():
    h = make_hash(1, "f", {5: Fraction(1)})
    assert all(h(k) == 5 for k in range(50))


def test_make_hash_rejects_bad_sum():
    with pytest.raises(ValueError):
        make_hash(1, "f", {0: Fraction(1, 2), 1: Fraction(1, 3)})


def test_make_hash_deterministic():
    h1 = make_hash(42, "g", {0: Fraction(1, 2), 1: Fraction(1, 2)})
    h2 = make_hash(42, "g", {0: Fraction(1, 2), 1: Fraction(1, 2)})
    assert [h1(k) for k in range(200)] == [h2(k) for k in range(200)]


def test_make_hash_marginals_half_half():
    h = make_hash(7, "balance", {0: Fraction(1, 2), 1: Fraction(1, 2)})
    hits = sum(1 for k in range(10 ** 4) if h(k) == 0)
    assert abs(hits - 5000) <= 300


def test_make_hash_weighted_marginals():
    h = make_hash(3, "w", {0: Fraction(1, 4), 1: Fraction(3, 4)})
    hits = sum(1 for k in range(10 ** 4) if h(k) == 0)
    assert abs(hits - 2500) <= 300


def test_adversarial_instance_interleaves(unit_star2):
    dist = adversarial_sort_instance(unit_star2, {0: 2, 1: 2}, [0, 1])
    assert dist.r[0] == (1, 3)
    assert dist.r[1] == (2, 4)


def test_adversarial_single_node():
    t = build_star([(1, 1)])
    dist = adversarial_sort_instance(t, {0: 4}, [0])
    assert dist.r[0] == (1, 3, 2, 4)


def test_uniform_instance_deterministic(unit_star4):
    a = uniform_instance(unit_star4, 20, 20, seed=7)
    b = uniform_instance(unit_star4, 20, 20, seed=7)
    assert a.r == b.r and a.s == b.s


def test_skewed_instance_has_heavy_keys(unit_star4):
    dist = skewed_join_instance(unit_star4, 200, 1.2, seed=1)
    counts = {}
    for key in dist.keys(REL_R):
        counts[key] = counts.get(key, 0) + 1
    assert max(counts.values()) > 2


def test_mpc_round_cost_equals_max_received():
    rng = random.Random(31)
    t = mpc_star(4)
    for _ in range(20):
        trace = TrafficTrace()
        rnd = trace.new_round()
        received = {v: 0 for v in t.compute_nodes}
        for _ in range(rng.randint(1, 12)):
            src = rng.choice(t.compute_nodes)
            dests = [v for v in t.compute_nodes
                     if v != src and rng.random() < 0.5]
            if not dests:
                continue
            count = rng.randint(1, 9)
            send(trace, t, rnd, src, dests, count)
            for d in dests:
                received[d] += count
        rep = cost(trace, t)
        assert rep.tuple_cost == max(received.values(), default=0)
