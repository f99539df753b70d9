import random
from fractions import Fraction

import pytest

from treeshuffle import Distribution, Topology, build_star, build_symmetric_tree


@pytest.fixture
def unit_star2():
    return build_star([(1, 1), (1, 1)])


@pytest.fixture
def unit_star3():
    return build_star([(1, 1)] * 3)


@pytest.fixture
def unit_star4():
    return build_star([(1, 1)] * 4)


def make_tree4(bw=1):
    # router o(6) with child routers a(4), b(5); a holds leaves 0,1; b holds 2,3
    kinds = {0: "compute", 1: "compute", 2: "compute", 3: "compute",
             4: "router", 5: "router", 6: "router"}
    edges = {(0, 4): Fraction(bw), (1, 4): Fraction(bw), (2, 5): Fraction(bw),
             (3, 5): Fraction(bw), (4, 6): Fraction(bw), (5, 6): Fraction(bw)}
    return build_symmetric_tree(kinds, edges)


@pytest.fixture
def tree4():
    return make_tree4()


def random_normalized_tree(rng, n_leaves, bw_choices=(1, 2, 3, 4)):
    """Random tree with compute leaves, no degree-2 nodes, random small
    integer bandwidths."""
    next_id = [0]

    def fresh():
        next_id[0] += 1
        return next_id[0] - 1

    kinds = {}
    edges = {}

    def build(leaf_count, parent):
        if leaf_count == 1:
            v = fresh()
            kinds[v] = "compute"
            if parent is not None:
                edges[(v, parent)] = Fraction(rng.choice(bw_choices))
            return
        me = fresh()
        kinds[me] = "router"
        if parent is not None:
            edges[(me, parent)] = Fraction(rng.choice(bw_choices))
        min_kids = 2 if parent is not None else min(3, leaf_count)
        max_kids = min(leaf_count, 4)
        k = rng.randint(min_kids, max(max_kids, min_kids))
        k = min(k, leaf_count)
        # partition leaf_count into k positive parts
        cuts = sorted(rng.sample(range(1, leaf_count), k - 1)) if k > 1 else []
        parts = [b - a for a, b in zip([0] + cuts, cuts + [leaf_count])]
        for p in parts:
            build(p, me)

    if n_leaves == 1:
        v = fresh()
        kinds[v] = "compute"
    elif n_leaves == 2:
        a, b = fresh(), fresh()
        kinds[a] = kinds[b] = "compute"
        edges[(a, b)] = Fraction(rng.choice(bw_choices))
    else:
        build(n_leaves, None)
    return build_symmetric_tree(kinds, edges)


def random_distribution(rng, topo, n_r, n_s, overlap=True):
    domain = 4 * (n_r + n_s) + 8
    if overlap:
        r_keys = rng.sample(range(domain), n_r)
        s_keys = rng.sample(range(domain), n_s)
    else:
        pool = rng.sample(range(2 * domain), n_r + n_s)
        r_keys, s_keys = pool[:n_r], pool[n_r:]
    r_parts, s_parts = {}, {}
    for k in r_keys:
        r_parts.setdefault(rng.choice(topo.compute_nodes), []).append(k)
    for k in s_keys:
        s_parts.setdefault(rng.choice(topo.compute_nodes), []).append(k)
    return Distribution(topo.compute_nodes, r_parts, s_parts)
