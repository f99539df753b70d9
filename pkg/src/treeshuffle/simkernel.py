"""Data distributions, round-by-round execution and cost accounting.

A protocol run is driven through a :class:`Runtime`: sends charge every edge
on the union of unique paths once per call (multicast consolidation) and
record which element copies each compute node ends up holding.  Costs are the
per-round maxima of tuples-per-bandwidth over all edges, summed over rounds.
"""
from __future__ import annotations

import hashlib
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .rational import INF, Bandwidth, Cost, ZERO, is_inf, ratio
from .topology import Edge, Topology

REL_R = "r"
REL_S = "s"


class Distribution:
    """Per-compute-node element multisets for relations R and S.

    Elements are keys (integers); each placed copy is identified by a global
    uid assigned contiguously in node-id order, so a copy's holder and grid
    index are both derivable.  Sorting tasks use only the R side.
    """

    def __init__(self, nodes: Sequence[int], r_parts: Dict[int, Sequence[int]],
                 s_parts: Optional[Dict[int, Sequence[int]]] = None):
        self.nodes = tuple(sorted(nodes))
        s_parts = s_parts or {}
        for v in list(r_parts) + list(s_parts):
            if v not in self.nodes:
                raise ValueError(f"distribution references unknown node {v}")
        self.r = {v: tuple(r_parts.get(v, ())) for v in self.nodes}
        self.s = {v: tuple(s_parts.get(v, ())) for v in self.nodes}
        self._start = {REL_R: {}, REL_S: {}}
        self._keys = {REL_R: [], REL_S: []}
        self._holder = {REL_R: [], REL_S: []}
        for rel, parts in ((REL_R, self.r), (REL_S, self.s)):
            off = 0
            for v in self.nodes:
                self._start[rel][v] = off
                self._keys[rel].extend(parts[v])
                self._holder[rel].extend([v] * len(parts[v]))
                off += len(parts[v])
            self._keys[rel] = tuple(self._keys[rel])
            self._holder[rel] = tuple(self._holder[rel])
        self._uids_by_key = {REL_R: defaultdict(list), REL_S: defaultdict(list)}
        for rel in (REL_R, REL_S):
            for uid, key in enumerate(self._keys[rel]):
                self._uids_by_key[rel][key].append(uid)

    # -- cardinalities ----------------------------------------------------

    @property
    def n_r(self) -> int:
        return len(self._keys[REL_R])

    @property
    def n_s(self) -> int:
        return len(self._keys[REL_S])

    @property
    def total(self) -> int:
        return self.n_r + self.n_s

    def size(self, v: int) -> int:
        return len(self.r[v]) + len(self.s[v])

    def sizes(self) -> Dict[int, int]:
        return {v: self.size(v) for v in self.nodes}

    def count(self, rel: str, v: Optional[int] = None) -> int:
        if v is None:
            return len(self._keys[rel])
        return len(self.r[v] if rel == REL_R else self.s[v])

    # -- uid accessors -----------------------------------------------------

    def part(self, rel: str, v: int) -> Tuple[int, ...]:
        return self.r[v] if rel == REL_R else self.s[v]

    def uids(self, rel: str, v: int) -> range:
        start = self._start[rel][v]
        return range(start, start + self.count(rel, v))

    def key_of(self, rel: str, uid: int) -> int:
        return self._keys[rel][uid]

    def holder_of(self, rel: str, uid: int) -> int:
        return self._holder[rel][uid]

    def keys(self, rel: str) -> Tuple[int, ...]:
        return self._keys[rel]

    def uids_by_key(self, rel: str, key: int) -> List[int]:
        return self._uids_by_key[rel].get(key, [])

    def key_set(self, rel: str) -> Set[int]:
        return set(self._uids_by_key[rel])


@dataclass
class TrafficTrace:
    """Tuple counts per round per directed edge."""

    rounds: List[Dict[Edge, int]] = field(default_factory=list)
    element_width_bits: int = 64

    def new_round(self) -> int:
        self.rounds.append(Counter())
        return len(self.rounds) - 1

    def charge(self, rnd: int, edge: Edge, count: int) -> None:
        if count < 0:
            raise ValueError("negative charge")
        if count:
            self.rounds[rnd][edge] = self.rounds[rnd].get(edge, 0) + count

    def round_count(self) -> int:
        return len(self.rounds)

    def edge_total(self, edge: Edge) -> int:
        return sum(r.get(edge, 0) for r in self.rounds)


@dataclass
class CostReport:
    tuple_cost: Cost
    bit_cost: Cost
    rounds: int
    per_edge_max: Dict[int, Tuple[Optional[Edge], Cost]]
    seed: Optional[int] = None
    note: str = ""


def send(trace: TrafficTrace, topo: Topology, rnd: int, source: int,
         destinations: Iterable[int], payload_count: int) -> Set[Edge]:
    """Charge one multicast: every edge on the union of unique paths from
    ``source`` to the destinations is charged ``payload_count`` once.

    Returns the charged edge set.  Delivery bookkeeping is the caller's job
    (see :class:`Runtime`).
    """
    dests = set(destinations)
    if not dests:
        raise ValueError("empty destination set")
    if payload_count < 0:
        raise ValueError("negative payload")
    edges = topo.steiner_edges(source, dests)
    for e in edges:
        if e not in topo.edges:
            raise ValueError(f"edge {e} missing from topology")
        trace.charge(rnd, e, payload_count)
    return edges


def cost(trace: TrafficTrace, topo: Topology, seed: Optional[int] = None) -> CostReport:
    """Capacity cost: per-round max over edges of count/bandwidth, summed."""
    total: Cost = ZERO
    per_edge_max: Dict[int, Tuple[Optional[Edge], Cost]] = {}
    note = ""
    for i, charges in enumerate(trace.rounds):
        best: Cost = ZERO
        best_edge: Optional[Edge] = None
        for e in sorted(charges):
            c = ratio(charges[e], topo.bw(*e))
            if is_inf(c):
                note = f"edge {e} has zero bandwidth with nonzero traffic"
            if best_edge is None or c > best:
                best, best_edge = c, e
        per_edge_max[i] = (best_edge, best)
        total = INF if (is_inf(total) or is_inf(best)) else total + best
    bits = INF if is_inf(total) else total * trace.element_width_bits
    return CostReport(tuple_cost=total, bit_cost=bits, rounds=trace.round_count(),
                      per_edge_max=per_edge_max, seed=seed, note=note)


class NodeState:
    """Element copies held by each compute node after each recorded delivery.

    Relational holdings only ever grow (copies travel, originals stay put).
    Sorting protocols move items instead and use the ``items`` field.
    """

    def __init__(self, dist: Distribution):
        self.dist = dist
        self.held = {
            REL_R: {v: set(dist.uids(REL_R, v)) for v in dist.nodes},
            REL_S: {v: set(dist.uids(REL_S, v)) for v in dist.nodes},
        }
        self.items: Dict[int, List[int]] = {v: list(dist.r[v]) for v in dist.nodes}

    def receive(self, rel: str, v: int, uids: Iterable[int]) -> None:
        self.held[rel][v].update(uids)

    def holds_key_pair(self, v: int, key: int) -> bool:
        r_uids = self.dist.uids_by_key(REL_R, key)
        s_uids = self.dist.uids_by_key(REL_S, key)
        hr, hs = self.held[REL_R][v], self.held[REL_S][v]
        return any(u in hr for u in r_uids) and any(u in hs for u in s_uids)


class Runtime:
    """Execution harness tying a topology, a distribution, trace and state."""

    def __init__(self, topo: Topology, dist: Distribution, width_bits: int = 64):
        self.topo = topo
        self.dist = dist
        self.trace = TrafficTrace(element_width_bits=width_bits)
        self.state = NodeState(dist)

    def new_round(self) -> int:
        return self.trace.new_round()

    def send_uids(self, rnd: int, source: int, destinations: Iterable[int],
                  rel: str, uids: Sequence[int]) -> None:
        """Multicast copies of the given element uids to every destination."""
        dests = sorted(set(destinations))
        if not uids or not dests:
            return
        send(self.trace, self.topo, rnd, source, dests, len(uids))
        for d in dests:
            if self.topo.is_compute(d):
                self.state.receive(rel, d, uids)

    def send_count(self, rnd: int, source: int, destinations: Iterable[int], count: int) -> None:
        """Charge-only multicast for payloads that are not element copies
        (samples, splitters)."""
        dests = sorted(set(destinations))
        if count and dests:
            send(self.trace, self.topo, rnd, source, dests, count)

    def move_items(self, rnd: int, source: int, dest: int, values: Sequence[int]) -> None:
        """Relocate sortable items (removal allowed, unlike relational sends)."""
        if not values:
            return
        if dest != source:
            send(self.trace, self.topo, rnd, source, [dest], len(values))
        src_items = self.state.items[source]
        for x in values:
            src_items.remove(x)
        self.state.items[dest].extend(values)

    def finish(self, seed: Optional[int] = None) -> CostReport:
        return cost(self.trace, self.topo, seed=seed)


# -- output verification ----------------------------------------------------

def verify_intersection(state: NodeState, dist: Distribution) -> Tuple[bool, List[int]]:
    """True iff every key present in both relations is co-located somewhere."""
    missing = []
    for key in sorted(dist.key_set(REL_R) & dist.key_set(REL_S)):
        if not any(state.holds_key_pair(v, key) for v in dist.nodes):
            missing.append(key)
    return (not missing), missing


def _grid_covered(nodes: Sequence[int], row_sets: Dict[int, Set[int]],
                  col_sets: Dict[int, Set[int]], rows: Sequence[int],
                  cols: Sequence[int]) -> Optional[Tuple[int, int]]:
    """First uncovered (row, col) pair, or None if every pair is co-located.

    Rows with identical holder sets share one column-union check, which keeps
    the test exact but far below pairwise enumeration.
    """
    col_universe = set(cols)
    by_mask: Dict[frozenset, List[int]] = defaultdict(list)
    for i in rows:
        mask = frozenset(v for v in nodes if i in row_sets[v])
        by_mask[mask].append(i)
    for mask, members in by_mask.items():
        union: Set[int] = set()
        for v in mask:
            union |= col_sets[v]
        gap = col_universe - union
        if gap:
            return (min(members), min(gap))
    return None


def verify_cartesian(state: NodeState, dist: Distribution) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """True iff every (r_i, s_j) index pair is co-located at some node."""
    witness = _grid_covered(dist.nodes, state.held[REL_R], state.held[REL_S],
                            range(dist.n_r), range(dist.n_s))
    return witness is None, witness


def verify_join(state: NodeState, dist: Distribution) -> Tuple[bool, Optional[Tuple[int, int, int]]]:
    """True iff, per join key, every (r-copy, s-copy) pair is co-located."""
    for key in sorted(dist.key_set(REL_R) & dist.key_set(REL_S)):
        r_uids = dist.uids_by_key(REL_R, key)
        s_uids = dist.uids_by_key(REL_S, key)
        witness = _grid_covered(dist.nodes, state.held[REL_R], state.held[REL_S],
                                r_uids, s_uids)
        if witness is not None:
            return False, (key, witness[0], witness[1])
    return True, None


def verify_sorted(state: NodeState, dist: Distribution,
                  node_order: Sequence[int]) -> bool:
    """Concatenating holdings in node order must be globally nondecreasing
    and a permutation of the input."""
    concat: List[int] = []
    for v in node_order:
        part = state.items[v]
        if any(part[i] > part[i + 1] for i in range(len(part) - 1)):
            return False
        concat.extend(part)
    if any(concat[i] > concat[i + 1] for i in range(len(concat) - 1)):
        return False
    original = sorted(x for v in dist.nodes for x in dist.r[v])
    leftovers = sorted(x for v in dist.nodes if v not in node_order for x in state.items[v])
    if leftovers:
        return False
    return sorted(concat) == original


# -- keyed hashing -----------------------------------------------------------

class HashFamily:
    """Deterministic keyed assignment of keys to nodes with exact marginals.

    The (seed, function id, key) triple is hashed to a uniform 64-bit value
    and the resulting [0,1) rational inverted through the CDF over id-sorted
    nodes, so every evaluation site agrees on the assignment.
    """

    def __init__(self, seed: int, function_id: str, probabilities: Dict[int, Fraction]):
        total = sum(probabilities.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, expected exactly 1")
        self.seed = seed
        self.function_id = function_id
        self._cdf: List[Tuple[Fraction, int]] = []
        acc = Fraction(0)
        for v in sorted(probabilities):
            p = probabilities[v]
            if p < 0:
                raise ValueError("negative probability")
            if p > 0:
                acc += p
                self._cdf.append((acc, v))

    def __call__(self, key: int) -> int:
        material = f"{self.seed}|{self.function_id}|{key}".encode()
        digest = hashlib.blake2b(material, digest_size=8).digest()
        u = Fraction(int.from_bytes(digest, "big"), 2 ** 64)
        for bound, v in self._cdf:
            if u < bound:
                return v
        return self._cdf[-1][1]


def make_hash(seed: int, function_id: str, probabilities: Dict[int, Fraction]) -> HashFamily:
    return HashFamily(seed, function_id, probabilities)


# -- instance generators ------------------------------------------------------

def uniform_instance(topo: Topology, n_r: int, n_s: int, seed: int,
                     domain: Optional[int] = None, overlap: bool = True) -> Distribution:
    """Keys drawn without replacement, placed uniformly at random.

    With ``overlap`` the two relations share key values (so intersections and
    joins are nonempty); otherwise keys are globally distinct.
    """
    rng = random.Random(seed)
    domain = domain or max(4 * (n_r + n_s), 16)
    if overlap:
        r_keys = rng.sample(range(domain), n_r)
        s_keys = rng.sample(range(domain), n_s)
    else:
        both = rng.sample(range(2 * domain), n_r + n_s)
        r_keys, s_keys = both[:n_r], both[n_r:]
    nodes = topo.compute_nodes
    r_parts: Dict[int, List[int]] = defaultdict(list)
    s_parts: Dict[int, List[int]] = defaultdict(list)
    for k in r_keys:
        r_parts[rng.choice(nodes)].append(k)
    for k in s_keys:
        s_parts[rng.choice(nodes)].append(k)
    return Distribution(nodes, r_parts, s_parts)


def skewed_join_instance(topo: Topology, n: int, zipf_s: float, seed: int,
                         n_keys: Optional[int] = None) -> Distribution:
    """Join instance whose key frequencies decay like rank^(-zipf_s)."""
    rng = random.Random(seed)
    n_keys = n_keys or max(2, n // 8)
    weights = [1.0 / (rank ** zipf_s) for rank in range(1, n_keys + 1)]
    scale = sum(weights)
    half = max(1, n // 2)
    nodes = topo.compute_nodes
    r_parts: Dict[int, List[int]] = defaultdict(list)
    s_parts: Dict[int, List[int]] = defaultdict(list)
    for parts, m in ((r_parts, half), (s_parts, n - half)):
        counts = [max(1, round(m * w / scale)) for w in weights]
        flat = [key for key, c in enumerate(counts) for _ in range(c)][:max(m, 1)]
        for k in flat:
            parts[rng.choice(nodes)].append(k)
    return Distribution(nodes, r_parts, s_parts)


def adversarial_sort_instance(topo: Topology, sizes: Dict[int, int],
                              node_order: Sequence[int]) -> Distribution:
    """Alternating-rank placement: rank order 1,3,5,...,2,4,6,... chunked to
    the nodes left to right, which forces every cut to exchange data."""
    n = sum(sizes.values())
    odd_then_even = list(range(1, n + 1, 2)) + list(range(2, n + 1, 2))
    parts: Dict[int, List[int]] = {}
    off = 0
    for v in node_order:
        parts[v] = odd_then_even[off:off + sizes.get(v, 0)]
        off += sizes.get(v, 0)
    return Distribution(topo.compute_nodes, parts, {})
