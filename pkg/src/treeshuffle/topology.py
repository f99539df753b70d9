"""Bandwidth-annotated network graphs and their structural normalisations.

A topology is a directed graph over small-integer node ids.  Compute nodes
store data and compute; router nodes only forward.  The algorithms in this
package operate on *normalized symmetric trees*: the undirected skeleton is a
tree, every compute node is a leaf, and no node has undirected degree two.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .rational import INF, Bandwidth, bw_min, is_inf, parse_bw

COMPUTE = "compute"
ROUTER = "router"

Edge = Tuple[int, int]


class Topology:
    """Directed graph with per-edge bandwidths and a compute-node subset.

    Treated as immutable after construction; all operations return new
    objects.  Iteration orders are id-sorted for determinism.
    """

    def __init__(self, kinds: Dict[int, str], edges: Dict[Edge, Bandwidth], symmetric: bool):
        self.kinds = dict(kinds)
        self.edges = dict(edges)
        self.symmetric = symmetric
        for (u, v), bw in self.edges.items():
            if u not in self.kinds or v not in self.kinds:
                raise ValueError(f"edge ({u},{v}) references unknown node")
            if not is_inf(bw) and bw <= 0:
                raise ValueError(f"edge ({u},{v}) has nonpositive bandwidth")
        if symmetric:
            for (u, v), bw in self.edges.items():
                if self.edges.get((v, u)) != bw:
                    raise ValueError(f"symmetric flag set but edge ({u},{v}) not mirrored")
        self.node_ids = tuple(sorted(self.kinds))
        self.compute_nodes = tuple(v for v in self.node_ids if self.kinds[v] == COMPUTE)
        self._adj: Dict[int, List[int]] = {v: [] for v in self.node_ids}
        seen = set()
        for (u, v) in self.edges:
            key = (min(u, v), max(u, v))
            if key not in seen:
                seen.add(key)
                self._adj[u].append(v)
                self._adj[v].append(u)
        for v in self._adj:
            self._adj[v].sort()
        self._undirected = tuple(sorted(seen))

    # -- basic accessors -------------------------------------------------

    def is_compute(self, v: int) -> bool:
        return self.kinds[v] == COMPUTE

    def neighbors(self, v: int) -> List[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def undirected_edges(self) -> Tuple[Edge, ...]:
        """Canonical (min,max) pairs of the undirected skeleton, id-sorted."""
        return self._undirected

    def bw(self, u: int, v: int) -> Bandwidth:
        return self.edges[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def is_tree(self) -> bool:
        n = len(self.node_ids)
        if len(self._undirected) != n - 1:
            return False
        return self._connected()

    def _connected(self) -> bool:
        if not self.node_ids:
            return False
        seen = {self.node_ids[0]}
        stack = [self.node_ids[0]]
        while stack:
            u = stack.pop()
            for w in self._adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.node_ids)

    def is_normalized_tree(self) -> bool:
        if not (self.symmetric and self.is_tree()):
            return False
        for v in self.node_ids:
            if self.is_compute(v) and self.degree(v) > 1 and len(self.node_ids) > 1:
                return False
            if self.degree(v) == 2:
                return False
        return True

    def star_center(self) -> Optional[int]:
        """The router hub if this is a star with compute leaves, else None."""
        routers = [v for v in self.node_ids if not self.is_compute(v)]
        if len(self.compute_nodes) == 1 and not routers:
            return None
        if len(routers) != 1:
            return None
        center = routers[0]
        for v in self.compute_nodes:
            if sorted((v, center)) != sorted(self._adj[v]) and self._adj[v] != [center]:
                return None
            if self._adj[v] != [center]:
                return None
        return center

    def is_star(self) -> bool:
        return len(self.compute_nodes) == 1 or self.star_center() is not None

    # -- tree walks ------------------------------------------------------

    def split_at(self, u: int, v: int) -> Tuple[Set[int], Set[int]]:
        """All nodes on u's side / v's side of the undirected edge {u,v}."""
        if not self.has_edge(u, v) and not self.has_edge(v, u):
            raise ValueError(f"edge ({u},{v}) not in topology")
        side_u = {u}
        stack = [u]
        while stack:
            x = stack.pop()
            for w in self._adj[x]:
                if w == v and x == u:
                    continue
                if w not in side_u:
                    side_u.add(w)
                    stack.append(w)
        side_v = set(self.node_ids) - side_u
        return side_u, side_v

    def path_nodes(self, u: int, v: int) -> List[int]:
        if u not in self.kinds or v not in self.kinds:
            raise ValueError("unknown node")
        if u == v:
            return [u]
        parent = {u: None}
        stack = [u]
        while stack:
            x = stack.pop()
            if x == v:
                break
            for w in self._adj[x]:
                if w not in parent:
                    parent[w] = x
                    stack.append(w)
        if v not in parent:
            raise ValueError(f"no path between {u} and {v}")
        path = [v]
        while path[-1] != u:
            path.append(parent[path[-1]])
        path.reverse()
        return path

    def steiner_edges(self, src: int, dests: Iterable[int]) -> Set[Edge]:
        """Union of the directed edges on the unique paths src -> each dest."""
        edges: Set[Edge] = set()
        for d in dests:
            if d == src:
                continue
            nodes = self.path_nodes(src, d)
            for a, b in zip(nodes, nodes[1:]):
                edges.add((a, b))
        return edges


def unique_path(t: Topology, u: int, v: int) -> List[Edge]:
    """Directed edges from u to v along the tree skeleton."""
    nodes = t.path_nodes(u, v)
    return [(a, b) for a, b in zip(nodes, nodes[1:])]


@dataclass(frozen=True)
class EdgeCut:
    """Partition of the compute nodes induced by removing one tree edge."""

    edge: Edge
    minus: FrozenSet[int]  # compute nodes on the tail side
    plus: FrozenSet[int]   # compute nodes on the head side


def edge_cut(t: Topology, e: Edge) -> EdgeCut:
    u, v = e
    side_u, side_v = t.split_at(u, v)
    minus = frozenset(x for x in side_u if t.is_compute(x))
    plus = frozenset(x for x in side_v if t.is_compute(x))
    return EdgeCut(edge=e, minus=minus, plus=plus)


def build_star(compute_bandwidths: Sequence[Tuple[Bandwidth, Bandwidth]]) -> Topology:
    """Star with one router hub; leaf v has uplink/downlink (up, down).

    Compute leaves get ids 0..p-1, the hub id p.  The symmetric flag is set
    iff every leaf has up == down.
    """
    if not compute_bandwidths:
        raise ValueError("star needs at least one compute node")
    p = len(compute_bandwidths)
    center = p
    kinds = {i: COMPUTE for i in range(p)}
    kinds[center] = ROUTER
    edges: Dict[Edge, Bandwidth] = {}
    symmetric = True
    for i, (up, down) in enumerate(compute_bandwidths):
        up = up if is_inf(up) else Fraction(up)
        down = down if is_inf(down) else Fraction(down)
        if (not is_inf(up) and up <= 0) or (not is_inf(down) and down <= 0):
            raise ValueError("bandwidths must be positive")
        edges[(i, center)] = up
        edges[(center, i)] = down
        if up != down:
            symmetric = False
    return Topology(kinds, edges, symmetric)


def mpc_star(p: int) -> Topology:
    """The classic uniform point-to-point model as a star: infinite uplinks,
    unit downlinks."""
    return build_star([(INF, Fraction(1))] * p)


def build_symmetric_tree(kinds: Dict[int, str], und_edges: Dict[Edge, Bandwidth]) -> Topology:
    """Convenience constructor from undirected weighted edges."""
    edges: Dict[Edge, Bandwidth] = {}
    for (u, v), bw in und_edges.items():
        edges[(u, v)] = bw
        edges[(v, u)] = bw
    return Topology(kinds, edges, symmetric=True)


def normalize_tree(t: Topology) -> Topology:
    """Rewrite a symmetric tree so every compute node is a leaf and no node
    has undirected degree two.

    Internal compute nodes keep their id as the new leaf (so any data labels
    stay valid) and a fresh router takes their structural place.  Degree-two
    routers are fused, the merged edge keeping the smaller bandwidth.
    Dangling router leaves are pruned since no traffic can ever need them.
    """
    if not t.symmetric:
        raise ValueError("normalize_tree requires a symmetric topology")
    if not t.is_tree():
        raise ValueError("normalize_tree requires an acyclic connected skeleton")

    kinds = dict(t.kinds)
    adj: Dict[int, Dict[int, Bandwidth]] = {v: {} for v in kinds}
    for (u, v), bw in t.edges.items():
        adj[u][v] = bw
    next_id = max(kinds) + 1 if kinds else 0

    # Rule 1: internal compute node -> router in place, compute id moved to a
    # fresh leaf joined by an infinite-bandwidth edge.
    for v in sorted(kinds):
        if kinds[v] == COMPUTE and len(adj[v]) >= 2:
            router = next_id
            next_id += 1
            kinds[router] = ROUTER
            adj[router] = {}
            for w, bw in list(adj[v].items()):
                adj[router][w] = bw
                adj[w][router] = bw
                del adj[w][v]
            adj[v] = {router: INF}
            adj[router][v] = INF

    changed = True
    while changed:
        changed = False
        # Rule 2: fuse degree-2 non-leaf nodes.
        for v in sorted(adj):
            if kinds[v] == ROUTER and len(adj[v]) == 2:
                (a, bw_a), (b, bw_b) = sorted(adj[v].items())
                fused = bw_min(bw_a, bw_b)
                del adj[a][v]
                del adj[b][v]
                del adj[v]
                del kinds[v]
                adj[a][b] = fused
                adj[b][a] = fused
                changed = True
                break
        if changed:
            continue
        # Prune router leaves: they can never carry traffic.
        for v in sorted(adj):
            if kinds[v] == ROUTER and len(adj[v]) <= 1 and len(adj) > 1:
                for w in list(adj[v]):
                    del adj[w][v]
                del adj[v]
                del kinds[v]
                changed = True
                break

    edges: Dict[Edge, Bandwidth] = {}
    for u in adj:
        for w, bw in adj[u].items():
            edges[(u, w)] = bw
    return Topology(kinds, edges, symmetric=True)


@dataclass(frozen=True)
class OrientedTree:
    """Tree with every edge pointed toward the (weakly) heavier data side."""

    root: int
    parent: Dict[int, Optional[int]]
    children: Dict[int, Tuple[int, ...]]

    def leaves(self) -> Tuple[int, ...]:
        return tuple(v for v in sorted(self.parent) if not self.children[v])

    def subtree(self, u: int) -> Set[int]:
        out = {u}
        stack = [u]
        while stack:
            x = stack.pop()
            for c in self.children[x]:
                out.add(c)
                stack.append(c)
        return out

    def postorder(self) -> List[int]:
        order: List[int] = []
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                order.append(v)
            else:
                stack.append((v, True))
                for c in reversed(self.children[v]):
                    stack.append((c, False))
        return order

    def out_bw(self, t: Topology, v: int) -> Bandwidth:
        p = self.parent[v]
        if p is None:
            raise ValueError("root has no outgoing edge")
        return t.bw(v, p)


def orient(t: Topology, sizes: Dict[int, int]) -> OrientedTree:
    """Point each edge toward the side holding at least half of the data.

    The side-sum comparison can tie; ties go toward the side containing the
    globally largest node id, which keeps the out-degree argument intact.
    """
    total = sum(sizes.get(v, 0) for v in t.compute_nodes)
    if total <= 0:
        raise ValueError("orient requires a positive total data size")
    if len(t.node_ids) > 1:
        if not (t.symmetric and t.is_tree()):
            raise ValueError("orient requires a symmetric tree")
        # degree-2 routers (star hubs) are fine: both their edges induce the
        # same compute partition, so their directions stay consistent
        for v in t.compute_nodes:
            if t.degree(v) > 1:
                raise ValueError("orient requires compute nodes to be leaves")
    global_max_id = max(t.node_ids)

    direction: Dict[Edge, Tuple[int, int]] = {}
    parent: Dict[int, Optional[int]] = {v: None for v in t.node_ids}
    for (u, v) in t.undirected_edges():
        side_u, side_v = t.split_at(u, v)
        sum_u = sum(sizes.get(x, 0) for x in side_u if t.is_compute(x))
        sum_v = total - sum_u
        if sum_u < sum_v:
            head = v
        elif sum_v < sum_u:
            head = u
        else:
            head = v if global_max_id in side_v else u
        tail = u if head == v else v
        parent[tail] = head
        direction[(u, v)] = (tail, head)

    roots = [v for v in t.node_ids if parent[v] is None]
    if len(roots) != 1:
        raise ValueError(f"orientation produced {len(roots)} roots")
    children: Dict[int, List[int]] = {v: [] for v in t.node_ids}
    for v, p in parent.items():
        if p is not None:
            children[p].append(v)
    return OrientedTree(
        root=roots[0],
        parent=parent,
        children={v: tuple(sorted(c)) for v, c in children.items()},
    )


@dataclass(frozen=True)
class Cover:
    """Set of tree nodes such that every leaf has an ancestor-or-self in it."""

    members: FrozenSet[int]


def is_cover(ot: OrientedTree, members: Set[int]) -> bool:
    for leaf in ot.leaves():
        x: Optional[int] = leaf
        while x is not None:
            if x in members:
                break
            x = ot.parent[x]
        else:
            return False
    return True


def is_minimal_cover(ot: OrientedTree, members: Set[int]) -> bool:
    if not is_cover(ot, members):
        return False
    return all(not is_cover(ot, members - {m}) for m in members)


def enumerate_minimal_covers(ot: OrientedTree, max_nodes: int = 24) -> List[Cover]:
    """All minimal covers, by recursive decomposition over the tree.

    A minimal cover of a subtree is either its root alone or a union of
    minimal covers of the child subtrees.
    """
    if len(ot.parent) > max_nodes:
        raise ValueError(f"cover enumeration limited to {max_nodes} nodes")

    def covers(u: int) -> List[FrozenSet[int]]:
        kids = ot.children[u]
        if not kids:
            return [frozenset({u})]
        parts = [frozenset({u})]
        combos: List[FrozenSet[int]] = [frozenset()]
        for c in kids:
            combos = [acc | sub for acc in combos for sub in covers(c)]
        parts.extend(combos)
        return parts

    result = covers(ot.root)
    result.sort(key=lambda s: (len(s), tuple(sorted(s))))
    return [Cover(members=m) for m in result]
