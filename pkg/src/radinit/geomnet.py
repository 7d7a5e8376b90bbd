"""Random geometric networks on a square and exact measurement of their
reachability graphs (degrees, connectivity, hop diameter, coverage)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.spatial import cKDTree

__all__ = [
    "Point",
    "Network",
    "GraphStats",
    "UnionFind",
    "generate_network",
    "adjacency",
    "graph_stats",
    "save_network",
    "load_network",
]


@dataclass(frozen=True)
class Point:
    x: float
    y: float


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.n_sets = n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_sets -= 1


@dataclass
class Network:
    """Nodes thrown uniformly on a [0, side]^2 square, reachable within
    ``radius`` of each other.  Positions are immutable after construction;
    adjacency is cached per radius so protocols can retune the range."""

    side: float
    nodes: np.ndarray  # shape (n, 2), read-only
    radius: float
    seed: Optional[int] = None
    _adj_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError(f"side must be > 0, got {self.side}")
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        self.nodes = np.asarray(self.nodes, dtype=np.float64).reshape(-1, 2)
        if len(self.nodes) and (self.nodes.min() < 0 or self.nodes.max() > self.side):
            raise ValueError("node coordinates must lie inside the square")
        self.nodes.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def area(self) -> float:
        return self.side * self.side

    def neighbor_lists(self, radius: Optional[float] = None) -> list:
        """Neighbor lists at the given radius (default: the network radius).

        Edge rule: squared Euclidean distance <= radius^2, boundary
        inclusive.  The KD-tree is only a candidate filter; the exact
        squared-distance comparison decides, so results are identical to the
        O(n^2) check.
        """
        r = self.radius if radius is None else radius
        cached = self._adj_cache.get(r)
        if cached is not None:
            return cached
        n = self.n
        lists = [[] for _ in range(n)]
        if n > 1 and r > 0:
            tree = self._tree()
            pairs = tree.query_pairs(r * (1.0 + 1e-12), output_type="ndarray")
            if len(pairs):
                diff = self.nodes[pairs[:, 0]] - self.nodes[pairs[:, 1]]
                keep = (diff * diff).sum(axis=1) <= r * r
                pairs = pairs[keep]
            for i, j in pairs:
                lists[i].append(int(j))
                lists[j].append(int(i))
        lists = [sorted(l) for l in lists]
        self._adj_cache[r] = lists
        return lists

    def _tree(self) -> cKDTree:
        tree = self._adj_cache.get("__tree__")
        if tree is None:
            tree = cKDTree(self.nodes) if self.n else None
            self._adj_cache["__tree__"] = tree
        return tree

    def coverage_counts(self, radius: Optional[float] = None) -> np.ndarray:
        """Disk-cover multiplicity at every probe point of a ceil(side) x
        ceil(side) grid of cell centers (pitch ~1 m at unit density)."""
        r = self.radius if radius is None else radius
        m = math.ceil(self.side)
        g = (np.arange(m) + 0.5) * (self.side / m)
        probes = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        if self.n == 0 or r <= 0:
            return np.zeros(len(probes), dtype=np.int64)
        return np.asarray(self._tree().query_ball_point(probes, r, return_length=True))


@dataclass(frozen=True)
class GraphStats:
    """Exact measurements of one reachability graph."""

    connected: bool
    min_degree: int
    max_degree: int
    isolated_count: int
    diameter_hops: Union[int, float]  # int when finite, math.inf otherwise
    coverage_min: int


def generate_network(n: int, side: float, radius: float, seed: int) -> Network:
    """Throw n points i.i.d. uniform on [0, side]^2.  Identical arguments
    give a bit-identical network."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if side <= 0:
        raise ValueError(f"side must be > 0, got {side}")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    pts = rng.random((n, 2)) * side
    return Network(side=side, nodes=pts, radius=radius, seed=seed)


def adjacency(net: Network) -> list:
    """Neighbor lists of the network at its current radius."""
    return net.neighbor_lists()


def _edge_arrays(adj: list) -> tuple:
    row = []
    col = []
    for i, nbrs in enumerate(adj):
        row.extend([i] * len(nbrs))
        col.extend(nbrs)
    return np.asarray(row, dtype=np.int32), np.asarray(col, dtype=np.int32)


def graph_stats(net: Network, include_diameter: bool = True) -> GraphStats:
    """Measure the reachability graph: connectivity (union-find), degree
    range, isolated-node count, all-pairs hop diameter (BFS from every node),
    and the minimum probe-grid coverage multiplicity.

    ``include_diameter=False`` skips the all-pairs search and reports
    ``diameter_hops=None`` (an escape hatch for very large instances).
    """
    n = net.n
    if n == 1:
        # singleton: connected by convention, diameter 0
        cov = int(net.coverage_counts().min())
        return GraphStats(True, 0, 0, 1, 0, cov)

    adj = net.neighbor_lists()
    degrees = np.array([len(a) for a in adj])
    uf = UnionFind(n)
    for i, nbrs in enumerate(adj):
        for j in nbrs:
            if j > i:
                uf.union(i, j)
    connected = uf.n_sets == 1

    diameter: Union[int, float, None]
    if not include_diameter:
        diameter = None
    elif not connected:
        diameter = math.inf
    elif net.radius == 0:
        diameter = math.inf  # unreachable: n >= 2 and no edges
    else:
        row, col = _edge_arrays(adj)
        m = csr_matrix((np.ones(len(row), dtype=np.int8), (row, col)), shape=(n, n))
        dist = shortest_path(m, method="D", unweighted=True, directed=False)
        diameter = int(dist.max())

    cov = int(net.coverage_counts().min())
    return GraphStats(
        connected=connected,
        min_degree=int(degrees.min()),
        max_degree=int(degrees.max()),
        isolated_count=int((degrees == 0).sum()),
        diameter_hops=diameter,
        coverage_min=cov,
    )


def save_network(net: Network, path: str) -> None:
    """Write the network document: side/radius as decimal strings, seed, and
    the node coordinate pairs at full round-trip precision."""
    doc = {
        "side": repr(net.side),
        "radius": repr(net.radius),
        "seed": net.seed if net.seed is not None else -1,
        "nodes": [[x, y] for x, y in net.nodes.tolist()],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_network(path: str) -> Network:
    """Read a network document written by :func:`save_network`."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        side = float(doc["side"])
        radius = float(doc["radius"])
        seed = int(doc["seed"])
        nodes = np.array(doc["nodes"], dtype=np.float64).reshape(-1, 2)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed network file {path}: {exc}") from exc
    return Network(side=side, nodes=nodes, radius=radius, seed=seed if seed >= 0 else None)
