"""Undirected simple graphs and the small graph algebra used everywhere else.

Vertices are 0-based integers below a fixed count ``n``.  A :class:`Graph`
is immutable once built; adjacency sets are materialised lazily because bulk
distribution tests create tens of thousands of throwaway graphs whose
neighbourhoods are never queried.

The algebra operations (:func:`intersection_graph`, :func:`union_graph`,
:func:`difference_graph`) each take partial vertex matchings and return new
graphs whose ``vertices`` attribute records the domain they were built on.
"""

from __future__ import annotations

import heapq
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "Graph",
    "PartialMatching",
    "k_core",
    "induced_subgraph",
    "intersection_graph",
    "union_graph",
    "difference_graph",
    "neighborhood_majority",
    "write_edge_list",
    "read_edge_list",
]


def _canonical_edges(n: int, edges) -> np.ndarray:
    """Validate and canonicalise an edge collection to a sorted (m, 2) array.

    Endpoints are swapped so the smaller one comes first, duplicates are
    dropped, and rows are lexicographically sorted.  Self-loops and
    out-of-range endpoints are hard errors.
    """
    if edges is None:
        return np.empty((0, 2), dtype=np.int64)
    if isinstance(edges, np.ndarray):
        arr = edges.astype(np.int64, copy=False)
    else:
        arr = np.array(list(edges), dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError("edge endpoint out of range [0, n)")
    if (arr[:, 0] == arr[:, 1]).any():
        raise ValueError("self-loops are not allowed")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


class Graph:
    """Immutable undirected simple graph on vertices ``0..n-1``.

    ``vertices`` optionally restricts the vertex set (used by the algebra
    operations to record the matching domain a graph was built on); when
    omitted the graph lives on all of ``0..n-1``.
    """

    __slots__ = ("n", "_edges", "_vertices", "_adj", "_packed")

    def __init__(self, n: int, edges=None, vertices: Iterable[int] | None = None):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = int(n)
        self._edges = _canonical_edges(self.n, edges)
        self._edges.setflags(write=False)
        if vertices is None:
            self._vertices = None
        else:
            vs = frozenset(int(v) for v in vertices)
            if vs and (min(vs) < 0 or max(vs) >= self.n):
                raise ValueError("vertex out of range [0, n)")
            if self._edges.size:
                ends = np.unique(self._edges)
                if not all(int(v) in vs for v in ends):
                    raise ValueError("edge endpoint outside the declared vertex set")
            self._vertices = vs
        self._adj = None
        self._packed = None

    # -- basic accessors ---------------------------------------------------

    @property
    def edges(self) -> np.ndarray:
        """Canonical (m, 2) edge array, read-only."""
        return self._edges

    @property
    def edge_count(self) -> int:
        return self._edges.shape[0]

    @property
    def vertices(self) -> frozenset[int]:
        if self._vertices is None:
            return frozenset(range(self.n))
        return self._vertices

    def edge_set(self) -> set[tuple[int, int]]:
        """Edges as a set of (lo, hi) tuples; convenient in tests."""
        return {(int(u), int(v)) for u, v in self._edges}

    # -- adjacency ---------------------------------------------------------

    def _adjacency(self) -> list[set[int]]:
        if self._adj is None:
            adj: list[set[int]] = [set() for _ in range(self.n)]
            for u, v in self._edges:
                adj[u].add(int(v))
                adj[v].add(int(u))
            self._adj = adj
        return self._adj

    def neighbors(self, v: int) -> set[int]:
        """Neighbour set of ``v`` (treat as read-only)."""
        return self._adjacency()[v]

    def degree(self, v: int) -> int:
        return len(self._adjacency()[v])

    def degrees(self) -> np.ndarray:
        """Degree of every vertex as an int64 array."""
        deg = np.zeros(self.n, dtype=np.int64)
        if self._edges.size:
            deg += np.bincount(self._edges[:, 0], minlength=self.n)
            deg += np.bincount(self._edges[:, 1], minlength=self.n)
        return deg

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        return v in self._adjacency()[u]

    def packed_keys(self) -> np.ndarray:
        """Sorted int64 keys ``lo * n + hi``; supports bulk membership tests."""
        if self._packed is None:
            keys = self._edges[:, 0] * np.int64(self.n) + self._edges[:, 1]
            self._packed = np.sort(keys)
            self._packed.setflags(write=False)
        return self._packed

    def contains_edges(self, pairs: np.ndarray) -> np.ndarray:
        """Vectorised membership for an (m, 2) array of candidate pairs.

        Pairs need not be ordered; rows with equal endpoints test False.
        """
        if pairs.size == 0:
            return np.zeros(0, dtype=bool)
        lo = np.minimum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
        hi = np.maximum(pairs[:, 0], pairs[:, 1]).astype(np.int64)
        keys = lo * np.int64(self.n) + hi
        packed = self.packed_keys()
        pos = np.searchsorted(packed, keys)
        found = pos < packed.shape[0]
        found[found] = packed[pos[found]] == keys[found]
        found &= lo != hi
        return found

    # -- dunder ------------------------------------------------------------

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Graph(n={self.n}, m={self.edge_count})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.vertices == other.vertices
            and self._edges.shape == other._edges.shape
            and bool((self._edges == other._edges).all())
        )

    def __hash__(self):  # pragma: no cover - graphs are not hashable
        raise TypeError("Graph is not hashable")


class PartialMatching:
    """Injective partial map between two vertex sets.

    Keys live in the source graph's labelling, values in the target's.  The
    mapping is validated to be injective with non-negative endpoints.
    """

    __slots__ = ("_map",)

    def __init__(self, mapping: Mapping[int, int] | Iterable[tuple[int, int]]):
        m = {int(u): int(v) for u, v in dict(mapping).items()}
        if any(u < 0 for u in m) or any(v < 0 for v in m.values()):
            raise ValueError("matched vertices must be non-negative")
        if len(set(m.values())) != len(m):
            raise ValueError("matching must be injective")
        self._map = m

    @classmethod
    def identity(cls, vertices: Iterable[int]) -> "PartialMatching":
        return cls({int(v): int(v) for v in vertices})

    @classmethod
    def from_permutation(cls, pi: Sequence[int], domain: Iterable[int] | None = None) -> "PartialMatching":
        """Matching ``v -> pi[v]``, optionally restricted to ``domain``."""
        if domain is None:
            return cls({v: int(pi[v]) for v in range(len(pi))})
        return cls({int(v): int(pi[int(v)]) for v in domain})

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, v: int) -> bool:
        return int(v) in self._map

    def __getitem__(self, v: int) -> int:
        return self._map[int(v)]

    def get(self, v: int, default=None):
        return self._map.get(int(v), default)

    def items(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._map.items()))

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self._map)

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self._map.values())

    def inverse(self) -> "PartialMatching":
        return PartialMatching({v: u for u, v in self._map.items()})

    def as_array(self, n: int) -> np.ndarray:
        """Dense int64 lookup of length ``n``; unmatched entries are -1."""
        arr = np.full(n, -1, dtype=np.int64)
        for u, v in self._map.items():
            arr[u] = v
        return arr

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialMatching):
            return NotImplemented
        return self._map == other._map

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"PartialMatching(size={len(self._map)})"


# -- core decomposition ----------------------------------------------------


def k_core(g: Graph, k: int) -> frozenset[int]:
    """Vertex set of the maximal induced subgraph with minimum degree >= k.

    Peels iteratively, always removing the lowest-degree vertex and breaking
    ties by vertex index, so the removal order (not just the result) is
    deterministic.  Returns the empty set when nothing survives.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = g.n
    deg = g.degrees()
    removed = np.zeros(n, dtype=bool)
    heap: list[tuple[int, int]] = [(int(deg[v]), v) for v in range(n)]
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if removed[v] or d != deg[v]:
            continue
        if d >= k:
            break
        removed[v] = True
        for u in g.neighbors(v):
            if not removed[u]:
                deg[u] -= 1
                heapq.heappush(heap, (int(deg[u]), u))
    return frozenset(int(v) for v in np.flatnonzero(~removed & (deg >= k)))


def induced_subgraph(g: Graph, vertices: Iterable[int]) -> Graph:
    """Subgraph induced by ``vertices`` (kept at the same vertex count)."""
    keep = frozenset(int(v) for v in vertices)
    mask = np.zeros(g.n, dtype=bool)
    mask[list(keep)] = True
    e = g.edges
    sel = mask[e[:, 0]] & mask[e[:, 1]] if e.size else np.zeros(0, dtype=bool)
    return Graph(g.n, e[sel], vertices=keep)


# -- matched-graph algebra ---------------------------------------------------


def _matched_intersection_edges(g: Graph, h: Graph, to_h: np.ndarray) -> np.ndarray:
    """Edges of ``g`` whose endpoints are matched and whose image is in ``h``.

    ``to_h`` is a dense lookup (g-label -> h-label, -1 for unmatched).
    """
    e = g.edges
    if e.size == 0:
        return e
    mapped = (to_h[e[:, 0]] >= 0) & (to_h[e[:, 1]] >= 0)
    e = e[mapped]
    if e.size == 0:
        return e
    imgs = np.stack([to_h[e[:, 0]], to_h[e[:, 1]]], axis=1)
    return e[h.contains_edges(imgs)]


def intersection_graph(g: Graph, h: Graph, mu: PartialMatching) -> Graph:
    """Graph on ``mu``'s domain with edges present in both ``g`` and ``h``.

    An edge (u, v) of ``g`` survives when both endpoints are matched and
    (mu[u], mu[v]) is an edge of ``h``.
    """
    to_h = mu.as_array(g.n)
    return Graph(g.n, _matched_intersection_edges(g, h, to_h), vertices=mu.domain)


def union_graph(
    graphs: Sequence[Graph],
    matchings: Sequence[PartialMatching],
    domain: Iterable[int] | None = None,
) -> Graph:
    """Union of ``graphs[0]`` with the pullbacks of the remaining graphs.

    ``matchings[i]`` maps ``graphs[0]``'s labels into ``graphs[i + 1]``'s.
    The result lives on the common matching domain (their intersection), or
    on an explicit ``domain``; passing a single graph with ``domain`` covers
    the degenerate one-graph case.  Edges of a non-anchor graph contribute
    only when both endpoints pull back into the domain.
    """
    if not graphs:
        raise ValueError("union of no graphs")
    if len(matchings) != len(graphs) - 1:
        raise ValueError("need exactly one matching per non-anchor graph")
    anchor = graphs[0]
    n = anchor.n
    if any(g.n != n for g in graphs):
        raise ValueError("all graphs must share the same vertex count")
    if domain is not None:
        dom = frozenset(int(v) for v in domain)
    else:
        if not matchings:
            raise ValueError("domain is required when no matchings are given")
        dom = frozenset.intersection(*(mu.domain for mu in matchings))
    mask = np.zeros(n, dtype=bool)
    mask[list(dom)] = True

    parts = []
    e0 = anchor.edges
    if e0.size:
        parts.append(e0[mask[e0[:, 0]] & mask[e0[:, 1]]])
    for g, mu in zip(graphs[1:], matchings):
        back = np.full(n, -1, dtype=np.int64)
        for u, v in mu._map.items():
            if mask[u]:
                back[v] = u
        e = g.edges
        if e.size == 0:
            continue
        a = back[e[:, 0]]
        b = back[e[:, 1]]
        ok = (a >= 0) & (b >= 0)
        if ok.any():
            lo = np.minimum(a[ok], b[ok])
            hi = np.maximum(a[ok], b[ok])
            parts.append(np.stack([lo, hi], axis=1))
    edges = np.vstack(parts) if parts else None
    return Graph(n, edges, vertices=dom)


def difference_graph(
    g: Graph,
    subtract: Sequence[tuple[Graph, PartialMatching]],
    restrict_to: Iterable[int],
) -> Graph:
    """Edges of ``g`` inside ``restrict_to`` that appear in no subtracted graph.

    Each entry of ``subtract`` pairs a graph with a matching from ``g``'s
    labels into that graph's.  An edge is removed only when both endpoints
    are matched and the image pair is an edge there; edges with an unmatched
    endpoint survive.  An empty ``restrict_to`` is rejected.
    """
    dom = frozenset(int(v) for v in restrict_to)
    if not dom:
        raise ValueError("restrict_to must be non-empty")
    mask = np.zeros(g.n, dtype=bool)
    mask[list(dom)] = True
    e = g.edges
    if e.size == 0:
        return Graph(g.n, None, vertices=dom)
    keep = mask[e[:, 0]] & mask[e[:, 1]]
    e = e[keep]
    alive = np.ones(e.shape[0], dtype=bool)
    for h, mu in subtract:
        if not alive.any():
            break
        to_h = mu.as_array(g.n)
        cand = alive & (to_h[e[:, 0]] >= 0) & (to_h[e[:, 1]] >= 0)
        if not cand.any():
            continue
        idx = np.flatnonzero(cand)
        imgs = np.stack([to_h[e[idx, 0]], to_h[e[idx, 1]]], axis=1)
        alive[idx[h.contains_edges(imgs)]] = False
    return Graph(g.n, e[alive], vertices=dom)


def neighborhood_majority(
    g: Graph,
    labels: Sequence[int] | np.ndarray,
    v: int,
    restrict_to: Iterable[int] | None = None,
) -> int:
    """Signed sum of neighbour labels of ``v``, optionally within a vertex set.

    Returns the integer sum (positive, negative, or 0 on a tie or empty
    neighbourhood); the caller decides what to do with ties.
    """
    lab = np.asarray(labels)
    nbrs = g.neighbors(v)
    if restrict_to is not None:
        allowed = restrict_to if isinstance(restrict_to, (set, frozenset)) else frozenset(restrict_to)
        return int(sum(int(lab[u]) for u in nbrs if u in allowed))
    return int(sum(int(lab[u]) for u in nbrs))


# -- plain-text edge-list IO -------------------------------------------------


def write_edge_list(g: Graph, path) -> None:
    """Write ``n m`` on the first line, then one ``u v`` pair per line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{g.n} {g.edge_count}\n")
        for u, v in g.edges:
            fh.write(f"{int(u)} {int(v)}\n")


def read_edge_list(path) -> Graph:
    """Inverse of :func:`write_edge_list`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("edge-list header must be '<n> <m>'")
        n, m = int(header[0]), int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    if len(edges) != m:
        raise ValueError(f"edge count mismatch: header says {m}, found {len(edges)}")
    return Graph(n, edges)
