"""Shared test helpers: brute-force oracles and tiny random graphs.

The oracles here are written independently of the library code paths they
check, on purpose: ``kcore_oracle`` enumerates every vertex subset instead
of peeling, and ``erdos_renyi`` draws edges one coin at a time.
"""

import numpy as np

from csbm.graphs import Graph


def kcore_oracle(g: Graph, k: int) -> frozenset:
    """k-core as the union of all subsets with min internal degree >= k.

    Exponential in the vertex count; only use on graphs with at most ~14
    vertices.  The union of two valid subsets is valid, so the union of all
    of them is the unique maximal one, which is the core.
    """
    verts = sorted(g.vertices)
    if len(verts) > 16:
        raise ValueError("oracle is exponential; keep graphs small")
    index = {v: i for i, v in enumerate(verts)}
    nbr_bits = [0] * len(verts)
    for u, v in g.edges:
        nbr_bits[index[int(u)]] |= 1 << index[int(v)]
        nbr_bits[index[int(v)]] |= 1 << index[int(u)]
    best = 0
    for subset in range(1 << len(verts)):
        ok = True
        rest = subset
        while rest:
            i = (rest & -rest).bit_length() - 1
            rest &= rest - 1
            if (nbr_bits[i] & subset).bit_count() < k:
                ok = False
                break
        if ok:
            best |= subset
    return frozenset(verts[i] for i in range(len(verts)) if best >> i & 1)


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> Graph:
    """G(n, p) drawn with one explicit coin per vertex pair."""
    edges = [
        (u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p
    ]
    return Graph(n, edges)


def random_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n).astype(np.int64)
