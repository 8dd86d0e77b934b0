"""Core weighted-graph type and exact distance primitives.

Graphs are undirected, connected, with non-negative integer weights.
Distances are computed in unsigned 64-bit arithmetic with a dedicated
infinity sentinel; weights are validated against W_MAX on load so that
path sums cannot overflow.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

INF = np.uint64(0xFFFFFFFFFFFFFFFF)
W_MAX = 1 << 40


class GraphError(ValueError):
    """Base class for graph validation failures."""


class MalformedLine(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class NegativeWeight(GraphError):
    pass


class WeightTooLarge(GraphError):
    pass


class NotConnected(GraphError):
    pass


class Graph:
    """Static undirected graph in CSR form.

    Parameters
    ----------
    n : int
        Number of vertices, labeled 0..n-1.
    edges : sequence of (u, v, w)
        Undirected edges. Parallel edges are merged keeping the minimum
        weight; the merge is deterministic (sorted by endpoints, then
        weight). Self loops are rejected.
    """

    __slots__ = ("n", "m", "eu", "ev", "ew", "indptr", "adj_v", "adj_w", "adj_e")

    def __init__(self, n, edges, check_connected=True, wide=False):
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        self.n = int(n)
        norm = []
        for (u, v, w) in edges:
            u, v, w = int(u), int(v), int(w)
            if u == v:
                raise SelfLoop(f"self loop at vertex {u}")
            if w < 0:
                raise NegativeWeight(f"negative weight {w} on edge ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise MalformedLine(f"vertex out of range on edge ({u}, {v})")
            if u > v:
                u, v = v, u
            if w >= (1 << 63):
                wide = True
            norm.append((u, v, w))
        norm.sort()
        merged = []
        for (u, v, w) in norm:
            if merged and merged[-1][0] == u and merged[-1][1] == v:
                continue  # sorted by weight within (u, v): first wins = min
            merged.append((u, v, w))
        self.m = len(merged)
        dtype = object if wide else np.uint64
        self.eu = np.fromiter((e[0] for e in merged), dtype=np.int64, count=self.m)
        self.ev = np.fromiter((e[1] for e in merged), dtype=np.int64, count=self.m)
        if wide:
            self.ew = np.empty(self.m, dtype=object)
            for i, e in enumerate(merged):
                self.ew[i] = e[2]
        else:
            self.ew = np.fromiter((e[2] for e in merged), dtype=dtype, count=self.m)
        self._build_csr()
        if check_connected and not self.is_connected():
            raise NotConnected("graph is not connected")

    def _build_csr(self):
        n, m = self.n, self.m
        deg = np.zeros(n, dtype=np.int64)
        np.add.at(deg, self.eu, 1)
        np.add.at(deg, self.ev, 1)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.indptr[1:])
        self.adj_v = np.zeros(2 * m, dtype=np.int64)
        self.adj_w = np.empty(2 * m, dtype=self.ew.dtype)
        self.adj_e = np.zeros(2 * m, dtype=np.int64)
        cursor = self.indptr[:-1].copy()
        for (src, dst) in ((self.eu, self.ev), (self.ev, self.eu)):
            for i in range(m):
                s = src[i]
                pos = cursor[s]
                self.adj_v[pos] = dst[i]
                self.adj_w[pos] = self.ew[i]
                self.adj_e[pos] = i
                cursor[s] += 1
        # sort each adjacency row by (neighbor, weight) for reproducible scans
        for v in range(n):
            lo, hi = self.indptr[v], self.indptr[v + 1]
            if hi - lo > 1:
                order = np.lexsort((self.adj_e[lo:hi], self.adj_v[lo:hi]))
                self.adj_v[lo:hi] = self.adj_v[lo:hi][order]
                self.adj_w[lo:hi] = self.adj_w[lo:hi][order]
                self.adj_e[lo:hi] = self.adj_e[lo:hi][order]

    def neighbors(self, v):
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.adj_v[lo:hi], self.adj_w[lo:hi]

    def is_connected(self):
        if self.n == 1:
            return True
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            lo, hi = self.indptr[v], self.indptr[v + 1]
            for u in self.adj_v[lo:hi]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        return bool(seen.all())

    def edge_list(self):
        """Edges as (u, v, w) int tuples with u < v, sorted."""
        return [(int(self.eu[i]), int(self.ev[i]), int(self.ew[i])) for i in range(self.m)]

    def to_text(self):
        lines = [f"{self.n} {self.m}"]
        lines += [f"{u} {v} {w}" for (u, v, w) in self.edge_list()]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def load_graph(text):
    """Parse the plain-text edge-list format.

    First non-comment line is ``n m``; each following line is ``u v w``.
    Lines starting with ``#`` and blank lines are ignored.  Raises
    MalformedLine / SelfLoop / NegativeWeight / WeightTooLarge /
    NotConnected with the offending line in the message.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line))
    if not rows:
        raise MalformedLine("empty input")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2:
        raise MalformedLine(f"line {lineno}: expected 'n m', got {header!r}")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise MalformedLine(f"line {lineno}: expected integers in header {header!r}") from None
    if n < 1 or m < 0:
        raise MalformedLine(f"line {lineno}: invalid sizes n={n} m={m}")
    if len(rows) - 1 != m:
        raise MalformedLine(f"header promises {m} edges, found {len(rows) - 1}")
    edges = []
    for lineno, line in rows[1:]:
        parts = line.split()
        if len(parts) != 3:
            raise MalformedLine(f"line {lineno}: expected 'u v w', got {line!r}")
        try:
            u, v, w = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise MalformedLine(f"line {lineno}: expected integers, got {line!r}") from None
        if u == v:
            raise SelfLoop(f"line {lineno}: self loop at vertex {u}")
        if w < 0:
            raise NegativeWeight(f"line {lineno}: negative weight {w}")
        if w > W_MAX:
            raise WeightTooLarge(f"line {lineno}: weight {w} exceeds {W_MAX}")
        if not (0 <= u < n and 0 <= v < n):
            raise MalformedLine(f"line {lineno}: vertex out of range 0..{n - 1}")
        edges.append((u, v, w))
    return Graph(n, edges)


def dijkstra(g, source):
    """Exact single-source distances, returned as uint64 with INF sentinel."""
    if not (0 <= source < g.n):
        raise GraphError(f"source {source} out of range")
    dist = [None] * g.n
    dist[source] = 0
    heap = [(0, source)]
    indptr, adj_v, adj_w = g.indptr, g.adj_v, g.adj_w
    while heap:
        d, v = heapq.heappop(heap)
        if dist[v] != d:
            continue
        lo, hi = indptr[v], indptr[v + 1]
        for k in range(lo, hi):
            u = int(adj_v[k])
            nd = d + int(adj_w[k])
            if dist[u] is None or nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    out = np.empty(g.n, dtype=np.uint64)
    for v in range(g.n):
        out[v] = INF if dist[v] is None else np.uint64(dist[v])
    return out


def dijkstra_cutoff(g, source, radius):
    """All (vertex, dist) with dist <= radius, by early-stopped Dijkstra.

    Returns two lists sorted by (dist, vertex).
    """
    radius = int(radius)
    dist = {source: 0}
    heap = [(0, source)]
    settled = []
    while heap:
        d, v = heapq.heappop(heap)
        if dist.get(v) != d:
            continue
        if d > radius:
            break
        settled.append((d, v))
        lo, hi = g.indptr[v], g.indptr[v + 1]
        for k in range(lo, hi):
            u = int(g.adj_v[k])
            nd = d + int(g.adj_w[k])
            if nd <= radius and (u not in dist or nd < dist[u]):
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    settled.sort()
    ids = [v for (_, v) in settled]
    ds = [d for (d, _) in settled]
    return ids, ds


def bellman_ford_hops(g, sources, hops):
    """Exact hop-limited distances from a set of offset sources.

    ``sources`` is an iterable of (vertex, offset).  The result at v is
    min over sources (u, o) and paths u->v with at most ``hops`` edges of
    o + path weight (INF when unreachable within the hop budget).
    """
    sources = list(sources)
    if g.ew.dtype == object or any(int(off) >= int(INF) for (_, off) in sources):
        return _bf_hops_object(g, sources, hops)
    dist = np.full(g.n, INF, dtype=np.uint64)
    for (v, off) in sources:
        o = np.uint64(int(off))
        if o < dist[v]:
            dist[v] = o
    if g.m == 0 or hops <= 0:
        return dist
    eu, ev, ew = g.eu, g.ev, g.ew
    for _ in range(hops):
        du, dv = dist[eu], dist[ev]
        cand_v = du + ew
        cand_v[du == INF] = INF
        cand_u = dv + ew
        cand_u[dv == INF] = INF
        new = dist.copy()
        np.minimum.at(new, ev, cand_v)
        np.minimum.at(new, eu, cand_u)
        if np.array_equal(new, dist):
            break
        dist = new
    return dist


def _bf_hops_object(g, sources, hops):
    dist = [math.inf] * g.n
    for (v, off) in sources:
        dist[v] = min(dist[v], int(off))
    eu, ev, ew = g.eu, g.ev, g.ew
    for _ in range(hops):
        new = list(dist)
        for i in range(g.m):
            u, v, w = int(eu[i]), int(ev[i]), int(ew[i])
            if dist[u] + w < new[v]:
                new[v] = dist[u] + w
            if dist[v] + w < new[u]:
                new[u] = dist[v] + w
        if new == dist:
            break
        dist = new
    finite = [d for d in dist if d != math.inf]
    if finite and max(finite) >= int(INF):
        out = np.empty(g.n, dtype=object)
        for v in range(g.n):
            out[v] = dist[v]
        return out
    out = np.empty(g.n, dtype=np.uint64)
    for v in range(g.n):
        out[v] = INF if dist[v] == float("inf") else np.uint64(dist[v])
    return out


def contract_zero_edges(g):
    """Contract all weight-0 edges.

    Returns (quotient graph, vmap, emap) where vmap[v] is the quotient
    vertex of v and emap[j] is the original edge index witnessing the
    j-th quotient edge (the minimum-weight representative).  Distances
    between any two vertices are preserved exactly.
    """
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(g.m):
        if int(g.ew[i]) == 0:
            a, b = find(int(g.eu[i])), find(int(g.ev[i]))
            if a != b:
                if a > b:
                    a, b = b, a
                parent[b] = a
    roots = sorted({find(v) for v in range(g.n)})
    index = {r: i for i, r in enumerate(roots)}
    vmap = np.fromiter((index[find(v)] for v in range(g.n)), dtype=np.int64, count=g.n)
    best = {}
    for i in range(g.m):
        a, b = int(vmap[g.eu[i]]), int(vmap[g.ev[i]])
        if a == b:
            continue
        if a > b:
            a, b = b, a
        w = int(g.ew[i])
        cur = best.get((a, b))
        if cur is None or (w, i) < cur:
            best[(a, b)] = (w, i)
    edges = [(a, b, w) for ((a, b), (w, _)) in sorted(best.items())]
    emap = np.fromiter((i for ((_, _), (_, i)) in sorted(best.items())), dtype=np.int64,
                       count=len(best))
    q = Graph(len(roots), edges, check_connected=False)
    return q, vmap, emap
