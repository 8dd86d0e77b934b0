"""Level tower, distance oracle, and the low-hop emulator graph.

The tower repeatedly compresses the graph: level i holds graph H_i, a
ball size b_i, and for every vertex its truncated ball (open ball plus
leader, with exact H_i distances) and its leader in the next level.
Ball sizes grow as b^(5/4), so the tower has O(log k) levels; the final
level keeps all pairwise distances of what is left.

Two consumers sit on top:

* ``oracle_query`` walks a pair of vertices up the tower, charging both
  leader hops, and stops at the first level where one endpoint lies in
  the other's stored ball.
* ``build_emulator`` flattens the whole tower into a single graph on
  the original vertices whose 16*ceil(log2(k)+1)-hop distances already
  equal its true distances, at bounded multiplicative stretch.
"""

from __future__ import annotations

import json
import math

import numpy as np

from ._par import ordered_map
from .balls import compute_balls
from .graphs import Graph, bellman_ford_hops, dijkstra
from .subemulator import assign_leaders, connect_edges, sample_vertices


class Level:
    __slots__ = ("graph", "vertices", "b", "ball_ids", "ball_dist",
                 "leader_dist", "leader_next")

    def __init__(self, graph, vertices, b, ball_ids, ball_dist, leader_dist, leader_next):
        self.graph = graph          # H_i on local ids
        self.vertices = vertices    # original id of each local vertex
        self.b = b
        self.ball_ids = ball_ids    # per local v: stored ball, local ids sorted
        self.ball_dist = ball_dist  # aligned exact H_i distances
        self.leader_dist = leader_dist
        self.leader_next = leader_next  # local index in level i+1, -1 at top

    def ball_lookup(self, v, u):
        """Stored distance d_{H_i}(v, u) if u is in the ball of v, else None."""
        ids = self.ball_ids[v]
        pos = np.searchsorted(ids, u)
        if pos < len(ids) and ids[pos] == u:
            return int(self.ball_dist[v][pos])
        return None


class LevelStack:
    __slots__ = ("levels", "k", "seed", "n", "b0")

    def __init__(self, levels, k, seed, n, b0):
        self.levels = levels
        self.k = k
        self.seed = seed
        self.n = n
        self.b0 = b0

    @property
    def t(self):
        return len(self.levels) - 1


def default_k(n):
    return max(0.5, 0.5 * math.log2(n)) if n > 1 else 0.5


def initial_ball_size(n, k):
    if n <= 1:
        return 2
    return max(math.ceil((75.0 * math.log(n)) ** 2), math.ceil(n ** (1.0 / (2.0 * k))), 2)


def level_bound(k):
    return 4 * max(0, math.ceil(math.log2(k) + 1))


def _stored_ball(balls, leader, leader_dist, v):
    ids, ds = balls.open_ball(v)
    q, qd = int(leader[v]), int(leader_dist[v])
    if q not in set(int(x) for x in ids):
        ids = np.append(ids, q)
        ds = np.append(ds, np.uint64(qd))
    order = np.argsort(ids)
    return ids[order].astype(np.int64), ds[order]


def preprocess(g, k=None, seed=0, b0=None):
    """Build the level tower for graph g.

    ``b0`` overrides the first ball size; the default formula exceeds n
    for any graph that fits in memory, which collapses the tower to its
    single exact level, so small overrides are how deep towers are
    exercised.
    """
    n = g.n
    if k is None:
        k = default_k(n)
    if not (0.5 <= k <= max(0.5, 0.5 * math.log2(max(n, 2)))):
        raise ValueError(f"k={k} outside [0.5, max(0.5, log2(n)/2)]")
    b = int(b0) if b0 is not None else initial_ball_size(n, k)
    b = max(2, b)
    first_b = b

    levels = []
    h = g
    vertices = np.arange(n, dtype=np.int64)
    for _ in range(64):
        if h.n < b:
            break
        balls = compute_balls(h, b)
        level_seed = np.random.SeedSequence(entropy=[int(seed), len(levels)])
        kept, _ = sample_vertices(h, balls, level_seed)
        leader, leader_dist = assign_leaders(h, balls, kept)
        raw = connect_edges(h, balls, leader, leader_dist)

        kept_ids = np.flatnonzero(kept).astype(np.int64)
        index = np.full(h.n, -1, dtype=np.int64)
        index[kept_ids] = np.arange(len(kept_ids))
        ball_ids, ball_dist = [], []
        for v in range(h.n):
            bi, bd = _stored_ball(balls, leader, leader_dist, v)
            ball_ids.append(bi)
            ball_dist.append(bd)
        leader_next = index[leader]
        levels.append(Level(h, vertices, b, ball_ids, ball_dist,
                            leader_dist.copy(), leader_next))

        local_edges = [(int(index[a]), int(index[c]), w) for (a, c, w) in raw]
        h = Graph(len(kept_ids), local_edges, check_connected=False)
        vertices = vertices[kept_ids]
        b = min(math.ceil(b ** 1.25), max(n, 2))
    else:
        raise RuntimeError("level tower failed to terminate")

    # top level: exact all-pairs on what is left
    rows = ordered_map(lambda s: dijkstra(h, s), range(h.n))
    all_ids = np.arange(h.n, dtype=np.int64)
    ball_ids = [all_ids] * h.n
    ball_dist = [rows[v] for v in range(h.n)]
    top_leader_dist = np.array([rows[v][0] for v in range(h.n)], dtype=np.uint64)
    levels.append(Level(h, vertices, b, ball_ids, ball_dist,
                        top_leader_dist, np.full(h.n, -1, dtype=np.int64)))

    stack = LevelStack(levels, k, seed, n, first_b)
    if b0 is None and stack.t > level_bound(k):
        raise AssertionError(f"tower depth {stack.t} exceeds bound {level_bound(k)}")
    return stack


def oracle_query(stack, u, v):
    """Approximate distance between u and v; returns (distance, levels_visited).

    The estimate d satisfies dist(u,v) <= d <= 26^(4*ceil(log2(k)+1)) * dist(u,v).
    """
    n = stack.n
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError("query vertex out of range")
    total = 0
    uu, vv = int(u), int(v)
    for visits, lvl in enumerate(stack.levels, start=1):
        d = lvl.ball_lookup(uu, vv)
        if d is None:
            d = lvl.ball_lookup(vv, uu)
        if d is not None:
            return total + d, visits
        total += int(lvl.leader_dist[uu]) + int(lvl.leader_dist[vv])
        uu = int(lvl.leader_next[uu])
        vv = int(lvl.leader_next[vv])
    raise AssertionError("query fell off the level stack")


class Emulator:
    __slots__ = ("graph", "k", "t", "hop_bound", "stretch_bound", "seed")

    def __init__(self, graph, k, t, hop_bound, stretch_bound, seed):
        self.graph = graph
        self.k = k
        self.t = t
        self.hop_bound = hop_bound
        self.stretch_bound = stretch_bound
        self.seed = seed


def hop_bound_for(k):
    return max(1, 16 * math.ceil(math.log2(k) + 1))


def stretch_bound_for(k):
    return 27 ** (4 * max(0, math.ceil(math.log2(k) + 1)))


def build_emulator(stack):
    """Flatten the tower into one low-hop graph on the original vertices."""
    t = stack.t
    edges = []
    max_w = 0
    for i, lvl in enumerate(stack.levels):
        scale_ball = 27 ** (t - i)
        scale_leader = 27 ** (t - i - 1) if i < t else None
        orig = lvl.vertices
        if scale_leader is not None:
            nxt = stack.levels[i + 1].vertices
            for v in range(lvl.graph.n):
                q = int(lvl.leader_next[v])
                a, b = int(orig[v]), int(nxt[q])
                if a == b:
                    continue
                w = scale_leader * int(lvl.leader_dist[v])
                max_w = max(max_w, w)
                edges.append((a, b, w))
        for v in range(lvl.graph.n):
            ids, ds = lvl.ball_ids[v], lvl.ball_dist[v]
            a = int(orig[v])
            for u, d in zip(ids, ds):
                bo = int(orig[u])
                if bo == a:
                    continue
                w = scale_ball * int(d)
                max_w = max(max_w, w)
                edges.append((a, bo, w))
    hop_bound = hop_bound_for(stack.k)
    wide = max_w * (hop_bound + 2) >= (1 << 63)
    graph = Graph(stack.n, edges, check_connected=False, wide=wide)
    return Emulator(graph, stack.k, t, hop_bound, stretch_bound_for(stack.k), stack.seed)


def set_distance(em, sources):
    """Exact emulator distances from a set of (vertex, offset) sources.

    Because the emulator's hop diameter is bounded, a hop-limited scan
    already yields its true shortest-path distances.
    """
    if isinstance(sources, dict):
        sources = sources.items()
    return bellman_ford_hops(em.graph, sources, em.hop_bound)


def approx_sssp(em, source):
    """Single-source distances in the emulator (stretch-bounded vs the input graph)."""
    return set_distance(em, [(source, 0)])


def save_emulator(em, path):
    """JSON header line, then the graph in standard edge-list text."""
    header = {
        "k": em.k,
        "t": em.t,
        "hop_bound": em.hop_bound,
        "stretch_bound": em.stretch_bound,
        "seed": em.seed,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(em.graph.to_text())


def load_emulator(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        n_line = fh.readline().split()
        n = int(n_line[0])
        edges = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v, w = line.split()
            edges.append((int(u), int(v), int(w)))
    wide = any(w * (header["hop_bound"] + 2) >= (1 << 63) for (_, _, w) in edges)
    graph = Graph(n, edges, check_connected=False, wide=wide)
    return Emulator(graph, header["k"], header["t"], header["hop_bound"],
                    header["stretch_bound"], header["seed"])
