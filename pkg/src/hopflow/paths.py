"""From an approximate flow to an explicit s-t path.

A unit of flow is traced by sampling one out-pointer per vertex
(proportional to positive outflow), contracting the pointer forest,
and recursing on the contracted graph: each level at least halves the
vertex count, contracted edge weights already account for the climb to
the component roots, and the lifted walk is finally de-cycled by a
last-appearance scan.  Repeating the whole extraction and keeping the
shortest result turns the per-trial expectation bound into a
high-probability (1+eps) guarantee.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ._par import ordered_map
from .flow import min_cost_flow, _apply_incidence
from .graphs import Graph

_FLOW_TOL = 1e-12


class StuckVertex(RuntimeError):
    """Positive flow enters a non-target vertex that has no outflow."""


class WalkBudgetExceeded(RuntimeError):
    """A sampled walk or flow retry loop exceeded its budget."""


class Path:
    __slots__ = ("vertices", "length")

    def __init__(self, vertices, length):
        self.vertices = vertices
        self.length = length

    def to_dict(self):
        return {"vertices": [int(v) for v in self.vertices], "length": int(self.length)}


def _flow_values(f):
    """Accept a FlowSolution or any per-edge array of signed flow values."""
    return np.asarray(getattr(f, "f", f), dtype=np.float64)


def _out_edges(g, f):
    """Per-vertex positive-outflow lists: (targets, flows, edge weights)."""
    f = _flow_values(f)
    out_nbr = [[] for _ in range(g.n)]
    out_flow = [[] for _ in range(g.n)]
    out_w = [[] for _ in range(g.n)]
    inflow = np.zeros(g.n)
    for i in range(g.m):
        fi = float(f[i])
        u, v, w = int(g.eu[i]), int(g.ev[i]), int(g.ew[i])
        if fi > _FLOW_TOL:
            out_nbr[u].append(v)
            out_flow[u].append(fi)
            out_w[u].append(w)
            inflow[v] += fi
        elif fi < -_FLOW_TOL:
            out_nbr[v].append(u)
            out_flow[v].append(-fi)
            out_w[v].append(w)
            inflow[u] += -fi
    return out_nbr, out_flow, out_w, inflow


def sample_pointers(g, f, t, seed):
    """One out-pointer per vertex other than t, sampled by outflow share.

    Vertices untouched by the flow point at their smallest neighbor
    (any deterministic choice works: they contract away harmlessly).
    Raises StuckVertex when positive flow enters a vertex that cannot
    pass it on.
    """
    out_nbr, out_flow, _, inflow = _out_edges(g, f)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), 17]))
    ptr = np.full(g.n, -1, dtype=np.int64)
    for v in range(g.n):
        if v == t:
            continue
        flows = out_flow[v]
        if flows:
            total = float(sum(flows))
            probs = np.asarray(flows) / total
            ptr[v] = out_nbr[v][int(rng.choice(len(flows), p=probs))]
        else:
            if inflow[v] > 1e-9:
                raise StuckVertex(f"flow enters vertex {v} but cannot leave")
            lo, hi = g.indptr[v], g.indptr[v + 1]
            if hi == lo:
                raise StuckVertex(f"vertex {v} is isolated")
            ptr[v] = int(g.adj_v[lo])  # adjacency rows are sorted by id
    return ptr


class ContractionLevel:
    __slots__ = ("pointers", "root", "l", "graph", "roots", "witness")

    def __init__(self, pointers, root, l, graph, roots, witness):
        self.pointers = pointers  # p(v), -1 at t
        self.root = root          # rt(v): original-id root per vertex
        self.l = l                # weighted pointer-path distance to rt(v)
        self.graph = graph        # contracted graph on local root ids
        self.roots = roots        # sorted original ids of the roots
        self.witness = witness    # (a, b) local edge -> (x, y) original endpoints

    def local_root(self, v):
        return int(np.searchsorted(self.roots, self.root[v]))


def _edge_weight_map(g):
    return {(int(g.eu[i]), int(g.ev[i])): int(g.ew[i]) for i in range(g.m)}


def contract(g, pointers, t):
    """Contract the pointer graph; roots are t or min-id cycle vertices."""
    n = g.n
    wmap = _edge_weight_map(g)

    def pw(u, v):
        return wmap[(u, v) if u < v else (v, u)]

    # locate each vertex's component root: t for t's tree, otherwise the
    # smallest-id vertex on the component's unique pointer cycle (whose
    # out-pointer is the dropped non-tree edge)
    root = np.full(n, -1, dtype=np.int64)
    root[t] = t
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on stack, 2 resolved
    state[t] = 2
    for v0 in range(n):
        if state[v0]:
            continue
        chain = []
        v = v0
        while state[v] == 0:
            state[v] = 1
            chain.append(v)
            v = int(pointers[v])
        if state[v] == 1:  # found a new cycle; v is where the chain bit itself
            cyc_start = chain.index(v)
            cycle = chain[cyc_start:]
            r = min(cycle)
            for u in cycle:
                root[u] = r
        # the rest of the chain resolves to whatever v resolved to
        for u in chain:
            if root[u] < 0:
                root[u] = root[v]
            state[u] = 2
    # pointer-path distance to the root, computed by reverse BFS from roots
    # (the root's own out-pointer, if any, is the dropped edge)
    children = [[] for _ in range(n)]
    for v in range(n):
        p = int(pointers[v])
        if p >= 0 and root[v] != v:
            children[p].append(v)
    l = np.zeros(n, dtype=np.int64)
    for r in np.unique(root):
        stack = [int(r)]
        while stack:
            v = stack.pop()
            for u in children[v]:
                l[u] = l[v] + pw(u, v)
                stack.append(u)

    roots = np.unique(root)
    index = {int(r): i for i, r in enumerate(roots)}
    best = {}
    for i in range(g.m):
        u, v, w = int(g.eu[i]), int(g.ev[i]), int(g.ew[i])
        a, b = index[int(root[u])], index[int(root[v])]
        if a == b:
            continue
        x, y = (u, v) if a < b else (v, u)
        a, b = min(a, b), max(a, b)
        cand = (int(l[u]) + w + int(l[v]), x, y)
        cur = best.get((a, b))
        if cur is None or cand < cur:
            best[(a, b)] = cand
    edges = [(a, b, c[0]) for ((a, b), c) in sorted(best.items())]
    witness = {ab: (c[1], c[2]) for ab, c in best.items()}
    h = Graph(len(roots), edges, check_connected=False)
    level = ContractionLevel(pointers, root, l, h, roots, witness)
    if len(roots) > (n + 1) // 2 and n > 1:
        raise AssertionError("contraction failed to halve the vertex count")
    return level


def _pointer_path(level, v):
    """Vertices from v along pointers to rt(v), inclusive."""
    seq = [v]
    r = int(level.root[v])
    steps = 0
    while seq[-1] != r:
        seq.append(int(level.pointers[seq[-1]]))
        steps += 1
        if steps > len(level.pointers) + 1:
            raise AssertionError("pointer walk failed to reach its root")
    return seq


def shortcut_cycles(seq):
    """Keep the segment after each vertex's last appearance: simple, no longer."""
    last = {}
    for i, v in enumerate(seq):
        last[v] = i
    out = []
    i = 0
    while i < len(seq):
        v = seq[i]
        out.append(v)
        i = last[v] + 1
    return out


def _exact_unit_flow(g, s, t, epsilon, seed):
    """Route one unit along an exact shortest s-t path (reference engine)."""
    dist = [None] * g.n
    parent_edge = [None] * g.n
    dist[s] = 0
    heap = [(0, s)]
    while heap:
        d, v = heapq.heappop(heap)
        if dist[v] != d:
            continue
        if v == t:
            break
        lo, hi = g.indptr[v], g.indptr[v + 1]
        for kk in range(lo, hi):
            u = int(g.adj_v[kk])
            nd = d + int(g.adj_w[kk])
            if dist[u] is None or nd < dist[u]:
                dist[u] = nd
                parent_edge[u] = int(g.adj_e[kk])
                heapq.heappush(heap, (nd, u))
    f = np.zeros(g.m, dtype=np.float64)
    v = t
    while v != s:
        i = parent_edge[v]
        if i is None:
            raise ValueError("target unreachable")
        if int(g.ev[i]) == v:
            f[i] += 1.0
            v = int(g.eu[i])
        else:
            f[i] -= 1.0
            v = int(g.ev[i])
    return f


def _mwu_unit_flow(g, s, t, epsilon, seed):
    b = np.zeros(g.n)
    b[s], b[t] = 1.0, -1.0
    return min_cost_flow(g, b, epsilon=min(max(epsilon, 1e-3), 0.49), seed=seed).f


_ENGINES = {"exact": _exact_unit_flow, "mwu": _mwu_unit_flow}


def find_path(g, s, t, epsilon, seed=0, flow_engine="exact"):
    """Recursive sample-contract-expand path extraction."""
    if not (0 <= s < g.n and 0 <= t < g.n):
        raise ValueError("endpoint out of range")
    if s == t:
        return Path([s], 0)
    engine = _ENGINES[flow_engine] if isinstance(flow_engine, str) else flow_engine

    b = np.zeros(g.n)
    b[s], b[t] = 1.0, -1.0
    retries = 3 * max(1, math.ceil(math.log2(max(g.n, 2))))
    f = None
    for attempt in range(retries):
        cand = _flow_values(engine(g, s, t, epsilon, int(seed) + attempt))
        if float(np.abs(_apply_incidence(g, cand) - b).sum()) <= 1e-6:
            f = cand
            break
    if f is None:
        raise WalkBudgetExceeded("flow solver kept returning infeasible flows")

    ptr = sample_pointers(g, f, t, seed)
    level = contract(g, ptr, t)
    sub_seed = np.random.SeedSequence(entropy=[int(seed), 29]).generate_state(1)[0]
    sub = find_path(level.graph, level.local_root(s), level.local_root(t),
                    epsilon, int(sub_seed), flow_engine)

    seq = _pointer_path(level, s)
    for j in range(len(sub.vertices) - 1):
        a, bb = int(sub.vertices[j]), int(sub.vertices[j + 1])
        x, y = level.witness[(min(a, bb), max(a, bb))]
        if level.local_root(x) != a:
            x, y = y, x
        seq += _pointer_path(level, x)[::-1][1:]  # root_a ... x, drop repeated root
        seq += _pointer_path(level, y)            # y ... root_b
    seq = shortcut_cycles(seq)

    wmap = _edge_weight_map(g)
    length = 0
    for i in range(len(seq) - 1):
        u, v = seq[i], seq[i + 1]
        key = (u, v) if u < v else (v, u)
        if key not in wmap:
            raise AssertionError("expanded walk used a non-edge")
        length += wmap[key]
    return Path(seq, length)


def approx_shortest_path(g, s, t, epsilon, seed=0, trials=None, flow_engine="exact"):
    """Best of Theta(log(n)/eps) independent path extractions.

    Each trial runs find_path with the inner accuracy eps/(20 log2 n);
    the returned path always has length >= dist(s, t), and with high
    probability at most (1+eps) times it.
    """
    if not (0.0 < epsilon < 0.5):
        raise ValueError("epsilon must be in (0, 0.5)")
    if s == t:
        return Path([s], 0)
    log_n = max(1.0, math.log2(g.n))
    inner_eps = epsilon / (20.0 * log_n)
    if trials is None:
        trials = max(1, math.ceil(4.0 * log_n / epsilon))

    def one(trial):
        ts = np.random.SeedSequence(entropy=[int(seed), 31, trial]).generate_state(1)[0]
        return find_path(g, s, t, inner_eps, int(ts), flow_engine)

    paths = ordered_map(one, range(trials))
    return min(paths, key=lambda p: (p.length, p.vertices))


def random_walk_length_check(g, f, demand, trials=1000, seed=0, step_cap=None):
    """Monte-Carlo check that flow-guided walks have mean length ||Wf||_1.

    Walks start at a source drawn by supply, step proportionally to
    positive outflow, and stop at the unique sink.  Returns summary
    statistics including the exact target value.
    """
    f = _flow_values(f)
    b = np.asarray(demand, dtype=np.float64)
    sinks = np.flatnonzero(b < -1e-12)
    if len(sinks) != 1:
        raise ValueError("walk check needs exactly one sink")
    t = int(sinks[0])
    supply = np.clip(b, 0.0, None)
    supply = supply / supply.sum()
    out_nbr, out_flow, out_w, _ = _out_edges(g, f)
    cum = [None] * g.n
    for v in range(g.n):
        if out_flow[v]:
            arr = np.cumsum(out_flow[v])
            cum[v] = arr / arr[-1]
    if step_cap is None:
        step_cap = max(10_000, 100 * g.n)
    w = g.ew.astype(np.float64)
    target = float(np.dot(w, np.abs(f)))

    rng = np.random.default_rng(np.random.SeedSequence(entropy=[int(seed), 37]))
    lengths = np.empty(trials, dtype=np.float64)
    starts = rng.choice(g.n, size=trials, p=supply)
    for k in range(trials):
        v = int(starts[k])
        total = 0.0
        steps = 0
        while v != t:
            if cum[v] is None:
                raise StuckVertex(f"walk stuck at vertex {v}")
            j = int(np.searchsorted(cum[v], rng.random(), side="right"))
            j = min(j, len(out_nbr[v]) - 1)
            total += out_w[v][j]
            v = out_nbr[v][j]
            steps += 1
            if steps > step_cap:
                raise WalkBudgetExceeded(f"walk exceeded {step_cap} steps")
        lengths[k] = total
    mean = float(lengths.mean())
    std = float(lengths.std(ddof=1)) if trials > 1 else 0.0
    return {
        "walks": trials,
        "mean": mean,
        "std": std,
        "stderr": std / math.sqrt(trials) if trials > 1 else 0.0,
        "target": target,
        "max": float(lengths.max()),
    }
