"""(1+eps)-approximate uncapacitated minimum-cost flow.

Pipeline: contract zero-weight edges, embed the metric (emulator ->
Bourgain -> compressed grid preconditioner P), then binary-search a
scale s and run a multiplicative-weights feasibility solver on the
preconditioned system  PAW^-1 x = Pb.  The solver is composed with
itself on the residual demand for a logarithmic number of rounds, and
whatever demand is still unrouted gets repaired exactly along a
minimum spanning tree, so returned flows always satisfy Af = b.

Everything here is deterministic given (graph, demand, epsilon, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from .emulator import build_emulator, preprocess
from .graphs import contract_zero_edges, dijkstra
from .metric import Embedding, bourgain_embed, next_pow2
from .precond import build_preconditioner, matrix_vec, vector_mat


class AllScalesFailed(RuntimeError):
    """No scale in the search grid produced a feasible MWU run.

    Either the iteration budget is too small or kappa underestimates the
    true condition number; raise SolverConfig.kappa / t_cap and retry.
    """


# Plateau-triggered step decay inside an MWU run: when the residual
# stops improving for this many iterations the working step is halved,
# down to a floor of the starting step times _ETA_FLOOR_FRAC.  A fixed
# step orbits the feasible set at a radius proportional to the step,
# which at near-critical scales sits above the exit threshold no
# matter the iteration budget.
_PLATEAU_PATIENCE = 1500
_ETA_FLOOR_FRAC = 1.0 / 64.0


@dataclass
class SolverConfig:
    """Knobs for the MWU flow solver.

    kappa=None uses the preconditioner's own 2*L*d*alpha certificate,
    clamped by kappa_cap: the certificate is a sound but enormous bound
    and drives the early-exit threshold eps/(2*kappa), so the working
    value trades certified residuals for tractable iteration counts.
    The scale-search grid always spans the full certificate.  t_cap
    bounds iterations per MWU call (the formula value T = ceil(64 kappa^2
    ln(2m)/eps^2) is used when smaller); a capped, non-converged run
    counts as infeasible at that scale, which only ever moves the
    search toward more conservative scales.
    """

    epsilon: float = 0.1
    kappa: float | None = None
    kappa_cap: float = 2.0
    t_cap: int | None = 12000
    eta: float | None = None
    depth: int | None = None
    t_rep: int = 2
    k: float | None = None
    escalations: int = 3

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.5):
            raise ValueError("epsilon must be in (0, 0.5)")


class FlowSolution:
    """Signed per-edge flow; positive means u -> v for the stored u < v."""

    __slots__ = ("f", "cost", "residual", "iterations", "trace")

    def __init__(self, f, cost, residual, iterations, trace=None):
        self.f = f
        self.cost = cost
        self.residual = residual
        self.iterations = iterations
        self.trace = trace or []

    def to_dict(self, g):
        return {
            "edges": [[int(g.eu[i]), int(g.ev[i]), float(self.f[i])] for i in range(g.m)],
            "cost": float(self.cost),
            "residual": float(self.residual),
            "iterations": int(self.iterations),
        }


def validate_demand(b, n):
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"demand must have length {n}")
    if abs(float(b.sum())) > 1e-9:
        raise ValueError("demand must sum to zero")
    return b


def _apply_incidence(g, f):
    """A f: net outflow per vertex (+ at the smaller-id endpoint)."""
    out = np.bincount(g.eu, weights=f, minlength=g.n)
    out -= np.bincount(g.ev, weights=f, minlength=g.n)
    return out


def _flow_stats(g, f, b):
    w = g.ew.astype(np.float64)
    cost = float(np.dot(w, np.abs(f)))
    residual = float(np.abs(_apply_incidence(g, f) - b).sum())
    return cost, residual


def mst_routing(g, b):
    """Exactly feasible flow supported on a minimum spanning tree."""
    b = validate_demand(b, g.n)
    order = sorted(range(g.m), key=lambda i: (int(g.ew[i]), int(g.eu[i]), int(g.ev[i])))
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for i in order:
        u, v = int(g.eu[i]), int(g.ev[i])
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.append((u, v, i))
    f = np.zeros(g.m, dtype=np.float64)
    for idx, val in _route_forest(g.n, tree, b).items():
        f[idx] = val
    cost, residual = _flow_stats(g, f, b)
    return FlowSolution(f, cost, residual, 0)


def _route_forest(n, tree, b):
    """Subtree-sum routing of b on a forest; {edge_idx: signed flow}."""
    adj = [[] for _ in range(n)]
    for (u, v, idx) in tree:
        adj[u].append((v, idx, +1))
        adj[v].append((u, idx, -1))
    flows = {}
    seen = [False] * n
    for root in range(n):
        if seen[root]:
            continue
        seen[root] = True
        order = [root]
        par = {root: None}
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for (u, idx, sgn) in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    # flow child->parent crosses edge idx; positive stored
                    # direction is smaller->larger id, so going u->v is -sgn
                    par[u] = (v, idx, -sgn)
                    order.append(u)
        acc = np.zeros(n)
        for v in order:
            acc[v] = b[v]
        for v in reversed(order):
            if par[v] is None:
                if abs(acc[v]) > 1e-6:
                    raise ValueError("unbalanced demand within a tree component")
                continue
            p, idx, sgn = par[v]
            flows[idx] = flows.get(idx, 0.0) + sgn * acc[v]
            acc[p] += acc[v]
    return flows


def _expand_sparse(P, cap_rows=2_000_000, cap_nnz=20_000_000):
    """Materialize the compressed preconditioner as a scipy CSC matrix.

    Only worthwhile (and only possible) when the row space is small:
    the compressed kernels stay the general path, but at moderate sizes
    one sparse matvec per MWU iteration is far cheaper than walking
    segment lists.  Returns None when the expansion would be too large.
    """
    if P.r > cap_rows or P.n == 0:
        return None
    lens = (P.seg_b - P.seg_a + 1).astype(np.int64)
    total = int(lens.sum())
    if total > cap_nnz:
        return None
    data = np.repeat(P.seg_c, lens)
    starts = np.repeat(P.seg_a.astype(np.int64), lens)
    offs = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
    rows = starts + offs - 1  # segment bounds are 1-based inclusive
    nnz_prefix = np.concatenate([[0], np.cumsum(lens)])
    indptr = nnz_prefix[P.col_ptr]
    return sparse.csc_matrix((data, rows, indptr), shape=(int(P.r), P.n))


class FlowRuntime:
    """Per-instance preconditioner bundle shared across MWU calls.

    When the preconditioner fits in memory, `P_sp` holds its sparse
    expansion and `M`/`MT` the precomposed (1/N)·P·A·W^-1 operator, so
    each MWU iteration is two sparse matvecs; otherwise the compressed
    kernels are used directly.
    """

    __slots__ = ("P", "N", "alpha", "kappa_cert", "emb", "rescale",
                 "P_sp", "M", "MT", "PT")

    def __init__(self, P, N, alpha, kappa_cert, emb, rescale,
                 P_sp=None, M=None, MT=None, PT=None):
        self.P = P
        self.N = N
        self.alpha = alpha
        self.kappa_cert = kappa_cert
        self.emb = emb
        self.rescale = rescale
        self.P_sp = P_sp
        self.M = M
        self.MT = MT
        self.PT = PT


def build_flow_runtime(g, seed=0, t_rep=2, k=None):
    """Embed g's metric and build the compressed preconditioner + norms."""
    stack = preprocess(g, k=k, seed=seed)
    em = build_emulator(stack)
    emb = bourgain_embed(em, t_rep=t_rep, seed=seed)

    n = g.n
    if n <= 160:
        sources = range(n)
    else:
        step = max(1, n // 64)
        sources = range(0, n, step)
    ratios_lo, ratios_hi = math.inf, 0.0
    rows = {}
    for sidx in sources:
        rows[sidx] = dijkstra(g, sidx)
    for sidx, row in rows.items():
        for v in range(n):
            if v == sidx:
                continue
            dist = int(row[v])
            if dist == 0:
                continue
            l1 = emb.l1(sidx, v)
            ratios_lo = min(ratios_lo, l1 / dist)
            ratios_hi = max(ratios_hi, l1 / dist)
    if not rows or ratios_hi == 0.0:
        rescale = 1
    elif ratios_lo <= 0.0:
        raise ValueError("embedding collapsed two distinct vertices; try another seed")
    else:
        rescale = 1 if ratios_lo >= 1.0 else math.ceil(1.0 / ratios_lo)
    if rescale > 1:
        if emb.points.dtype == object:
            pts = np.array([[int(x) * rescale for x in row] for row in emb.points],
                           dtype=object)
            delta = next_pow2(max(int(x) for x in pts.flat))
        else:
            pts = emb.points * np.uint64(rescale)
            delta = next_pow2(int(pts.max()))
        emb = Embedding(pts, delta, emb.seed, emb.t_rep, emb.scales)
    alpha = max(1.0, ratios_hi * rescale)

    P = build_preconditioner(emb)
    norm = 0.0
    for i in range(g.m):
        col = np.zeros(n)
        wi = float(g.ew[i])
        if wi == 0.0:
            raise ValueError("zero-weight edges must be contracted before preconditioning")
        col[g.eu[i]] = 1.0 / wi
        col[g.ev[i]] = -1.0 / wi
        norm = max(norm, matrix_vec(P, col).norm1())
    alpha_clamped = min(alpha, 64.0 * max(1.0, math.log2(max(n, 2))))
    kappa_cert = max(1.0, 2.0 * P.L * P.d * alpha_clamped)

    P_sp = M = MT = PT = None
    expanded = _expand_sparse(P)
    if expanded is not None:
        P_sp = expanded
        inv_w = 1.0 / g.ew.astype(np.float64)
        ar = np.arange(g.m)
        A_w = sparse.csc_matrix(
            (np.concatenate([inv_w, -inv_w]),
             (np.concatenate([g.eu, g.ev]), np.concatenate([ar, ar]))),
            shape=(n, g.m))
        M = (P_sp @ A_w).tocsc()
        M.data /= norm
        MT = M.T.tocsr()
        PT = P_sp.T.tocsr()
    return FlowRuntime(P, norm, alpha, kappa_cert, emb, rescale,
                       P_sp=P_sp, M=M, MT=MT, PT=PT)


class MwuOutcome:
    __slots__ = ("status", "x", "iters", "zbar", "qbar", "T")

    def __init__(self, status, x, iters, zbar=None, qbar=0.0, T=0):
        self.status = status  # "ok" | "fail" | "cap"
        self.x = x
        self.iters = iters
        self.zbar = zbar
        self.qbar = qbar
        self.T = T


def mwu_feasibility(rt, g, b, s, cfg, collect_certificate=False):
    """One MWU run on the scaled feasibility system at scale s.

    Success returns x' = p+ - p- with ||x'||_1 <= 1 and
    ||(PAW^-1/N) x' - (1/s) Pb/||Pb||_1||_1 <= eps/(2 kappa).
    Exhausting the formula iteration count yields status "fail" with the
    averaged dual certificate; exhausting the configured cap earlier
    yields status "cap" (treated as infeasible by the caller).
    """
    P, N = rt.P, rt.N
    m = g.m
    eps = cfg.epsilon
    kappa = effective_kappa(rt, cfg)
    T_formula = math.ceil(64.0 * kappa * kappa * math.log(max(2 * m, 2)) / (eps * eps))
    T = T_formula if cfg.t_cap is None else min(T_formula, cfg.t_cap)
    eta = cfg.eta if cfg.eta is not None else eps / (8.0 * kappa)
    thresh_full = eps / (2.0 * kappa)

    if rt.M is not None:
        return _mwu_fast(rt, g, b, s, cfg, T, T_formula, eta, thresh_full,
                         collect_certificate)

    pb = matrix_vec(P, b)
    pbn = pb.norm1()
    if pbn <= 0.0:
        raise ValueError("||Pb||_1 must be positive")

    w = g.ew.astype(np.float64)
    inv_w = 1.0 / w
    eu, ev = g.eu, g.ev
    log_psi = np.zeros(2 * m, dtype=np.float64)
    zbar = np.zeros(g.n, dtype=np.float64) if collect_certificate else None
    qbar = 0.0
    thresh = thresh_full
    eta0 = eta
    best = np.inf
    since = 0

    for it in range(1, T + 1):
        mx = log_psi.max()
        pw = np.exp(log_psi - mx)
        p = pw / pw.sum()
        pp, pm = p[:m], p[m:]
        edge_mass = (pp - pm) * inv_w / N
        gv = np.bincount(eu, weights=edge_mass, minlength=g.n)
        gv -= np.bincount(ev, weights=edge_mass, minlength=g.n)
        gv -= b / (s * pbn)
        z = matrix_vec(P, gv)
        r = z.norm1()
        if r <= thresh:
            return MwuOutcome("ok", pp - pm, it)
        if r < best - 1e-9:
            best, since = r, 0
        else:
            since += 1
            if since >= _PLATEAU_PATIENCE:
                # the fixed step oscillates around a floor above the
                # threshold at tight scales; halving it lowers the floor
                eta = max(eta * 0.5, _ETA_FLOOR_FRAC * eta0)
                since = 0
        zt = vector_mat(z.sign(), P)
        q = float(np.dot(zt, b)) / (s * pbn)
        dz = (zt[eu] - zt[ev]) * inv_w / N
        phi = np.concatenate([dz - q, -dz - q]) * 0.5
        log_psi += np.log1p(-eta * phi)
        if collect_certificate:
            zbar += zt
            qbar += q

    status = "fail" if T >= T_formula else "cap"
    return MwuOutcome(status, None, T, zbar, qbar, T)


def _mwu_fast(rt, g, b, s, cfg, T, T_formula, eta, thresh, collect_certificate):
    """Sparse-operator MWU loop; same contract as the compressed path.

    Weights are held as an explicitly normalized distribution rather
    than in log-space: renormalizing every iteration gives the same
    overflow safety without per-iteration exp/log calls.
    """
    m = g.m
    pb = rt.P_sp @ b
    pbn = float(np.abs(pb).sum())
    if pbn <= 0.0:
        raise ValueError("||Pb||_1 must be positive")
    c = pb / (s * pbn)
    M, MT = rt.M, rt.MT
    wts = np.full(2 * m, 1.0 / (2 * m))
    zbar = np.zeros(g.n) if collect_certificate else None
    qbar = 0.0
    eta0 = eta
    half = 0.5 * eta
    best = np.inf
    since = 0
    for it in range(1, T + 1):
        y = wts[:m] - wts[m:]
        z = M @ y
        z -= c
        r = float(np.abs(z).sum())
        if r <= thresh:
            return MwuOutcome("ok", y, it)
        if r < best - 1e-9:
            best, since = r, 0
        else:
            since += 1
            if since >= _PLATEAU_PATIENCE:
                # fixed-step oscillation floor sits above the threshold
                # at tight scales; halve the step to lower the floor
                eta = max(eta * 0.5, _ETA_FLOOR_FRAC * eta0)
                half = 0.5 * eta
                since = 0
        sz = np.sign(z)
        dz = MT @ sz
        q = float(sz @ c)
        wts[:m] *= 1.0 - half * (dz - q)
        wts[m:] *= 1.0 + half * (dz + q)
        wts /= wts.sum()
        if collect_certificate:
            zbar += rt.PT @ sz
            qbar += q
    status = "fail" if T >= T_formula else "cap"
    return MwuOutcome(status, None, T, zbar, qbar, T)


def _cancel_cycles(g, f, tol=1e-12):
    """Strip circulations from a feasible flow; cost never increases.

    Uncapacitated optimal flows are forest-supported, so any directed
    cycle in the positive-flow digraph is pure waste (all weights here
    are positive).  Repeatedly cancel the bottleneck along a cycle
    until the support is acyclic.  Af is unchanged.
    """
    f = f.copy()
    for _ in range(4 * g.m + 4):
        adj = [[] for _ in range(g.n)]
        for i in range(g.m):
            if f[i] > tol:
                adj[int(g.eu[i])].append((int(g.ev[i]), i, 1.0))
            elif f[i] < -tol:
                adj[int(g.ev[i])].append((int(g.eu[i]), i, -1.0))
        color = np.zeros(g.n, dtype=np.int8)  # 0 white, 1 on stack, 2 done
        cycle = None
        for start in range(g.n):
            if cycle is not None:
                break
            if color[start]:
                continue
            # frame: [vertex, next adjacency slot, entering edge, entering sign]
            stack = [[start, 0, -1, 0.0]]
            color[start] = 1
            while stack and cycle is None:
                frame = stack[-1]
                v = frame[0]
                if frame[1] < len(adj[v]):
                    u, ei, sgn = adj[v][frame[1]]
                    frame[1] += 1
                    if color[u] == 1:  # closes a cycle through the stack
                        edges = [(ei, sgn)]
                        for fr in reversed(stack):
                            if fr[0] == u:
                                break
                            edges.append((fr[2], fr[3]))
                        cycle = edges
                    elif color[u] == 0:
                        color[u] = 1
                        stack.append([u, 0, ei, sgn])
                else:
                    color[v] = 2
                    stack.pop()
        if cycle is None:
            return f
        delta = min(abs(float(f[ei])) for (ei, _) in cycle)
        for (ei, sgn) in cycle:
            f[ei] -= sgn * delta
    return f


def effective_kappa(rt, cfg):
    if cfg.kappa is not None:
        return max(1.0, cfg.kappa)
    return max(1.0, min(rt.kappa_cert, cfg.kappa_cap))


def certificate_rejects_all(g, rt, b, s, outcome):
    """Check the averaged-dual infeasibility inequalities on all 2m columns."""
    if outcome.zbar is None or outcome.T == 0:
        return False
    zt = outcome.zbar / outcome.T
    q = abs(outcome.qbar / outcome.T)
    dz = (zt[g.eu] - zt[g.ev]) / g.ew.astype(np.float64) / rt.N
    # a feasible y* with ||y*||_1 <= 1 would force y*.dz_bar = q_bar,
    # impossible when |q_bar| strictly exceeds every |dz_bar_j|
    return bool(np.all(q - dz > 0.0) and np.all(q + dz > 0.0))


def scale_search(rt, g, b, cfg):
    """Smallest feasible scale on the (1+eps)-geometric grid.

    Returns (x, probes) where x = x' * s * ||Pb||_1 / ||PAW^-1||_(1->1)
    and probes is the scale-search trace.  Raises AllScalesFailed when
    even the top of the grid fails.
    """
    pb = matrix_vec(rt.P, b)
    pbn = pb.norm1()
    if pbn <= 0.0:
        return np.zeros(g.m, dtype=np.float64), []
    eps = cfg.epsilon
    top = math.ceil(math.log(max(rt.kappa_cert, 1.0 + eps)) / math.log1p(eps))
    probes = []
    results = {}

    def probe(j):
        out = mwu_feasibility(rt, g, b, (1.0 + eps) ** j, cfg)
        results[j] = out
        probes.append((j, out.status, out.iters))
        return out.status == "ok"

    lo, hi = 0, top
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid + 1
    out = results.get(lo)
    if out is None or out.status != "ok":
        probe(lo)
        out = results[lo]
        if out.status != "ok":
            raise AllScalesFailed(
                f"MWU failed at every scale up to (1+eps)^{top}; "
                "raise kappa/t_cap or loosen epsilon")
    s = (1.0 + eps) ** lo
    x = out.x * (s * pbn / rt.N)
    return x, probes


def min_cost_flow(g, b, epsilon=0.1, seed=0, cfg=None):
    """(1+eps)-approximate min-cost flow with exact feasibility.

    Composes the scale-searched MWU solver on residual demands for
    depth rounds, then routes the leftover demand along an MST, so the
    returned FlowSolution always satisfies Af = b.
    """
    b = validate_demand(b, g.n)
    if not (0.0 < epsilon < 0.5):
        raise ValueError("epsilon must be in (0, 0.5)")
    if cfg is None:
        cfg = SolverConfig(epsilon=epsilon)
    # the public epsilon splits five ways across composition and repair
    cfg = replace(cfg, epsilon=max(1e-4, epsilon / 5.0))
    if cfg.eta is None:
        # the formula step size pairs with the astronomical formula T;
        # at capped iteration counts a step near the stability edge
        # converges orders of magnitude faster
        cfg = replace(cfg, eta=min(0.125, 6.0 * cfg.epsilon))

    if not np.any(np.abs(b) > 1e-12):
        return FlowSolution(np.zeros(g.m), 0.0, 0.0, 0, [])

    gq, vmap, emap = contract_zero_edges(g)
    bq = np.bincount(vmap, weights=b, minlength=gq.n)
    total_iters = 0
    trace = []

    fq = np.zeros(gq.m, dtype=np.float64)
    if gq.n > 1 and np.any(np.abs(bq) > 1e-12):
        rt = build_flow_runtime(gq, seed=seed, t_rep=cfg.t_rep, k=cfg.k)
        depth = cfg.depth if cfg.depth is not None else 1 + math.ceil(math.log2(max(gq.n, 2)))
        wq = gq.ew.astype(np.float64)
        b_res = bq.copy()
        pbn0 = matrix_vec(rt.P, b_res).norm1()
        pbn_prev = pbn0
        run_cfg = cfg
        for round_no in range(depth):
            if pbn_prev <= 1e-8 * max(pbn0, 1.0):
                break  # leftover is dust; exact repair costs nothing
            if round_no == 1 and run_cfg.t_cap is not None:
                # later rounds fix small residuals whose cost share is
                # tiny, so they get a smaller iteration budget
                run_cfg = replace(run_cfg, t_cap=max(2000, run_cfg.t_cap // 4))
            for attempt in range(cfg.escalations + 1):
                try:
                    x_r, probes = scale_search(rt, gq, b_res, run_cfg)
                    break
                except AllScalesFailed:
                    if attempt == cfg.escalations:
                        raise
                    run_cfg = replace(
                        run_cfg,
                        kappa_cap=run_cfg.kappa_cap * 4.0,
                        t_cap=None if run_cfg.t_cap is None else run_cfg.t_cap * 4)
            total_iters += sum(p[2] for p in probes)
            trace.append(probes)
            f_round = x_r / wq
            b_new = b_res - _apply_incidence(gq, f_round)
            pbn_new = matrix_vec(rt.P, b_new).norm1()
            if pbn_new > pbn_prev:
                break  # the round did not help; stop and repair
            fq += f_round
            b_res = b_new
            pbn_prev = pbn_new
        repair = mst_routing(gq, b_res)
        fq += repair.f
        fq = _cancel_cycles(gq, fq)
    elif np.any(np.abs(bq) > 1e-12):
        raise ValueError("nonzero demand on a single contracted vertex")

    # expand back through the zero-edge contraction
    f = np.zeros(g.m, dtype=np.float64)
    for j in range(gq.m):
        i = int(emap[j])
        u = int(g.eu[i])
        if int(vmap[u]) == int(gq.eu[j]):
            f[i] = fq[j]
        else:
            f[i] = -fq[j]
    # rebalance inside each zero-weight class along zero-weight tree edges
    resid = b - _apply_incidence(g, f)
    if np.any(np.abs(resid) > 1e-12):
        parent = list(range(g.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ztree = []
        for i in range(g.m):
            if int(g.ew[i]) == 0:
                u, v = int(g.eu[i]), int(g.ev[i])
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
                    ztree.append((u, v, i))
        for idx, val in _route_forest(g.n, ztree, resid).items():
            f[idx] += val
    cost, residual = _flow_stats(g, f, b)
    return FlowSolution(f, cost, residual, total_iters, trace)
