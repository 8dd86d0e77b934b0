"""Flow solver: MST routing, the MWU feasibility core, scale search,
and the composed min-cost-flow pipeline."""

import math

import numpy as np
import pytest

from hopflow.graphs import Graph
from hopflow.precond import matrix_vec
from hopflow.flow import (
    AllScalesFailed,
    SolverConfig,
    build_flow_runtime,
    certificate_rejects_all,
    effective_kappa,
    min_cost_flow,
    mst_routing,
    mwu_feasibility,
    scale_search,
    validate_demand,
)

from conftest import rand_connected_graph, sssp_oracle, transportation_oracle


# ---------------------------------------------------------------------------
# demand validation


def test_validate_demand_wrong_length():
    with pytest.raises(ValueError):
        validate_demand([1.0, -1.0], 3)


def test_validate_demand_nonzero_sum():
    with pytest.raises(ValueError):
        validate_demand([1.0, 0.0, -0.5], 3)


def test_validate_demand_coerces_to_float64():
    b = validate_demand([1, 0, -1], 3)
    assert b.dtype == np.float64
    assert b.shape == (3,)


# ---------------------------------------------------------------------------
# MST routing (the exact-feasibility repair primitive)


def test_mst_routing_path():
    g = Graph(3, [(0, 1, 1), (1, 2, 1)])
    sol = mst_routing(g, np.array([1.0, 0.0, -1.0]))
    assert np.allclose(sol.f, [1.0, 1.0])
    assert sol.cost == 2.0
    assert sol.residual == 0.0


def test_mst_routing_zero_demand():
    g = Graph(3, [(0, 1, 1), (1, 2, 1)])
    sol = mst_routing(g, np.zeros(3))
    assert np.all(sol.f == 0.0)
    assert sol.cost == 0.0


def test_mst_routing_star_sign_convention():
    # positive flow runs from the smaller-id endpoint; leaves feeding the
    # center therefore produce negative entries on (0, leaf) edges
    g = Graph(4, [(0, 1, 1), (0, 2, 1), (0, 3, 1)])
    sol = mst_routing(g, np.array([-2.0, 1.0, 1.0, 0.0]))
    assert np.allclose(sol.f, [-1.0, -1.0, 0.0])
    assert sol.cost == 2.0
    assert sol.residual == 0.0


def test_mst_routing_exact_and_tree_bounded():
    """Af = b exactly, and the cost is within the minimax-tree factor.

    Every edge on the MST path between u and v weighs at most d(u, v),
    so routing any transport plan on the tree inflates the optimum by
    less than a factor n.
    """
    rng = np.random.default_rng(7)
    for seed in range(4):
        g = rand_connected_graph(8, 6, seed=40 + seed)
        b = rng.integers(-2, 3, size=8).astype(np.float64)
        b -= b.sum() / 8.0
        sol = mst_routing(g, b)
        out = np.bincount(g.eu, weights=sol.f, minlength=g.n)
        out -= np.bincount(g.ev, weights=sol.f, minlength=g.n)
        assert np.abs(out - b).max() < 1e-9
        opt = transportation_oracle(g, np.round(b * 8).astype(np.int64)) / 8.0
        assert opt - 1e-9 <= sol.cost <= g.n * opt + 1e-9


# ---------------------------------------------------------------------------
# MWU feasibility on one hand-checked instance
#
# 4-cycle with a heavy chord: OPT for 1 unit from 0 to 3 is the cheap
# side 0-1-2-3 of total weight 4.  With seed 1 the embedded norms give
# ||Pb||_1 = 48 and N = 24, so the critical scale N*OPT/||Pb||_1 = 2.


@pytest.fixture(scope="module")
def mwu_instance():
    g = Graph(4, [(0, 1, 1), (1, 2, 2), (2, 3, 1), (0, 3, 5)])
    b = np.array([1.0, 0.0, 0.0, -1.0])
    rt = build_flow_runtime(g, seed=1, t_rep=2)
    return g, b, rt


def test_runtime_norms_and_kappa(mwu_instance):
    g, b, rt = mwu_instance
    assert rt.N == 24.0
    assert rt.kappa_cert == 96.0
    assert effective_kappa(rt, SolverConfig(epsilon=0.4)) == 2.0
    assert effective_kappa(rt, SolverConfig(kappa=0.01)) == 1.0  # clamped


def test_mwu_feasible_above_critical_scale(mwu_instance):
    g, b, rt = mwu_instance
    cfg = SolverConfig(epsilon=0.4)
    out = mwu_feasibility(rt, g, b, 3.0, cfg)
    assert out.status == "ok"
    assert out.iters == 99  # deterministic; doubles as a regression canary
    assert np.abs(out.x).sum() <= 1.0 + 1e-12
    # residual contract: ||(PAW^-1/N) x - Pb/(s ||Pb||_1)||_1 <= eps/(2 kappa)
    pb = rt.P_sp @ b
    c = pb / (3.0 * np.abs(pb).sum())
    res = np.abs(rt.M @ out.x - c).sum()
    assert res <= 0.4 / (2.0 * 2.0) + 1e-12


def test_mwu_feasible_at_critical_scale(mwu_instance):
    g, b, rt = mwu_instance
    out = mwu_feasibility(rt, g, b, 2.0, SolverConfig(epsilon=0.4))
    assert out.status == "ok"


def test_mwu_fails_below_critical_scale_with_certificate(mwu_instance):
    g, b, rt = mwu_instance
    cfg = SolverConfig(epsilon=0.4)
    kappa = effective_kappa(rt, cfg)
    t_formula = math.ceil(64.0 * kappa * kappa * math.log(2 * g.m) / 0.4**2)
    assert t_formula == 3328
    for s in (1.0, 0.5):
        out = mwu_feasibility(rt, g, b, s, cfg, collect_certificate=True)
        assert out.status == "fail"
        assert out.T == t_formula
        assert certificate_rejects_all(g, rt, b, s, out)


def test_certificate_never_fires_on_success(mwu_instance):
    g, b, rt = mwu_instance
    out = mwu_feasibility(rt, g, b, 3.0, SolverConfig(epsilon=0.4),
                          collect_certificate=True)
    assert out.status == "ok"
    assert not certificate_rejects_all(g, rt, b, 3.0, out)


def test_mwu_compressed_path_matches_contract(mwu_instance):
    """Force the segment-walking path (used when the sparse expansion
    would not fit) and check the same residual contract."""
    g, b, rt = mwu_instance
    rt2 = build_flow_runtime(g, seed=1, t_rep=2)
    rt2.M = None
    out = mwu_feasibility(rt2, g, b, 3.0, SolverConfig(epsilon=0.4))
    assert out.status == "ok"
    assert np.abs(out.x).sum() <= 1.0 + 1e-12
    inv_w = 1.0 / g.ew.astype(np.float64)
    gv = np.bincount(g.eu, weights=out.x * inv_w, minlength=g.n)
    gv -= np.bincount(g.ev, weights=out.x * inv_w, minlength=g.n)
    gv /= rt2.N
    pbn = matrix_vec(rt2.P, b).norm1()
    gv -= b / (3.0 * pbn)
    assert matrix_vec(rt2.P, gv).norm1() <= 0.4 / (2.0 * 2.0) + 1e-12


# ---------------------------------------------------------------------------
# scale search


def test_scale_search_probe_count(mwu_instance):
    g, b, rt = mwu_instance
    eps = 0.4
    x, probes = scale_search(rt, g, b, SolverConfig(epsilon=eps))
    jmax = math.ceil(math.log(rt.kappa_cert) / math.log1p(eps))
    assert len(probes) <= math.ceil(math.log2(1 + jmax)) + 1
    assert all(status in ("ok", "fail", "cap") for (_, status, _) in probes)
    assert x.shape == (g.m,)


def test_scale_search_zero_demand_short_circuit(mwu_instance):
    g, b, rt = mwu_instance
    x, probes = scale_search(rt, g, np.zeros(4), SolverConfig(epsilon=0.4))
    assert np.all(x == 0.0)
    assert probes == []


def test_scale_search_all_scales_failed(mwu_instance):
    g, b, rt = mwu_instance
    with pytest.raises(AllScalesFailed):
        scale_search(rt, g, b, SolverConfig(epsilon=0.4, t_cap=0))


# ---------------------------------------------------------------------------
# the composed solver


def test_config_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.6)
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.0)


def test_min_cost_flow_rejects_bad_epsilon():
    g = Graph(2, [(0, 1, 1)])
    with pytest.raises(ValueError):
        min_cost_flow(g, np.array([1.0, -1.0]), epsilon=0.5)


def test_min_cost_flow_zero_demand():
    g = Graph(3, [(0, 1, 1), (1, 2, 1)])
    sol = min_cost_flow(g, np.zeros(3), epsilon=0.1)
    assert np.all(sol.f == 0.0)
    assert sol.cost == 0.0
    assert sol.residual == 0.0
    assert sol.iterations == 0
    assert sol.trace == []


def test_min_cost_flow_four_cycle():
    g = Graph(4, [(0, 1, 1), (1, 2, 2), (2, 3, 1), (0, 3, 5)])
    b = np.array([1.0, 0.0, 0.0, -1.0])
    sol = min_cost_flow(g, b, epsilon=0.1, seed=1)
    assert sol.residual <= 1e-8
    assert 4.0 - 1e-9 <= sol.cost <= 4.4
    # conservation holds vertex by vertex, not just in aggregate
    out = np.bincount(g.eu, weights=sol.f, minlength=4)
    out -= np.bincount(g.ev, weights=sol.f, minlength=4)
    assert np.abs(out - b).max() <= 1e-9


def test_min_cost_flow_unit_pair_battery():
    for seed in range(4):
        g = rand_connected_graph(16 + 2 * seed, 14, seed=60 + seed)
        dist = sssp_oracle(g, 0)
        t = int(np.argmax(dist))
        b = np.zeros(g.n)
        b[0], b[t] = 1.0, -1.0
        sol = min_cost_flow(g, b, epsilon=0.1, seed=seed)
        assert sol.residual <= 1e-8
        ratio = sol.cost / float(dist[t])
        assert 1.0 - 1e-9 <= ratio <= 1.1


def test_min_cost_flow_multi_source_vs_transport():
    rng = np.random.default_rng(11)
    for seed in range(3):
        g = rand_connected_graph(8, 6, seed=70 + seed)
        b = rng.integers(-2, 3, size=8)
        b = b - np.repeat(b.sum() // 8, 8)
        b[0] -= b.sum()
        b = b.astype(np.float64)
        if not np.any(b):
            b[0], b[1] = 1.0, -1.0
        opt = transportation_oracle(g, b.astype(np.int64))
        sol = min_cost_flow(g, b, epsilon=0.1, seed=seed)
        assert sol.residual <= 1e-8
        assert opt - 1e-9 <= sol.cost <= 1.1 * opt + 1e-9


def test_min_cost_flow_zero_weight_edges_contracted():
    g = Graph(3, [(0, 1, 0), (1, 2, 5)])
    sol = min_cost_flow(g, np.array([1.0, 0.0, -1.0]), epsilon=0.1)
    assert sol.residual <= 1e-9
    assert abs(sol.cost - 5.0) <= 0.5
    assert sol.f[1] == pytest.approx(1.0)
    assert sol.f[0] == pytest.approx(1.0)  # rides the free edge to vertex 1


def test_min_cost_flow_trace_accounting():
    g = Graph(4, [(0, 1, 1), (1, 2, 2), (2, 3, 1), (0, 3, 5)])
    sol = min_cost_flow(g, np.array([1.0, 0.0, 0.0, -1.0]), epsilon=0.2, seed=1)
    assert isinstance(sol.trace, list) and len(sol.trace) >= 1
    probe_iters = sum(it for rnd in sol.trace for (_, _, it) in rnd)
    assert sol.iterations == probe_iters


def test_min_cost_flow_deterministic():
    g = rand_connected_graph(12, 8, seed=90)
    b = np.zeros(12)
    b[0], b[5] = 2.0, -2.0
    a = min_cost_flow(g, b, epsilon=0.2, seed=4)
    c = min_cost_flow(g, b, epsilon=0.2, seed=4)
    assert np.array_equal(a.f, c.f)
    assert a.cost == c.cost and a.iterations == c.iterations


def test_flow_solution_to_dict_shape():
    g = Graph(2, [(0, 1, 3)])
    sol = min_cost_flow(g, np.array([1.0, -1.0]), epsilon=0.1)
    d = sol.to_dict(g)
    assert set(d) == {"edges", "cost", "residual", "iterations"}
    assert d["edges"][0][:2] == [0, 1]
