import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hubmod.model import Direction, Stop, floyd_warshall, network_from_matrix
from hubmod.routegen import cumulative_coverage, generate_k_mcr
from hubmod.spbench import (
    BenchRoute,
    MissingCoordinates,
    WeightedRouteSet,
    _projector,
    assign_demand,
    benchmark_coverage,
    benchmark_routes,
    circuity,
    expand_routes,
    k_shortest_routes,
    prune_routes,
    similarity,
)
from oracles import random_network

F, T = Direction.FROM_HUB, Direction.TO_HUB
DEG_PER_KM = 180.0 / (math.pi * 6371.0)


def _km_network(points: dict[str, tuple[float, float]], demand=None, minutes=None, lam="1.3"):
    """Hub ``h`` at the origin; stops at (x, y) km; times 2 min/km unless given."""
    names = list(points)
    xy = np.array([(0.0, 0.0)] + [points[n] for n in names])
    if minutes is None:
        minutes = 2.0 * np.linalg.norm(xy[:, None] - xy[None], axis=2)
    demand = demand or {n: 1.0 for n in names}
    stops = [Stop(n, demand[n], demand[n], 60, 60,
                  coords=(points[n][1] * DEG_PER_KM, points[n][0] * DEG_PER_KM)) for n in names]
    return network_from_matrix("h", stops, minutes, lam, hub_coords=(0.0, 0.0))


def _simple_paths(adj, src, dst):
    """Every loopless path by depth-first search, with its length."""
    out = []

    def dfs(node, path, length):
        if node == dst:
            out.append((length, tuple(path)))
            return
        for nxt, w in adj[node].items():
            if nxt not in path:
                dfs(nxt, path + [nxt], length + w)
    dfs(src, [src], 0)
    return sorted(out)


class TestShortestPaths:
    def test_k1_is_shortest_path(self):
        net = random_network(np.random.default_rng(4), 7)
        dist = floyd_warshall(np.array(net.travel_seconds, dtype=float))
        for r in k_shortest_routes(net, 1, F, max_edge_minutes=8):
            tail = r.nodes[-1]
            length = sum(net.travel(a, b) for a, b in r.links)
            assert r.nodes[0] == "hub"
            # on the sparse graph a path may not beat the full closure
            assert length >= dist[0, net.node(tail)]

    def test_k1_on_complete_graph_is_direct(self):
        net = random_network(np.random.default_rng(5), 6)
        dist = floyd_warshall(np.array(net.travel_seconds, dtype=float))
        for r in k_shortest_routes(net, 1, F):
            assert sum(net.travel(a, b) for a, b in r.links) == dist[0, net.node(r.nodes[-1])]

    def test_k3_matches_enumeration_on_hand_graph(self):
        pts = {"a": (1, 0), "b": (1, 1), "c": (0, 1), "d": (2, 1), "e": (2, 0)}
        net = _km_network(pts)
        routes = k_shortest_routes(net, 3, F, max_edge_minutes=2.9)
        adj = {}
        for i in net.node_ids:
            adj[i] = {j: net.travel(i, j) for j in net.node_ids
                      if j != i and net.travel(i, j) <= 174}
        for sid in net.stop_ids:
            want = [length for length, _ in _simple_paths(adj, "h", sid)[:3]]
            got = sorted(sum(net.travel(a, b) for a, b in r.links)
                         for r in routes if r.nodes[-1] == sid)
            assert got == want

    def test_to_hub_paths_end_at_hub(self):
        net = random_network(np.random.default_rng(1), 5)
        for r in k_shortest_routes(net, 2, T):
            assert r.nodes[-1] == "hub" and r.nodes[0] != "hub"

    def test_disconnected_stop_has_no_routes(self):
        net = _km_network({"a": (1, 0), "far": (30, 0)})
        routes = k_shortest_routes(net, 2, F, max_edge_minutes=5)
        assert all(r.nodes[-1] != "far" for r in routes)
        assert len(routes) == 1

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            k_shortest_routes(_km_network({"a": (1, 0)}), 0)


class TestAssignDemand:
    def test_single_route_probability_one(self):
        net = _km_network({"a": (1, 0)})
        w = assign_demand([BenchRoute(("h", "a"), F)], net)
        assert w.prob == {("a", 0): 1.0}

    def test_equal_times_split_evenly(self):
        net = _km_network({"a": (1, 0), "b": (0, 1), "c": (1, 1)})
        r1 = BenchRoute(("h", "a", "c"), F)
        r2 = BenchRoute(("h", "b", "c"), F)
        w = assign_demand([r1, r2], net)
        assert w.prob[("c", 0)] == pytest.approx(0.5) and w.prob[("c", 1)] == pytest.approx(0.5)

    def test_softmax_values(self):
        # a is 10 min direct and 20 min via b: one and two time units
        m = [[0, 10, 10], [10, 0, 10], [10, 10, 0]]
        net = network_from_matrix("h", [Stop("a", 1, 1, 60, 60), Stop("b", 1, 1, 60, 60)], m)
        w = assign_demand([BenchRoute(("h", "a"), F), BenchRoute(("h", "b", "a"), F)], net)
        e1, e2 = math.exp(-1), math.exp(-2)
        assert w.prob[("a", 0)] == pytest.approx(e1 / (e1 + e2), abs=1e-12)
        assert w.prob[("a", 1)] == pytest.approx(e2 / (e1 + e2), abs=1e-12)
        assert round(w.prob[("a", 0)], 4) == 0.7311

    def test_weights_follow_definition(self):
        m = [[0, 10, 10], [10, 0, 10], [10, 10, 0]]
        net = network_from_matrix("h", [Stop("a", 4, 0, 60, 60), Stop("b", 2, 0, 60, 60)], m)
        routes = [BenchRoute(("h", "a"), F), BenchRoute(("h", "b", "a"), F)]
        w = assign_demand(routes, net)
        pa0, pa1 = w.prob[("a", 0)], w.prob[("a", 1)]
        # W_a collects a's own demand on both routes and b's demand (on route 1)
        assert w.stop_weight["a"] == pytest.approx(4 * pa0 + 4 * pa1 + 2 * 1.0)
        assert w.stop_weight["b"] == pytest.approx(4 * pa1 + 2)
        assert w.route_weight[1] == pytest.approx(w.stop_weight["a"] + w.stop_weight["b"])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            assign_demand([], _km_network({"a": (1, 0)}))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_softmax_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(3, 8)))
    routes = expand_routes(k_shortest_routes(net, 3, F, max_edge_minutes=12), "hub")
    w = assign_demand(routes, net)
    sums = {}
    for (s, _), p in w.prob.items():
        sums[s] = sums.get(s, 0.0) + p
    assert all(abs(v - 1.0) <= 1e-12 for v in sums.values())


class TestExpand:
    def test_disjoint_routes_add_nothing(self):
        rs = [BenchRoute(("h", "a", "b"), F), BenchRoute(("h", "c", "d"), F)]
        assert expand_routes(rs, "h") == rs

    def test_subset_gives_one_splice(self):
        small = BenchRoute(("h", "x", "a", "b"), F)
        big = BenchRoute(("h", "x", "y", "a", "b", "c"), F)
        new = expand_routes([small, big], "h")[2:]
        assert new == [BenchRoute(("h", "x", "a", "b", "c"), F)]

    def test_crossing_pair_gives_two(self):
        r1 = BenchRoute(("h", "a", "x", "y", "c"), F)
        r2 = BenchRoute(("h", "d", "x", "y", "e"), F)
        new = expand_routes([r1, r2], "h")[2:]
        assert {r.nodes for r in new} == {("h", "a", "x", "y", "e"), ("h", "d", "x", "y", "c")}

    def test_looping_splice_dropped(self):
        r1 = BenchRoute(("h", "a", "b", "c"), F)
        r2 = BenchRoute(("h", "c", "a", "b", "d"), F)
        new = expand_routes([r1, r2], "h")[2:]
        assert all(len(set(r.nodes)) == len(r.nodes) for r in new)
        assert ("h", "c", "a", "b", "c") not in {r.nodes for r in new}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_expansion_never_repeats_links(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(3, 8)))
    for r in expand_routes(k_shortest_routes(net, 3, F, max_edge_minutes=12), "hub"):
        assert len(set(r.links)) == len(r.links)
        assert len(set(r.nodes)) == len(r.nodes)


class TestPrune:
    def _three(self):
        net = _km_network({"a": (0, 2), "b": (1, 2), "c": (0, -2)})
        routes = (BenchRoute(("h", "a"), F), BenchRoute(("h", "b"), F), BenchRoute(("h", "c"), F))
        return net, WeightedRouteSet(routes, (3.0, 2.0, 1.0), {}, {})

    def test_hand_similarities(self):
        net, w = self._three()
        xy = _projector(net)
        r1, r2, r3 = w.routes
        assert similarity(r1, r2, xy) == pytest.approx(1.0 / (2 + math.sqrt(5)), rel=1e-9)
        assert similarity(r1, r3, xy) == pytest.approx(1.0, rel=1e-9)
        assert similarity(r1, r1, xy) == 0.0

    def test_survivors(self):
        net, w = self._three()
        kept = [r.nodes[-1] for r, _ in prune_routes(w, net, s_thd=0.3)]
        assert kept == ["a", "c"]
        assert [r.nodes[-1] for r, _ in prune_routes(w, net, s_thd=0.2)] == ["a", "b", "c"]

    def test_inverted_similarity(self):
        net, w = self._three()
        kept = [r.nodes[-1] for r, _ in prune_routes(w, net, s_thd=0.5, invert_similarity=True)]
        assert kept == ["a", "b"]

    def test_duplicates_collapse(self):
        net, w = self._three()
        dup = WeightedRouteSet(w.routes[:1] * 2, (1.0, 1.0), {}, {})
        assert len(prune_routes(dup, net)) == 1

    def test_straight_route_circuity_one(self):
        net = _km_network({"a": (1, 0), "b": (2, 0)})
        r = BenchRoute(("h", "a", "b"), F)
        assert circuity(r, _projector(net)) == pytest.approx(1.0)
        kept = prune_routes(WeightedRouteSet((r,), (1.0,), {}, {}), net, c_thd=1.01)
        assert [x for x, _ in kept] == [r]

    def test_length_and_subset_rules(self):
        net = _km_network({"a": (0.2, 0), "b": (1, 0), "c": (2, 0)})
        short = BenchRoute(("h", "a"), F)          # 0.2 km, below l_thd
        sub = BenchRoute(("h", "b"), F)            # stops inside the longer route
        full = BenchRoute(("h", "b", "c"), F)
        w = WeightedRouteSet((short, sub, full), (5.0, 4.0, 1.0), {}, {})
        assert [r for r, _ in prune_routes(w, net, s_thd=1e-9)] == [full]

    def test_needs_coordinates(self):
        net = random_network(np.random.default_rng(0), 3)
        w = WeightedRouteSet((BenchRoute(("hub", "s01"), F),), (1.0,), {}, {})
        with pytest.raises(MissingCoordinates):
            prune_routes(w, net)

    def test_thresholds_positive(self):
        net, w = self._three()
        with pytest.raises(ValueError):
            prune_routes(w, net, l_thd=0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["1.1", "1.2", "1.3", "1.4"]))
def test_pruned_subset_and_coverage_dominated(seed, lam):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(4, 9)), lam=lam, coords=True)
    for d in (F, T):
        pool = expand_routes(k_shortest_routes(net, 3, d), net.hub_id)
        kept = benchmark_routes(net, 3, d)
        assert {r.nodes for r, _ in kept} <= {r.nodes for r in pool}
        bench = benchmark_coverage([r for r, _ in kept], net)
        if not bench:
            continue
        exact = cumulative_coverage(generate_k_mcr(net, len(bench), "exact", direction=d), net, d)
        for k, b in enumerate(bench):
            assert b <= exact[min(k, len(exact) - 1)] + 1e-12
