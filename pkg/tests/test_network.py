import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualbridge import (
    GraphUniverse,
    NetworkProcess,
    WeightedGraphMatrix,
    certify_a3,
    gossip_matrix,
    lift_matrix,
    load_universe,
    metropolis_weights,
    sample_sequence,
    validate_a1,
    validate_a2,
)
from dualbridge.network import stationary_distribution, universe_from_dict


def cycle_matrix(m, nodes):
    """1/2 I + 1/2 P where P rotates ``nodes`` (a directed cycle) and fixes the rest."""
    P = np.eye(m)
    for k, i in enumerate(nodes):
        j = nodes[(k + 1) % len(nodes)]
        P[i, i] = 0.0
        P[i, j] = 1.0
    return WeightedGraphMatrix(0.5 * np.eye(m) + 0.5 * P)


def union_strongly_connected(graphs):
    """Independent check: reachability on the union edge set."""
    m = graphs[0].m
    G = nx.DiGraph()
    G.add_nodes_from(range(m))
    for g in graphs:
        for i in range(m):
            for j in g.in_neighbors(i):
                G.add_edge(j, i)
    return nx.is_strongly_connected(G)


class TestWeightedGraphMatrix:
    def test_entries_must_be_in_unit_interval(self):
        with pytest.raises(ValueError):
            WeightedGraphMatrix([[1.5, -0.5], [0.0, 1.0]])

    def test_immutable(self):
        w = WeightedGraphMatrix(np.eye(2))
        with pytest.raises(ValueError):
            w.weights[0, 0] = 0.0

    def test_neighbors(self):
        w = cycle_matrix(3, [0, 1, 2])
        assert w.in_neighbors(0) == [1]
        assert w.out_neighbors(0) == [2]


class TestValidateA1:
    def test_identity(self):
        assert validate_a1(WeightedGraphMatrix(np.eye(2))).ok

    def test_averaging(self):
        assert validate_a1(WeightedGraphMatrix([[0.5, 0.5], [0.5, 0.5]])).ok

    def test_column_violation(self):
        rep = validate_a1(WeightedGraphMatrix([[1.0, 0.0], [0.5, 0.5]]))
        assert not rep.ok
        # first column sums to 1.5 (and the second to 0.5)
        assert rep.bad_columns == [0, 1]
        assert rep.column_sums[0] == pytest.approx(1.5)
        assert rep.bad_rows == []

    def test_row_deficit_named(self):
        rep = validate_a1(WeightedGraphMatrix([[0.9, 0.0], [0.0, 1.0]]))
        assert rep.bad_rows == [0]
        assert "row 0" in rep.describe()


class TestValidateA2:
    def test_complete_uniform(self):
        rep = validate_a2(GraphUniverse((WeightedGraphMatrix(np.full((3, 3), 1 / 3)),)))
        assert rep.ok
        # I - J/3 has eigenvalues {0, 1, 1}
        assert rep.lambda1.real == pytest.approx(0.0, abs=1e-12)
        assert rep.lambda2.real == pytest.approx(1.0, abs=1e-12)

    def test_identity_disconnected(self):
        rep = validate_a2(GraphUniverse((WeightedGraphMatrix(np.eye(3)),)))
        assert not rep.ok
        assert rep.lambda2.real == pytest.approx(0.0, abs=1e-15)

    def test_two_directed_cycles(self):
        A, B = cycle_matrix(5, [0, 1, 2]), cycle_matrix(5, [2, 3, 4])
        assert not np.allclose(A.weights, A.weights.T)
        for g in (A, B):
            assert validate_a1(g).ok
            assert not validate_a2([g]).ok
            assert not union_strongly_connected([g])
        rep = validate_a2(GraphUniverse((A, B)))
        assert union_strongly_connected([A, B])
        assert rep.ok and rep.lambda2.real > 1e-3

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 7), st.floats(0.1, 0.9), st.integers(0, 2**32 - 1))
    def test_agrees_with_graph_connectivity(self, m, p, seed):
        G = nx.gnp_random_graph(m, p, seed=seed)
        w = metropolis_weights(nx.to_numpy_array(G, dtype=int))
        assert validate_a2([w]).ok == nx.is_connected(G)


class TestCertifyA3:
    def pair(self):
        return GraphUniverse((metropolis_weights([[0, 1, 0], [1, 0, 0], [0, 0, 0]], "a"),
                              metropolis_weights([[0, 0, 0], [0, 0, 1], [0, 1, 0]], "b")))

    def test_iid_positive(self):
        cert = certify_a3(NetworkProcess.iid(self.pair(), [0.5, 0.5]))
        assert cert.certified and not cert.warnings

    def test_iid_zero_probability_warns(self):
        u = self.pair()
        assert validate_a2(u).ok
        cert = certify_a3(NetworkProcess.iid(u, [1.0, 0.0]))
        assert cert.certified
        assert cert.support == [0]
        assert any("'b'" in w for w in cert.warnings)
        assert cert.support_a2 is not None and not cert.support_a2.ok

    def test_markov_non_stationary_rejected(self):
        P = [[0.9, 0.1], [0.1, 0.9]]
        cert = certify_a3(NetworkProcess.markov(self.pair(), P, initial=[1.0, 0.0]))
        assert not cert.certified
        assert "stationary" in cert.reason

    def test_markov_stationary(self):
        cert = certify_a3(NetworkProcess.markov(self.pair(), [[0.9, 0.1], [0.1, 0.9]]))
        assert cert.certified

    def test_markov_reducible_rejected(self):
        cert = certify_a3(NetworkProcess.markov(self.pair(), [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5]))
        assert not cert.certified

    def test_cycle(self):
        assert certify_a3(NetworkProcess.cycle(self.pair())).certified

    def test_gossip(self):
        assert certify_a3(NetworkProcess.gossip(3, [(0, 1), (1, 2)])).certified
        assert not certify_a3(NetworkProcess.gossip(3, [(0, 1), (1, 2)], [1.0, 0.0])).certified


class TestSampling:
    def test_iid_frequencies(self):
        u = GraphUniverse((WeightedGraphMatrix(np.eye(2), "0"),
                           WeightedGraphMatrix(np.full((2, 2), 0.5), "1")))
        seq = sample_sequence(NetworkProcess.iid(u, seed=7), 10_000)
        assert len(seq) == 10_000
        freq = seq.count("0") / len(seq)
        assert 0.45 <= freq <= 0.55

    def test_cycle_pattern(self):
        u = GraphUniverse(tuple(WeightedGraphMatrix(np.eye(2), str(k)) for k in range(3)))
        seq = NetworkProcess.cycle(u).sample_sequence(9)
        assert seq == ["0", "1", "2"] * 3

    def test_markov_frequencies(self):
        u = GraphUniverse((WeightedGraphMatrix(np.eye(2), "0"),
                           WeightedGraphMatrix(np.full((2, 2), 0.5), "1")))
        p = NetworkProcess.markov(u, [[0.9, 0.1], [0.1, 0.9]], seed=3)
        assert np.allclose(p.model.initial, [0.5, 0.5])
        idx = p.sample_indices(100_000)
        assert 0.47 <= np.mean(idx == 0) <= 0.53

    def test_reproducible(self):
        p = NetworkProcess.gossip(5, [(0, 1), (1, 2), (2, 3), (3, 4)], seed=11)
        a, b = p.sample_indices(5000), p.sample_indices(5000)
        assert a.tobytes() == b.tobytes()
        assert p.sample_indices(5000, seed=12).tobytes() != a.tobytes()

    def test_gossip_idle_slot(self):
        p = NetworkProcess.gossip(4, [(0, 1), (2, 3)], [0.35, 0.35], seed=0)
        assert p.universe.labels[-1] == "idle"
        np.testing.assert_array_equal(p.universe[-1].weights, np.eye(4))
        assert np.mean(p.sample_indices(20_000) == 2) == pytest.approx(0.3, abs=0.02)

    def test_gossip_realizations_touch_one_block(self):
        p = NetworkProcess.gossip(5, [(0, 3), (1, 4), (2, 3)], seed=0)
        for w, (i, j) in zip(p.universe, p.model.pairs):
            D = w.weights - np.eye(5)
            mask = np.zeros((5, 5), dtype=bool)
            mask[np.ix_([i, j], [i, j])] = True
            assert np.all(D[~mask] == 0)
            assert validate_a1(w).ok

    def test_stationary_distribution(self):
        P = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
        pi = stationary_distribution(P)
        np.testing.assert_allclose(pi @ P, pi, atol=1e-14)
        np.testing.assert_allclose(pi, [0.25, 0.5, 0.25], atol=1e-14)


class TestLift:
    def test_identity(self):
        np.testing.assert_array_equal(lift_matrix(WeightedGraphMatrix(np.eye(2)), 2), np.eye(4))

    def test_scalar_blocks(self):
        W = np.full((2, 2), 0.5)
        np.testing.assert_array_equal(lift_matrix(WeightedGraphMatrix(W), 1), W)

    def test_block_permutation(self):
        expected = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float)
        np.testing.assert_array_equal(lift_matrix(WeightedGraphMatrix([[0, 1], [1, 0]]), 2), expected)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_preserves_double_stochasticity(self, m, n, seed):
        G = nx.gnp_random_graph(m, 0.5, seed=seed)
        L = lift_matrix(metropolis_weights(nx.to_numpy_array(G, dtype=int)), n)
        np.testing.assert_allclose(L.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(L.sum(axis=1), 1.0, atol=1e-12)


class TestMetropolis:
    def test_empty_graph(self):
        np.testing.assert_array_equal(metropolis_weights(np.zeros((3, 3), dtype=int)).weights, np.eye(3))

    def test_single_edge(self):
        np.testing.assert_allclose(metropolis_weights([[0, 1], [1, 0]]).weights, [[0.5, 0.5], [0.5, 0.5]])

    def test_star(self):
        A = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
        W = metropolis_weights(A).weights
        # center degree 2: every edge weight 1/3
        np.testing.assert_allclose(W, [[1 / 3, 1 / 3, 1 / 3], [1 / 3, 2 / 3, 0], [1 / 3, 0, 2 / 3]])
        assert validate_a1(WeightedGraphMatrix(W)).ok

    def test_rejects_directed(self):
        with pytest.raises(ValueError):
            metropolis_weights([[0, 1], [0, 0]])


class TestJson:
    def test_round_trip_and_adjacency(self, tmp_path):
        data = {"m": 3, "graphs": [
            {"label": "w", "weights": [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 1]]},
            {"label": "adj", "adjacency": [[0, 0, 0], [0, 0, 1], [0, 1, 0]]},
        ]}
        path = tmp_path / "u.json"
        path.write_text(json.dumps(data))
        u = load_universe(path)
        assert u.labels == ["w", "adj"]
        np.testing.assert_allclose(u[1].weights, metropolis_weights(data["graphs"][1]["adjacency"]).weights)
        assert universe_from_dict(u.to_dict()).labels == u.labels

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            universe_from_dict({"m": 3, "graphs": [{"weights": np.eye(2).tolist()}]})

    def test_gossip_matrix_multi_pair(self):
        w = gossip_matrix(4, [(0, 1), (2, 3)])
        assert validate_a1(w).ok and w.label == "0-1+2-3"
        with pytest.raises(ValueError):
            gossip_matrix(4, [(0, 1), (1, 2)])
