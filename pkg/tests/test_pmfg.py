import itertools
import unittest

import networkx as nx
import numpy as np

from tmfgkit.pmfg import PlanarGraph, build_pmfg, edge_order
from tmfgkit.scores import WeightOracle
from tmfgkit.synth import MatrixSpec, generate
from tmfgkit.tmfg import build
from tmfgkit.validate import has_kuratowski_subdivision

from tests.helpers import constant_oracle, uniform_oracle


def greedy_reference(w):
    """Plain greedy over every pair with a full planarity test each time."""
    pairs = sorted(itertools.combinations(range(w.p), 2), key=lambda e: (-w.weight(*e), e))
    graph = nx.Graph()
    graph.add_nodes_from(range(w.p))
    for i, j in pairs:
        graph.add_edge(i, j)
        if not nx.check_planarity(graph)[0]:
            graph.remove_edge(i, j)
    return sorted(tuple(sorted(e)) for e in graph.edges())


class TestPlanarGraph(unittest.TestCase):
    def test_k5_minus_edge(self):
        graph = PlanarGraph(5)
        for i, j in itertools.combinations(range(5), 2):
            if (i, j) != (3, 4):
                graph.add_edge(i, j)
        self.assertFalse(graph.is_planar((3, 4)))
        self.assertFalse(graph.try_add(3, 4))
        self.assertEqual(graph.edge_count, 9)

    def test_k33_minus_edge(self):
        graph = PlanarGraph(6)
        for i in range(3):
            for j in range(3, 6):
                if (i, j) != (2, 5):
                    graph.add_edge(i, j)
        self.assertFalse(graph.is_planar((2, 5)))
        self.assertEqual(graph.planarity_tests, 1)

    def test_separate_components_always_planar(self):
        graph = PlanarGraph(10)
        for i, j in itertools.combinations(range(5), 2):
            if (i, j) != (3, 4):
                graph.add_edge(i, j)
        self.assertTrue(graph.is_planar((4, 9)))
        self.assertEqual(graph.planarity_tests, 0)

    def test_duplicate_rejected(self):
        graph = PlanarGraph(4)
        graph.add_edge(0, 1)
        with self.assertRaises(ValueError):
            graph.is_planar((1, 0))


class TestEdgeOrder(unittest.TestCase):
    def test_ties_broken_lexicographically(self):
        order = [(i, j) for i, j, _ in edge_order(constant_oracle(4))]
        self.assertEqual(order, list(itertools.combinations(range(4), 2)))

    def test_non_increasing(self):
        weights = [wt for _, _, wt in edge_order(uniform_oracle(12, seed=3))]
        self.assertEqual(weights, sorted(weights, reverse=True))
        self.assertEqual(len(weights), 66)


class TestBuildPmfg(unittest.TestCase):
    def test_k4(self):
        w = uniform_oracle(4, seed=1)
        result = build_pmfg(w)
        self.assertEqual(result.edge_set(), set(itertools.combinations(range(4), 2)))
        self.assertEqual(result.method, "pmfg")
        self.assertFalse(result.chordal)

    def test_constant_weights(self):
        result = build_pmfg(constant_oracle(6))
        self.assertEqual(len(result.edges), 12)
        self.assertEqual(result.total_weight, 12.0)

    def test_maximal_and_planar(self):
        for seed in range(50):
            p = 5 + seed % 5
            w = uniform_oracle(p, seed=seed)
            result = build_pmfg(w)
            graph = result.to_networkx()
            self.assertEqual(len(result.edges), 3 * p - 6)
            self.assertTrue(nx.check_planarity(graph)[0])
            for i, j in itertools.combinations(range(p), 2):
                if graph.has_edge(i, j):
                    continue
                graph.add_edge(i, j)
                self.assertTrue(has_kuratowski_subdivision(graph), (seed, i, j))
                graph.remove_edge(i, j)

    def test_matches_plain_greedy(self):
        for seed in range(10):
            w = generate(MatrixSpec.parse("beta(0.5,3)", p=14, seed=seed))
            self.assertEqual(sorted(build_pmfg(w).edge_set()), greedy_reference(w))

    def test_keeps_heaviest_edge(self):
        w = uniform_oracle(30, seed=2)
        dense = w.dense()
        i, j = np.unravel_index(int(np.argmax(dense)), dense.shape)
        self.assertIn(tuple(sorted((int(i), int(j)))), build_pmfg(w).edge_set())

    def test_deterministic(self):
        w = uniform_oracle(25, seed=9)
        self.assertEqual(build_pmfg(w).to_dict(), build_pmfg(w).to_dict())

    def test_counters_recorded(self):
        result = build_pmfg(uniform_oracle(20, seed=4))
        self.assertEqual(result.moves_applied["edge_insertions"], 54)
        self.assertEqual(result.moves_applied["planarity_tests"], result.stats.planarity_tests)

    def test_comparable_to_tmfg(self):
        w = uniform_oracle(40, seed=5)
        ratio = build(w).total_weight / build_pmfg(w).total_weight
        self.assertGreater(ratio, 0.9)
        self.assertLess(ratio, 1.1)

    def test_three_vertices(self):
        w = WeightOracle.from_matrix(np.ones((3, 3)))
        self.assertEqual(len(build_pmfg(w).edges), 3)
        with self.assertRaises(ValueError):
            build_pmfg(WeightOracle.from_matrix(np.ones((2, 2))))


if __name__ == "__main__":
    unittest.main()
