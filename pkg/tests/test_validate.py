import itertools
import unittest

import networkx as nx
import numpy as np

from tmfgkit.graph import CliqueTree, FilterResult, Triangulation
from tmfgkit.moves import apply_t1, apply_t2
from tmfgkit.pmfg import build_pmfg
from tmfgkit.tmfg import BuildConfig, build
from tmfgkit.validate import (
    check_chordal,
    check_clique_tree,
    exhaustive_wmpg,
    has_kuratowski_subdivision,
    is_kuratowski_subdivision,
    kuratowski_subgraph,
    mcs_order,
    naive_tmfg_oracle,
    smooth,
    validate_result,
)

from tests.helpers import constant_oracle, has_chordless_cycle, uniform_oracle


def random_connected_graph(n, density, rng):
    while True:
        graph = nx.Graph()
        graph.add_nodes_from(range(n))
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < density:
                graph.add_edge(i, j)
        if nx.is_connected(graph):
            return graph


class TestChordality(unittest.TestCase):
    def test_small_cases(self):
        self.assertTrue(check_chordal(nx.path_graph(5)).passed)
        self.assertTrue(check_chordal(nx.complete_graph(4)).passed)
        self.assertFalse(check_chordal(nx.cycle_graph(4)).passed)

    def test_needs_connected_graph(self):
        graph = nx.Graph()
        graph.add_edges_from([(0, 1), (2, 3)])
        with self.assertRaises(ValueError):
            check_chordal(graph)
        with self.assertRaises(ValueError):
            check_chordal(nx.Graph())

    def test_mcs_lowest_index_first(self):
        self.assertEqual(mcs_order(nx.path_graph(4)), [0, 1, 2, 3])

    def test_agrees_with_brute_force(self):
        rng = np.random.default_rng(11)
        for trial in range(60):
            n = 5 + trial % 5
            graph = random_connected_graph(n, 0.5, rng)
            self.assertEqual(check_chordal(graph).passed, not has_chordless_cycle(graph), sorted(graph.edges()))

    def test_built_graphs_are_chordal(self):
        for p in (5, 12, 40):
            result = build(uniform_oracle(p, seed=p))
            self.assertTrue(check_chordal(result).passed)


class TestCliqueTreeCheck(unittest.TestCase):
    def test_k4(self):
        tree = CliqueTree()
        tree.seed((0, 1, 2, 3))
        self.assertTrue(check_clique_tree(tree, nx.complete_graph(4)).passed)

    def test_five_vertices(self):
        result = build(uniform_oracle(5, seed=3))
        self.assertEqual(len(result.clique_tree.cliques), 2)
        self.assertEqual(len(result.clique_tree.separators), 1)
        self.assertTrue(check_clique_tree(result.clique_tree, result.to_networkx()).passed)

    def test_many_builds(self):
        for seed in range(20):
            p = 6 + 2 * seed
            result = build(uniform_oracle(p, seed=seed))
            self.assertTrue(check_clique_tree(result.clique_tree, result.to_networkx()).passed, p)

    def test_corrupted_tree(self):
        result = build(uniform_oracle(12, seed=1))
        graph = result.to_networkx()
        tree = result.clique_tree.copy()
        tree.cliques.pop()
        tree.links.pop()
        tree.parent.pop()
        failed = {c.name for c in check_clique_tree(tree, graph).failures()}
        self.assertIn("clique-count", failed)
        self.assertIn("edge-cover", failed)

        wrong_separator = result.clique_tree.copy()
        wrong_separator.links[1] = (0, 0, 0)
        failed = {c.name for c in check_clique_tree(wrong_separator, graph).failures()}
        self.assertEqual(failed, {"separators"})


class TestReferences(unittest.TestCase):
    def test_naive_limits(self):
        with self.assertRaises(ValueError):
            naive_tmfg_oracle(uniform_oracle(201))
        with self.assertRaises(ValueError):
            naive_tmfg_oracle(uniform_oracle(10), BuildConfig(variant="t1"))

    def test_exhaustive_small(self):
        self.assertEqual(exhaustive_wmpg(constant_oracle(4)), 6.0)
        self.assertEqual(exhaustive_wmpg(constant_oracle(6)), 12.0)
        with self.assertRaises(ValueError):
            exhaustive_wmpg(uniform_oracle(8))

    def test_exhaustive_bounds_heuristics(self):
        ratios = []
        for p in (6, 7):
            for seed in range(50):
                w = uniform_oracle(p, seed=seed)
                best = exhaustive_wmpg(w)
                tmfg = build(w).total_weight
                pmfg = build_pmfg(w).total_weight
                self.assertGreaterEqual(best, tmfg - 1e-12, (p, seed))
                self.assertGreaterEqual(best, pmfg - 1e-12, (p, seed))
                ratios.append(tmfg / best)
        self.assertEqual(len(ratios), 100)
        self.assertGreater(float(np.mean(ratios)), 0.85)


class TestKuratowski(unittest.TestCase):
    def test_known_graphs(self):
        self.assertTrue(has_kuratowski_subdivision(nx.complete_graph(5)))
        self.assertTrue(has_kuratowski_subdivision(nx.complete_bipartite_graph(3, 3)))
        self.assertFalse(has_kuratowski_subdivision(nx.complete_graph(4)))
        self.assertFalse(has_kuratowski_subdivision(nx.octahedral_graph()))

    def test_subdivided_k5(self):
        graph = nx.complete_graph(5)
        graph.remove_edge(0, 1)
        nx.add_path(graph, [0, 5, 6, 1])
        self.assertTrue(is_kuratowski_subdivision(graph))
        self.assertEqual(smooth(graph).number_of_nodes(), 5)
        self.assertTrue(has_kuratowski_subdivision(graph))

    def test_certificate(self):
        self.assertIsNone(kuratowski_subgraph(nx.octahedral_graph()))
        petersen = nx.petersen_graph()
        certificate = kuratowski_subgraph(petersen)
        self.assertTrue(is_kuratowski_subdivision(certificate))
        self.assertTrue(all(petersen.has_edge(*e) for e in certificate.edges()))

    def test_agrees_with_planarity_test(self):
        rng = np.random.default_rng(5)
        for trial in range(25):
            n = 6 + trial % 2
            graph = random_connected_graph(n, 0.65, rng)
            planar = nx.check_planarity(graph)[0]
            self.assertEqual(has_kuratowski_subdivision(graph), not planar, sorted(graph.edges()))


class TestValidateResult(unittest.TestCase):
    def test_tmfg_passes(self):
        w = uniform_oracle(30, seed=2)
        report = validate_result(build(w), w)
        self.assertTrue(report.passed, report.failures())
        self.assertIn("chordal", [c.name for c in report.checks])

    def test_pmfg_skips_chordality(self):
        report = validate_result(build_pmfg(uniform_oracle(15, seed=2)))
        self.assertTrue(report.passed)
        self.assertNotIn("chordal", [c.name for c in report.checks])

    def test_non_chordal_tmfg(self):
        w = constant_oracle(7)
        tri = Triangulation.from_k4(7, (1, 2, 3, 4))
        apply_t2(tri, 5, (1, 3, 4), w)
        apply_t2(tri, 6, (2, 3, 4), w)
        apply_t1(tri, (3, 4), w)
        result = FilterResult.from_triangulation(tri, w, method="tmfg-t1", clique_tree=None)
        report = validate_result(result)
        self.assertTrue(report.passed)
        self.assertNotIn("chordal", [c.name for c in report.checks])

    def test_missing_edge_detected(self):
        result = build(uniform_oracle(12, seed=4))
        result.edges = result.edges[1:]
        failed = {c.name for c in validate_result(result).failures()}
        self.assertIn("edge-count", failed)
        self.assertIn("total-weight", failed)

    def test_wrong_weights_detected(self):
        result = build(uniform_oracle(10, seed=1))
        report = validate_result(result, uniform_oracle(10, seed=2))
        self.assertEqual([c.name for c in report.failures()], ["oracle-weights"])


if __name__ == "__main__":
    unittest.main()
