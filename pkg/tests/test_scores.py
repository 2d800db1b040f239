import itertools
import math
import unittest
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from tmfgkit.graph import Triangulation
from tmfgkit.scores import (
    GaussianModel,
    ScoreFunction,
    WeightOracle,
    apply_transform,
    correlation,
    correlation_matrix,
    gaussian_entropy,
    kl_divergence_gaussian,
    model_entropy,
    score_entropy_gaussian,
    score_sum,
)
from tmfgkit.tmfg import BuildConfig, build

from tests.helpers import random_spd, uniform_oracle


class TestWeightOracle(unittest.TestCase):
    def test_matrix_is_mirrored(self):
        w = uniform_oracle(6, seed=2)
        for i, j in itertools.combinations(range(6), 2):
            self.assertEqual(w.weight(i, j), w.weight(j, i))
        self.assertEqual(w.weight(3, 3), 0.0)

    def test_rejects_asymmetric(self):
        matrix = np.ones((4, 4))
        matrix[0, 2] = 2.0
        with self.assertRaises(ValueError) as ctx:
            WeightOracle.from_matrix(matrix)
        self.assertIn("(0, 2)", str(ctx.exception))

    def test_rejects_negative_and_non_finite(self):
        matrix = np.ones((4, 4))
        matrix[1, 3] = matrix[3, 1] = -0.5
        with self.assertRaises(ValueError):
            WeightOracle.from_matrix(matrix)
        self.assertEqual(WeightOracle.from_matrix(matrix, "squared").weight(1, 3), 0.25)
        self.assertEqual(WeightOracle.from_matrix(matrix, "absolute").weight(3, 1), 0.5)
        matrix[1, 3] = matrix[3, 1] = np.nan
        with self.assertRaises(ValueError):
            WeightOracle.from_matrix(matrix, "squared")

    def test_diagonal_ignored(self):
        matrix = np.ones((4, 4))
        np.fill_diagonal(matrix, np.nan)
        w = WeightOracle.from_matrix(matrix)
        self.assertEqual(w.clique_weight((0, 1, 2, 3)), 6.0)

    def test_unknown_transform(self):
        with self.assertRaises(ValueError):
            apply_transform(np.ones(3), "cubed")


class TestCorrelation(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(7)
        self.series = rng.standard_normal((300, 8)) + 0.5 * rng.standard_normal((300, 1))

    def test_matches_numpy(self):
        reference = np.corrcoef(self.series, rowvar=False)
        for i, j in itertools.combinations(range(8), 2):
            self.assertAlmostEqual(correlation(i, j, self.series), reference[i, j], places=12)
        np.testing.assert_allclose(correlation_matrix(self.series), reference, atol=1e-12)

    def test_degenerate_series(self):
        with self.assertRaises(ValueError):
            correlation(0, 1, self.series[:1])
        flat = self.series.copy()
        flat[:, 2] = 1.0
        with self.assertRaises(ValueError):
            correlation(0, 2, flat)
        with self.assertRaises(ValueError):
            WeightOracle.from_series(flat)

    def test_lazy_matches_dense(self):
        lazy = WeightOracle.from_series(self.series, "squared")
        dense = WeightOracle.from_series(self.series, "squared", lazy=False)
        full = WeightOracle.from_matrix(correlation_matrix(self.series), "squared")
        self.assertTrue(lazy.is_lazy)
        for i, j in itertools.combinations(range(8), 2):
            self.assertEqual(lazy.weight(i, j), dense.weight(i, j))
            self.assertEqual(lazy.weight(j, i), full.weight(i, j))
        self.assertEqual(lazy.cached_entries, 28)

    def test_lazy_cache_under_threads(self):
        pairs = list(itertools.combinations(range(8), 2)) * 4
        lazy = WeightOracle.from_series(self.series, "absolute")
        with ThreadPoolExecutor(max_workers=4) as pool:
            values = list(pool.map(lambda pair: lazy.weight(*pair), pairs))
        sequential = WeightOracle.from_series(self.series, "absolute")
        self.assertEqual(values, [sequential.weight(i, j) for i, j in pairs])

    def test_raw_series_rejected(self):
        with self.assertRaises(ValueError):
            WeightOracle.from_series(self.series, "raw")


class TestScores(unittest.TestCase):
    def test_sum_score(self):
        w = uniform_oracle(6, seed=4)
        expected = w.weight(5, 0) + w.weight(5, 1) + w.weight(5, 2)
        self.assertEqual(score_sum(5, (2, 0, 1), w), expected)
        self.assertEqual(ScoreFunction.sum_of_weights(w)(5, (0, 1, 2)), expected)
        with self.assertRaises(ValueError):
            score_sum(1, (0, 1, 2), w)

    def test_entropy_of_one_variable(self):
        self.assertAlmostEqual(gaussian_entropy(np.array([[2.0]])), 0.5 * math.log(2 * math.pi * math.e * 2.0))

    def test_entropy_score_is_entropy_difference(self):
        model = GaussianModel(random_spd(7, np.random.default_rng(3)))
        expected = -model.entropy([0, 2, 4, 6]) + model.entropy([0, 2, 4])
        self.assertAlmostEqual(score_entropy_gaussian(6, (0, 2, 4), model), expected, places=10)
        score = ScoreFunction.gaussian_entropy(model)
        many = score.evaluate_many((0, 2, 4), np.array([1, 3, 5, 6]))
        for k, v in enumerate((1, 3, 5, 6)):
            self.assertAlmostEqual(many[k], score_entropy_gaussian(v, (0, 2, 4), model), places=10)

    def test_greedy_choice_minimises_model_entropy(self):
        for seed in range(50):
            model = GaussianModel(random_spd(8, np.random.default_rng(seed)))
            score = ScoreFunction.gaussian_entropy(model)
            tri = Triangulation.from_k4(8, (0, 1, 2, 3))
            pairs = [(face, v) for face in sorted(tri.faces) for v in range(4, 8)]
            by_score = max(pairs, key=lambda pair: score(pair[1], pair[0]))
            by_entropy = min(
                pairs, key=lambda pair: model.entropy(list(pair[0]) + [pair[1]]) - model.entropy(list(pair[0]))
            )
            self.assertEqual(by_score, by_entropy)

    def test_rejects_singular_clique(self):
        cov = np.eye(5)
        cov[0, 3] = cov[3, 0] = 1.0
        model = GaussianModel(cov)
        with self.assertRaises(ValueError):
            score_entropy_gaussian(3, (0, 1, 2), model)
        with self.assertRaises(ValueError):
            ScoreFunction.gaussian_entropy(model).evaluate_many((0, 1, 2), np.array([3, 4]))

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            ScoreFunction("mutual-information")
        with self.assertRaises(ValueError):
            ScoreFunction("entropy")


class TestDivergence(unittest.TestCase):
    def test_non_negative_on_random_models(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            p = int(rng.integers(5, 13))
            model = GaussianModel(random_spd(p, rng))
            result = build(model.weight_oracle(), BuildConfig(score=ScoreFunction.gaussian_entropy(model)))
            self.assertGreaterEqual(kl_divergence_gaussian(model, result.clique_tree), 0.0)

    def test_zero_when_precision_fits_the_tree(self):
        rng = np.random.default_rng(5)
        p = 10
        result = build(uniform_oracle(p, seed=9))
        precision = np.zeros((p, p))
        for i, j, _ in result.edges:
            precision[i, j] = precision[j, i] = rng.uniform(-0.3, 0.3)
        np.fill_diagonal(precision, np.abs(precision).sum(axis=1) + 1.0)
        model = GaussianModel(np.linalg.inv(precision))
        self.assertAlmostEqual(kl_divergence_gaussian(model, result.clique_tree), 0.0, places=9)
        self.assertAlmostEqual(
            model_entropy(result.clique_tree, model), model.entropy(range(p)), places=9
        )

    def test_tree_must_cover_all_variables(self):
        result = build(uniform_oracle(6, seed=1))
        model = GaussianModel(np.eye(7))
        with self.assertRaises(ValueError):
            kl_divergence_gaussian(model, result.clique_tree)


if __name__ == "__main__":
    unittest.main()
