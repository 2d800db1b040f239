import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np

from tmfgkit.scores import correlation_matrix
from tmfgkit.synth import (
    RNG_ALGORITHM,
    MatrixFormatError,
    MatrixSpec,
    derive_seed,
    factor_series,
    generate,
    make_rng,
    matrix_oracle,
    read_matrix,
    read_timeseries,
    sample_windows,
    write_matrix_csv,
)


def upper_values(w):
    dense = w.dense()
    return dense[np.triu_indices(w.p, 1)]


class TestMatrixSpec(unittest.TestCase):
    def test_parse_families(self):
        self.assertEqual(MatrixSpec.parse("uniform", p=5).family, "uniform")
        beta = MatrixSpec.parse("beta(0.5,3)", p=5)
        self.assertEqual((beta.alpha, beta.beta), (0.5, 3.0))
        self.assertEqual(beta.label, "beta(0.5,3)")
        self.assertEqual(MatrixSpec.parse("pareto(2)", p=5).exponent, 2.0)
        factor = MatrixSpec.parse("factor(20)", p=5)
        self.assertEqual((factor.n_factors, factor.q, factor.transform), (20, 1000, "squared"))
        self.assertEqual(MatrixSpec.parse("factor(5,200)", p=5).label, "factor(5,200)")
        self.assertEqual(MatrixSpec.parse("file-matrix:data/w.csv").path, "data/w.csv")

    def test_parse_rejects(self):
        for text in ("beta(1)", "beta(-1,2)", "pareto(0)", "gamma(2)", "uniform(x)", "factor(0)"):
            with self.assertRaises(ValueError, msg=text):
                MatrixSpec.parse(text, p=5)
        with self.assertRaises(ValueError):
            MatrixSpec.parse("uniform", p=3)


class TestGenerate(unittest.TestCase):
    def test_uniform_shape(self):
        w = generate(MatrixSpec("uniform", p=4, seed=1))
        values = upper_values(w)
        self.assertEqual(len(values), 6)
        self.assertTrue(np.all((values >= 0) & (values <= 1)))
        self.assertEqual(len(set(values.tolist())), 6)
        np.testing.assert_array_equal(w.dense(), w.dense().T)
        self.assertEqual(w.metadata["rng"], RNG_ALGORITHM)

    def test_same_seed_same_matrix(self):
        for text in ("uniform", "beta(3,0.5)", "pareto(1)", "factor(5,200)"):
            first = generate(MatrixSpec.parse(text, p=12, seed=42)).dense()
            second = generate(MatrixSpec.parse(text, p=12, seed=42)).dense()
            other = generate(MatrixSpec.parse(text, p=12, seed=43)).dense()
            np.testing.assert_array_equal(first, second)
            self.assertFalse(np.array_equal(first, other))

    def test_beta_mean(self):
        values = upper_values(generate(MatrixSpec.parse("beta(0.5,3)", p=400, seed=3)))
        se = values.std() / np.sqrt(len(values))
        self.assertLess(abs(values.mean() - 1.0 / 7.0), 4 * se)

    def test_pareto_tails(self):
        for seed in range(10):
            heavy = upper_values(generate(MatrixSpec.parse("pareto(1)", p=100, seed=seed)))
            light = upper_values(generate(MatrixSpec.parse("pareto(2)", p=100, seed=seed)))
            self.assertGreater(np.percentile(heavy, 99), np.percentile(light, 99))
            self.assertGreaterEqual(light.min(), 1.0)

    def test_factor_correlations_valid(self):
        series = factor_series(50, 10, 1000, make_rng(4))
        corr = correlation_matrix(series)
        np.testing.assert_allclose(np.diag(corr), 1.0)
        self.assertTrue(np.all(np.abs(corr) <= 1.0))
        self.assertGreater(np.linalg.eigvalsh(corr).min(), -1e-8)
        self.assertEqual(series.shape, (1000, 50))

    def test_more_factors_less_structure(self):
        for seed in range(3):
            few = upper_values(generate(MatrixSpec.parse("factor(20)", p=200, seed=seed)))
            many = upper_values(generate(MatrixSpec.parse("factor(100)", p=200, seed=seed)))
            self.assertGreater(few.mean(), many.mean())

    def test_lazy_factor_matches_dense(self):
        spec = MatrixSpec.parse("factor(3,100)", p=8, seed=9)
        lazy = generate(spec, lazy=True)
        dense = generate(spec)
        self.assertTrue(lazy.is_lazy)
        np.testing.assert_array_equal(lazy.dense(), dense.dense())


class TestSeeds(unittest.TestCase):
    def test_derive_seed(self):
        self.assertEqual(derive_seed(0, 1, 2), derive_seed(0, 1, 2))
        self.assertNotEqual(derive_seed(0, 1, 2), derive_seed(0, 2, 1))
        self.assertGreaterEqual(derive_seed(7, 3), 0)

    def test_sample_windows(self):
        starts = sample_windows(500, 20, 100, seed=1)
        self.assertEqual(len(starts), 20)
        self.assertTrue(all(0 <= s <= 400 for s in starts))
        self.assertEqual(starts, sample_windows(500, 20, 100, seed=1))
        with self.assertRaises(ValueError):
            sample_windows(50, 3, 100, seed=1)


class TestReading(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    def test_plain_matrix(self):
        matrix, names = read_matrix(self._write("m.csv", "0,1,2\n1,0,3\n2,3,0\n"))
        self.assertIsNone(names)
        np.testing.assert_array_equal(matrix, [[0, 1, 2], [1, 0, 3], [2, 3, 0]])

    def test_header_row(self):
        matrix, names = read_matrix(self._write("m.csv", "a,b,c\n0,1,2\n1,0,3\n2,3,0\n"))
        self.assertEqual(names, ["a", "b", "c"])
        self.assertEqual(matrix.shape, (3, 3))

    def test_asymmetry_located(self):
        path = self._write("m.csv", "0,1,2\n1,0,3\n2,4,0\n")
        with self.assertRaises(MatrixFormatError) as ctx:
            read_matrix(path)
        self.assertEqual((ctx.exception.line, ctx.exception.column), (2, 3))
        self.assertIn("line 2", str(ctx.exception))

    def test_bad_cell_located(self):
        path = self._write("m.csv", "0,1,2\n1,0,x\n2,3,0\n")
        with self.assertRaises(MatrixFormatError) as ctx:
            read_matrix(path)
        self.assertEqual((ctx.exception.line, ctx.exception.column), (2, 3))

    def test_not_square(self):
        with self.assertRaises(MatrixFormatError):
            read_matrix(self._write("m.csv", "0,1,2\n1,0,3\n"))

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_matrix(str(self.dir / "absent.csv"))

    def test_negative_weight_located(self):
        matrix = np.array([[0.0, -1.0, 2.0], [-1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
        with self.assertRaises(MatrixFormatError) as ctx:
            matrix_oracle(matrix, "raw")
        self.assertEqual((ctx.exception.line, ctx.exception.column), (1, 2))
        self.assertEqual(matrix_oracle(matrix, "squared").weight(0, 1), 1.0)

    def test_timeseries(self):
        path = self._write("ts.csv", "x,y,z\n1,2,3\n2,1,5\n3,5,4\n")
        names, data = read_timeseries(path)
        self.assertEqual(names, ["x", "y", "z"])
        self.assertEqual(data.shape, (3, 3))
        oracle = generate(MatrixSpec.parse("file-timeseries:" + path))
        self.assertEqual(oracle.p, 3)
        self.assertEqual(oracle.transform, "squared")

    def test_timeseries_needs_header(self):
        with self.assertRaises(MatrixFormatError):
            read_timeseries(self._write("ts.csv", "1,2\n3,4\n5,7\n"))

    def test_timeseries_flat_column(self):
        with self.assertRaises(MatrixFormatError):
            read_timeseries(self._write("ts.csv", "x,y\n1,2\n1,4\n1,7\n"))

    def test_write_then_read(self):
        w = generate(MatrixSpec("pareto", p=6, seed=2, exponent=1.5))
        path = self.dir / "out" / "w.csv"
        write_matrix_csv(w.dense(), path)
        matrix, _ = read_matrix(str(path))
        np.testing.assert_array_equal(matrix, w.dense())

    def test_seventeen_digit_cells_read_exactly(self):
        matrix, _ = read_matrix(self._write("m.csv", "0,0.71518936637241948\n0.71518936637241948,0\n"))
        self.assertEqual(matrix[0, 1], float("0.71518936637241948"))
        for seed in range(10):
            w = generate(MatrixSpec("uniform", p=30, seed=seed))
            path = self.dir / f"u{seed}.csv"
            write_matrix_csv(w.dense(), path)
            reread, _ = read_matrix(str(path))
            self.assertTrue(np.array_equal(reread, w.dense()), seed)

    def test_diagonal_ignored(self):
        for diagonal in ("nan", "", "inf"):
            rows = [[diagonal if i == j else str(i + j) for j in range(4)] for i in range(4)]
            text = "\n".join(",".join(row) for row in rows) + "\n"
            matrix, names = read_matrix(self._write("diag.csv", text))
            self.assertIsNone(names, diagonal)
            np.testing.assert_array_equal(np.diag(matrix), 0.0)
            self.assertEqual(matrix[1, 3], 4.0)
        with self.assertRaises(MatrixFormatError) as ctx:
            read_matrix(self._write("off.csv", "0,nan,1\nnan,0,2\n1,2,0\n"))
        self.assertEqual((ctx.exception.line, ctx.exception.column), (1, 2))

    def test_remote_input(self):
        response = mock.Mock(status_code=200, text="0,1,1\n1,0,1\n1,1,0\n")
        with mock.patch("tmfgkit.synth.requests.get", return_value=response) as get:
            matrix, _ = read_matrix("https://example.org/w.csv")
        get.assert_called_once()
        self.assertEqual(matrix.sum(), 6.0)

    def test_remote_failure(self):
        response = mock.Mock(status_code=404, text="")
        with mock.patch("tmfgkit.synth.requests.get", return_value=response):
            with self.assertRaises(RuntimeError):
                read_matrix("https://example.org/missing.csv")


if __name__ == "__main__":
    unittest.main()
