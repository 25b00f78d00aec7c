import itertools
import unittest
from unittest import mock

import numpy as np
from mnarlbm.model import MissingnessKind, ModelParams, ObservedMatrix
from mnarlbm.model.exceptions import DomainError
from mnarlbm.simulation import (
    DEFAULT_MNAR,
    BenchmarkConfig,
    RiskConfig,
    calibrate_epsilon,
    conditional_bayes_risk,
    estimate_risk,
    exact_posterior_marginals,
    make_benchmark_params,
    sample_lbm,
    shrink_sample,
)
from mnarlbm.simulation import risk
from mnarlbm.simulation.exceptions import CalibrationError, EnumerationError


def brute_force_risk(x: ObservedMatrix, params: ModelParams) -> float:
    """Conditional Bayes risk by explicit enumeration of the label configurations,
    for a mask that does not depend on the labels."""
    ones, zeros, _ = x.indicators()
    n1, n2 = x.shape
    tau_rows = np.zeros((n1, params.nq))
    tau_cols = np.zeros((n2, params.nl))
    total = 0.0

    for rows in itertools.product(range(params.nq), repeat=n1):
        for cols in itertools.product(range(params.nl), repeat=n2):
            weight = np.prod(params.alpha_rows[list(rows)]) * np.prod(
                params.alpha_cols[list(cols)]
            )

            for i, j in itertools.product(range(n1), range(n2)):
                pi_ql = params.pi[rows[i], cols[j]]
                weight *= pi_ql ** ones[i, j] * (1.0 - pi_ql) ** zeros[i, j]

            total += weight
            tau_rows[np.arange(n1), rows] += weight
            tau_cols[np.arange(n2), cols] += weight

    row_risk = 1.0 - np.mean(np.max(tau_rows / total, axis=1))
    col_risk = 1.0 - np.mean(np.max(tau_cols / total, axis=1))

    return row_risk + col_risk - row_risk * col_risk


def two_class_params(kind=MissingnessKind.MCAR) -> ModelParams:
    return ModelParams(
        kind=MissingnessKind.MAR,
        alpha_rows=[0.4, 0.6],
        alpha_cols=[0.7, 0.3],
        pi=[[0.8, 0.3], [0.1, 0.6]],
        mu=0.2,
        var_a=1.0,
        var_p=0.5,
    ).with_kind(kind)


class TestSampler(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.simulation.sampler` module.

    """

    def test_make_benchmark_params(self):
        """Tests the :func:`mnarlbm.simulation.make_benchmark_params` function."""
        # -- Testing correct results --------------------------------------------------
        params = make_benchmark_params(0.1)
        self.assertIs(params.kind, MissingnessKind.MNAR)
        np.testing.assert_allclose(
            params.pi, [[0.1, 0.1, 0.9], [0.1, 0.9, 0.9], [0.9, 0.9, 0.1]]
        )
        np.testing.assert_allclose(params.alpha_rows, np.full(3, 1 / 3))
        self.assertEqual(
            (params.mu, params.var_a, params.var_b, params.var_p, params.var_q),
            DEFAULT_MNAR,
        )

        mcar = make_benchmark_params(0.2, kind="mcar")
        self.assertEqual((mcar.var_a, mcar.var_b, mcar.var_p, mcar.var_q), (0, 0, 0, 0))
        self.assertEqual(mcar.mu, 1.0)

        config = BenchmarkConfig(epsilon=0.3, n_rows=10, n_cols=12)
        self.assertAlmostEqual(config.params().pi[0, 2], 0.7)

        # -- Testing DomainError ------------------------------------------------------
        for epsilon in (0.0, 0.5, 0.7, -0.1):
            with self.assertRaises(DomainError):
                make_benchmark_params(epsilon)

        with self.assertRaises(DomainError):
            make_benchmark_params(0.1, mnar=(1.0, 1.0))

        with self.assertRaises(DomainError):
            BenchmarkConfig(epsilon=0.5, n_rows=10, n_cols=10)

    def test_sample_lbm(self):
        """Tests the :func:`mnarlbm.simulation.sample_lbm` function."""
        # -- Testing correct results --------------------------------------------------
        params = make_benchmark_params(0.1)
        first = sample_lbm(params, 30, 20, seed=4)
        second = sample_lbm(params, 30, 20, seed=4)
        other = sample_lbm(params, 30, 20, seed=5)

        self.assertEqual(first.x_observed.shape, (30, 20))
        self.assertTrue(first.x_observed.equals(second.x_observed))
        np.testing.assert_array_equal(first.row_labels, second.row_labels)
        np.testing.assert_array_equal(first.q, second.q)
        self.assertFalse(first.x_observed.equals(other.x_observed))

        observed = first.mask == 1
        np.testing.assert_array_equal(
            first.x_observed.cells[observed], first.x_complete[observed]
        )
        self.assertTrue(np.all(first.x_observed.cells[~observed] == -1))

        mcar = sample_lbm(params.with_kind("mcar"), 30, 20, seed=4)

        for block in ("a", "b", "p", "q"):
            self.assertTrue(np.all(mcar.latent(block) == 0.0))

        mar = sample_lbm(params.with_kind("mar"), 30, 20, seed=4)
        self.assertTrue(np.all(mar.b == 0.0))
        self.assertTrue(np.any(mar.a != 0.0))

        # -- Testing DomainError ------------------------------------------------------
        with self.assertRaises(DomainError):
            sample_lbm(params, 0, 5, seed=0)

    def test_missing_rate(self):
        """Tests that the default propensity parameters hide about 35% of the
        cells."""
        params = make_benchmark_params(0.1)
        rates = [
            sample_lbm(params, 200, 200, seed).x_observed.missing_rate()
            for seed in range(10)
        ]
        self.assertAlmostEqual(float(np.mean(rates)), 0.35, delta=0.03)

    def test_shrink_sample(self):
        """Tests the :func:`mnarlbm.simulation.shrink_sample` function."""
        # -- Testing correct result ---------------------------------------------------
        full = sample_lbm(make_benchmark_params(0.2), 12, 10, seed=1)
        small = shrink_sample(full, 5, 4)
        self.assertEqual(small.x_observed.shape, (5, 4))
        np.testing.assert_array_equal(
            small.x_observed.cells, full.x_observed.cells[:5, :4]
        )
        np.testing.assert_array_equal(small.col_labels, full.col_labels[:4])
        np.testing.assert_array_equal(small.b, full.b[:5])

        # -- Testing DomainError ------------------------------------------------------
        with self.assertRaises(DomainError):
            shrink_sample(full, 13, 4)

        with self.assertRaises(DomainError):
            shrink_sample(full, 5, 0)


class TestRisk(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.simulation.risk` module.

    """

    def test_exact_risk(self):
        """Tests the exact conditional Bayes risk against a brute-force enumeration."""
        # -- Testing correct results --------------------------------------------------
        params = two_class_params()
        exact = RiskConfig(risk_method="exact")

        for seed in range(10):
            x = sample_lbm(params, 3, 3, seed).x_observed
            self.assertAlmostEqual(
                conditional_bayes_risk(x, params, exact), brute_force_risk(x, params), 6
            )

        # Missing cells carry no label information under MAR.
        mar = two_class_params(MissingnessKind.MAR)
        x = ObservedMatrix([[1, -1, 0], [-1, 0, 1], [1, 1, -1]])
        estimate = estimate_risk(x, mar, RiskConfig(risk_method="auto"))
        self.assertEqual(estimate.method, "exact")
        self.assertTrue(estimate.converged)
        self.assertAlmostEqual(estimate.risk, brute_force_risk(x, mar), places=6)

        tau_rows, tau_cols = exact_posterior_marginals(x, mar)
        np.testing.assert_allclose(tau_rows.sum(axis=1), np.ones(3))
        np.testing.assert_allclose(tau_cols.sum(axis=1), np.ones(3))

        # -- Testing EnumerationError -------------------------------------------------
        mnar = make_benchmark_params(0.1)
        x = sample_lbm(mnar, 4, 4, seed=0).x_observed

        with self.assertRaises(EnumerationError):
            estimate_risk(x, mnar, RiskConfig(risk_method="exact"))

        big = sample_lbm(mnar.with_kind("mcar"), 30, 30, seed=0).x_observed

        with self.assertRaises(EnumerationError):
            exact_posterior_marginals(big, mnar.with_kind("mcar"))

    def test_variational_risk(self):
        """Tests the variational estimate of the conditional Bayes risk."""
        params = make_benchmark_params(0.25)
        sample = sample_lbm(params, 30, 30, seed=2)
        estimate = estimate_risk(
            sample.x_observed,
            params,
            labels=(sample.row_labels, sample.col_labels),
        )
        self.assertEqual(estimate.method, "variational")
        self.assertTrue(0.0 <= estimate.risk <= 1.0)
        row, col = estimate.row_risk, estimate.col_risk
        self.assertAlmostEqual(estimate.risk, row + col - row * col)
        self.assertEqual(
            set(estimate.to_dict()),
            {"risk", "row_risk", "col_risk", "method", "converged"},
        )

        # An easier configuration has a lower risk.
        easy = make_benchmark_params(0.02)
        easy_sample = sample_lbm(easy, 30, 30, seed=2)
        easy_estimate = estimate_risk(
            easy_sample.x_observed,
            easy,
            labels=(easy_sample.row_labels, easy_sample.col_labels),
        )
        self.assertLess(easy_estimate.risk, estimate.risk)

    def test_all_missing_risk(self):
        """Tests that a fully Missing matrix leaves the labels at their prior."""
        x = ObservedMatrix(np.full((12, 12), -1))

        for kind in ("mar", "mnar"):
            params = make_benchmark_params(0.1).with_kind(kind)
            estimate = estimate_risk(x, params, RiskConfig())
            self.assertAlmostEqual(estimate.risk, 8.0 / 9.0, places=12)
            self.assertAlmostEqual(estimate.row_risk, 2.0 / 3.0, places=12)
            self.assertAlmostEqual(estimate.col_risk, 2.0 / 3.0, places=12)
            self.assertTrue(estimate.converged)

    def test_calibrate_epsilon(self):
        """Tests the :func:`mnarlbm.simulation.calibrate_epsilon` function."""
        # -- Testing correct result ---------------------------------------------------
        with mock.patch.object(
            risk, "median_risk", side_effect=lambda epsilon, *args: 1.6 * epsilon
        ) as median:
            epsilon = calibrate_epsilon(0.3, 20, 20, seed=7)
            self.assertLessEqual(abs(1.6 * epsilon - 0.3), 0.005)
            self.assertEqual(median.call_args[0][1:5], (20, 20, DEFAULT_MNAR, 7))

        # -- Testing CalibrationError -------------------------------------------------
        for target in (0.0, 0.95):
            with self.assertRaises(CalibrationError):
                calibrate_epsilon(target, 20, 20)

        with mock.patch.object(risk, "median_risk", return_value=0.5):
            with self.assertRaises(CalibrationError) as cm:
                calibrate_epsilon(0.2, 20, 20)

            self.assertEqual(cm.exception.risk_low, 0.5)


if __name__ == "__main__":
    unittest.main()
