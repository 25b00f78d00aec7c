import unittest

import attr
import numpy as np
from mnarlbm.inference import (
    FitConfig,
    VariationalState,
    elbo,
    fit,
    init_random,
    init_spectral,
    m_step,
    multi_start_fit,
    ve_step,
)
from mnarlbm.inference.exceptions import ClassCountError
from mnarlbm.inference.vem import best_candidate, closed_form_params
from mnarlbm.model import MissingnessKind, ModelParams, ObservedMatrix
from mnarlbm.simulation import make_benchmark_params, sample_lbm

QUICK = FitConfig(max_vem_iters=5, max_inner_iters=30)


def benchmark_matrix(n: int, seed: int, kind=MissingnessKind.MNAR) -> ObservedMatrix:
    return sample_lbm(make_benchmark_params(0.1, kind=kind), n, n, seed).x_observed


class TestVem(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.inference.vem` module.

    """

    test_exhaustive = False

    def assert_non_decreasing(self, trace):
        for before, after in zip(trace, trace[1:]):
            self.assertGreaterEqual(after, before - 1e-8 * abs(before))

    def test_fit(self):
        """Tests the :func:`mnarlbm.inference.fit` function."""
        # -- Testing correct results --------------------------------------------------
        x = benchmark_matrix(20, 0)
        result = fit(x, 3, 3, "nmar", QUICK)

        self.assertIs(result.kind, MissingnessKind.MNAR)
        self.assertEqual(result.fit_ref, "mnar-3x3")
        self.assertEqual(len(result.elbo_trace), 1 + 2 * result.n_iters)
        self.assertLessEqual(result.n_iters, QUICK.max_vem_iters)
        self.assertEqual(result.elbo, result.elbo_trace[-1])
        self.assertAlmostEqual(result.elbo, elbo(x, result.varstate, result.params), 6)
        self.assertFalse(result.degenerate)
        self.assert_non_decreasing(result.elbo_trace)

        again = fit(x, 3, 3, "mnar", QUICK)
        self.assertEqual(result.elbo_trace, again.elbo_trace)
        np.testing.assert_array_equal(result.params.pi, again.params.pi)

        # -- Testing ClassCountError --------------------------------------------------
        with self.assertRaises(ClassCountError):
            fit(ObservedMatrix(np.eye(4, dtype=int)), 5, 2, "mar", QUICK)

        with self.assertRaises(ClassCountError):
            fit(ObservedMatrix(np.eye(4, dtype=int)), 2, 0, "mar", QUICK)

    def test_fit_degenerate(self):
        """Tests a fit on a matrix without any observed cell."""
        x = ObservedMatrix(np.full((6, 5), -1))
        result = fit(x, 2, 2, "mar", FitConfig(max_vem_iters=3, max_inner_iters=20))
        self.assertTrue(result.degenerate)
        self.assertTrue(np.isfinite(result.elbo))

    def test_monotonicity(self):
        """Tests that no half-step decreases the criterion."""
        for seed, kind in enumerate(MissingnessKind):
            self.assert_non_decreasing(
                fit(benchmark_matrix(20, seed, kind), 3, 3, kind, QUICK).elbo_trace
            )

    @unittest.skipIf(
        not test_exhaustive, "test_monotonicity_benchmark() explicitly skipped"
    )
    def test_monotonicity_benchmark(self):
        """Tests the monotonicity of the criterion over 20 fits of 50x50 matrices."""
        for seed in range(20):
            result = fit(benchmark_matrix(50, seed), 3, 3, "mnar", FitConfig(seed=seed))
            self.assert_non_decreasing(result.elbo_trace)

    def test_ve_step(self):
        """Tests the :func:`mnarlbm.inference.ve_step` function."""
        x = benchmark_matrix(30, 1)
        params, gamma = init_random(x, 3, 3, 2, "mnar")
        before = elbo(x, gamma, params)
        cfg = FitConfig(max_inner_iters=500)
        updated = ve_step(x, params, gamma, cfg)
        after = elbo(x, updated, params)
        self.assertGreater(after, before)

        # A maximized posterior is a fixed point.
        again = elbo(x, ve_step(x, params, updated, cfg), params)
        self.assertGreaterEqual(again, after)
        self.assertLessEqual(again - after, 1e-3 * abs(after))

    def test_m_step(self):
        """Tests the :func:`mnarlbm.inference.m_step` function."""
        # -- Testing correct results --------------------------------------------------
        x = benchmark_matrix(20, 3)
        params, gamma = init_spectral(x, 3, 3, 0, "mnar")
        updated = m_step(x, gamma, params, QUICK)
        self.assertGreaterEqual(elbo(x, gamma, updated), elbo(x, gamma, params))

        # Under MCAR with hard labels, the block probabilities are block means.
        labels = np.array([0, 0, 1, 1, 1])
        cells = np.array(
            [
                [1, 0, -1, 1],
                [1, 1, 0, -1],
                [0, 1, 1, 1],
                [-1, 0, 1, 0],
                [0, 0, -1, 1],
            ]
        )
        col_labels = np.array([0, 0, 1, 1])
        x = ObservedMatrix(cells)
        gamma = VariationalState(
            tau_rows=np.eye(2)[labels], tau_cols=np.eye(2)[col_labels]
        )
        start = ModelParams(
            kind="mcar",
            alpha_rows=[0.5, 0.5],
            alpha_cols=[0.5, 0.5],
            pi=np.full((2, 2), 0.5),
            mu=0.0,
        )
        fitted = m_step(x, gamma, start, FitConfig())
        expected = np.array([[3 / 4, 1 / 2], [1 / 5, 4 / 5]])
        np.testing.assert_allclose(fitted.pi, expected, atol=1e-4)
        np.testing.assert_allclose(fitted.alpha_rows, [0.4, 0.6], atol=1e-5)
        # The propensity is the logit of the observed rate.
        self.assertAlmostEqual(fitted.mu, np.log(16 / 4), places=4)

    def test_closed_form_params(self):
        """Tests the :func:`mnarlbm.inference.vem.closed_form_params` function."""
        x = benchmark_matrix(12, 4)
        params, gamma = init_spectral(x, 2, 2, 0, "mar")
        gamma = attr.evolve(gamma, nu_a=np.linspace(-1.0, 1.0, 12))
        updated = closed_form_params(gamma, params)
        np.testing.assert_allclose(updated.alpha_rows, gamma.tau_rows.mean(axis=0))
        self.assertAlmostEqual(
            updated.var_a, float(np.mean(gamma.nu_a ** 2 + gamma.rho_a))
        )
        self.assertEqual(updated.var_b, 0.0)

    def test_mar_nesting(self):
        """Tests that an MNAR fit with null value-dependent variances reproduces the
        MAR fit."""
        x = benchmark_matrix(15, 5)
        params, gamma = init_spectral(x, 2, 2, 0, "mar")
        mar = fit(x, 2, 2, "mar", QUICK, init=(params, gamma))
        pinned = attr.evolve(params, kind=MissingnessKind.MNAR)
        mnar = fit(x, 2, 2, "mnar", QUICK, init=(pinned, gamma))

        self.assertIs(mnar.kind, MissingnessKind.MNAR)
        self.assertEqual((mnar.params.var_b, mnar.params.var_q), (0.0, 0.0))
        self.assertLessEqual(abs(mnar.elbo - mar.elbo), 1e-8 * abs(mar.elbo))

    def test_multi_start_fit(self):
        """Tests the :func:`mnarlbm.inference.multi_start_fit` function."""
        # -- Testing correct results --------------------------------------------------
        x = benchmark_matrix(20, 6)
        cfg = attr.evolve(QUICK, n_inits=3, warmup_iters=2)
        result = multi_start_fit(x, 3, 3, "mnar", cfg)
        self.assertEqual(result.fit_ref, "mnar-3x3")
        self.assertLessEqual(result.n_iters, cfg.max_vem_iters)
        self.assert_non_decreasing(result.elbo_trace)

        again = multi_start_fit(x, 3, 3, "mnar", attr.evolve(cfg, n_jobs=2))
        self.assertEqual(result.elbo_trace, again.elbo_trace)

        single = multi_start_fit(x, 3, 3, "mnar", QUICK)
        self.assertEqual(single.elbo_trace, fit(x, 3, 3, "mnar", QUICK).elbo_trace)

        self.assertEqual(best_candidate([1.0, 3.0, 3.0, 2.0]), 1)

        # -- Testing ClassCountError --------------------------------------------------
        with self.assertRaises(ClassCountError):
            multi_start_fit(x, 21, 3, "mnar", cfg)


if __name__ == "__main__":
    unittest.main()
