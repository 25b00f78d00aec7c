import itertools
import math
import unittest

import numpy as np
from mnarlbm.inference import VariationalState
from mnarlbm.metrics import (
    ItemLoss,
    LabelAssignment,
    align_labels,
    expected_random_loss,
    l_item,
    latent_mse,
    map_assignments,
    param_max_error,
    random_allocation_loss,
    relabel,
)
from mnarlbm.metrics.classification import assignment_from_sample
from mnarlbm.model import ModelParams
from mnarlbm.model.exceptions import ContractError, DimensionMismatchError
from mnarlbm.simulation import make_benchmark_params, sample_lbm


def brute_force_errors(truth: np.ndarray, pred: np.ndarray, n_classes: int) -> int:
    return min(
        int(np.count_nonzero(np.asarray(perm)[pred] != truth))
        for perm in itertools.permutations(range(n_classes))
    )


class TestClassification(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.metrics.classification` module.

    """

    def test_l_item(self):
        """Tests the :func:`mnarlbm.metrics.l_item` function."""
        # -- Testing correct results --------------------------------------------------
        truth = LabelAssignment([0, 0, 1, 1], [0, 1, 2])
        self.assertEqual(l_item(truth, truth, 2, 3), ItemLoss(0.0, 0.0, 0.0))

        swapped = LabelAssignment([1, 1, 0, 0], [2, 0, 1])
        self.assertEqual(float(l_item(truth, swapped, 2, 3)), 0.0)
        self.assertEqual(l_item(truth, swapped, 2, 3, align=False).value, 1.0)

        pred = LabelAssignment([0, 0, 1, 0], [0, 1, 2])
        loss = l_item(truth, pred, 2, 3)
        self.assertEqual((loss.row, loss.col), (0.25, 0.0))
        self.assertEqual(loss.value, 0.25)

        pred = LabelAssignment([0, 0, 1, 0], [0, 1, 1])
        loss = l_item(truth, pred, 2, 3)
        self.assertAlmostEqual(loss.value, 0.25 + 1 / 3 - 0.25 / 3)

        # -- Testing DimensionMismatchError -------------------------------------------
        with self.assertRaises(DimensionMismatchError):
            l_item(truth, LabelAssignment([0, 1], [0, 1, 2]), 2, 3)

        # -- Testing ContractError ----------------------------------------------------
        with self.assertRaises(ContractError):
            LabelAssignment([0, -1], [0])

    def test_align_labels(self):
        """Tests the alignment against an enumeration of the permutations."""
        rng = np.random.default_rng(0)

        for _ in range(20):
            truth = LabelAssignment(rng.integers(4, size=15), rng.integers(3, size=12))
            pred = LabelAssignment(rng.integers(4, size=15), rng.integers(3, size=12))
            loss = l_item(truth, pred, 4, 3)
            self.assertAlmostEqual(
                loss.row, brute_force_errors(truth.row_labels, pred.row_labels, 4) / 15
            )
            self.assertAlmostEqual(
                loss.col, brute_force_errors(truth.col_labels, pred.col_labels, 3) / 12
            )

        truth = LabelAssignment([0, 1, 2, 2], [0, 1])
        perm = np.array([2, 0, 1])
        pred = relabel(truth, perm, [1, 0])
        row_perm, col_perm = align_labels(truth, pred, 3, 2)
        np.testing.assert_array_equal(row_perm, np.argsort(perm))
        np.testing.assert_array_equal(col_perm, [1, 0])
        aligned = relabel(pred, row_perm, col_perm)
        np.testing.assert_array_equal(aligned.row_labels, truth.row_labels)

    def test_expected_random_loss(self):
        """Tests the loss of uniformly random labels."""
        self.assertAlmostEqual(expected_random_loss(3, 3), 8 / 9)
        self.assertEqual(expected_random_loss(1, 1), 0.0)
        self.assertAlmostEqual(
            random_allocation_loss(100, 100, 3, 3, 200, seed=1), 8 / 9, delta=0.02
        )

    def test_random_allocation_loss(self):
        """Tests the random allocation loss over ten thousand draws."""
        self.assertAlmostEqual(
            random_allocation_loss(100, 100, 3, 3, 10_000, seed=0), 8 / 9, delta=0.01
        )

    def test_map_assignments(self):
        """Tests the :func:`mnarlbm.metrics.map_assignments` function."""
        gamma = VariationalState(
            tau_rows=[[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]],
            tau_cols=[[0.1, 0.3, 0.6], [0.4, 0.4, 0.2]],
        )
        assignment = map_assignments(gamma)
        np.testing.assert_array_equal(assignment.row_labels, [1, 0, 0])
        np.testing.assert_array_equal(assignment.col_labels, [2, 0])


class TestRecovery(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.metrics.recovery` module.

    """

    def test_param_max_error(self):
        """Tests the :func:`mnarlbm.metrics.param_max_error` function."""
        # -- Testing correct results --------------------------------------------------
        truth = make_benchmark_params(0.1)
        row_perm, col_perm = np.array([1, 2, 0]), np.array([2, 0, 1])
        fitted = truth.permuted(row_perm, col_perm)
        self.assertGreater(param_max_error(truth, fitted, range(3), range(3)), 0.5)

        # The alignment of the labels undoes the relabeling of the parameters.
        sample = sample_lbm(truth, 30, 30, seed=0)
        labels = assignment_from_sample(sample)
        aligned_perms = align_labels(labels, relabel(labels, row_perm, col_perm), 3, 3)
        self.assertEqual(param_max_error(truth, fitted, *aligned_perms), 0.0)

        # -- Testing DimensionMismatchError -------------------------------------------
        two_classes = ModelParams(
            kind="mcar",
            alpha_rows=[0.5, 0.5],
            alpha_cols=[0.5, 0.5],
            pi=[[0.2, 0.8], [0.8, 0.2]],
            mu=0.0,
        )

        with self.assertRaises(DimensionMismatchError):
            param_max_error(truth, two_classes, [0, 1], [0, 1])

    def test_latent_mse(self):
        """Tests the :func:`mnarlbm.metrics.latent_mse` function."""
        # -- Testing correct results --------------------------------------------------
        sample = sample_lbm(make_benchmark_params(0.1), 4, 3, seed=2)
        tau_rows, tau_cols = np.full((4, 3), 1 / 3), np.full((3, 3), 1 / 3)
        gamma = VariationalState(
            tau_rows=tau_rows,
            tau_cols=tau_cols,
            nu_a=sample.a + 1.0,
            rho_a=np.ones(4),
            nu_p=sample.p,
            rho_p=np.ones(3),
        )
        mse_a, mse_b, mse_p, mse_q = latent_mse(sample, gamma)
        self.assertAlmostEqual(mse_a, 1.0)
        self.assertTrue(math.isnan(mse_b))
        self.assertEqual(mse_p, 0.0)
        self.assertTrue(math.isnan(mse_q))

        # -- Testing DimensionMismatchError -------------------------------------------
        with self.assertRaises(DimensionMismatchError):
            latent_mse(
                sample, VariationalState(tau_rows=tau_rows[:2], tau_cols=tau_cols)
            )


if __name__ == "__main__":
    unittest.main()
