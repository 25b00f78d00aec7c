import unittest

import attr
import numpy as np
from mnarlbm import experiments
from mnarlbm.inference import FitConfig
from mnarlbm.simulation import calibrate_epsilon

QUICK = FitConfig(max_vem_iters=3, max_inner_iters=20, warmup_iters=1)


def medians(records, key, by="size"):
    levels = sorted({r[by] for r in records})

    return [float(np.median([r[key] for r in records if r[by] == v])) for v in levels]


class TestExperiments(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.experiments` module.

    """

    test_exhaustive = False

    def test_size_sweep(self):
        """Tests the :func:`mnarlbm.experiments.size_sweep` function."""
        records = experiments.size_sweep([8, 6], 0.1, 2, QUICK)
        self.assertEqual(
            [(r["replicate"], r["size"]) for r in records],
            [(0, 6), (0, 8), (1, 6), (1, 8)],
        )

        for record in records:
            self.assertTrue(0.0 <= record["risk"] <= 1.0)
            self.assertTrue(0.0 <= record["l_item"] <= 1.0)

        parallel = experiments.size_sweep([8, 6], 0.1, 2, attr.evolve(QUICK, n_jobs=2))
        self.assertEqual(parallel, records)

    def test_nmar_effect_sweep(self):
        """Tests the :func:`mnarlbm.experiments.nmar_effect_sweep` function."""
        records = experiments.nmar_effect_sweep([0.01, 1.0], 0.1, 8, 1, QUICK)
        self.assertEqual([r["effect"] for r in records], [0.01, 1.0])

        for record in records:
            self.assertAlmostEqual(
                record["icl_difference"], record["icl_mnar"] - record["icl_mar"]
            )
            self.assertTrue(0.0 <= record["missing_rate"] <= 1.0)

    def test_recovery_sweep(self):
        """Tests the :func:`mnarlbm.experiments.recovery_sweep` function."""
        records = experiments.recovery_sweep([6, 8], 0.1, 1, QUICK, kind="mcar")
        self.assertEqual([r["size"] for r in records], [6, 8])

        for record in records:
            self.assertEqual(record["kind"], "mcar")
            self.assertIsNone(record["mse_a"])
            self.assertTrue(0.0 <= record["pi_max_error"] <= 1.0)

        record = experiments.recovery_sweep([6], 0.1, 1, QUICK)[0]
        self.assertIsNotNone(record["mse_q"])

    def test_class_count_selection(self):
        """Tests the :func:`mnarlbm.experiments.class_count_selection` function."""
        records = experiments.class_count_selection(
            8, 0.1, 1, "2-3", 3, QUICK, ("mar",)
        )
        self.assertEqual(len(records), 1)
        record = records[0]
        self.assertIn(record["nq"], (2, 3))
        self.assertEqual(record["nl"], 3)
        self.assertEqual(record["correct"], record["nq"] == 3)
        self.assertEqual(record["n_failed"], 0)

    @unittest.skipIf(
        not test_exhaustive, "test_classification_recovery() explicitly skipped"
    )
    def test_classification_recovery(self):
        """Tests that the item loss on 100x100 matrices approaches the risk, and that
        it decreases with the size."""
        epsilon = calibrate_epsilon(0.12, 100, 100)
        records = experiments.size_sweep(
            [60, 100, 140], epsilon, 10, FitConfig(n_inits=10)
        )
        losses = medians(records, "l_item")
        risks = medians(records, "risk")
        self.assertLessEqual(losses[1], risks[1] + 0.08)
        self.assertGreaterEqual(losses[0], losses[1])
        self.assertGreaterEqual(losses[1], losses[2])

    @unittest.skipIf(
        not test_exhaustive, "test_mar_degradation() explicitly skipped"
    )
    def test_mar_degradation(self):
        """Tests that MAR fits degrade against MNAR fits under strong value-dependent
        effects."""
        epsilon = calibrate_epsilon(0.12, 100, 100)
        records = experiments.nmar_effect_sweep(
            [3.2], epsilon, 100, 10, FitConfig(n_inits=5)
        )
        self.assertGreaterEqual(
            medians(records, "l_item_mar", "effect")[0]
            - medians(records, "l_item_mnar", "effect")[0],
            0.2,
        )

    @unittest.skipIf(
        not test_exhaustive, "test_icl_class_count() explicitly skipped"
    )
    def test_icl_class_count(self):
        """Tests that the ICL finds three row and three column classes."""
        epsilon = calibrate_epsilon(0.05, 100, 100)
        records = experiments.class_count_selection(
            100, epsilon, 10, "2-5", "2-5", FitConfig(n_inits=5)
        )
        self.assertGreaterEqual(sum(r["correct"] for r in records), 7)

    @unittest.skipIf(
        not test_exhaustive, "test_icl_missingness() explicitly skipped"
    )
    def test_icl_missingness(self):
        """Tests that the ICL prefers MNAR once the value-dependent effects are
        noticeable."""
        epsilon = calibrate_epsilon(0.12, 100, 100)
        records = experiments.nmar_effect_sweep(
            [0.4, 1.0, 2.0], epsilon, 100, 10, FitConfig(n_inits=5)
        )

        for effect in (0.4, 1.0, 2.0):
            wins = [r["icl_difference"] > 0 for r in records if r["effect"] == effect]
            self.assertGreaterEqual(sum(wins), 7)

    @unittest.skipIf(
        not test_exhaustive, "test_recovery_trend() explicitly skipped"
    )
    def test_recovery_trend(self):
        """Tests that the recovery errors decrease with the size."""
        records = experiments.recovery_sweep([100, 200, 400], 0.1, 10, FitConfig())

        for key in ("pi_max_error", "mse_a", "mse_b", "mse_p", "mse_q"):
            errors = medians(records, key)
            self.assertGreaterEqual(errors[0], errors[1])
            self.assertGreaterEqual(errors[1], errors[2])


if __name__ == "__main__":
    unittest.main()
