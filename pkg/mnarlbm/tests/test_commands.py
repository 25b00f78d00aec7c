import csv
import json
import os
import tempfile
import unittest
from unittest import mock

from mnarlbm import __main__ as cli
from mnarlbm import commands
from mnarlbm.config import ConfigError, load_defaults
from mnarlbm.parsers import load_matrix
from mnarlbm.results import FAILURE_FILE
from mnarlbm.simulation import risk


def linear_risk(epsilon, *args):
    return 1.6 * epsilon


class TestCommands(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.commands` module.

    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def out(self, name: str) -> str:
        return os.path.join(self.tmp.name, name)

    def config(self, output: str, **overrides) -> dict:
        config = load_defaults()
        config.update(
            output_dir=self.out(output),
            max_vem_iters=3,
            max_inner_iters=20,
            warmup_iters=1,
            deterministic=True,
        )
        config.update(overrides)

        return config

    def load_json(self, output: str, name: str) -> dict:
        with open(os.path.join(self.out(output), name)) as f:
            return json.load(f)

    def simulate(self, **overrides) -> int:
        return commands.cmd_simulate(
            self.config("sim", rows=12, cols=10, epsilon=0.1, **overrides)
        )

    def fit(self, output: str = "fit", **overrides) -> int:
        input_path = os.path.join(self.out("sim"), "matrix.csv")
        config = self.config(output, input=input_path, nq=3, nl=3)
        config.update(overrides)

        return commands.cmd_fit(config)

    def test_parse_mnar(self):
        """Tests the :func:`mnarlbm.commands.parse_mnar` function."""
        self.assertEqual(commands.parse_mnar("1,1,1,1,1"), (1.0,) * 5)
        self.assertEqual(
            commands.parse_mnar([0.5, 1, 2, 1, 2]), (0.5, 1.0, 2.0, 1.0, 2.0)
        )
        self.assertEqual(commands.parse_floats(3), (3.0,))

        with self.assertRaises(ConfigError):
            commands.parse_mnar("1,1,1")

        with self.assertRaises(ConfigError):
            commands.parse_floats("1,x")

    def test_simulate(self):
        """Tests the :func:`mnarlbm.commands.cmd_simulate` function."""
        # -- Testing correct results --------------------------------------------------
        self.assertEqual(self.simulate(), 0)

        for name in ("matrix.csv", "complete.csv", "mask.csv", "truth.json"):
            self.assertTrue(os.path.isfile(os.path.join(self.out("sim"), name)))

        x = load_matrix(os.path.join(self.out("sim"), "matrix.csv"))
        self.assertEqual(x.shape, (12, 10))
        truth = self.load_json("sim", "truth.json")
        self.assertEqual(truth["epsilon"], 0.1)
        self.assertEqual(truth["manifest"]["config"]["mnar"], [1.0] * 5)
        self.assertAlmostEqual(truth["missing_rate"], x.missing_rate())

        # -- Testing calibrated difficulty --------------------------------------------
        with mock.patch.object(risk, "median_risk", side_effect=linear_risk):
            self.assertEqual(self.simulate(target_risk=0.2), 0)

        epsilon = self.load_json("sim", "truth.json")["epsilon"]
        self.assertLessEqual(abs(1.6 * epsilon - 0.2), 0.005)

    def test_fit(self):
        """Tests the :func:`mnarlbm.commands.cmd_fit` function."""
        # -- Testing correct results --------------------------------------------------
        self.simulate()
        self.assertEqual(self.fit("first"), 0)
        self.assertEqual(self.fit("second"), 0)

        with open(os.path.join(self.out("first"), "fit.json"), "rb") as f:
            first = f.read()

        with open(os.path.join(self.out("second"), "fit.json"), "rb") as f:
            self.assertEqual(f.read(), first)

        document = json.loads(first)
        self.assertEqual(
            (document["kind"], document["nq"], document["nl"]), ("mnar", 3, 3)
        )
        self.assertTrue(document["manifest"]["input_digest"].startswith("sha256:"))
        self.assertEqual(document["manifest"]["timings"], {})
        self.assertIsNotNone(document["icl"])

        # -- Testing failures ---------------------------------------------------------
        self.assertEqual(self.fit("failed", nq=13), 1)
        failure = self.load_json("failed", FAILURE_FILE)
        self.assertEqual(failure["error_type"], "ClassCountError")
        self.assertEqual(failure["partial_files"], [])

        self.assertEqual(self.fit("missing", input=self.out("nowhere.csv")), 1)
        self.assertEqual(
            self.load_json("missing", FAILURE_FILE)["error_type"], "FileNotFoundError"
        )

        # A successful run clears the marker of the failed one.
        self.assertEqual(self.fit("failed"), 0)
        self.assertFalse(os.path.exists(os.path.join(self.out("failed"), FAILURE_FILE)))

    def test_select(self):
        """Tests the :func:`mnarlbm.commands.cmd_select` function."""
        self.simulate()
        config = self.config(
            "select",
            input=os.path.join(self.out("sim"), "matrix.csv"),
            nq_range="1-2",
            nl_range="2",
            kinds="mar",
        )
        self.assertEqual(commands.cmd_select(config), 0)

        selection = self.load_json("select", "selection.json")
        self.assertEqual(len(selection["table"]), 2)
        self.assertEqual(selection["manifest"]["config"]["nq_range"], [1, 2])
        best = self.load_json("select", "best-fit.json")
        self.assertEqual(
            f"{best['kind']}-{best['nq']}x{best['nl']}", selection["best"]["fit_ref"]
        )

        with open(os.path.join(self.out("select"), "selection.csv")) as f:
            rows = list(csv.reader(f))

        self.assertEqual(
            rows[0], ["nq", "nl", "kind", "icl", "elbo", "fit_ref", "status"]
        )
        self.assertEqual(len(rows), 3)

    def test_eval(self):
        """Tests the :func:`mnarlbm.commands.cmd_eval` function."""
        self.simulate()
        self.fit()
        config = self.config(
            "eval",
            fit=os.path.join(self.out("fit"), "fit.json"),
            truth=os.path.join(self.out("sim"), "truth.json"),
        )
        self.assertEqual(commands.cmd_eval(config), 0)

        document = self.load_json("eval", "eval.json")
        metrics = document["metrics"]
        self.assertEqual(document["fit_ref"], "mnar-3x3")
        self.assertTrue(0.0 <= metrics["l_item"] <= 1.0)
        self.assertIsNotNone(metrics["pi_max_error"])
        self.assertIsNotNone(metrics["mse_q"])
        self.assertEqual(sorted(document["row_perm"]), [0, 1, 2])

        # Fewer classes than the truth leave the block probabilities unaligned.
        self.fit("small", nq=2, nl=2, kind="mar")
        config["fit"] = os.path.join(self.out("small"), "fit.json")
        config["output_dir"] = self.out("eval-small")
        self.assertEqual(commands.cmd_eval(config), 0)
        metrics = self.load_json("eval-small", "eval.json")["metrics"]
        self.assertIsNone(metrics["pi_max_error"])
        self.assertIsNone(metrics["mse_b"])

        # -- Testing failure ----------------------------------------------------------
        commands.cmd_simulate(self.config("other", rows=5, cols=5, epsilon=0.1))
        config["truth"] = os.path.join(self.out("other"), "truth.json")
        config["output_dir"] = self.out("eval-failed")
        self.assertEqual(commands.cmd_eval(config), 1)
        failure = self.load_json("eval-failed", FAILURE_FILE)
        self.assertEqual(failure["error_type"], "ConfigError")
        self.assertIn("12x10", failure["message"])
        self.assertIn("5x5", failure["message"])
        self.assertFalse(
            os.path.exists(os.path.join(self.out("eval-failed"), "eval.json"))
        )

    def test_report(self):
        """Tests the :func:`mnarlbm.commands.cmd_report` function."""
        # -- Testing correct results --------------------------------------------------
        self.simulate()
        self.fit()
        fit_path = os.path.join(self.out("fit"), "fit.json")
        input_path = os.path.join(self.out("sim"), "matrix.csv")
        config = self.config("report", fit=fit_path, input=input_path)
        self.assertEqual(commands.cmd_report(config), 0)

        with open(os.path.join(self.out("report"), "row-order.csv")) as f:
            rows = list(csv.reader(f))

        self.assertEqual(rows[0], ["position", "index", "id", "class"])
        self.assertEqual(len(rows), 13)
        classes = [int(r[3]) for r in rows[1:]]
        self.assertEqual(classes, sorted(classes))

        with open(os.path.join(self.out("report"), "blocks.csv")) as f:
            blocks = list(csv.reader(f))

        self.assertEqual(
            blocks[0], ["row_class", "col_class_0", "col_class_1", "col_class_2"]
        )
        self.assertEqual(len(blocks), 4)

        with open(os.path.join(self.out("report"), "col-propensities.csv")) as f:
            self.assertEqual(
                next(csv.reader(f)), ["index", "id", "class", "nu_p", "nu_q"]
            )

        report = self.load_json("report", "report.json")
        fit = self.load_json("fit", "fit.json")
        self.assertEqual(report["manifest"]["command"], "report")
        self.assertEqual(report["manifest"]["seed"], config["seed"])
        self.assertEqual(
            report["manifest"]["input_digest"], fit["manifest"]["input_digest"]
        )
        self.assertEqual(report["fit_ref"], fit["fit_ref"])
        self.assertEqual(report["pi"], fit["params"]["pi"])
        self.assertEqual(len(report["files"]), 5)

        # -- Testing failure ----------------------------------------------------------
        commands.cmd_simulate(self.config("other", rows=5, cols=5, epsilon=0.1))
        config["input"] = os.path.join(self.out("other"), "matrix.csv")
        config["output_dir"] = self.out("report-failed")
        self.assertEqual(commands.cmd_report(config), 1)
        self.assertEqual(
            self.load_json("report-failed", FAILURE_FILE)["error_type"], "ConfigError"
        )

    def test_risk(self):
        """Tests the :func:`mnarlbm.commands.cmd_risk` function."""
        # -- Testing estimate mode ----------------------------------------------------
        self.simulate()
        config = self.config(
            "risk",
            input=os.path.join(self.out("sim"), "matrix.csv"),
            truth=os.path.join(self.out("sim"), "truth.json"),
        )
        self.assertEqual(commands.cmd_risk(config), 0)
        document = self.load_json("risk", "risk.json")
        self.assertEqual(
            (document["mode"], document["method"]), ("estimate", "variational")
        )
        self.assertTrue(0.0 <= document["risk"] <= 1.0)

        # -- Testing calibrate mode ---------------------------------------------------
        config = self.config("calibrate", rows=20, cols=20, target_risk=0.2)

        with mock.patch.object(
            risk, "median_risk", side_effect=linear_risk
        ), mock.patch.object(commands, "median_risk", side_effect=linear_risk):
            self.assertEqual(commands.cmd_risk(config), 0)

        document = self.load_json("calibrate", "risk.json")
        self.assertEqual(document["mode"], "calibrate")
        self.assertLessEqual(abs(document["risk"] - 0.2), 0.005)
        self.assertAlmostEqual(document["risk"], 1.6 * document["epsilon"])

        # -- Testing failure ----------------------------------------------------------
        config = self.config("no-input")
        self.assertEqual(commands.cmd_risk(config), 1)
        self.assertEqual(
            self.load_json("no-input", FAILURE_FILE)["error_type"], "ConfigError"
        )

    def test_experiment(self):
        """Tests the :func:`mnarlbm.commands.cmd_experiment` function."""
        config = self.config(
            "experiment", experiment="recovery", sizes="6,8", replicates=1
        )
        self.assertEqual(commands.cmd_experiment(config), 0)
        document = self.load_json("experiment", "recovery.json")
        self.assertEqual(document["experiment"], "recovery")
        self.assertEqual([r["size"] for r in document["records"]], [6, 8])
        self.assertTrue(
            os.path.isfile(os.path.join(self.out("experiment"), "recovery.csv"))
        )

        config["experiment"] = "unknown"
        config["output_dir"] = self.out("unknown")
        self.assertEqual(commands.cmd_experiment(config), 1)


class TestCli(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.__main__` module.

    """

    @mock.patch.dict(os.environ, {}, clear=True)
    @mock.patch.object(cli, "config_logger", autospec=True)
    @mock.patch.object(commands, "cmd_fit", autospec=True, return_value=0)
    def test_parse_cli(self, mock_fit, mock_logger):
        """Tests the :func:`mnarlbm.__main__.parse_cli` function."""
        # -- Testing correct result ---------------------------------------------------
        with self.assertRaises(SystemExit) as cm:
            cli.parse_cli(
                ["fit", "-o", "out", "-i", "x.csv", "--nq", "2", "--kind", "nmar"]
            )

        self.assertEqual(cm.exception.code, 0)
        config = mock_fit.call_args[0][0]
        self.assertEqual((config["nq"], config["nl"]), (2, 3))
        self.assertEqual((config["input"], config["kind"]), ("x.csv", "nmar"))
        self.assertEqual(config["seed"], 0)
        self.assertFalse(config["deterministic"])
        mock_logger.assert_called_once_with("INFO")

        with mock.patch.dict(os.environ, {"SEED": "9"}):
            with self.assertRaises(SystemExit):
                cli.parse_cli(["fit", "-o", "out", "-i", "x.csv", "--seed", "4"])

        self.assertEqual(mock_fit.call_args[0][0]["seed"], 4)

        # -- Testing errors -----------------------------------------------------------
        with self.assertRaises(SystemExit) as cm:
            cli.parse_cli([])

        self.assertEqual(cm.exception.code, 2)

        with self.assertRaises(SystemExit) as cm:
            cli.parse_cli(["fit", "-o", "out", "-i", "x.csv", "-c", "missing.yaml"])

        self.assertEqual(cm.exception.code, 1)


if __name__ == "__main__":
    unittest.main()
