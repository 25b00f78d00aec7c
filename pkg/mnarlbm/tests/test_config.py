import os
import tempfile
import unittest
from unittest import mock

from mnarlbm import config
from mnarlbm.config import ConfigError, build_config, load_defaults


class TestConfig(unittest.TestCase):
    """Test class for the :mod:`mnarlbm.config` module.

    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, content: str) -> str:
        path = os.path.join(self.tmp.name, "config.yaml")

        with open(path, "w") as f:
            f.write(content)

        return path

    def test_load_defaults(self):
        """Tests the :func:`mnarlbm.config.load_defaults` function."""
        defaults = load_defaults()
        self.assertEqual(defaults["seed"], 0)
        self.assertEqual(defaults["kind"], "mnar")
        self.assertEqual(defaults["mnar"], "1,1,1,1,1")
        self.assertIsNone(defaults["target_risk"])
        self.assertFalse(any(isinstance(v, dict) for v in defaults.values()))

    @mock.patch.dict(os.environ, {}, clear=True)
    def test_build_config(self):
        """Tests the :func:`mnarlbm.config.build_config` function."""
        # -- Testing correct results --------------------------------------------------
        self.assertEqual(build_config(), load_defaults())

        path = self.write("seed: 5\nnq: 4\n")
        cfg = build_config(path, {"nq": None, "nl": 2})
        self.assertEqual((cfg["seed"], cfg["nq"], cfg["nl"]), (5, 4, 2))

        # The environment overrides the files and the command line overrides both.
        with mock.patch.dict(os.environ, {"SEED": "11", "THREADS": "3"}):
            cfg = build_config(path)
            self.assertEqual((cfg["seed"], cfg["n_jobs"]), (11, 3))
            self.assertEqual(build_config(path, {"seed": 2})["seed"], 2)

        self.assertEqual(build_config(self.write(""))["seed"], 0)

        # -- Testing ConfigError ------------------------------------------------------
        for content in ("unknown_key: 1\n", "seed:\n  nested: 1\n", "- 1\n- 2\n"):
            with self.assertRaises(ConfigError):
                build_config(self.write(content))

        with self.assertRaises(ConfigError):
            build_config(self.write("seed: [1,\n"))

        with self.assertRaises(ConfigError):
            build_config(os.path.join(self.tmp.name, "missing.yaml"))

        with mock.patch.dict(os.environ, {"SEED": "abc"}):
            with self.assertRaises(ConfigError) as cm:
                build_config()

            self.assertIn("SEED", str(cm.exception))

    def test_default_config_path(self):
        """Tests that the defaults ship with the package."""
        self.assertTrue(os.path.isfile(config.DEFAULT_CONFIG_PATH))


if __name__ == "__main__":
    unittest.main()
