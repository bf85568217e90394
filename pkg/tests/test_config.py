"""Unit tests for configuration loading."""

import os
import sys
import tempfile
import unittest

import yaml

# Add the src directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "../src")))

from grca.config import apply_overrides, config_to_dict, load_config, parse_config
from grca.errors import ConfigError
from grca.models import MixingClass, RunMode, SignMode, UnmixMethod


class TestConfig(unittest.TestCase):
    """Test cases for the YAML configuration layer."""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.temp_dir.cleanup()

    def write(self, content, name="config.yaml"):
        path = os.path.join(self.temp_dir.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(content)
        return path

    def test_full_config(self):
        path = self.write(
            """
version: "1"
mode: unmix
paths:
  truth: scene_dir
  output: estimates_dir
scene:
  preset: scenario2
  n_row: 12
  snr_db: 30
chain:
  n_mc: 50
  n_bi: 20
  sign_mode: unconstrained
  seed: 4
unmix:
  method: GRCA+
  eta: 1.0
  eta_sweep: [1, 2, 3]
evaluate:
  thresholds:
    rnmse_max: 0.05
    p_d_min: 0.7
"""
        )
        config = load_config(path)
        self.assertEqual(config.mode, RunMode.UNMIX)
        self.assertEqual(config.paths.truth, "scene_dir")
        self.assertEqual(config.paths.estimates, "estimates")
        self.assertEqual(config.scene.n_row, 12)
        self.assertEqual(len(config.scene.class_models), 6)
        self.assertIsNone(config.scene.sigma2)
        self.assertEqual(config.scene.snr_db, 30)
        self.assertEqual((config.chain.n_mc, config.chain.n_bi), (50, 20))
        self.assertIs(config.chain.sign_mode, SignMode.UNCONSTRAINED)
        self.assertIs(config.unmix.method, UnmixMethod.GRCA_PLUS)
        self.assertEqual(config.unmix.eta_sweep, [1.0, 2.0, 3.0])
        self.assertEqual(config.evaluate.rnmse_max, 0.05)
        self.assertIsNone(config.evaluate.re_max)

    def test_defaults(self):
        config = load_config(self.write("{}"))
        self.assertEqual(config.chain.n_mc, 800)
        self.assertEqual(config.chain.n_bi, 600)
        self.assertEqual(config.unmix.eta, 2.0)
        self.assertEqual(config.scene.class_models, list(MixingClass))

    def test_explicit_class_models(self):
        config = parse_config({"scene": {"class_models": ["lmm_sto", "PPNM"]}})
        self.assertEqual(config.scene.class_models, [MixingClass.LMM_STO, MixingClass.PPNM])

    def test_errors(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.temp_dir.name, "missing.yaml"))
        with self.assertRaises(ConfigError):
            load_config(self.write("chain: [unclosed"))
        bad_sections = [
            {"chain": {"n_mc": 10, "n_bi": 20}},
            {"chain": {"burn": 3}},
            {"scene": {"preset": "nowhere"}},
            {"scene": {"class_models": ["quadratic"]}},
            {"unmix": {"method": "svm"}},
            {"unmix": {"eta": -1}},
            {"evaluate": {"thresholds": {"speed": 1}}},
            {"paths": {"input": "x"}},
            {"mode": "train"},
            {"chain": "fast"},
        ]
        for data in bad_sections:
            with self.assertRaises(ConfigError, msg=str(data)):
                parse_config(data)

    def test_overrides(self):
        config = parse_config({"chain": {"n_mc": 10, "n_bi": 5}})
        overridden = apply_overrides(config, seed=11, out="elsewhere")
        self.assertEqual(overridden.scene.seed, 11)
        self.assertEqual(overridden.chain.seed, 11)
        self.assertEqual(overridden.paths.output, "elsewhere")
        self.assertEqual(overridden.chain.n_mc, 10)
        self.assertEqual(config.chain.seed, 0)
        with self.assertRaises(ConfigError):
            apply_overrides(config, seed=-1)

    def test_dict_round_trip(self):
        config = parse_config(
            {
                "scene": {"preset": "scenario1", "snr_db": 25},
                "chain": {"n_mc": 30, "n_bi": 10, "noise_prior_shape": 2.0},
                "unmix": {"method": "fcls"},
            }
        )
        data = config_to_dict(config)
        self.assertEqual(yaml.safe_load(yaml.safe_dump(data)), data)
        self.assertEqual(config_to_dict(parse_config(data)), data)

    def test_manifest_is_a_valid_config(self):
        data = config_to_dict(parse_config({"chain": {"n_mc": 30, "n_bi": 10}}))
        manifest = {"config_sha256": "abc", "seed": 0, "wall_time": 1.0, "config": data}
        path = self.write(yaml.safe_dump(manifest), "manifest.yaml")
        self.assertEqual(load_config(path).chain.n_mc, 30)


if __name__ == "__main__":
    unittest.main()
