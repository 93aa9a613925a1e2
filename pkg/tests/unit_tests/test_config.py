# builtins
import logging
import os
import tempfile
import unittest

# third party
import numpy as np

# modules
import src.config as config
import src.exceptions as exceptions
import src.utils as utils


class TestLoadConfig(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def write(self, text: str, name: str = "run.yaml") -> str:
        path: str = os.path.join(self.tmp.name, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def test_defaults(self) -> None:
        cfg: config.RunConfig = config.load_config()
        self.assertEqual(cfg, config.RunConfig())
        self.assertEqual(cfg.pairing.delta, 0.6)
        self.assertEqual(cfg.grpo.clip_eps, 0.2)
        self.assertEqual(cfg.grpo.beta, 0.0)
        self.assertTrue(cfg.grpo.sim_weight)
        self.assertEqual(cfg.reward_und.scorer_id, "accuracy")

    def test_flat_and_nested_agree(self) -> None:
        flat: str = self.write("seed: 7\npairing.delta: 0.7\ngrpo.k_und: 6\n", "flat.yaml")
        nested: str = self.write("seed: 7\npairing:\n  delta: 0.7\ngrpo:\n  k_und: 6\n", "nested.yaml")
        self.assertEqual(config.load_config(flat), config.load_config(nested))
        self.assertEqual(config.load_config(flat).grpo.k_und, 6)

    def test_override_precedence(self) -> None:
        path: str = self.write("pairing.delta: 0.7\nsteps: 10\n")
        cfg: config.RunConfig = config.load_config(path, {"pairing.delta": 0.8, "steps": None})
        self.assertEqual(cfg.pairing.delta, 0.8)
        self.assertEqual(cfg.steps, 10)

    def test_integers_accepted_for_floats(self) -> None:
        cfg: config.RunConfig = config.load_config(overrides={"pairing.delta": 1})
        self.assertIsInstance(cfg.pairing.delta, float)

    def test_rejected_values(self) -> None:
        for overrides in (
            {"pairing.deltas": 0.5},
            {"clustering.seed": 3},
            {"reward.und.side": "gen"},
            {"grpo.clip_eps": 1.5},
            {"grpo.beta": -0.1},
            {"steps": "ten"},
            {"seed": True},
            {"grpo.sim_weight": "yes"},
            {"train.objective": "ppo"},
            {"agreement.regimes": ["aligned_pairs", "mixed"]},
            {"reward.und.scorer_id": "clip-score"},
        ):
            with self.assertRaises(exceptions.ConfigError, msg=str(overrides)):
                config.load_config(overrides=overrides)

    def test_bad_files(self) -> None:
        with self.assertRaises(exceptions.ConfigError):
            config.load_config(self.write("- 1\n- 2\n"))
        with self.assertRaises(exceptions.ConfigError):
            config.load_config(self.write("seed: [1,\n"))
        with self.assertRaises(FileNotFoundError):
            config.load_config(os.path.join(self.tmp.name, "absent.yaml"))
        self.assertEqual(config.load_config(self.write("")), config.RunConfig())

    def test_dump_is_loadable(self) -> None:
        cfg: config.RunConfig = config.load_config(
            overrides={"seed": 3, "pairing.k": 5, "grpo.sim_weight": False, "agreement.regimes": ["unpaired"]}
        )
        path: str = self.write(config.dump_config(cfg))
        self.assertEqual(config.load_config(path), cfg)

    def test_derived_sections(self) -> None:
        cfg: config.RunConfig = config.load_config(overrides={"seed": 5, "pairing.k": 4})
        clustering_cfg: config.ClusteringConfig = cfg.clustering_config()
        self.assertEqual(clustering_cfg.k, 4)
        self.assertEqual(clustering_cfg.seed, utils.derive_seed(5, "clustering"))
        self.assertEqual(cfg.pairing_config().seed, 5)
        self.assertNotIn("pairing.seed", cfg.to_flat())
        self.assertNotIn("clustering.k", cfg.to_flat())


class TestResolveK(unittest.TestCase):

    def test_default_fraction(self) -> None:
        self.assertEqual(config.ClusteringConfig().resolve_k(41), 3)
        self.assertEqual(config.ClusteringConfig().resolve_k(20), 1)
        self.assertEqual(config.ClusteringConfig().resolve_k(1), 1)

    def test_explicit(self) -> None:
        self.assertEqual(config.ClusteringConfig(k=7).resolve_k(1000), 7)


class TestSeeds(unittest.TestCase):

    def test_derive_seed(self) -> None:
        self.assertEqual(utils.derive_seed(0, "clustering"), utils.derive_seed(0, "clustering"))
        self.assertNotEqual(utils.derive_seed(0, "clustering"), utils.derive_seed(0, "pairing.random"))
        self.assertNotEqual(utils.derive_seed(0, "clustering"), utils.derive_seed(1, "clustering"))
        self.assertTrue(0 <= utils.derive_seed(123, "train.rollouts") < 2 ** 64)

    def test_named_streams(self) -> None:
        first: np.ndarray = utils.make_rng(9, "train.batches").random(5)
        np.testing.assert_array_equal(first, utils.make_rng(9, "train.batches").random(5))
        self.assertFalse(np.array_equal(first, utils.make_rng(9, "train.rollouts").random(5)))


class TestLogging(unittest.TestCase):

    def tearDown(self) -> None:
        utils.configure_logging("warning")

    def test_single_handler(self) -> None:
        before: int = len(logging.getLogger().handlers)
        utils.configure_logging("debug")
        utils.configure_logging("info")
        self.assertLessEqual(len(logging.getLogger().handlers), before + 1)
        self.assertEqual(logging.getLogger().level, logging.INFO)

    def test_unknown_level(self) -> None:
        with self.assertRaises(exceptions.ConfigError):
            utils.configure_logging("chatty")


if __name__ == "__main__":
    unittest.main()
