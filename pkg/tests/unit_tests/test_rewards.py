# builtins
import unittest

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.rewards as rewards


class TestRewardAccuracy(unittest.TestCase):

    def test_examples(self) -> None:
        self.assertEqual(rewards.reward_accuracy("Paris", "paris"), 1.0)
        self.assertEqual(rewards.reward_accuracy(" 42. ", "42"), 1.0)
        self.assertEqual(rewards.reward_accuracy("Lyon", "Paris"), 0.0)
        self.assertEqual(rewards.reward_accuracy("", "x"), 0.0)
        self.assertEqual(rewards.reward_accuracy("  b.", "B"), 1.0)

    def test_symmetric(self) -> None:
        answers: list = ["Paris", "paris!", " 42. ", "42", "Lyon", "", "  b.", "B", "a b", "a  b", "?"]
        for pred in answers:
            for truth in answers:
                self.assertEqual(
                    rewards.reward_accuracy(pred, truth), rewards.reward_accuracy(truth, pred), msg=(pred, truth)
                )


class TestGenerationScorer(unittest.TestCase):

    def setUp(self) -> None:
        self.scorer = rewards.resolve_scorer(config.RewardSpec(), targets={"p/gen": [1, 2, 3]})

    def test_overlap(self) -> None:
        self.assertEqual(rewards.reward_generation("p/gen", [1, 0, 3], self.scorer), 2.0 / 3.0)
        self.assertEqual(rewards.reward_generation("p/gen", [1, 2, 3, 9], self.scorer), 1.0)
        self.assertEqual(rewards.reward_generation("p/gen", [], self.scorer), 0.0)

    def test_unknown_prompt(self) -> None:
        with self.assertRaises(ValueError):
            rewards.reward_generation("q/gen", [1], self.scorer)

    def test_non_finite_reward(self) -> None:
        with self.assertRaises(ValueError):
            rewards.reward_generation("p/gen", [1], lambda prompt, output: float("nan"))

    def test_registry(self) -> None:
        self.assertIn(constants.DEFAULT_GEN_SCORER, rewards.SCORERS)
        with self.assertRaises(TypeError):
            rewards.SCORERS["other"] = object
        with self.assertRaises(exceptions.UnknownScorer):
            rewards.resolve_scorer(config.RewardSpec(scorer_id="clip-score"), targets={})
        with self.assertRaises(exceptions.UnknownScorer):
            rewards.resolve_scorer(config.RewardSpec(side=constants.Side.UNDERSTANDING, scorer_id="accuracy"))


if __name__ == "__main__":
    unittest.main()
