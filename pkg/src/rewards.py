"""
Scalar rewards per trajectory.

Understanding rollouts are scored by exact-match accuracy after a light
answer normalization. Generation rollouts are scored by a pluggable scorer
looked up by id in an immutable registry.
"""

# builtins
import math
import string
import types
import typing

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions


_SCORERS: dict = {}


def register_scorer(scorer_id: str) -> typing.Callable:
    """
    Class decorator adding a generation scorer to the registry at import time.
    """
    def decorator(cls: type) -> type:
        if scorer_id in _SCORERS:
            raise ValueError(f"scorer {scorer_id} registered twice")
        _SCORERS[scorer_id] = cls
        return cls
    return decorator


def normalize_answer(text: str) -> str:
    """
    Trim whitespace, casefold and strip trailing punctuation.
    """
    return text.strip().casefold().rstrip(string.punctuation + string.whitespace)


def reward_accuracy(pred: str, truth: str) -> float:
    """
    1.0 when prediction and reference agree after normalization, else 0.0.
    """
    return 1.0 if normalize_answer(pred) == normalize_answer(truth) else 0.0


@register_scorer(constants.DEFAULT_GEN_SCORER)
class TargetOverlapScorer:
    """
    Fraction of target positions the output reproduces exactly.
    Output positions beyond the target length are ignored.
    """

    def __init__(self, targets: typing.Mapping[str, typing.Sequence[int]]) -> None:
        self.targets: dict = {prompt: tuple(int(t) for t in target) for prompt, target in targets.items()}
        for prompt, target in self.targets.items():
            if not target:
                raise ValueError(f"empty target for prompt {prompt}")

    def __call__(self, prompt: str, output: typing.Sequence[int]) -> float:
        if prompt not in self.targets:
            raise ValueError(f"no target sequence for prompt {prompt}")
        target: tuple = self.targets[prompt]
        matches: int = sum(1 for produced, wanted in zip(output, target) if int(produced) == wanted)
        return matches / len(target)


SCORERS: types.MappingProxyType = types.MappingProxyType(_SCORERS)


def resolve_scorer(spec: config.RewardSpec, **kwargs: typing.Any) -> typing.Callable:
    """
    Instantiate the generation scorer named by the reward spec.
    """
    if spec.side is constants.Side.UNDERSTANDING:
        raise exceptions.UnknownScorer("the understanding side has no generation scorer")
    if spec.scorer_id not in SCORERS:
        raise exceptions.UnknownScorer(f"Unknown generation scorer: {spec.scorer_id}")
    return SCORERS[spec.scorer_id](**kwargs)


def reward_generation(prompt: str, output: typing.Sequence[int], scorer: typing.Callable) -> float:
    """
    Score one generation output with the resolved scorer.
    Raises ValueError on a non-finite score.
    """
    reward: float = float(scorer(prompt, output))
    if not math.isfinite(reward):
        raise ValueError(f"scorer returned a non-finite reward for prompt {prompt}")
    return reward
