"""
Rollout sampling for synthetic task pairs.
"""

# builtins
import logging
import typing

# third party
import numpy as np

# modules
import src.config as config
import src.constants as constants
import src.grpo as grpo
import src.policy as policy
import src.rewards as rewards


logger: logging.Logger = logging.getLogger(__name__)


def understanding_reward(task: policy.SyntheticTaskPair, tokens: np.ndarray) -> float:
    """
    Exact-match accuracy of the final token against the answer token.
    """
    return rewards.reward_accuracy(str(int(tokens[-1])), str(task.answer_token))


def sample_side(
    toy_policy: policy.ToyPolicy,
    prompt_id: str,
    side: constants.Side,
    prompt_row: int,
    length: int,
    count: int,
    rng: np.random.Generator,
    reward_fn: typing.Callable[[np.ndarray], float],
    pair_id: str | None = None,
) -> tuple:
    """
    Draw `count` trajectories of one side from the same prompt row and
    score each with `reward_fn`.
    """
    trajectories: list = []
    for _ in range(count):
        sample: policy.Sample = toy_policy.sample_trajectory(prompt_row, length, rng)
        trajectories.append(
            grpo.Trajectory(
                prompt_id=prompt_id,
                side=side,
                tokens=sample.tokens,
                old_logps=sample.logps,
                reward=reward_fn(sample.tokens),
                prompt_row=prompt_row,
                pair_id=pair_id,
            )
        )
    return tuple(trajectories)


def sample_pair_rollout(
    toy_policy: policy.ToyPolicy,
    task: policy.SyntheticTaskPair,
    grpo_cfg: config.GrpoConfig,
    policy_cfg: config.PolicyConfig,
    rng: np.random.Generator,
    scorer: typing.Callable,
    sides: typing.Collection[constants.Side] = grpo.SIDES,
) -> grpo.PairRollout:
    """
    K_u understanding and K_g generation rollouts of one task pair,
    drawn from the current policy. A side left out of `sides` gets no
    rollouts.
    """
    und: tuple = ()
    gen: tuple = ()
    if constants.Side.UNDERSTANDING in sides:
        und = sample_side(
            toy_policy,
            task.und_prompt_id,
            constants.Side.UNDERSTANDING,
            task.prompt_u,
            policy_cfg.und_length,
            grpo_cfg.k_und,
            rng,
            lambda tokens: understanding_reward(task, tokens),
            task.pair_id,
        )
    if constants.Side.GENERATION in sides:
        gen = sample_side(
            toy_policy,
            task.gen_prompt_id,
            constants.Side.GENERATION,
            task.prompt_g,
            policy_cfg.gen_length,
            grpo_cfg.k_gen,
            rng,
            lambda tokens: rewards.reward_generation(task.gen_prompt_id, tokens, scorer),
            task.pair_id,
        )
    return grpo.PairRollout(
        pair_id=task.pair_id, kind=task.kind, similarity=task.similarity, und=und, gen=gen
    )


def target_scorer(tasks: typing.Iterable[policy.SyntheticTaskPair], spec: config.RewardSpec) -> typing.Callable:
    """
    Generation scorer keyed by each task's generation prompt id.
    """
    return rewards.resolve_scorer(spec, targets={task.gen_prompt_id: task.target_seq for task in tasks})


def mean_reward(trajectories: typing.Iterable[grpo.Trajectory]) -> float:
    values: list = [trajectory.reward for trajectory in trajectories]
    return float(np.mean(values)) if values else 0.0
