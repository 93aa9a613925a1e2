"""
Group relative policy optimization over the toy policy.

Three objectives share one evaluator:

    vanilla    mixed batch, groups keyed by (prompt, side)
    pairwise   per-pair rollout groups for each side
    pair-grpo  pairwise with advantages scaled by the pair weight

All of them average the clipped surrogate (minus beta times the k3 KL
estimate) over the total token count of the batch, and return the exact
gradient with respect to the policy logits, split by task side.
"""

# builtins
import dataclasses
import logging
import math
import typing

# third party
import numpy as np

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.policy as policy


logger: logging.Logger = logging.getLogger(__name__)

SIDES: tuple = (constants.Side.UNDERSTANDING, constants.Side.GENERATION)


@dataclasses.dataclass(frozen=True)
class Trajectory:
    prompt_id: str
    side: constants.Side
    tokens: np.ndarray
    old_logps: np.ndarray
    reward: float
    prompt_row: int = 0
    pair_id: str | None = None

    def __post_init__(self) -> None:
        tokens: np.ndarray = np.asarray(self.tokens, dtype=np.int64).reshape(-1)
        old_logps: np.ndarray = np.asarray(self.old_logps, dtype=np.float64).reshape(-1)
        if tokens.size < 1:
            raise exceptions.InvalidTrajectory(f"trajectory for {self.prompt_id} has no tokens")
        if tokens.size != old_logps.size:
            raise exceptions.InvalidTrajectory(
                f"trajectory for {self.prompt_id} has {tokens.size} tokens but {old_logps.size} log-probs"
            )
        if not np.all(np.isfinite(old_logps)):
            raise exceptions.InvalidTrajectory(f"trajectory for {self.prompt_id} has non-finite log-probs")
        if not math.isfinite(self.reward):
            raise exceptions.InvalidTrajectory(f"trajectory for {self.prompt_id} has a non-finite reward")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "old_logps", old_logps)

    @property
    def length(self) -> int:
        return int(self.tokens.size)


@dataclasses.dataclass(frozen=True)
class Group:
    key: tuple
    members: tuple
    mean: float
    std: float
    advantages: np.ndarray


@dataclasses.dataclass(frozen=True)
class PairRollout:
    """
    Rollouts of one UG pair: K_u understanding and K_g generation trajectories.
    """
    pair_id: str
    kind: constants.PairKind
    similarity: float
    und: tuple
    gen: tuple

    @property
    def weight(self) -> float:
        return pair_weight(self.kind, self.similarity)

    @property
    def trajectories(self) -> tuple:
        return tuple(self.und) + tuple(self.gen)


@dataclasses.dataclass(frozen=True)
class ObjectiveReport:
    value: float
    grad: np.ndarray
    per_side_grad: dict
    per_side_value: dict
    clip_fraction: float
    kl: float
    num_tokens: int


def pair_weight(kind: constants.PairKind, similarity: float) -> float:
    """
    1 for aligned (same instance) pairs, sqrt(s) for retrieved pairs.
    Random and unpaired records of the pairing ablation are unweighted.
    """
    if not 0.0 <= similarity <= 1.0:
        raise ValueError(f"similarity {similarity} outside [0, 1]")
    if kind is constants.PairKind.RETRIEVED:
        return math.sqrt(similarity)
    return 1.0


def normalize_group(rewards: np.ndarray, sigma_min: float = constants.DEFAULT_SIGMA_MIN) -> tuple:
    """
    (mean, population std, advantages); advantages are all zero when the
    std is below sigma_min.
    """
    mean: float = float(rewards.mean())
    std: float = float(rewards.std())
    if std < sigma_min:
        return mean, std, np.zeros_like(rewards)
    return mean, std, (rewards - mean) / std


def group_trajectories(
    batch: typing.Sequence[Trajectory], sigma_min: float = constants.DEFAULT_SIGMA_MIN
) -> list[Group]:
    """
    Partition by (prompt_id, side) in order of first appearance and
    normalize rewards within each group.
    """
    if not batch:
        raise exceptions.InvalidBatch("cannot group an empty batch")
    partition: dict = {}
    for trajectory in batch:
        partition.setdefault((trajectory.prompt_id, trajectory.side), []).append(trajectory)
    groups: list = []
    for key, members in partition.items():
        rewards: np.ndarray = np.asarray([member.reward for member in members], dtype=np.float64)
        mean, std, advantages = normalize_group(rewards, sigma_min)
        groups.append(Group(key=key, members=tuple(members), mean=mean, std=std, advantages=advantages))
    return groups


def importance_ratio(new_logp: typing.Any, old_logp: typing.Any) -> typing.Any:
    """
    exp(new - old) with the exponent clamped to [-20, 20].
    """
    exponent: typing.Any = np.clip(
        np.subtract(new_logp, old_logp), -constants.RATIO_EXPONENT_CLAMP, constants.RATIO_EXPONENT_CLAMP
    )
    ratio: typing.Any = np.exp(exponent)
    return float(ratio) if np.ndim(ratio) == 0 else ratio


def clipped_surrogate(rho: typing.Any, adv: typing.Any, eps: float) -> typing.Any:
    """
    min(rho * adv, clip(rho, 1 - eps, 1 + eps) * adv).
    """
    value: typing.Any = np.minimum(np.multiply(rho, adv), np.clip(rho, 1.0 - eps, 1.0 + eps) * adv)
    return float(value) if np.ndim(value) == 0 else value


def kl_penalty(new_logps: typing.Any, old_logps: typing.Any) -> float:
    """
    Token mean of the k3 estimator exp(d) - d - 1 with d = old - new.
    """
    new: np.ndarray = np.asarray(new_logps, dtype=np.float64).reshape(-1)
    old: np.ndarray = np.asarray(old_logps, dtype=np.float64).reshape(-1)
    if new.size != old.size:
        raise ValueError(f"kl_penalty needs equal lengths, got {new.size} and {old.size}")
    if new.size == 0:
        return 0.0
    delta: np.ndarray = old - new
    return max(0.0, float(np.mean(np.expm1(delta) - delta)))


def _evaluate(
    entries: list, toy_policy: policy.ToyPolicy, cfg: config.GrpoConfig
) -> ObjectiveReport:
    """
    entries: (trajectory, effective advantage) pairs. The advantage is
    broadcast to every token of its trajectory.
    """
    if not entries:
        raise exceptions.InvalidBatch("objective needs at least one trajectory")
    log_table: np.ndarray = toy_policy.log_softmax()
    prob_table: np.ndarray = np.exp(log_table)
    num_tokens: int = sum(trajectory.length for trajectory, _ in entries)
    side_grad: dict = {side: np.zeros_like(toy_policy.logits) for side in SIDES}
    side_value: dict = {side: 0.0 for side in SIDES}
    clipped_tokens: int = 0
    kl_total: float = 0.0
    eps: float = cfg.clip_eps

    for trajectory, advantage in entries:
        row: int = trajectory.prompt_row
        tokens: np.ndarray = trajectory.tokens
        if not 0 <= row < toy_policy.num_prompts:
            raise exceptions.PolicyMismatch(f"prompt row {row} of {trajectory.prompt_id} is outside the policy")
        if tokens.min() < 0 or tokens.max() >= toy_policy.vocab_size:
            raise exceptions.PolicyMismatch(f"trajectory {trajectory.prompt_id} has tokens outside the vocabulary")

        new_logps: np.ndarray = log_table[row, tokens]
        log_ratio: np.ndarray = new_logps - trajectory.old_logps
        rho: np.ndarray = importance_ratio(new_logps, trajectory.old_logps) * np.ones_like(new_logps)
        unclipped: np.ndarray = rho * advantage
        clipped: np.ndarray = np.clip(rho, 1.0 - eps, 1.0 + eps) * advantage
        surrogate: np.ndarray = np.minimum(unclipped, clipped)
        # the ratio carries gradient only on the unclipped branch and inside the exponent clamp
        live: np.ndarray = (unclipped <= clipped) & (np.abs(log_ratio) < constants.RATIO_EXPONENT_CLAMP)
        delta: np.ndarray = trajectory.old_logps - new_logps
        k3: np.ndarray = np.expm1(delta) - delta
        coeff: np.ndarray = np.where(live, advantage * rho, 0.0) + cfg.beta * np.expm1(delta)

        side_value[trajectory.side] += float(surrogate.sum() - cfg.beta * k3.sum())
        clipped_tokens += int(np.count_nonzero(clipped < unclipped))
        kl_total += float(k3.sum())

        grad_row: np.ndarray = side_grad[trajectory.side][row]
        np.add.at(grad_row, tokens, coeff)
        grad_row -= coeff.sum() * prob_table[row]

    scale: float = 1.0 / num_tokens
    per_side_grad: dict = {side: grad * scale for side, grad in side_grad.items()}
    per_side_value: dict = {side: value * scale for side, value in side_value.items()}
    return ObjectiveReport(
        value=sum(per_side_value.values()),
        grad=per_side_grad[constants.Side.UNDERSTANDING] + per_side_grad[constants.Side.GENERATION],
        per_side_grad=per_side_grad,
        per_side_value=per_side_value,
        clip_fraction=clipped_tokens / num_tokens,
        kl=max(0.0, kl_total / num_tokens),
        num_tokens=num_tokens,
    )


def _group_entries(groups: list, weights: dict | None = None) -> list:
    entries: list = []
    for group in groups:
        for member, advantage in zip(group.members, group.advantages):
            weight: float = 1.0 if weights is None else weights[id(member)]
            entries.append((member, weight * float(advantage)))
    return entries


def objective_vanilla(
    batch: typing.Sequence[Trajectory], toy_policy: policy.ToyPolicy, cfg: config.GrpoConfig
) -> ObjectiveReport:
    """
    Vanilla GRPO over a mixed batch of understanding and generation trajectories.
    """
    return _evaluate(_group_entries(group_trajectories(batch, cfg.sigma_min)), toy_policy, cfg)


def _check_pair(pair: PairRollout, cfg: config.GrpoConfig) -> None:
    for side, trajectories, expected in (
        (constants.Side.UNDERSTANDING, pair.und, cfg.k_und),
        (constants.Side.GENERATION, pair.gen, cfg.k_gen),
    ):
        if len(trajectories) != expected:
            raise exceptions.InvalidBatch(
                f"pair {pair.pair_id} supplies {len(trajectories)} {side.value} trajectories, expected {expected}"
            )
        if len({trajectory.prompt_id for trajectory in trajectories}) != 1:
            raise exceptions.InvalidBatch(f"{side.value} trajectories of pair {pair.pair_id} mix prompts")
        if any(trajectory.side is not side for trajectory in trajectories):
            raise exceptions.InvalidBatch(f"pair {pair.pair_id} has a trajectory on the wrong side")


def _pair_entries(pairs: typing.Sequence[PairRollout], cfg: config.GrpoConfig, weighted: bool) -> list:
    if not pairs:
        raise exceptions.InvalidBatch("objective needs at least one pair")
    weights: dict = {}
    for pair in pairs:
        _check_pair(pair, cfg)
        weight: float = pair.weight if weighted and cfg.sim_weight else 1.0
        for trajectory in pair.trajectories:
            weights[id(trajectory)] = weight
    entries: list = []
    if cfg.group_scope == "batch":
        # one group per side across the whole batch
        for side_of in (lambda pair: pair.und, lambda pair: pair.gen):
            members: list = [trajectory for pair in pairs for trajectory in side_of(pair)]
            rewards: np.ndarray = np.asarray([member.reward for member in members], dtype=np.float64)
            _, _, advantages = normalize_group(rewards, cfg.sigma_min)
            entries.extend(
                (member, weights[id(member)] * float(advantage)) for member, advantage in zip(members, advantages)
            )
        return entries
    for pair in pairs:
        groups: list = group_trajectories(pair.und, cfg.sigma_min) + group_trajectories(pair.gen, cfg.sigma_min)
        entries.extend(_group_entries(groups, weights))
    return entries


def objective_pairwise(
    pairs: typing.Sequence[PairRollout], toy_policy: policy.ToyPolicy, cfg: config.GrpoConfig
) -> ObjectiveReport:
    """
    Pairwise GRPO: per-side advantages normalized within each pair's
    rollout groups, every pair weighted 1.
    """
    return _evaluate(_pair_entries(pairs, cfg, weighted=False), toy_policy, cfg)


def objective_pair_grpo(
    pairs: typing.Sequence[PairRollout], toy_policy: policy.ToyPolicy, cfg: config.GrpoConfig
) -> ObjectiveReport:
    """
    Pair-GRPO: pairwise GRPO with both sides' advantages multiplied by the
    pair weight. With cfg.sim_weight off every weight is forced to 1.
    """
    return _evaluate(_pair_entries(pairs, cfg, weighted=True), toy_policy, cfg)


def sgd_step(toy_policy: policy.ToyPolicy, report: ObjectiveReport, lr: float) -> policy.ToyPolicy:
    """
    Gradient ascent on J, in place: theta <- theta + lr * grad.
    """
    if report.grad.shape != toy_policy.logits.shape:
        raise exceptions.ShapeMismatch(f"gradient {report.grad.shape} does not match policy {toy_policy.logits.shape}")
    if not np.all(np.isfinite(report.grad)):
        raise exceptions.NonFiniteGradient("gradient has non-finite entries")
    toy_policy.logits += lr * report.grad
    return toy_policy
