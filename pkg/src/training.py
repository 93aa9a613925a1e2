"""
Toy training loop: one synthetic task per pair record, one policy update
per step, rollouts always drawn from the current policy.
"""

# builtins
import csv
import dataclasses
import io
import logging
import typing

# third party
import numpy as np

# modules
import src.analysis as analysis
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.grpo as grpo
import src.pairing as pairing
import src.policy as policy
import src.rollouts as rollouts
import src.utils as utils


logger: logging.Logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class TrainingResult:
    policy: policy.ToyPolicy
    rows: list


def objective_for(name: str) -> typing.Callable:
    """
    The objective function by name; vanilla takes a flat trajectory batch,
    the pair objectives take pair rollouts.
    """
    objectives: dict = {
        "vanilla": lambda pairs, toy_policy, cfg: grpo.objective_vanilla(
            [trajectory for pair in pairs for trajectory in pair.trajectories], toy_policy, cfg
        ),
        "pairwise": grpo.objective_pairwise,
        "pair-grpo": grpo.objective_pair_grpo,
    }
    if name not in objectives:
        raise exceptions.ConfigError(f"Unknown objective: {name}")
    return objectives[name]


def run_training(
    records: typing.Sequence[pairing.PairRecord], run_cfg: config.RunConfig, objective: str | None = None
) -> TrainingResult:
    """
    Train a fresh toy policy on one synthetic task per record.
    Every step samples a batch of tasks, rolls them out under the current
    policy, evaluates the objective and takes one SGD step.
    Returns the trained policy and one log row per step.
    """
    objective = objective or run_cfg.train.objective
    if objective == "vanilla" and not run_cfg.grpo.sim_weight:
        raise exceptions.ConfigError("--no-sim-weight has no effect on the vanilla objective")
    if not records:
        raise exceptions.InvalidBatch("pair dataset is empty")
    objective_fn: typing.Callable = objective_for(objective)
    grpo_cfg: config.GrpoConfig = run_cfg.grpo

    tasks: list = policy.make_task_pairs(records, run_cfg.policy, utils.make_rng(run_cfg.seed, "train.targets"))
    scorer: typing.Callable = rollouts.target_scorer(tasks, run_cfg.reward_gen)
    batch_rng: np.random.Generator = utils.make_rng(run_cfg.seed, "train.batches")
    rollout_rng: np.random.Generator = utils.make_rng(run_cfg.seed, "train.rollouts")
    toy_policy: policy.ToyPolicy = policy.ToyPolicy.uniform(
        run_cfg.policy.num_prompts, run_cfg.policy.vocab_size, seed=run_cfg.seed
    )
    batch_size: int = min(run_cfg.train.batch_pairs, len(tasks))

    rows: list = []
    for step in range(run_cfg.steps):
        chosen: np.ndarray = np.sort(batch_rng.choice(len(tasks), size=batch_size, replace=False))
        batch: list = [
            rollouts.sample_pair_rollout(toy_policy, tasks[i], grpo_cfg, run_cfg.policy, rollout_rng, scorer)
            for i in chosen
        ]
        report: grpo.ObjectiveReport = objective_fn(batch, toy_policy, grpo_cfg)
        grad_cos, _ = analysis.report_cosine(report)
        row: dict = {
            "step": step,
            "J": report.value,
            "mean_reward_und": rollouts.mean_reward(t for pair in batch for t in pair.und),
            "mean_reward_gen": rollouts.mean_reward(t for pair in batch for t in pair.gen),
            "clip_fraction": report.clip_fraction,
            "kl": report.kl,
            "grad_cos": grad_cos,
        }
        rows.append(row)
        logger.debug(
            "step %d J=%.6f und=%.3f gen=%.3f", step, row["J"], row["mean_reward_und"], row["mean_reward_gen"]
        )
        grpo.sgd_step(toy_policy, report, grpo_cfg.lr)

    logger.info("Trained %s for %d steps on %d task pairs", objective, run_cfg.steps, len(tasks))
    return TrainingResult(policy=toy_policy, rows=rows)


def combined_reward(row: dict) -> float:
    """
    Mean of the understanding and generation rewards of one log row.
    """
    return 0.5 * (row["mean_reward_und"] + row["mean_reward_gen"])


def training_log_text(rows: typing.Iterable[dict]) -> str:
    buffer: io.StringIO = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(constants.TRAIN_LOG_COLUMNS)
    for row in rows:
        writer.writerow([row["step"]] + [repr(float(row[column])) for column in constants.TRAIN_LOG_COLUMNS[1:]])
    return buffer.getvalue()


def write_training_log(rows: typing.Iterable[dict], path: str) -> None:
    """
    Write the per-step rows as CSV.
    """
    utils.atomic_write_text(path, training_log_text(rows))
