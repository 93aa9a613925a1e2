"""
Gradient agreement diagnostics and reward curve aggregation.

The agreement study trains a fresh toy policy per data regime and records,
at every step, the cosine between the understanding and generation parts
of the objective gradient. Regimes:

    aligned_pairs       U and G share a row, the target repeats the answer
    retrieved_pairs     shared row, target agrees with probability s in [delta, 1]
    random_pairs        shared row, target drawn independently of the answer
    unpaired            U and G on disjoint rows, vanilla objective
    understanding_only  U rollouts only
    generation_only     G rollouts only
"""

# builtins
import csv
import dataclasses
import io
import logging
import math
import typing

# third party
import numpy as np

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.grpo as grpo
import src.policy as policy
import src.rollouts as rollouts
import src.utils as utils


logger: logging.Logger = logging.getLogger(__name__)

REGIME_KINDS: dict = {
    constants.Regime.ALIGNED_PAIRS: constants.PairKind.ALIGNED,
    constants.Regime.RETRIEVED_PAIRS: constants.PairKind.RETRIEVED,
    constants.Regime.RANDOM_PAIRS: constants.PairKind.RANDOM,
    constants.Regime.UNPAIRED: constants.PairKind.UNPAIRED,
    constants.Regime.UNDERSTANDING_ONLY: constants.PairKind.ALIGNED,
    constants.Regime.GENERATION_ONLY: constants.PairKind.ALIGNED,
}
ONE_SIDED: dict = {
    constants.Regime.UNDERSTANDING_ONLY: (constants.Side.UNDERSTANDING,),
    constants.Regime.GENERATION_ONLY: (constants.Side.GENERATION,),
}


@dataclasses.dataclass(frozen=True)
class AgreementRecord:
    regime: constants.Regime
    step: int
    grad_cos: float
    degenerate: bool = False
    pair_id: str | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.grad_cos):
            raise ValueError(f"grad_cos must be finite, got {self.grad_cos}")


@dataclasses.dataclass(frozen=True)
class AgreementResult:
    records: list
    summary: dict


def gradient_cosine(gu: np.ndarray, gg: np.ndarray) -> tuple[float, bool]:
    """
    Cosine between two gradients, clamped to [-1, 1].
    Returns (0.0, True) when either norm is below 1e-12.
    """
    gu = np.asarray(gu, dtype=np.float64)
    gg = np.asarray(gg, dtype=np.float64)
    if gu.shape != gg.shape:
        raise exceptions.ShapeMismatch(f"gradient shapes differ: {gu.shape} vs {gg.shape}")
    norm_u: float = float(np.linalg.norm(gu))
    norm_g: float = float(np.linalg.norm(gg))
    if norm_u < constants.DEGENERATE_NORM or norm_g < constants.DEGENERATE_NORM:
        return 0.0, True
    cosine: float = float(np.vdot(gu, gg)) / (norm_u * norm_g)
    return min(1.0, max(-1.0, cosine)), False


def report_cosine(report: grpo.ObjectiveReport) -> tuple[float, bool]:
    return gradient_cosine(
        report.per_side_grad[constants.Side.UNDERSTANDING], report.per_side_grad[constants.Side.GENERATION]
    )


def make_regime_tasks(
    regime: constants.Regime, num_pairs: int, delta: float, cfg: config.PolicyConfig, rng: np.random.Generator
) -> list[policy.SyntheticTaskPair]:
    """
    Synthetic task family of one regime. Every regime but unpaired puts
    both sides of pair j on row j mod P; unpaired uses rows 2j and 2j+1.
    """
    kind: constants.PairKind = REGIME_KINDS[regime]
    if regime is constants.Regime.UNPAIRED and 2 * num_pairs > cfg.num_prompts:
        raise exceptions.ConfigError(
            f"unpaired regime needs 2 * agreement.num_pairs <= policy.num_prompts ({cfg.num_prompts})"
        )
    tasks: list = []
    for j in range(num_pairs):
        if regime is constants.Regime.UNPAIRED:
            prompt_u, prompt_g = 2 * j, 2 * j + 1
        else:
            prompt_u = prompt_g = j % cfg.num_prompts
        similarity: float = 1.0
        if kind is constants.PairKind.RETRIEVED:
            similarity = float(rng.uniform(min(delta, 1.0), 1.0))
        elif kind in (constants.PairKind.RANDOM, constants.PairKind.UNPAIRED):
            similarity = 0.0
        tasks.append(policy.draw_task(f"{regime.value}-{j:04d}", prompt_u, prompt_g, kind, similarity, cfg, rng))
    return tasks


def _objective(regime: constants.Regime, batch: list, toy_policy: policy.ToyPolicy, cfg: config.GrpoConfig):
    if regime in ONE_SIDED or regime is constants.Regime.UNPAIRED:
        return grpo.objective_vanilla([t for pair in batch for t in pair.trajectories], toy_policy, cfg)
    return grpo.objective_pair_grpo(batch, toy_policy, cfg)


def run_regime(
    regime: constants.Regime, steps: int, seed: int, run_cfg: config.RunConfig
) -> list[AgreementRecord]:
    """
    Train a fresh uniform policy on one regime for `steps` steps and
    record the per-step gradient cosine (per pair too in pair scope).
    """
    agreement: config.AgreementConfig = run_cfg.agreement
    grpo_cfg: config.GrpoConfig = run_cfg.grpo
    rng: np.random.Generator = utils.make_rng(seed, f"agreement.{regime.value}")
    tasks: list = make_regime_tasks(regime, agreement.num_pairs, run_cfg.pairing.delta, run_cfg.policy, rng)
    scorer: typing.Callable = rollouts.target_scorer(tasks, run_cfg.reward_gen)
    sides: tuple = ONE_SIDED.get(regime, grpo.SIDES)
    toy_policy: policy.ToyPolicy = policy.ToyPolicy.uniform(
        run_cfg.policy.num_prompts, run_cfg.policy.vocab_size, seed=seed
    )

    records: list = []
    for step in range(steps):
        batch: list = [
            rollouts.sample_pair_rollout(toy_policy, task, grpo_cfg, run_cfg.policy, rng, scorer, sides)
            for task in tasks
        ]
        report: grpo.ObjectiveReport = _objective(regime, batch, toy_policy, grpo_cfg)
        if agreement.median_scope == "pair":
            for pair in batch:
                cosine, degenerate = report_cosine(_objective(regime, [pair], toy_policy, grpo_cfg))
                records.append(AgreementRecord(regime, step, cosine, degenerate, pair.pair_id))
        else:
            cosine, degenerate = report_cosine(report)
            records.append(AgreementRecord(regime, step, cosine, degenerate))
        if degenerate:
            logger.debug("Degenerate gradient in %s at step %d", regime.value, step)
        grpo.sgd_step(toy_policy, report, agreement.lr)
    return records


def _median(values: list) -> float:
    return float(np.median(values)) if values else 0.0


def summarize_agreement(records: list, median_scope: str) -> dict:
    """
    Median gradient cosine per regime. In pair scope the median is taken
    over the per-pair medians across steps.
    """
    by_regime: dict = {}
    for record in records:
        by_regime.setdefault(record.regime, []).append(record)
    summary: dict = {}
    for regime, regime_records in by_regime.items():
        if median_scope == "pair":
            per_pair: dict = {}
            for record in regime_records:
                per_pair.setdefault(record.pair_id, []).append(record.grad_cos)
            median: float = _median([_median(values) for values in per_pair.values()])
        else:
            median = _median([record.grad_cos for record in regime_records])
        summary[regime.value] = {
            "median_grad_cos": median,
            "num_records": len(regime_records),
            "num_degenerate": sum(1 for record in regime_records if record.degenerate),
        }
    return summary


def run_agreement_study(
    regimes: typing.Sequence[constants.Regime], steps: int, seed: int, run_cfg: config.RunConfig
) -> AgreementResult:
    """
    Run every regime for `steps` steps from the same seed and summarize
    the median cosine per regime.
    """
    records: list = []
    for regime in regimes:
        logger.info("Agreement study: %s for %d steps", regime.value, steps)
        records.extend(run_regime(constants.Regime(regime), steps, seed, run_cfg))
    summary: dict = {
        "median_scope": run_cfg.agreement.median_scope,
        "seed": seed,
        "steps": steps,
        "regimes": summarize_agreement(records, run_cfg.agreement.median_scope),
    }
    return AgreementResult(records=records, summary=summary)


def _csv_text(header: list, rows: typing.Iterable[list]) -> str:
    buffer: io.StringIO = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_agreement(result: AgreementResult, csv_path: str, summary_path: str) -> None:
    """
    Write the per-record cosines as CSV and the summary as JSON.
    """
    pair_scope: bool = result.summary["median_scope"] == "pair"
    header: list = ["regime", "step"] + (["pair_id"] if pair_scope else []) + ["grad_cos", "flag"]
    rows: list = []
    for record in result.records:
        row: list = [record.regime.value, record.step]
        if pair_scope:
            row.append(record.pair_id)
        row.extend([repr(record.grad_cos), "degenerate" if record.degenerate else "ok"])
        rows.append(row)
    utils.atomic_write_text(csv_path, _csv_text(header, rows))
    utils.atomic_write_text(summary_path, utils.dump_json(result.summary))


def _parse_float(value: str, column: str, path: str, line_number: int) -> float:
    try:
        parsed: float = float(value)
    except (TypeError, ValueError):
        raise exceptions.MalformedLog(f"{path}:{line_number}: '{column}' is not a number: {value!r}")
    if not math.isfinite(parsed):
        raise exceptions.MalformedLog(f"{path}:{line_number}: '{column}' is not finite")
    return parsed


def summarize_rewards(path: str, smoothing: float = constants.REWARD_SMOOTHING) -> list[dict]:
    """
    Exponential moving average of the per-side mean rewards of a training
    log: s_0 = r_0, s_t = smoothing * s_(t-1) + (1 - smoothing) * r_t.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader: csv.DictReader = csv.DictReader(handle)
        missing: list = [c for c in ("step", "mean_reward_und", "mean_reward_gen") if c not in (reader.fieldnames or [])]
        if missing:
            raise exceptions.MalformedLog(f"{path}: missing columns {missing}")
        rows: list = []
        smoothed: dict = {}
        for line_number, record in enumerate(reader, 2):
            step: float = _parse_float(record["step"], "step", path, line_number)
            row: dict = {"step": int(step)}
            for side in ("und", "gen"):
                reward: float = _parse_float(record[f"mean_reward_{side}"], f"mean_reward_{side}", path, line_number)
                previous: float | None = smoothed.get(side)
                smoothed[side] = reward if previous is None else smoothing * previous + (1.0 - smoothing) * reward
                row[f"reward_{side}"] = reward
                row[f"smoothed_{side}"] = smoothed[side]
            rows.append(row)
    if not rows:
        raise exceptions.MalformedLog(f"{path}: training log has no rows")
    return rows


def write_reward_summary(rows: list[dict], path: str) -> None:
    header: list = ["step", "reward_und", "smoothed_und", "reward_gen", "smoothed_gen"]
    body: list = [[row["step"]] + [repr(row[column]) for column in header[1:]] for row in rows]
    utils.atomic_write_text(path, _csv_text(header, body))
