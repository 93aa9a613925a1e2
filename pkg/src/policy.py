"""
Toy shared-parameter policy standing in for the shared backbone.

A table of logits with one row per prompt and one column per token.
The policy is memoryless: pi(o_z | q, o_<z) = softmax(logits[q])[o_z],
which keeps log-probabilities and their gradients closed form while
exercising ratios, advantages and pair weights exactly as a sequence
model would. Both task sides read and write the same table.
"""

# builtins
import dataclasses
import typing

# third party
import numpy as np

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.utils as utils


@dataclasses.dataclass(frozen=True)
class Sample:
    tokens: np.ndarray
    logps: np.ndarray


class ToyPolicy:
    """
    Softmax token policy over a small vocabulary, conditioned on a prompt row.
    """

    def __init__(self, logits: np.ndarray, seed: int = 0) -> None:
        logits = np.array(logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 1:
            raise exceptions.ShapeMismatch(f"logits must be a (prompts, vocab) table, got {logits.shape}")
        self.logits: np.ndarray = logits
        self.seed: int = seed

    @classmethod
    def uniform(cls, num_prompts: int, vocab_size: int, seed: int = 0) -> "ToyPolicy":
        return cls(np.zeros((num_prompts, vocab_size), dtype=np.float64), seed=seed)

    @property
    def num_prompts(self) -> int:
        return int(self.logits.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.logits.shape[1])

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.logits.copy(), seed=self.seed)

    def with_logits(self, logits: np.ndarray) -> "ToyPolicy":
        if np.shape(logits) != self.logits.shape:
            raise exceptions.ShapeMismatch(f"expected {self.logits.shape}, got {np.shape(logits)}")
        return ToyPolicy(logits, seed=self.seed)

    def check_indices(self, prompt_row: int, token: int | None = None) -> None:
        if not 0 <= prompt_row < self.num_prompts:
            raise exceptions.IndexOutOfRange(f"prompt row {prompt_row} outside [0, {self.num_prompts})")
        if token is not None and not 0 <= token < self.vocab_size:
            raise exceptions.IndexOutOfRange(f"token {token} outside [0, {self.vocab_size})")

    def log_softmax(self) -> np.ndarray:
        """
        Log-probabilities of the whole table.
        """
        peak: np.ndarray = self.logits.max(axis=1, keepdims=True)
        shifted: np.ndarray = self.logits - peak
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def log_probs(self, prompt_row: int) -> np.ndarray:
        self.check_indices(prompt_row)
        row: np.ndarray = self.logits[prompt_row]
        shifted: np.ndarray = row - row.max()
        return shifted - np.log(np.exp(shifted).sum())

    def probs(self, prompt_row: int) -> np.ndarray:
        return np.exp(self.log_probs(prompt_row))

    def log_prob(self, prompt_row: int, token: int) -> float:
        """
        logits[prompt, token] - logsumexp(logits[prompt, :]).
        """
        self.check_indices(prompt_row, token)
        return float(self.log_probs(prompt_row)[token])

    def grad_log_prob(self, prompt_row: int, token: int) -> np.ndarray:
        """
        onehot(token) - softmax(logits[prompt]) in the prompt's row, zero elsewhere.
        """
        self.check_indices(prompt_row, token)
        grad: np.ndarray = np.zeros_like(self.logits)
        grad[prompt_row] = -self.probs(prompt_row)
        grad[prompt_row, token] += 1.0
        return grad

    def sample_trajectory(self, prompt_row: int, length: int, rng: np.random.Generator) -> Sample:
        """
        i.i.d. draws from the prompt's softmax with their log-probabilities
        recorded at draw time.
        """
        if length < 1:
            raise ValueError(f"trajectory length must be >= 1, got {length}")
        log_probs: np.ndarray = self.log_probs(prompt_row)
        probs: np.ndarray = np.exp(log_probs)
        tokens: np.ndarray = rng.choice(self.vocab_size, size=length, p=probs / probs.sum())
        return Sample(tokens=tokens.astype(np.int64), logps=log_probs[tokens])

    def to_dict(self) -> dict:
        return {
            "shape": list(self.logits.shape),
            "seed": self.seed,
            "logits": self.logits.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ToyPolicy":
        try:
            shape: tuple = tuple(payload["shape"])
            logits: np.ndarray = np.asarray(payload["logits"], dtype=np.float64).reshape(shape)
            return cls(logits, seed=int(payload["seed"]))
        except (KeyError, TypeError, ValueError) as e:
            raise exceptions.SchemaError(f"malformed policy checkpoint: {e}")


def save_checkpoint(policy: ToyPolicy, path: str) -> None:
    """
    Write the policy logits as JSON.
    """
    utils.atomic_write_text(path, utils.dump_json(policy.to_dict()))


def load_checkpoint(path: str) -> ToyPolicy:
    """
    Read a policy written by save_checkpoint.
    """
    return ToyPolicy.from_dict(utils.read_json(path))


def finite_diff_oracle(
    f: typing.Callable[[np.ndarray], float], policy: ToyPolicy, step: float = constants.FINITE_DIFF_STEP
) -> np.ndarray:
    """
    Central-difference estimate of df/dlogits, one coordinate at a time.
    """
    base: np.ndarray = policy.logits
    grad: np.ndarray = np.zeros_like(base)
    for index in np.ndindex(base.shape):
        plus: np.ndarray = base.copy()
        minus: np.ndarray = base.copy()
        plus[index] += step
        minus[index] -= step
        grad[index] = (f(plus) - f(minus)) / (2.0 * step)
    return grad


@dataclasses.dataclass(frozen=True)
class SyntheticTaskPair:
    """
    Desk-scale analogue of a UG pair: an understanding prompt rewarded for
    one answer token and a generation prompt rewarded for a target sequence.
    """
    pair_id: str
    prompt_u: int
    prompt_g: int
    answer_token: int
    target_seq: tuple
    kind: constants.PairKind
    similarity: float

    @property
    def und_prompt_id(self) -> str:
        return f"{self.pair_id}/und"

    @property
    def gen_prompt_id(self) -> str:
        return f"{self.pair_id}/gen"


def draw_target(
    answer_token: int, agreement: float | None, length: int, vocab_size: int, rng: np.random.Generator
) -> tuple:
    """
    Generation target whose positions equal the answer token with
    probability `agreement` (any other token otherwise); None draws
    every position independently of the answer.
    """
    if agreement is None:
        return tuple(int(t) for t in rng.integers(vocab_size, size=length))
    target: list = []
    for _ in range(length):
        if rng.random() < agreement:
            target.append(answer_token)
        else:
            other: int = int(rng.integers(vocab_size - 1))
            target.append(other if other < answer_token else other + 1)
    return tuple(target)


def draw_task(
    pair_id: str,
    prompt_u: int,
    prompt_g: int,
    kind: constants.PairKind,
    similarity: float,
    cfg: config.PolicyConfig,
    rng: np.random.Generator,
) -> SyntheticTaskPair:
    """
    One synthetic task pair. An aligned target repeats the answer token.
    A retrieved target matches it at each position with probability equal
    to the similarity. Random and unpaired targets ignore it.
    """
    answer: int = int(rng.integers(cfg.vocab_size))
    agreement: float | None = {
        constants.PairKind.ALIGNED: 1.0,
        constants.PairKind.RETRIEVED: similarity,
        constants.PairKind.RANDOM: None,
        constants.PairKind.UNPAIRED: None,
    }[kind]
    return SyntheticTaskPair(
        pair_id=pair_id,
        prompt_u=prompt_u,
        prompt_g=prompt_g,
        answer_token=answer,
        target_seq=draw_target(answer, agreement, cfg.gen_length, cfg.vocab_size, rng),
        kind=kind,
        similarity=similarity,
    )


def make_task_pairs(records: typing.Sequence[typing.Any], cfg: config.PolicyConfig, rng: np.random.Generator) -> list:
    """
    One synthetic task per pair record. Both sides of a pair condition on
    the same policy row (record index modulo the number of prompts);
    unpaired records use rows 2i and 2i + 1 instead.
    """
    tasks: list = []
    for index, record in enumerate(records):
        if record.kind is constants.PairKind.UNPAIRED:
            prompt_u: int = (2 * index) % cfg.num_prompts
            prompt_g: int = (2 * index + 1) % cfg.num_prompts
        else:
            prompt_u = prompt_g = index % cfg.num_prompts
        tasks.append(draw_task(record.pair_id, prompt_u, prompt_g, record.kind, record.similarity, cfg, rng))
    return tasks
