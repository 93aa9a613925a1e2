"""
Run configuration.

Every subsystem has a dataclass config that validates itself.
The file format is a YAML mapping of flat dotted keys, e.g.

    seed: 7
    pairing.delta: 0.6
    grpo.clip_eps: 0.2

Nested mappings are flattened to the same keys. Precedence is
dataclass defaults < config file < command line overrides.
"""

# builtins
import dataclasses
import math
import types
import typing

# third party
import yaml

# modules
import src.constants as constants
import src.exceptions as exceptions
import src.utils as utils


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise exceptions.ConfigError(message)


@dataclasses.dataclass(frozen=True)
class PairingConfig:
    n: int = constants.DEFAULT_NEIGHBORS
    delta: float = constants.DEFAULT_DELTA
    k: int | None = None
    seed: int = 0
    greedy_order: str = "id"
    strategy: str = "pairug"
    max_pairs: int | None = None
    augmentation_client: str = "stub"
    augmentation_url: str = ""
    caption_template: str = constants.DEFAULT_CAPTION_TEMPLATE
    qa_template: str = constants.DEFAULT_QA_TEMPLATE

    def __post_init__(self) -> None:
        _check(self.n >= 1, f"pairing.n must be >= 1, got {self.n}")
        # delta above 1 is accepted and yields no retrieved pairs (warned at build time)
        _check(self.delta >= 0.0, f"pairing.delta must be >= 0, got {self.delta}")
        _check(self.k is None or self.k >= 1, f"pairing.k must be >= 1, got {self.k}")
        _check(
            self.greedy_order in constants.GREEDY_ORDERS,
            f"pairing.greedy_order must be one of {constants.GREEDY_ORDERS}",
        )
        _check(
            self.strategy in constants.PAIRING_STRATEGIES,
            f"pairing.strategy must be one of {constants.PAIRING_STRATEGIES}",
        )
        _check(
            self.max_pairs is None or self.max_pairs >= 1,
            f"pairing.max_pairs must be >= 1, got {self.max_pairs}",
        )


@dataclasses.dataclass(frozen=True)
class ClusteringConfig:
    k: int | None = None
    batch_size: int = constants.DEFAULT_BATCH_SIZE
    max_iters: int = constants.DEFAULT_MAX_ITERS
    seed: int = 0
    convergence_tol: float = constants.DEFAULT_CONVERGENCE_TOL
    algorithm: str = "minibatch"

    def __post_init__(self) -> None:
        _check(self.k is None or self.k >= 1, f"clustering.k must be >= 1, got {self.k}")
        _check(self.batch_size >= 1, f"clustering.batch_size must be >= 1, got {self.batch_size}")
        _check(self.max_iters >= 1, f"clustering.max_iters must be >= 1, got {self.max_iters}")
        _check(0 <= self.seed < 2 ** 64, "clustering.seed must be a 64-bit unsigned integer")
        _check(self.convergence_tol >= 0.0, "clustering.convergence_tol must be >= 0")
        _check(
            self.algorithm in constants.CLUSTERING_ALGORITHMS,
            f"clustering.algorithm must be one of {constants.CLUSTERING_ALGORITHMS}",
        )

    def resolve_k(self, num_points: int) -> int:
        """
        Explicit k, or ceil(5% of the points) when k is unset.
        """
        if self.k is not None:
            return self.k
        return max(1, math.ceil(constants.DEFAULT_CLUSTER_FRACTION * num_points))


@dataclasses.dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = constants.DEFAULT_CLIP_EPS
    beta: float = constants.DEFAULT_BETA
    k_und: int = constants.DEFAULT_ROLLOUTS
    k_gen: int = constants.DEFAULT_ROLLOUTS
    sigma_min: float = constants.DEFAULT_SIGMA_MIN
    lr: float = constants.DEFAULT_LR
    kl_estimator: str = "k3"
    group_scope: str = "pair"
    sim_weight: bool = True

    def __post_init__(self) -> None:
        _check(0.0 < self.clip_eps < 1.0, f"grpo.clip_eps must lie in (0, 1), got {self.clip_eps}")
        _check(self.beta >= 0.0, f"grpo.beta must be >= 0, got {self.beta}")
        _check(self.k_und >= 1, f"grpo.k_und must be >= 1, got {self.k_und}")
        _check(self.k_gen >= 1, f"grpo.k_gen must be >= 1, got {self.k_gen}")
        _check(self.sigma_min > 0.0, f"grpo.sigma_min must be > 0, got {self.sigma_min}")
        _check(self.lr > 0.0, f"grpo.lr must be > 0, got {self.lr}")
        _check(
            self.kl_estimator in constants.KL_ESTIMATORS,
            f"grpo.kl_estimator must be one of {constants.KL_ESTIMATORS}",
        )
        _check(
            self.group_scope in constants.GROUP_SCOPES,
            f"grpo.group_scope must be one of {constants.GROUP_SCOPES}",
        )


@dataclasses.dataclass(frozen=True)
class RewardSpec:
    side: constants.Side = constants.Side.GENERATION
    scorer_id: str = constants.DEFAULT_GEN_SCORER
    normalization: str = "none"

    def __post_init__(self) -> None:
        _check(self.normalization == "none", "reward normalization must be 'none'")
        if self.side is constants.Side.UNDERSTANDING:
            _check(
                self.scorer_id == "accuracy",
                "the understanding reward is always 'accuracy'",
            )


@dataclasses.dataclass(frozen=True)
class PolicyConfig:
    vocab_size: int = constants.DEFAULT_VOCAB_SIZE
    num_prompts: int = constants.DEFAULT_NUM_PROMPTS
    und_length: int = constants.DEFAULT_UND_LENGTH
    gen_length: int = constants.DEFAULT_GEN_LENGTH

    def __post_init__(self) -> None:
        _check(self.vocab_size >= 2, "policy.vocab_size must be >= 2")
        _check(self.num_prompts >= 1, "policy.num_prompts must be >= 1")
        _check(self.und_length >= 1, "policy.und_length must be >= 1")
        _check(self.gen_length >= 1, "policy.gen_length must be >= 1")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    batch_pairs: int = constants.DEFAULT_BATCH_PAIRS
    objective: str = "pair-grpo"

    def __post_init__(self) -> None:
        _check(self.batch_pairs >= 1, "train.batch_pairs must be >= 1")
        _check(
            self.objective in constants.OBJECTIVES,
            f"train.objective must be one of {constants.OBJECTIVES}",
        )


@dataclasses.dataclass(frozen=True)
class AgreementConfig:
    num_pairs: int = constants.DEFAULT_AGREEMENT_PAIRS
    steps: int = constants.DEFAULT_STEPS
    lr: float = constants.DEFAULT_AGREEMENT_LR
    median_scope: str = "step"
    regimes: tuple = tuple(regime.value for regime in constants.Regime)

    def __post_init__(self) -> None:
        _check(self.num_pairs >= 1, "agreement.num_pairs must be >= 1")
        _check(self.steps >= 1, "agreement.steps must be >= 1")
        _check(self.lr > 0.0, "agreement.lr must be > 0")
        _check(
            self.median_scope in constants.MEDIAN_SCOPES,
            f"agreement.median_scope must be one of {constants.MEDIAN_SCOPES}",
        )
        known: set = {regime.value for regime in constants.Regime}
        _check(len(self.regimes) >= 1, "agreement.regimes must not be empty")
        for regime in self.regimes:
            _check(regime in known, f"unknown agreement regime: {regime}")


# flat key sections -> dataclass; fields listed in the last element are not
# exposed as keys because they are derived from other keys.
SECTIONS: dict = {
    "pairing": (PairingConfig, ("seed",)),
    "clustering": (ClusteringConfig, ("k", "seed")),
    "grpo": (GrpoConfig, ()),
    "reward.und": (RewardSpec, ("side",)),
    "reward.gen": (RewardSpec, ("side",)),
    "policy": (PolicyConfig, ()),
    "train": (TrainConfig, ()),
    "agreement": (AgreementConfig, ()),
}
TOP_LEVEL_KEYS: dict = {"seed": int, "steps": int, "out_dir": str}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    pairing: PairingConfig = dataclasses.field(default_factory=PairingConfig)
    clustering: ClusteringConfig = dataclasses.field(default_factory=ClusteringConfig)
    grpo: GrpoConfig = dataclasses.field(default_factory=GrpoConfig)
    reward_und: RewardSpec = dataclasses.field(
        default_factory=lambda: RewardSpec(side=constants.Side.UNDERSTANDING, scorer_id="accuracy")
    )
    reward_gen: RewardSpec = dataclasses.field(default_factory=RewardSpec)
    policy: PolicyConfig = dataclasses.field(default_factory=PolicyConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    agreement: AgreementConfig = dataclasses.field(default_factory=AgreementConfig)
    steps: int = constants.DEFAULT_STEPS
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        _check(self.steps >= 1, f"steps must be >= 1, got {self.steps}")
        _check(0 <= self.seed < 2 ** 63, "seed must be a non-negative 63-bit integer")

    def section(self, name: str) -> typing.Any:
        return getattr(self, name.replace(".", "_"))

    def clustering_config(self) -> ClusteringConfig:
        """
        Clustering config with k forwarded from the pairing section
        and the seed split from the root seed.
        """
        return dataclasses.replace(
            self.clustering,
            k=self.pairing.k,
            seed=utils.derive_seed(self.seed, "clustering"),
        )

    def pairing_config(self) -> PairingConfig:
        return dataclasses.replace(self.pairing, seed=self.seed)

    def to_flat(self) -> dict:
        """
        Fully resolved flat key-value view, used for the config echo.
        """
        flat: dict = {key: getattr(self, key) for key in TOP_LEVEL_KEYS}
        for section, (_, hidden) in SECTIONS.items():
            value: typing.Any = self.section(section)
            for field in dataclasses.fields(value):
                if field.name in hidden:
                    continue
                item: typing.Any = getattr(value, field.name)
                if isinstance(item, tuple):
                    item = list(item)
                flat[f"{section}.{field.name}"] = item
        return flat


def _flatten(mapping: dict, prefix: str = "") -> dict:
    flat: dict = {}
    for key, value in mapping.items():
        name: str = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _coerce(key: str, value: typing.Any, annotation: typing.Any) -> typing.Any:
    """
    Check a raw config value against the field annotation.
    Integers are accepted for float fields; booleans are never numbers.
    """
    allowed: tuple = typing.get_args(annotation) if isinstance(annotation, types.UnionType) else (annotation,)
    if value is None:
        _check(type(None) in allowed, f"{key} must not be null")
        return None
    for kind in allowed:
        if kind is bool and isinstance(value, bool):
            return value
        if kind is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if kind is str and isinstance(value, str):
            return value
        if kind is tuple and isinstance(value, (list, tuple)):
            return tuple(str(item) for item in value)
    raise exceptions.ConfigError(f"{key} has invalid value {value!r}")


def build_config(flat: dict) -> RunConfig:
    """
    Build a RunConfig from flat dotted keys. Unknown keys are rejected.
    """
    sections: dict = {name: {} for name in SECTIONS}
    top: dict = {}
    for key, value in flat.items():
        if key in TOP_LEVEL_KEYS:
            top[key] = _coerce(key, value, TOP_LEVEL_KEYS[key])
            continue
        section, _, field_name = key.rpartition(".")
        if section not in SECTIONS:
            raise exceptions.ConfigError(f"Unknown config key: {key}")
        cls, hidden = SECTIONS[section]
        fields: dict = {field.name: field for field in dataclasses.fields(cls)}
        if field_name not in fields or field_name in hidden:
            raise exceptions.ConfigError(f"Unknown config key: {key}")
        sections[section][field_name] = _coerce(key, value, fields[field_name].type)

    kwargs: dict = dict(top)
    for section, values in sections.items():
        cls, _ = SECTIONS[section]
        if section == "reward.und":
            values = {"side": constants.Side.UNDERSTANDING, "scorer_id": "accuracy", **values}
        elif section == "reward.gen":
            values = {"side": constants.Side.GENERATION, **values}
        kwargs[section.replace(".", "_")] = cls(**values)
    return RunConfig(**kwargs)


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """
    Read the flat YAML config at path (if any), apply overrides, and validate.
    """
    flat: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as handle:
            try:
                raw: typing.Any = yaml.safe_load(handle)
            except yaml.YAMLError as ye:
                raise exceptions.ConfigError(f"{path}: invalid YAML: {ye}")
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise exceptions.ConfigError(f"{path}: config must be a mapping")
        flat = _flatten(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = value
    return build_config(flat)


def dump_config(config: RunConfig) -> str:
    """
    YAML text of the fully resolved flat config.
    """
    return yaml.safe_dump(config.to_flat(), sort_keys=True, default_flow_style=False)
