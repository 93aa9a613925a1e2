# builtins
import enum


class Side(str, enum.Enum):
    """
    Task side of a feature vector, quadruple or trajectory.
    The values are the wire values used in every file format.
    """
    UNDERSTANDING = "und"
    GENERATION = "gen"


class PairKind(str, enum.Enum):
    """
    How a UG pair was formed.
    """
    ALIGNED = "aligned"
    RETRIEVED = "retrieved"
    RANDOM = "random"
    UNPAIRED = "unpaired"


class AugmentationDirection(str, enum.Enum):
    COMPLETE_CAPTION = "complete_caption"
    COMPLETE_QA = "complete_qa"


class Regime(str, enum.Enum):
    """
    Data combination scenarios of the gradient agreement study.
    """
    ALIGNED_PAIRS = "aligned_pairs"
    RETRIEVED_PAIRS = "retrieved_pairs"
    RANDOM_PAIRS = "random_pairs"
    UNPAIRED = "unpaired"
    UNDERSTANDING_ONLY = "understanding_only"
    GENERATION_ONLY = "generation_only"


# features
NORM_TOLERANCE: float = 1e-6
ZERO_NORM: float = 1e-12

# clustering
DEFAULT_CLUSTER_FRACTION: float = 0.05
DEFAULT_BATCH_SIZE: int = 1024
DEFAULT_MAX_ITERS: int = 100
DEFAULT_CONVERGENCE_TOL: float = 1e-4
CLUSTERING_ALGORITHMS: list = ["minibatch", "lloyd"]

# pairing
DEFAULT_DELTA: float = 0.6
DEFAULT_NEIGHBORS: int = 1
GREEDY_ORDERS: list = ["id", "max-sim-desc"]
PAIRING_STRATEGIES: list = ["pairug", "aligned", "retrieved", "random", "und-only", "gen-only", "unpaired"]
HISTOGRAM_BIN_WIDTH: float = 0.05
PAIRS_FILE: str = "pairs.jsonl"
STATS_FILE: str = "pairs.stats.json"
STATS_SUMMARY_FILE: str = "stats_summary.json"
CLUSTER_MODEL_FILE: str = "cluster_model.json"
RESOLVED_CONFIG_FILE: str = "resolved_config.yaml"
DEFAULT_CAPTION_TEMPLATE: str = "caption-v1"
DEFAULT_QA_TEMPLATE: str = "qa-v1"
AUGMENTATION_TIMEOUT: float = 30.0

# rewards
DEFAULT_GEN_SCORER: str = "target-overlap"

# grpo
DEFAULT_CLIP_EPS: float = 0.2
DEFAULT_BETA: float = 0.0
DEFAULT_ROLLOUTS: int = 4
DEFAULT_SIGMA_MIN: float = 1e-8
DEFAULT_LR: float = 1e-6
RATIO_EXPONENT_CLAMP: float = 20.0
KL_ESTIMATORS: list = ["k3"]
GROUP_SCOPES: list = ["pair", "batch"]
OBJECTIVES: list = ["vanilla", "pairwise", "pair-grpo"]

# policy
DEFAULT_VOCAB_SIZE: int = 16
DEFAULT_NUM_PROMPTS: int = 32
DEFAULT_UND_LENGTH: int = 1
DEFAULT_GEN_LENGTH: int = 6
FINITE_DIFF_STEP: float = 1e-5

# training
DEFAULT_STEPS: int = 200
DEFAULT_BATCH_PAIRS: int = 8
TRAIN_LOG_FILE: str = "train_log.csv"
CHECKPOINT_FILE: str = "checkpoint.json"
TRAIN_LOG_COLUMNS: list = [
    "step", "J", "mean_reward_und", "mean_reward_gen", "clip_fraction", "kl", "grad_cos",
]

# analysis
DEGENERATE_NORM: float = 1e-12
REWARD_SMOOTHING: float = 0.9
MEDIAN_SCOPES: list = ["step", "pair"]
DEFAULT_AGREEMENT_PAIRS: int = 16
DEFAULT_AGREEMENT_LR: float = 1.0
AGREEMENT_FILE: str = "agreement.csv"
AGREEMENT_SUMMARY_FILE: str = "agreement_summary.json"
REWARD_SUMMARY_FILE: str = "reward_summary.csv"

# cli exit codes
EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_SCHEMA: int = 2
EXIT_CONFIG: int = 3
EXIT_IO: int = 4
