"""
Mini-batch k-means over the joint feature space and medoid extraction.

Distances are squared Euclidean; on unit vectors this is monotone in cosine,
so the inner-product medoid rule agrees with the assignment rule.
"""

# builtins
import dataclasses
import logging
import typing

# third party
import numpy as np
import sklearn.cluster

# modules
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.features as features
import src.utils as utils


logger: logging.Logger = logging.getLogger(__name__)

CHUNK_ROWS: int = 1024
MEDOID_TIE_TOLERANCE: float = 1e-12


@dataclasses.dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray
    keys: tuple
    labels: np.ndarray
    inertia: float
    initial_inertia: float
    config: config.ClusteringConfig

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def assignments(self) -> dict[str, int]:
        return {key: int(label) for key, label in zip(self.keys, self.labels)}

    def members(self, cluster: int) -> list[str]:
        """
        Keys assigned to one cluster, in fit order.
        """
        return [key for key, label in zip(self.keys, self.labels) if label == cluster]

    def non_empty_clusters(self) -> list[int]:
        return sorted({int(label) for label in self.labels})

    def to_dict(self) -> dict:
        return {
            "config": dataclasses.asdict(self.config),
            "seed": self.config.seed,
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "keys": list(self.keys),
            "assignments": self.assignments,
            "inertia": self.inertia,
            "initial_inertia": self.initial_inertia,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ClusterModel":
        try:
            keys: tuple = tuple(payload["keys"])
            assignments: dict = payload["assignments"]
            return cls(
                centroids=np.asarray(payload["centroids"], dtype=np.float64),
                keys=keys,
                labels=np.asarray([assignments[key] for key in keys], dtype=np.int64),
                inertia=float(payload["inertia"]),
                initial_inertia=float(payload["initial_inertia"]),
                config=config.ClusteringConfig(**payload["config"]),
            )
        except (KeyError, TypeError) as e:
            raise exceptions.SchemaError(f"malformed cluster model: {e}")


def save_model(model: ClusterModel, path: str) -> None:
    """
    Write the fitted model as JSON so --resume can skip the fit.
    """
    utils.atomic_write_text(path, utils.dump_json(model.to_dict()))


def load_model(path: str) -> ClusterModel:
    """
    Read a model written by save_model.
    """
    return ClusterModel.from_dict(utils.read_json(path))


def as_joint(data: typing.Any) -> features.JointFeatures:
    """
    Accept a FeatureSet, a sequence of FeatureSets, or JointFeatures.
    """
    if isinstance(data, features.JointFeatures):
        return data
    if isinstance(data, features.FeatureSet):
        return features.joint_features(data)
    return features.joint_features(*data)


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """
    (n, k) matrix of squared Euclidean distances, evaluated in row chunks.
    """
    out: np.ndarray = np.empty((points.shape[0], centers.shape[0]), dtype=np.float64)
    for start in range(0, points.shape[0], CHUNK_ROWS):
        block: np.ndarray = points[start:start + CHUNK_ROWS]
        diff: np.ndarray = block[:, None, :] - centers[None, :, :]
        out[start:start + CHUNK_ROWS] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Nearest center per point (ties go to the lowest index) and its squared distance.
    """
    distances: np.ndarray = squared_distances(points, centers)
    labels: np.ndarray = np.argmin(distances, axis=1)
    return labels, distances[np.arange(points.shape[0]), labels]


def sklearn_seed(seed: int) -> int:
    """
    32-bit random_state for scikit-learn, derived from a 64-bit seed.
    """
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


def kmeans_plusplus(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """
    Greedy k-means++ seeding (2 + floor(ln k) local trials per center).
    """
    centers, indices = sklearn.cluster.kmeans_plusplus(points, n_clusters=k, random_state=sklearn_seed(seed))
    logger.debug("k-means++ picked points %s", indices.tolist())
    return np.asarray(centers, dtype=np.float64)


def repair_empty_clusters(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """
    Move each empty cluster's centroid onto the point farthest from its
    current centroid, until every cluster has a member (at most k rounds).
    """
    k: int = centers.shape[0]
    for _ in range(k):
        labels, distances = assign(points, centers)
        counts: np.ndarray = np.bincount(labels, minlength=k)
        empty: np.ndarray = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        farthest: np.ndarray = np.argsort(-distances, kind="stable")
        for cluster, point in zip(empty, farthest):
            logger.debug("Repairing empty cluster %d with point %d", cluster, point)
            centers[cluster] = points[point]
    return centers


def _inertia(points: np.ndarray, centers: np.ndarray) -> float:
    return float(assign(points, centers)[1].sum())


def _minibatch_phase(points: np.ndarray, initial: np.ndarray, cfg: config.ClusteringConfig) -> np.ndarray:
    n: int = points.shape[0]
    k: int = initial.shape[0]
    # the first partial_fit call needs at least k points
    batch_size: int = min(max(cfg.batch_size, k), n)
    estimator: sklearn.cluster.MiniBatchKMeans = sklearn.cluster.MiniBatchKMeans(
        n_clusters=k,
        init=initial,
        n_init=1,
        reassignment_ratio=0.0,
        compute_labels=False,
        random_state=sklearn_seed(cfg.seed),
    )
    rng: np.random.Generator = np.random.Generator(np.random.Philox(cfg.seed))
    centers: np.ndarray = initial.copy()
    for iteration in range(cfg.max_iters):
        order: np.ndarray = rng.permutation(n)
        previous: np.ndarray = centers
        for start in range(0, n, batch_size):
            estimator.partial_fit(points[order[start:start + batch_size]])
        centers = np.array(estimator.cluster_centers_, dtype=np.float64)
        shift: float = float(np.max(np.linalg.norm(centers - previous, axis=1)))
        if shift < cfg.convergence_tol:
            logger.debug("Mini-batch k-means converged after %d epochs", iteration + 1)
            break
    return centers


def _lloyd_phase(points: np.ndarray, initial: np.ndarray, cfg: config.ClusteringConfig) -> np.ndarray:
    estimator: sklearn.cluster.KMeans = sklearn.cluster.KMeans(
        n_clusters=initial.shape[0],
        init=initial,
        n_init=1,
        max_iter=cfg.max_iters,
        tol=cfg.convergence_tol,
        algorithm="lloyd",
        random_state=sklearn_seed(cfg.seed),
    ).fit(points)
    logger.debug("Lloyd k-means stopped after %d iterations", estimator.n_iter_)
    return np.array(estimator.cluster_centers_, dtype=np.float64)


def _fit(data: typing.Any, cfg: config.ClusteringConfig, algorithm: str) -> ClusterModel:
    joint: features.JointFeatures = as_joint(data)
    n: int = len(joint)
    k: int = cfg.resolve_k(n)
    if n == 0 or n < k:
        raise exceptions.TooFewPoints(f"cannot form {k} clusters from {n} points")
    points: np.ndarray = joint.matrix
    initial: np.ndarray = kmeans_plusplus(points, k, cfg.seed)
    initial_inertia: float = _inertia(points, initial)

    if algorithm == "lloyd":
        centers: np.ndarray = _lloyd_phase(points, initial.copy(), cfg)
    else:
        centers = _minibatch_phase(points, initial.copy(), cfg)
    centers = repair_empty_clusters(points, centers)
    inertia: float = _inertia(points, centers)
    if inertia > initial_inertia:
        logger.debug("Fitted inertia %.6g exceeds initial %.6g, keeping the seeding", inertia, initial_inertia)
        centers = repair_empty_clusters(points, initial.copy())
        inertia = _inertia(points, centers)

    labels, _ = assign(points, centers)
    logger.info("Clustered %d points into %d clusters (inertia %.6g)", n, k, inertia)
    return ClusterModel(
        centroids=centers,
        keys=tuple(joint.keys),
        labels=labels.astype(np.int64),
        inertia=inertia,
        initial_inertia=initial_inertia,
        config=dataclasses.replace(cfg, k=k),
    )


def fit_minibatch_kmeans(data: typing.Any, cfg: config.ClusteringConfig) -> ClusterModel:
    """
    Fit mini-batch k-means: k-means++ seeding, shuffled epochs of
    MiniBatchKMeans.partial_fit (1/count learning rate per center) and
    farthest-point repair of empty clusters. Deterministic for a fixed seed.
    Honors cfg.algorithm so an exact full-batch run can be selected by config.
    """
    return _fit(data, cfg, cfg.algorithm)


def fit_lloyd_kmeans(data: typing.Any, cfg: config.ClusteringConfig) -> ClusterModel:
    """
    Full-batch Lloyd iterations from the same k-means++ seeding.
    """
    return _fit(data, cfg, "lloyd")


def select_medoids(model: ClusterModel, data: typing.Any) -> list[str]:
    """
    For every non-empty cluster, the member key with the largest inner
    product with the centroid. Ties go to the smallest item id, then to
    the understanding split.
    """
    joint: features.JointFeatures = as_joint(data)
    rows: dict = {key: index for index, key in enumerate(joint.keys)}
    unknown: list = [key for key in model.keys if key not in rows]
    if unknown:
        raise exceptions.ModelMismatch(f"model assigns unknown ids: {unknown[:5]}")
    if len(rows) != len(model.keys):
        raise exceptions.ModelMismatch("model was fitted on a different feature set")

    medoids: list = []
    for cluster in model.non_empty_clusters():
        members: list = sorted(model.members(cluster))
        scores: np.ndarray = joint.matrix[[rows[key] for key in members]] @ model.centroids[cluster]
        best: float = float(np.max(scores))
        ties: list = [key for key, score in zip(members, scores) if best - score <= MEDOID_TIE_TOLERANCE]
        medoids.append(min(ties, key=_tie_order))
    return medoids


def _tie_order(key: str) -> tuple[str, int]:
    source, _, item_id = key.partition(":")
    return item_id, 0 if source == constants.Side.UNDERSTANDING.value else 1
