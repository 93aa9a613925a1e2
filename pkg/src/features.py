"""
Feature vectors: data model, L2 normalization, cosine similarity
and the JSON Lines file format for precomputed embeddings.

All values are held at double precision regardless of file precision.
"""

# builtins
import dataclasses
import typing

# third party
import numpy as np

# modules
import src.constants as constants
import src.exceptions as exceptions
import src.utils as utils


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    id: str
    source: constants.Side
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def key(self) -> str:
        """
        Qualified id, unique across both splits.
        """
        return qualified_key(self.source, self.id)


def qualified_key(source: constants.Side, item_id: str) -> str:
    return f"{source.value}:{item_id}"


@dataclasses.dataclass(frozen=True)
class FeatureSet:
    """
    Vectors of one source split sharing one dimension.
    """
    vectors: tuple
    source: constants.Side
    dim: int

    def __post_init__(self) -> None:
        seen: set = set()
        for vector in self.vectors:
            if vector.source is not self.source:
                raise exceptions.DimMismatch(
                    f"vector {vector.id} has source {vector.source.value}, set is {self.source.value}"
                )
            if vector.dim != self.dim:
                raise exceptions.DimMismatch(
                    f"vector {vector.id} has dim {vector.dim}, set is {self.dim}"
                )
            if vector.id in seen:
                raise exceptions.DuplicateId(f"duplicate id {vector.id} in {self.source.value} split")
            seen.add(vector.id)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def ids(self) -> list[str]:
        return [vector.id for vector in self.vectors]

    @property
    def keys(self) -> list[str]:
        return [vector.key for vector in self.vectors]

    @property
    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.vstack([vector.values for vector in self.vectors])

    def without(self, ids: typing.Iterable[str]) -> "FeatureSet":
        """
        Copy of the set with the given ids removed.
        """
        dropped: set = set(ids)
        return FeatureSet(
            vectors=tuple(vector for vector in self.vectors if vector.id not in dropped),
            source=self.source,
            dim=self.dim,
        )

    def restricted_to(self, ids: typing.Iterable[str]) -> "FeatureSet":
        kept: set = set(ids)
        return FeatureSet(
            vectors=tuple(vector for vector in self.vectors if vector.id in kept),
            source=self.source,
            dim=self.dim,
        )


@dataclasses.dataclass(frozen=True)
class JointFeatures:
    """
    Union of feature sets from both splits, keyed by qualified key.
    """
    keys: list
    sources: list
    matrix: np.ndarray

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def joint_features(*feature_sets: FeatureSet) -> JointFeatures:
    """
    Stack feature sets into one joint space. Dimensions must agree.
    """
    non_empty: list = [feature_set for feature_set in feature_sets if len(feature_set)]
    dims: set = {feature_set.dim for feature_set in non_empty}
    if len(dims) > 1:
        raise exceptions.DimMismatch(f"feature sets disagree on dimension: {sorted(dims)}")
    keys: list = []
    sources: list = []
    for feature_set in non_empty:
        keys.extend(feature_set.keys)
        sources.extend([feature_set.source] * len(feature_set))
    if not non_empty:
        dim: int = feature_sets[0].dim if feature_sets else 0
        return JointFeatures(keys=[], sources=[], matrix=np.zeros((0, dim)))
    matrix: np.ndarray = np.vstack([feature_set.matrix for feature_set in non_empty])
    return JointFeatures(keys=keys, sources=sources, matrix=matrix)


def l2_normalize(values: typing.Sequence[float]) -> np.ndarray:
    """
    Return values / ||values|| at double precision.
    Raises ZeroVector for an empty or (near) zero vector.
    """
    vector: np.ndarray = np.asarray(values, dtype=np.float64).reshape(-1)
    if vector.size == 0:
        raise exceptions.ZeroVector("cannot normalize an empty vector")
    if not np.all(np.isfinite(vector)):
        raise exceptions.ZeroVector("cannot normalize a vector with non-finite entries")
    norm: float = float(np.linalg.norm(vector))
    if norm < constants.ZERO_NORM:
        raise exceptions.ZeroVector(f"vector norm {norm:.3e} is below {constants.ZERO_NORM}")
    return vector / norm


def cosine_similarity(a: FeatureVector, b: FeatureVector) -> float:
    """
    Dot product of two unit vectors, clamped to [-1, 1].
    """
    if a.dim != b.dim:
        raise exceptions.DimMismatch(f"cannot compare dim {a.dim} with dim {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


def similarity_matrix(left: FeatureSet, right: FeatureSet) -> np.ndarray:
    """
    All-pairs cosine similarities, rows follow left and columns follow right.
    """
    if len(left) and len(right) and left.dim != right.dim:
        raise exceptions.DimMismatch(f"cannot compare dim {left.dim} with dim {right.dim}")
    return np.clip(left.matrix @ right.matrix.T, -1.0, 1.0)


def _parse_record(record: dict, path: str, line_number: int) -> tuple[str, constants.Side, np.ndarray, bool]:
    item_id: typing.Any = record.get("id")
    if not isinstance(item_id, str) or not item_id:
        raise exceptions.SchemaError("'id' must be a non-empty string", path, line_number)
    try:
        source: constants.Side = constants.Side(record.get("source"))
    except ValueError:
        raise exceptions.SchemaError("'source' must be 'und' or 'gen'", path, line_number)
    vector: typing.Any = record.get("vector")
    if not isinstance(vector, list) or not vector:
        raise exceptions.SchemaError("'vector' must be a non-empty list", path, line_number)
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vector):
        raise exceptions.SchemaError("'vector' must contain only numbers", path, line_number)
    normalized: typing.Any = record.get("normalized")
    if not isinstance(normalized, bool):
        raise exceptions.SchemaError("'normalized' must be a boolean", path, line_number)
    return item_id, source, np.asarray(vector, dtype=np.float64), normalized


def load_features(path: str) -> FeatureSet:
    """
    Load and validate a feature file. Vectors flagged as not normalized
    are normalized on load; vectors flagged as normalized are checked.
    """
    vectors: list = []
    seen: dict = {}
    source: constants.Side | None = None
    dim: int | None = None
    for line_number, record in utils.read_jsonl(path):
        item_id, record_source, values, normalized = _parse_record(record, path, line_number)
        if source is None:
            source = record_source
        elif record_source is not source:
            raise exceptions.SchemaError(
                f"source '{record_source.value}' differs from '{source.value}' earlier in the file",
                path, line_number,
            )
        if dim is None:
            dim = values.shape[0]
        elif values.shape[0] != dim:
            raise exceptions.DimMismatch(
                f"{path}:{line_number}: vector length {values.shape[0]} differs from {dim}"
            )
        if item_id in seen:
            raise exceptions.DuplicateId(
                f"{path}:{line_number}: id {item_id} already defined on line {seen[item_id]}"
            )
        seen[item_id] = line_number
        try:
            unit: np.ndarray = l2_normalize(values)
        except exceptions.ZeroVector as zv:
            raise exceptions.SchemaError(str(zv), path, line_number)
        if normalized and abs(np.linalg.norm(values) - 1.0) > constants.NORM_TOLERANCE:
            raise exceptions.SchemaError("vector flagged normalized does not have unit norm", path, line_number)
        vectors.append(FeatureVector(id=item_id, source=record_source, values=unit))
    if source is None or dim is None:
        raise exceptions.SchemaError("feature file is empty", path)
    return FeatureSet(vectors=tuple(vectors), source=source, dim=dim)


def feature_records(feature_set: FeatureSet) -> list[dict]:
    return [
        {
            "id": vector.id,
            "source": vector.source.value,
            "vector": [float(x) for x in vector.values],
            "normalized": True,
        }
        for vector in feature_set.vectors
    ]


def write_features(feature_set: FeatureSet, path: str) -> None:
    """
    Write a feature set as JSON Lines with normalized set to true.
    """
    utils.atomic_write_text(path, utils.dump_jsonl(feature_records(feature_set)))
