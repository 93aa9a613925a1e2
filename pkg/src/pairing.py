"""
UG pair construction.

    1. cluster the joint feature space and keep one medoid per cluster
       as an aligned (same instance) pair,
    2. drop the medoids from both splits,
    3. for every remaining generation item, take its top-n understanding
       neighbours above the threshold, each understanding item used once.

The result is written as a JSON Lines dataset with a stats sidecar.
"""

# builtins
import dataclasses
import logging
import math
import os
import typing

# third party
import numpy as np

# modules
import src.augmentation as augmentation
import src.clustering as clustering
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.features as features
import src.grpo as grpo
import src.utils as utils


logger: logging.Logger = logging.getLogger(__name__)

WEIGHT_LAW_TOLERANCE: float = 1e-12


@dataclasses.dataclass(frozen=True)
class UGPair:
    und_id: str
    gen_id: str
    kind: constants.PairKind
    similarity: float
    weight: float
    medoid_source: constants.Side | None = None
    cluster: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity <= 1.0:
            raise exceptions.InvariantViolation(f"similarity {self.similarity} outside [0, 1]")
        if not 0.0 < self.weight <= 1.0:
            raise exceptions.InvariantViolation(f"weight {self.weight} outside (0, 1]")
        if self.kind is constants.PairKind.RETRIEVED:
            if abs(self.weight - math.sqrt(self.similarity)) > WEIGHT_LAW_TOLERANCE:
                raise exceptions.InvariantViolation("retrieved weight must be sqrt(similarity)")
        elif self.weight != 1.0:
            raise exceptions.InvariantViolation(f"{self.kind.value} pairs have weight 1")


@dataclasses.dataclass(frozen=True)
class AlignedSelection:
    pairs: list
    model: clustering.ClusterModel
    medoid_keys: list

    def medoid_ids(self, source: constants.Side) -> set:
        """
        Bare ids of the medoids that came from one split.
        """
        prefix: str = f"{source.value}:"
        return {key[len(prefix):] for key in self.medoid_keys if key.startswith(prefix)}


@dataclasses.dataclass(frozen=True)
class PairRecord:
    pair_id: str
    kind: constants.PairKind
    similarity: float
    weight: float
    und: dict
    gen: dict
    meta: dict

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "kind": self.kind.value,
            "similarity": self.similarity,
            "weight": self.weight,
            "und": self.und,
            "gen": self.gen,
            "meta": self.meta,
        }


@dataclasses.dataclass(frozen=True)
class PairDataset:
    records: list
    stats: dict
    model: clustering.ClusterModel | None = None


def _default_clustering(cfg: config.PairingConfig) -> config.ClusteringConfig:
    return config.ClusteringConfig(k=cfg.k, seed=utils.derive_seed(cfg.seed, "clustering"))


def build_aligned(
    data: typing.Any,
    cfg: config.PairingConfig,
    clustering_cfg: config.ClusteringConfig | None = None,
    model: clustering.ClusterModel | None = None,
) -> AlignedSelection:
    """
    One aligned seed per non-empty cluster of the joint feature space.
    A previously fitted model is reused when it was fitted on the same keys.
    """
    joint: features.JointFeatures = clustering.as_joint(data)
    if len(joint) == 0:
        raise exceptions.TooFewPoints("cannot select aligned pairs from an empty feature set")
    clustering_cfg = clustering_cfg or _default_clustering(cfg)
    if model is not None and not _model_matches(model, joint, clustering_cfg):
        logger.info("Saved cluster model does not match the inputs, refitting")
        model = None
    if model is None:
        model = clustering.fit_minibatch_kmeans(joint, clustering_cfg)
    medoid_keys: list = clustering.select_medoids(model, joint)
    assignments: dict = model.assignments
    pairs: list = []
    for key in medoid_keys:
        source_value, _, item_id = key.partition(":")
        pairs.append(
            UGPair(
                und_id=item_id,
                gen_id=item_id,
                kind=constants.PairKind.ALIGNED,
                similarity=1.0,
                weight=grpo.pair_weight(constants.PairKind.ALIGNED, 1.0),
                medoid_source=constants.Side(source_value),
                cluster=assignments[key],
            )
        )
    return AlignedSelection(pairs=pairs, model=model, medoid_keys=medoid_keys)


def _model_matches(
    model: clustering.ClusterModel, joint: features.JointFeatures, cfg: config.ClusteringConfig
) -> bool:
    expected: config.ClusteringConfig = dataclasses.replace(cfg, k=cfg.resolve_k(len(joint)))
    return list(model.keys) == list(joint.keys) and model.config == expected


def _greedy_order(gen_ids: list, sims: np.ndarray, order: str) -> list[int]:
    if order == "max-sim-desc":
        best: np.ndarray = sims.max(axis=1)
        return sorted(range(len(gen_ids)), key=lambda i: (-best[i], gen_ids[i]))
    return sorted(range(len(gen_ids)), key=lambda i: gen_ids[i])


def build_retrieved(
    gen_rem: features.FeatureSet, und_rem: features.FeatureSet, cfg: config.PairingConfig
) -> list[UGPair]:
    """
    Greedy threshold-gated top-n matching. Top-n is taken first among the
    understanding items still available, then filtered by delta; matched
    understanding items leave the pool immediately.
    """
    if cfg.delta > 1.0:
        logger.warning("pairing.delta=%s exceeds 1, no retrieved pair can qualify", cfg.delta)
    if not len(gen_rem) or not len(und_rem):
        return []
    sims: np.ndarray = features.similarity_matrix(gen_rem, und_rem)
    gen_ids: list = gen_rem.ids
    und_ids: list = und_rem.ids
    und_rank: np.ndarray = np.argsort(np.argsort(np.asarray(und_ids, dtype=object), kind="stable"))
    available: np.ndarray = np.ones(len(und_ids), dtype=bool)

    pairs: list = []
    skipped: int = 0
    for g in _greedy_order(gen_ids, sims, cfg.greedy_order):
        candidates: np.ndarray = np.flatnonzero(available)
        if candidates.size == 0:
            logger.info("Understanding pool exhausted, skipping %s", gen_ids[g])
            skipped += 1
            continue
        ranked: np.ndarray = candidates[np.lexsort((und_rank[candidates], -sims[g, candidates]))]
        chosen: list = [j for j in ranked[:cfg.n] if sims[g, j] >= cfg.delta and sims[g, j] > 0.0]
        if not chosen:
            logger.info("No understanding neighbour of %s reaches delta=%s", gen_ids[g], cfg.delta)
            skipped += 1
            continue
        for j in chosen:
            similarity: float = float(sims[g, j])
            pairs.append(
                UGPair(
                    und_id=und_ids[j],
                    gen_id=gen_ids[g],
                    kind=constants.PairKind.RETRIEVED,
                    similarity=similarity,
                    weight=grpo.pair_weight(constants.PairKind.RETRIEVED, similarity),
                )
            )
            available[j] = False
    logger.info("Retrieved %d pairs, skipped %d generation items", len(pairs), skipped)
    return pairs


def build_random(
    gen: features.FeatureSet, und: features.FeatureSet, cfg: config.PairingConfig
) -> list[UGPair]:
    """
    Seeded one-to-one random pairing, the baseline of the pairing ablation.
    """
    rng: np.random.Generator = utils.make_rng(cfg.seed, "pairing.random")
    gen_order: np.ndarray = rng.permutation(len(gen))
    und_order: np.ndarray = rng.permutation(len(und))
    pairs: list = []
    for g, u in zip(gen_order, und_order):
        similarity: float = features.cosine_similarity(gen.vectors[g], und.vectors[u])
        similarity = min(max(similarity, 0.0), 1.0)
        pairs.append(
            UGPair(
                und_id=und.vectors[u].id,
                gen_id=gen.vectors[g].id,
                kind=constants.PairKind.RANDOM,
                similarity=similarity,
                weight=grpo.pair_weight(constants.PairKind.RANDOM, similarity),
            )
        )
    return pairs


def build_single_source(source_features: features.FeatureSet) -> list[UGPair]:
    """
    Every item of one split completed into its own aligned pair, in id
    order. The "pairs from one source only" arm of the pairing ablation.
    """
    return [
        UGPair(
            und_id=item_id,
            gen_id=item_id,
            kind=constants.PairKind.ALIGNED,
            similarity=1.0,
            weight=grpo.pair_weight(constants.PairKind.ALIGNED, 1.0),
            medoid_source=source_features.source,
        )
        for item_id in sorted(source_features.ids)
    ]


def build_unpaired(gen: features.FeatureSet, und: features.FeatureSet) -> list[UGPair]:
    """
    Understanding and generation items side by side in id order with no
    pairing relation; items beyond the shorter split are dropped.
    """
    und_ids: list = sorted(und.ids)
    gen_ids: list = sorted(gen.ids)
    if len(und_ids) != len(gen_ids):
        logger.info("Unpaired strategy drops %d items of the longer split", abs(len(und_ids) - len(gen_ids)))
    return [
        UGPair(
            und_id=und_id,
            gen_id=gen_id,
            kind=constants.PairKind.UNPAIRED,
            similarity=0.0,
            weight=grpo.pair_weight(constants.PairKind.UNPAIRED, 0.0),
        )
        for und_id, gen_id in zip(und_ids, gen_ids)
    ]


def _apply_budget(pairs: list, cfg: config.PairingConfig) -> list:
    if cfg.max_pairs is None or len(pairs) <= cfg.max_pairs:
        return pairs
    rng: np.random.Generator = utils.make_rng(cfg.seed, "pairing.budget")
    keep: np.ndarray = np.sort(rng.choice(len(pairs), size=cfg.max_pairs, replace=False))
    logger.info("Pair budget keeps %d of %d pairs", cfg.max_pairs, len(pairs))
    return [pairs[i] for i in keep]


def load_quadruples(path: str) -> dict[str, augmentation.Quadruple]:
    """
    Read the quadruple file into a map keyed by '<origin>:<id>'.
    Understanding records need question and answer, generation records a caption.
    """
    quadruples: dict = {}
    for line_number, record in utils.read_jsonl(path):
        for field in ("id", "image"):
            if not isinstance(record.get(field), str) or not record.get(field):
                raise exceptions.SchemaError(f"'{field}' must be a non-empty string", path, line_number)
        for field in ("caption", "question", "answer", "task_type"):
            if not isinstance(record.get(field, ""), str):
                raise exceptions.SchemaError(f"'{field}' must be a string", path, line_number)
        try:
            origin: constants.Side = constants.Side(record.get("origin"))
        except ValueError:
            raise exceptions.SchemaError("'origin' must be 'und' or 'gen'", path, line_number)
        quadruple: augmentation.Quadruple = augmentation.Quadruple(
            id=record["id"],
            image=record["image"],
            caption=record.get("caption", ""),
            question=record.get("question", ""),
            answer=record.get("answer", ""),
            origin=origin,
            task_type=record.get("task_type", ""),
        )
        if origin is constants.Side.UNDERSTANDING and not (quadruple.question and quadruple.answer):
            raise exceptions.SchemaError("understanding records need question and answer", path, line_number)
        if origin is constants.Side.GENERATION and not quadruple.caption:
            raise exceptions.SchemaError("generation records need a caption", path, line_number)
        if quadruple.key in quadruples:
            raise exceptions.DuplicateId(f"{path}:{line_number}: duplicate quadruple {quadruple.key}")
        quadruples[quadruple.key] = quadruple
    return quadruples


def quadruple_records(quadruples: typing.Iterable[augmentation.Quadruple]) -> list[dict]:
    """
    Quadruples as JSON Lines records, the inverse of load_quadruples.
    """
    records: list = []
    for quadruple in quadruples:
        record: dict = {
            "id": quadruple.id,
            "origin": quadruple.origin.value,
            "image": quadruple.image,
            "caption": quadruple.caption,
            "question": quadruple.question,
            "answer": quadruple.answer,
        }
        if quadruple.task_type:
            record["task_type"] = quadruple.task_type
        records.append(record)
    return records


def _complete(
    quadruple: augmentation.Quadruple, cfg: config.PairingConfig, client: augmentation.AugmentationClient
) -> augmentation.Quadruple:
    if quadruple.is_complete:
        return quadruple
    if quadruple.origin is constants.Side.UNDERSTANDING:
        request: augmentation.AugmentationRequest = augmentation.AugmentationRequest(
            direction=constants.AugmentationDirection.COMPLETE_CAPTION,
            quadruple=quadruple,
            template_id=cfg.caption_template,
        )
    else:
        request = augmentation.AugmentationRequest(
            direction=constants.AugmentationDirection.COMPLETE_QA,
            quadruple=quadruple,
            template_id=cfg.qa_template,
        )
    return augmentation.request_augmentation(request, client)


def _und_side(quadruple: augmentation.Quadruple) -> dict:
    return {"id": quadruple.id, "image": quadruple.image, "question": quadruple.question, "answer": quadruple.answer}


def _gen_side(quadruple: augmentation.Quadruple) -> dict:
    return {"id": quadruple.id, "image": quadruple.image, "caption": quadruple.caption}


def _to_records(
    pairs: list, quadruples: dict, cfg: config.PairingConfig, client: augmentation.AugmentationClient
) -> list[PairRecord]:
    records: list = []
    counters: dict = {kind: 0 for kind in constants.PairKind}
    for pair in pairs:
        meta: dict = {}
        if pair.kind is constants.PairKind.ALIGNED:
            quadruple: augmentation.Quadruple = _complete(
                quadruples[features.qualified_key(pair.medoid_source, pair.und_id)], cfg, client
            )
            und_quadruple, gen_quadruple = quadruple, quadruple
            meta["medoid_source"] = pair.medoid_source.value
            if pair.cluster is not None:
                meta["cluster"] = pair.cluster
        else:
            und_quadruple = quadruples[features.qualified_key(constants.Side.UNDERSTANDING, pair.und_id)]
            gen_quadruple = quadruples[features.qualified_key(constants.Side.GENERATION, pair.gen_id)]
        if und_quadruple.task_type:
            meta["task_type"] = und_quadruple.task_type
        records.append(
            PairRecord(
                pair_id=f"{pair.kind.value}-{counters[pair.kind]:06d}",
                kind=pair.kind,
                similarity=pair.similarity,
                weight=pair.weight,
                und=_und_side(und_quadruple),
                gen=_gen_side(gen_quadruple),
                meta=meta,
            )
        )
        counters[pair.kind] += 1
    return records


def _check_coverage(
    und_features: features.FeatureSet, gen_features: features.FeatureSet, quadruples: dict
) -> None:
    feature_keys: set = set(und_features.keys) | set(gen_features.keys)
    for key in und_features.keys + gen_features.keys:
        if key not in quadruples:
            raise exceptions.MissingQuadruple(key)
    orphans: list = sorted(set(quadruples) - feature_keys)
    if orphans:
        logger.warning("Excluding %d quadruples without a feature vector, e.g. %s", len(orphans), orphans[:3])


def build_pair_dataset(
    und_features: features.FeatureSet,
    gen_features: features.FeatureSet,
    quadruples: dict,
    cfg: config.PairingConfig,
    clustering_cfg: config.ClusteringConfig | None = None,
    client: augmentation.AugmentationClient | None = None,
    model: clustering.ClusterModel | None = None,
    config_echo: dict | None = None,
) -> PairDataset:
    """
    Run the configured pairing strategy end to end and return the records
    together with their summary statistics.
    """
    if len(und_features) and len(gen_features) and und_features.dim != gen_features.dim:
        raise exceptions.DimMismatch(
            f"understanding dim {und_features.dim} differs from generation dim {gen_features.dim}"
        )
    _check_coverage(und_features, gen_features, quadruples)
    client = client or augmentation.StubAugmentationClient()
    fitted: clustering.ClusterModel | None = None

    if cfg.strategy in ("pairug", "aligned"):
        selection: AlignedSelection = build_aligned(
            features.joint_features(und_features, gen_features), cfg, clustering_cfg, model
        )
        fitted = selection.model
        pairs: list = list(selection.pairs)
        if cfg.strategy == "pairug":
            und_rem: features.FeatureSet = und_features.without(selection.medoid_ids(constants.Side.UNDERSTANDING))
            gen_rem: features.FeatureSet = gen_features.without(selection.medoid_ids(constants.Side.GENERATION))
            pairs.extend(build_retrieved(gen_rem, und_rem, cfg))
    elif cfg.strategy == "retrieved":
        pairs = build_retrieved(gen_features, und_features, cfg)
    elif cfg.strategy == "und-only":
        pairs = build_single_source(und_features)
    elif cfg.strategy == "gen-only":
        pairs = build_single_source(gen_features)
    elif cfg.strategy == "unpaired":
        pairs = build_unpaired(gen_features, und_features)
    else:
        pairs = build_random(gen_features, und_features, cfg)

    pairs = _apply_budget(pairs, cfg)
    records: list = _to_records(pairs, quadruples, cfg, client)
    stats: dict = compute_stats(records, config_echo if config_echo is not None else dataclasses.asdict(cfg))
    return PairDataset(records=records, stats=stats, model=fitted)


def _histogram(similarities: list) -> dict:
    bins: int = int(round(1.0 / constants.HISTOGRAM_BIN_WIDTH))
    counts: list = [0] * bins
    for similarity in similarities:
        index: int = int(math.floor(similarity / constants.HISTOGRAM_BIN_WIDTH + 1e-9))
        counts[min(max(index, 0), bins - 1)] += 1
    return {
        "bin_width": constants.HISTOGRAM_BIN_WIDTH,
        "edges": [round(i * constants.HISTOGRAM_BIN_WIDTH, 10) for i in range(bins + 1)],
        "counts": counts,
    }


def compute_stats(records: list, config_echo: dict | None = None) -> dict:
    """
    Counts per kind, similarity histogram and weight distribution.
    """
    counts: dict = {kind.value: 0 for kind in constants.PairKind}
    for record in records:
        counts[record.kind.value] += 1
    counts["total"] = len(records)
    weights: np.ndarray = np.asarray([record.weight for record in records], dtype=np.float64)
    weight_stats: dict = {"min": None, "max": None, "mean": None, "p10": None, "p50": None, "p90": None}
    if weights.size:
        weight_stats = {
            "min": float(weights.min()),
            "max": float(weights.max()),
            "mean": float(weights.mean()),
            "p10": float(np.quantile(weights, 0.1)),
            "p50": float(np.quantile(weights, 0.5)),
            "p90": float(np.quantile(weights, 0.9)),
        }
    stats: dict = {
        "counts": counts,
        "similarity_histogram": _histogram([record.similarity for record in records]),
        "weights": weight_stats,
    }
    if config_echo is not None:
        stats["config"] = config_echo
    return stats


def verify_pairs(records: list, delta: float) -> list[str]:
    """
    Return every violation of the threshold, weight and uniqueness laws.
    An empty list means the dataset is consistent.
    """
    violations: list = []
    retrieved_und: dict = {}
    medoids: set = set()
    for record in records:
        if record.kind is constants.PairKind.ALIGNED:
            medoids.add((record.meta.get("medoid_source", ""), record.und["id"]))
    for record in records:
        where: str = record.pair_id
        if record.kind is constants.PairKind.ALIGNED:
            if record.weight != 1.0:
                violations.append(f"{where}: aligned weight {record.weight} != 1")
        elif record.kind is constants.PairKind.RETRIEVED:
            if record.similarity < delta:
                violations.append(f"{where}: similarity {record.similarity} below delta {delta}")
            if abs(record.weight - math.sqrt(max(record.similarity, 0.0))) > WEIGHT_LAW_TOLERANCE:
                violations.append(f"{where}: weight {record.weight} != sqrt({record.similarity})")
            und_id: str = record.und["id"]
            if und_id in retrieved_und:
                violations.append(f"{where}: understanding item {und_id} reused from {retrieved_und[und_id]}")
            retrieved_und[und_id] = where
            if (constants.Side.UNDERSTANDING.value, und_id) in medoids:
                violations.append(f"{where}: understanding item {und_id} is an aligned medoid")
            if (constants.Side.GENERATION.value, record.gen["id"]) in medoids:
                violations.append(f"{where}: generation item {record.gen['id']} is an aligned medoid")
        elif record.weight != 1.0:
            violations.append(f"{where}: {record.kind.value} weight {record.weight} != 1")
    return violations


def _number(record: dict, field: str, path: str, line_number: int) -> float:
    value: typing.Any = record.get(field)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise exceptions.SchemaError(f"'{field}' must be a number", path, line_number)
    return float(value)


def _side(record: dict, side: str, fields: tuple, path: str, line_number: int) -> dict:
    value: typing.Any = record.get(side)
    if not isinstance(value, dict):
        raise exceptions.SchemaError(f"'{side}' must be an object", path, line_number)
    for field in fields:
        if not isinstance(value.get(field), str):
            raise exceptions.SchemaError(f"'{side}.{field}' must be a string", path, line_number)
    return value


def read_pair_dataset(path: str) -> list[PairRecord]:
    """
    Read and validate a pair dataset written by write_pair_dataset.
    Raises SchemaError with the line number on the first bad record.
    """
    records: list = []
    for line_number, record in utils.read_jsonl(path):
        if not isinstance(record.get("pair_id"), str) or not record.get("pair_id"):
            raise exceptions.SchemaError("'pair_id' must be a non-empty string", path, line_number)
        try:
            kind: constants.PairKind = constants.PairKind(record.get("kind"))
        except ValueError:
            raise exceptions.SchemaError(
                f"'kind' must be one of {[kind.value for kind in constants.PairKind]}", path, line_number
            )
        meta: typing.Any = record.get("meta", {})
        if not isinstance(meta, dict):
            raise exceptions.SchemaError("'meta' must be an object", path, line_number)
        records.append(
            PairRecord(
                pair_id=record["pair_id"],
                kind=kind,
                similarity=_number(record, "similarity", path, line_number),
                weight=_number(record, "weight", path, line_number),
                und=_side(record, "und", ("id", "image", "question", "answer"), path, line_number),
                gen=_side(record, "gen", ("id", "image", "caption"), path, line_number),
                meta=meta,
            )
        )
    return records


def write_pair_dataset(dataset: PairDataset, out_dir: str) -> dict:
    """
    Write the dataset, its stats sidecar and the cluster model (when one
    was fitted). Returns the written paths by role.
    """
    paths: dict = {
        "pairs": os.path.join(out_dir, constants.PAIRS_FILE),
        "stats": os.path.join(out_dir, constants.STATS_FILE),
    }
    utils.atomic_write_text(paths["pairs"], utils.dump_jsonl(record.to_dict() for record in dataset.records))
    utils.atomic_write_text(paths["stats"], utils.dump_json(dataset.stats))
    if dataset.model is not None:
        paths["cluster_model"] = os.path.join(out_dir, constants.CLUSTER_MODEL_FILE)
        clustering.save_model(dataset.model, paths["cluster_model"])
    return paths
