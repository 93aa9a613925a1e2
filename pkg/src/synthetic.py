"""
Seeded synthetic corpus for offline pairing and training runs.
"""

# builtins
import dataclasses
import os

# third party
import numpy as np

# modules
import src.augmentation as augmentation
import src.constants as constants
import src.exceptions as exceptions
import src.features as features
import src.pairing as pairing
import src.utils as utils


TASK_TYPES: tuple = ("chart", "math", "ocr", "general")


@dataclasses.dataclass(frozen=True)
class SyntheticCorpus:
    und: features.FeatureSet
    gen: features.FeatureSet
    quadruples: list


def _blob_vectors(
    source: constants.Side, count: int, centers: np.ndarray, noise: float, rng: np.random.Generator
) -> tuple:
    vectors: list = []
    for i in range(count):
        center: np.ndarray = centers[i % len(centers)]
        raw: np.ndarray = center + noise * rng.standard_normal(center.shape[0])
        vectors.append(
            features.FeatureVector(id=f"{source.value}-{i:04d}", source=source, values=features.l2_normalize(raw))
        )
    return tuple(vectors)


def make_synthetic_corpus(
    num_und: int = 24,
    num_gen: int = 24,
    dim: int = 8,
    centers: int = 4,
    noise: float = 0.15,
    seed: int = 0,
) -> SyntheticCorpus:
    """
    Gaussian blobs around `centers` random unit directions, one blob per
    task type. Understanding items carry question and answer only,
    generation items a caption only.
    """
    if num_und < 1 or num_gen < 1 or dim < 1 or centers < 1 or noise < 0.0:
        raise exceptions.ConfigError("synthetic corpus sizes must be positive and noise non-negative")
    rng: np.random.Generator = utils.make_rng(seed, "synth")
    directions: np.ndarray = np.stack([features.l2_normalize(rng.standard_normal(dim)) for _ in range(centers)])
    und_vectors: tuple = _blob_vectors(constants.Side.UNDERSTANDING, num_und, directions, noise, rng)
    gen_vectors: tuple = _blob_vectors(constants.Side.GENERATION, num_gen, directions, noise, rng)

    quadruples: list = []
    for i, vector in enumerate(und_vectors):
        task_type: str = TASK_TYPES[(i % centers) % len(TASK_TYPES)]
        quadruples.append(
            augmentation.Quadruple(
                id=vector.id,
                image=f"images/{vector.id}.png",
                caption="",
                question=f"Which {task_type} item is shown in image {vector.id}?",
                answer=f"{task_type}-{i % centers}",
                origin=constants.Side.UNDERSTANDING,
                task_type=task_type,
            )
        )
    for i, vector in enumerate(gen_vectors):
        task_type = TASK_TYPES[(i % centers) % len(TASK_TYPES)]
        quadruples.append(
            augmentation.Quadruple(
                id=vector.id,
                image=f"images/{vector.id}.png",
                caption=f"A {task_type} picture, variant {i}",
                question="",
                answer="",
                origin=constants.Side.GENERATION,
                task_type=task_type,
            )
        )
    return SyntheticCorpus(
        und=features.FeatureSet(vectors=und_vectors, source=constants.Side.UNDERSTANDING, dim=dim),
        gen=features.FeatureSet(vectors=gen_vectors, source=constants.Side.GENERATION, dim=dim),
        quadruples=quadruples,
    )


def write_corpus(corpus: SyntheticCorpus, out_dir: str) -> dict:
    """
    Write the two feature files and the quadruple file. Returns the paths by role.
    """
    paths: dict = {
        "und": os.path.join(out_dir, "und.jsonl"),
        "gen": os.path.join(out_dir, "gen.jsonl"),
        "quadruples": os.path.join(out_dir, "quadruples.jsonl"),
    }
    features.write_features(corpus.und, paths["und"])
    features.write_features(corpus.gen, paths["gen"])
    utils.atomic_write_text(paths["quadruples"], utils.dump_jsonl(pairing.quadruple_records(corpus.quadruples)))
    return paths
