# builtins
import json
import math
import os
import tempfile
import unittest

# third party
import numpy as np
import numpy.testing as npt

# modules
import src.constants as constants
import src.exceptions as exceptions
import src.features as features


def write_lines(path: str, records: list) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write((record if isinstance(record, str) else json.dumps(record)) + "\n")


def vector(item_id: str, values: list, source: constants.Side = constants.Side.UNDERSTANDING) -> features.FeatureVector:
    return features.FeatureVector(id=item_id, source=source, values=features.l2_normalize(values))


class TestNormalization(unittest.TestCase):

    def test_three_four_five(self) -> None:
        npt.assert_allclose(features.l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_unit_norm(self) -> None:
        rng: np.random.Generator = np.random.default_rng(3)
        for _ in range(50):
            unit: np.ndarray = features.l2_normalize(rng.standard_normal(7))
            self.assertAlmostEqual(float(np.linalg.norm(unit)), 1.0, delta=1e-12)

    def test_zero_and_empty_vectors(self) -> None:
        for values in ([0.0, 0.0, 0.0], [], [1e-14, 0.0], [float("nan"), 1.0]):
            with self.assertRaises(exceptions.ZeroVector):
                features.l2_normalize(values)


class TestCosineSimilarity(unittest.TestCase):

    def test_examples(self) -> None:
        a: features.FeatureVector = vector("a", [1.0, 0.0])
        self.assertEqual(features.cosine_similarity(a, vector("b", [1.0, 0.0])), 1.0)
        self.assertEqual(features.cosine_similarity(a, vector("c", [0.0, 2.0])), 0.0)
        self.assertEqual(features.cosine_similarity(a, vector("d", [-5.0, 0.0])), -1.0)

    def test_symmetric_and_bounded(self) -> None:
        rng: np.random.Generator = np.random.default_rng(11)
        for _ in range(50):
            a = vector("a", rng.standard_normal(5))
            b = vector("b", rng.standard_normal(5))
            self.assertEqual(features.cosine_similarity(a, b), features.cosine_similarity(b, a))
            self.assertLessEqual(abs(features.cosine_similarity(a, b)), 1.0)

    def test_dim_mismatch(self) -> None:
        with self.assertRaises(exceptions.DimMismatch):
            features.cosine_similarity(vector("a", [1.0, 0.0]), vector("b", [1.0, 0.0, 0.0]))

    def test_similarity_matrix(self) -> None:
        left = features.FeatureSet(
            (vector("a", [1.0, 0.0]), vector("b", [0.0, 1.0])), constants.Side.UNDERSTANDING, 2
        )
        right = features.FeatureSet(
            (vector("c", [1.0, 1.0], constants.Side.GENERATION),), constants.Side.GENERATION, 2
        )
        npt.assert_allclose(features.similarity_matrix(left, right), [[math.sqrt(0.5)], [math.sqrt(0.5)]])


class TestFeatureSet(unittest.TestCase):

    def test_duplicate_ids_rejected(self) -> None:
        with self.assertRaises(exceptions.DuplicateId):
            features.FeatureSet((vector("a", [1.0]), vector("a", [2.0])), constants.Side.UNDERSTANDING, 1)

    def test_joint_keys_are_qualified(self) -> None:
        und = features.FeatureSet((vector("x", [1.0, 0.0]),), constants.Side.UNDERSTANDING, 2)
        gen = features.FeatureSet(
            (vector("x", [0.0, 1.0], constants.Side.GENERATION),), constants.Side.GENERATION, 2
        )
        joint: features.JointFeatures = features.joint_features(und, gen)
        self.assertEqual(joint.keys, ["und:x", "gen:x"])
        self.assertEqual(joint.matrix.shape, (2, 2))

    def test_without(self) -> None:
        und = features.FeatureSet(
            (vector("a", [1.0]), vector("b", [1.0]), vector("c", [1.0])), constants.Side.UNDERSTANDING, 1
        )
        self.assertEqual(und.without({"b"}).ids, ["a", "c"])


class TestLoadFeatures(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp: tempfile.TemporaryDirectory = tempfile.TemporaryDirectory()
        self.path: str = os.path.join(self.tmp.name, "features.jsonl")

    def tearDown(self) -> None:
        self.tmp.cleanup()

    def test_normalizes_on_load(self) -> None:
        write_lines(self.path, [
            {"id": "u1", "source": "und", "vector": [3, 4], "normalized": False},
            {"id": "u2", "source": "und", "vector": [0.0, 1.0], "normalized": True},
        ])
        loaded: features.FeatureSet = features.load_features(self.path)
        self.assertEqual(loaded.ids, ["u1", "u2"])
        self.assertEqual(loaded.source, constants.Side.UNDERSTANDING)
        npt.assert_allclose(loaded.vectors[0].values, [0.6, 0.8], atol=1e-15)

    def test_flagged_normalized_but_not_unit(self) -> None:
        write_lines(self.path, [
            {"id": "u1", "source": "und", "vector": [1.0, 0.0], "normalized": True},
            {"id": "u2", "source": "und", "vector": [2.0, 0.0], "normalized": True},
        ])
        with self.assertRaises(exceptions.SchemaError) as context:
            features.load_features(self.path)
        self.assertEqual(context.exception.line, 2)
        self.assertIn(f"{self.path}:2:", str(context.exception))

    def test_zero_vector_is_schema_error(self) -> None:
        write_lines(self.path, [{"id": "u1", "source": "und", "vector": [0.0, 0.0], "normalized": False}])
        with self.assertRaises(exceptions.SchemaError):
            features.load_features(self.path)

    def test_duplicate_id(self) -> None:
        write_lines(self.path, [
            {"id": "u1", "source": "und", "vector": [1.0, 0.0], "normalized": True},
            {"id": "u1", "source": "und", "vector": [0.0, 1.0], "normalized": True},
        ])
        with self.assertRaises(exceptions.DuplicateId) as context:
            features.load_features(self.path)
        self.assertIn(":2:", str(context.exception))

    def test_dim_mismatch(self) -> None:
        write_lines(self.path, [
            {"id": "u1", "source": "und", "vector": [1.0, 0.0], "normalized": True},
            {"id": "u2", "source": "und", "vector": [1.0, 0.0, 0.0], "normalized": True},
        ])
        with self.assertRaises(exceptions.DimMismatch):
            features.load_features(self.path)

    def test_mixed_sources(self) -> None:
        write_lines(self.path, [
            {"id": "u1", "source": "und", "vector": [1.0, 0.0], "normalized": True},
            {"id": "g1", "source": "gen", "vector": [1.0, 0.0], "normalized": True},
        ])
        with self.assertRaises(exceptions.SchemaError):
            features.load_features(self.path)

    def test_schema_errors_are_line_anchored(self) -> None:
        bad_records: list = [
            "{not json",
            {"source": "und", "vector": [1.0], "normalized": True},
            {"id": "u1", "source": "image", "vector": [1.0], "normalized": True},
            {"id": "u1", "source": "und", "vector": ["a"], "normalized": True},
            {"id": "u1", "source": "und", "vector": [1.0], "normalized": "yes"},
        ]
        for bad in bad_records:
            write_lines(self.path, [{"id": "u0", "source": "und", "vector": [1.0], "normalized": True}, bad])
            with self.assertRaises(exceptions.SchemaError) as context:
                features.load_features(self.path)
            self.assertEqual(context.exception.line, 2)

    def test_write_then_load(self) -> None:
        original = features.FeatureSet(
            (vector("g1", [1.0, 2.0], constants.Side.GENERATION), vector("g2", [2.0, -1.0], constants.Side.GENERATION)),
            constants.Side.GENERATION,
            2,
        )
        features.write_features(original, self.path)
        loaded: features.FeatureSet = features.load_features(self.path)
        self.assertEqual(loaded.ids, original.ids)
        npt.assert_allclose(loaded.matrix, original.matrix, atol=1e-15)


if __name__ == "__main__":
    unittest.main()
