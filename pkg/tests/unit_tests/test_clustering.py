# builtins
import os
import tempfile
import unittest

# third party
import numpy as np
import numpy.testing as npt

# modules
import src.clustering as clustering
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.features as features


def feature_set(points: np.ndarray, source: constants.Side = constants.Side.UNDERSTANDING, prefix: str = "p") -> features.FeatureSet:
    vectors: tuple = tuple(
        features.FeatureVector(id=f"{prefix}{i}", source=source, values=features.l2_normalize(point))
        for i, point in enumerate(points)
    )
    return features.FeatureSet(vectors=vectors, source=source, dim=points.shape[1])


def two_groups() -> features.FeatureSet:
    """
    Eight points: four around +x and four around +y.
    """
    return feature_set(np.array([
        [1.0, 0.05], [1.0, -0.05], [1.0, 0.1], [1.0, -0.1],
        [0.05, 1.0], [-0.05, 1.0], [0.1, 1.0], [-0.1, 1.0],
    ]))


def random_set(n: int, dim: int, seed: int) -> features.FeatureSet:
    return feature_set(np.random.default_rng(seed).standard_normal((n, dim)))


class TestMiniBatchKMeans(unittest.TestCase):

    def test_two_groups_for_any_seed(self) -> None:
        data: features.FeatureSet = two_groups()
        for seed in range(10):
            model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(
                data, config.ClusteringConfig(k=2, seed=seed)
            )
            labels: np.ndarray = model.labels
            self.assertEqual(len(set(labels[:4])), 1)
            self.assertEqual(len(set(labels[4:])), 1)
            self.assertNotEqual(labels[0], labels[4])

    def test_k_equals_n_gives_zero_inertia(self) -> None:
        data: features.FeatureSet = random_set(6, 3, seed=1)
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, config.ClusteringConfig(k=6, seed=4))
        self.assertEqual(model.inertia, 0.0)
        self.assertEqual(sorted(model.labels.tolist()), list(range(6)))

    def test_single_cluster_is_the_mean(self) -> None:
        data: features.FeatureSet = random_set(20, 4, seed=2)
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, config.ClusteringConfig(k=1, seed=0))
        npt.assert_allclose(model.centroids[0], data.matrix.mean(axis=0), atol=1e-9)

    def test_too_few_points(self) -> None:
        with self.assertRaises(exceptions.TooFewPoints):
            clustering.fit_minibatch_kmeans(random_set(3, 2, seed=0), config.ClusteringConfig(k=4))

    def test_inertia_never_exceeds_seeding(self) -> None:
        for seed in range(5):
            data: features.FeatureSet = random_set(60, 5, seed=seed)
            model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(
                data, config.ClusteringConfig(k=5, batch_size=8, seed=seed)
            )
            self.assertLessEqual(model.inertia, model.initial_inertia)

    def test_every_cluster_non_empty(self) -> None:
        data: features.FeatureSet = random_set(40, 3, seed=7)
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(
            data, config.ClusteringConfig(k=8, batch_size=4, seed=3)
        )
        self.assertEqual(model.non_empty_clusters(), list(range(8)))

    def test_deterministic(self) -> None:
        data: features.FeatureSet = random_set(50, 4, seed=5)
        cfg = config.ClusteringConfig(k=4, batch_size=10, seed=123)
        first: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, cfg)
        second: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, cfg)
        npt.assert_array_equal(first.centroids, second.centroids)
        npt.assert_array_equal(first.labels, second.labels)

    def test_default_k_heuristic(self) -> None:
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(
            random_set(41, 3, seed=0), config.ClusteringConfig()
        )
        self.assertEqual(model.k, 3)
        self.assertEqual(model.config.k, 3)

    def test_small_instances_stay_close_to_lloyd(self) -> None:
        rng: np.random.Generator = np.random.default_rng(11)
        for seed in range(20):
            n: int = int(rng.integers(4, 11))
            k: int = int(rng.integers(1, 4))
            data: features.FeatureSet = random_set(n, int(rng.integers(2, 4)), seed=100 + seed)
            cfg = config.ClusteringConfig(k=k, seed=seed)
            minibatch: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, cfg)
            lloyd: clustering.ClusterModel = clustering.fit_lloyd_kmeans(data, cfg)
            self.assertEqual(minibatch.initial_inertia, lloyd.initial_inertia)
            self.assertLessEqual(minibatch.inertia, 1.05 * lloyd.inertia + 1e-12, msg=f"n={n} k={k} seed={seed}")

    def test_lloyd_single_cluster_is_the_mean(self) -> None:
        data: features.FeatureSet = random_set(15, 3, seed=6)
        model: clustering.ClusterModel = clustering.fit_lloyd_kmeans(data, config.ClusteringConfig(k=1, seed=2))
        npt.assert_allclose(model.centroids[0], data.matrix.mean(axis=0), atol=1e-9)

    def test_lloyd_agrees_on_separated_groups(self) -> None:
        data: features.FeatureSet = two_groups()
        cfg = config.ClusteringConfig(k=2, seed=9)
        minibatch: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, cfg)
        lloyd: clustering.ClusterModel = clustering.fit_lloyd_kmeans(data, cfg)
        self.assertEqual(
            {frozenset(minibatch.members(c)) for c in range(2)},
            {frozenset(lloyd.members(c)) for c in range(2)},
        )

    def test_joint_space_of_two_splits(self) -> None:
        und: features.FeatureSet = feature_set(np.array([[1.0, 0.0], [0.0, 1.0]]), constants.Side.UNDERSTANDING, "x")
        gen: features.FeatureSet = feature_set(np.array([[1.0, 0.1], [0.1, 1.0]]), constants.Side.GENERATION, "x")
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans([und, gen], config.ClusteringConfig(k=2))
        self.assertEqual(model.keys, ("und:x0", "und:x1", "gen:x0", "gen:x1"))
        self.assertEqual(model.assignments["und:x0"], model.assignments["gen:x0"])


class TestSelectMedoids(unittest.TestCase):

    def test_matches_brute_force(self) -> None:
        for seed in range(5):
            data: features.FeatureSet = random_set(30, 4, seed=seed)
            model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(
                data, config.ClusteringConfig(k=4, seed=seed)
            )
            medoids: list = clustering.select_medoids(model, data)
            rows: dict = {key: i for i, key in enumerate(data.keys)}
            for cluster, medoid in zip(model.non_empty_clusters(), medoids):
                members: list = model.members(cluster)
                best: float = max(float(data.matrix[rows[key]] @ model.centroids[cluster]) for key in members)
                self.assertIn(medoid, members)
                self.assertAlmostEqual(float(data.matrix[rows[medoid]] @ model.centroids[cluster]), best, delta=1e-12)

    def test_tie_goes_to_smallest_key(self) -> None:
        data: features.FeatureSet = feature_set(np.array([[1.0, 0.0], [0.0, 1.0]]), prefix="m")
        model = clustering.ClusterModel(
            centroids=np.array([[0.5, 0.5]]),
            keys=("und:m1", "und:m0"),
            labels=np.array([0, 0]),
            inertia=0.0,
            initial_inertia=0.0,
            config=config.ClusteringConfig(k=1),
        )
        self.assertEqual(clustering.select_medoids(model, data), ["und:m0"])

    def test_tie_across_splits_goes_to_smallest_id(self) -> None:
        und: features.FeatureSet = feature_set(np.array([[1.0, 0.0]]), constants.Side.UNDERSTANDING, "a")
        gen: features.FeatureSet = feature_set(np.array([[1.0, 0.0]]), constants.Side.GENERATION, "b")
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans([und, gen], config.ClusteringConfig(k=1))
        self.assertEqual(clustering.select_medoids(model, [und, gen]), ["und:a0"])
        shared: features.FeatureSet = feature_set(np.array([[1.0, 0.0]]), constants.Side.GENERATION, "a")
        model = clustering.fit_minibatch_kmeans([und, shared], config.ClusteringConfig(k=1))
        self.assertEqual(clustering.select_medoids(model, [und, shared]), ["und:a0"])

    def test_model_mismatch(self) -> None:
        data: features.FeatureSet = random_set(10, 3, seed=0)
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, config.ClusteringConfig(k=2))
        with self.assertRaises(exceptions.ModelMismatch):
            clustering.select_medoids(model, random_set(11, 3, seed=0))


class TestModelPersistence(unittest.TestCase):

    def test_save_and_load(self) -> None:
        data: features.FeatureSet = random_set(12, 3, seed=4)
        model: clustering.ClusterModel = clustering.fit_minibatch_kmeans(data, config.ClusteringConfig(k=3, seed=8))
        with tempfile.TemporaryDirectory() as tmp:
            path: str = os.path.join(tmp, constants.CLUSTER_MODEL_FILE)
            clustering.save_model(model, path)
            loaded: clustering.ClusterModel = clustering.load_model(path)
        npt.assert_array_equal(loaded.centroids, model.centroids)
        npt.assert_array_equal(loaded.labels, model.labels)
        self.assertEqual(loaded.keys, model.keys)
        self.assertEqual(loaded.config, model.config)
        self.assertEqual(clustering.select_medoids(loaded, data), clustering.select_medoids(model, data))


if __name__ == "__main__":
    unittest.main()
