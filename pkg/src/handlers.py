# builtins
import abc
import logging
import os

# modules
import src.analysis as analysis
import src.augmentation as augmentation
import src.clustering as clustering
import src.config as config
import src.constants as constants
import src.exceptions as exceptions
import src.features as features
import src.pairing as pairing
import src.policy as policy
import src.synthetic as synthetic
import src.training as training
import src.utils as utils


logger: logging.Logger = logging.getLogger(__name__)


class Handler:
    """
    Handler abstract class. Receives the request params of one command:

        config_path: optional flat YAML config
        overrides: flat config keys set on the command line (None = unset)
        args: command arguments

    Has a handle method which is an abstract method.
    """

    def __init__(self, request_params: dict) -> None:
        self.request_params: dict = request_params
        self.args: dict = request_params.get("args", {})

    def load_run_config(self) -> config.RunConfig:
        """
        Resolve defaults, the optional config file and the command line overrides.
        """
        return config.load_config(
            self.request_params.get("config_path"),
            self.request_params.get("overrides", {}),
        )

    def out_path(self, run_config: config.RunConfig, name: str) -> str:
        """
        Path of an artifact inside the run's output directory.
        """
        return os.path.join(run_config.out_dir, name)

    def write_resolved_config(self, run_config: config.RunConfig) -> str:
        """
        Write the fully resolved flat config next to the command's artifacts.
        Returns the written path.
        """
        path: str = self.out_path(run_config, constants.RESOLVED_CONFIG_FILE)
        utils.atomic_write_text(path, config.dump_config(run_config))
        return path

    @abc.abstractmethod
    def handle(self) -> dict:
        """
        Abstract handle logic to be implemented by child classes.
        """
        pass


class PairBuildHandler(Handler):
    """
    Build the UG pair dataset from understanding features, generation
    features and the quadruple file.
    """

    def handle(self) -> dict:
        """
        Load both feature files and the quadruples, build the pairs and write
        the dataset, its stats, the cluster model and the resolved config.
        """
        run_config: config.RunConfig = self.load_run_config()
        pairing_config: config.PairingConfig = run_config.pairing_config()
        und_features: features.FeatureSet = features.load_features(self.args["und_features_path"])
        gen_features: features.FeatureSet = features.load_features(self.args["gen_features_path"])
        quadruples: dict = pairing.load_quadruples(self.args["quadruples_path"])
        client: augmentation.AugmentationClient = augmentation.make_client(
            pairing_config.augmentation_client, pairing_config.augmentation_url
        )

        model: clustering.ClusterModel | None = None
        model_path: str = self.out_path(run_config, constants.CLUSTER_MODEL_FILE)
        if self.args.get("resume") and os.path.exists(model_path):
            logger.info("Resuming from cluster model %s", model_path)
            model = clustering.load_model(model_path)

        dataset: pairing.PairDataset = pairing.build_pair_dataset(
            und_features,
            gen_features,
            quadruples,
            pairing_config,
            clustering_cfg=run_config.clustering_config(),
            client=client,
            model=model,
            config_echo=run_config.to_flat(),
        )
        paths: dict = pairing.write_pair_dataset(dataset, run_config.out_dir)
        paths["resolved_config"] = self.write_resolved_config(run_config)
        return {"counts": dataset.stats["counts"], "paths": paths}


class PairStatsHandler(Handler):
    """
    Summarize a pair dataset. With verify set, every threshold, weight
    and uniqueness violation fails the command.
    """

    def verification_delta(self, pairs_path: str) -> float:
        """
        Threshold to verify against: the --delta flag, else the delta echoed
        in the stats sidecar next to the dataset, else the default.
        """
        if self.args.get("delta") is not None:
            return float(self.args["delta"])
        sidecar: str = os.path.join(os.path.dirname(os.path.abspath(pairs_path)), constants.STATS_FILE)
        if os.path.exists(sidecar):
            echo: dict = utils.read_json(sidecar).get("config") or {}
            if "pairing.delta" in echo:
                return float(echo["pairing.delta"])
        return constants.DEFAULT_DELTA

    def handle(self) -> dict:
        """
        Read the dataset and compute its stats. Raise InvariantViolation on
        the first failed check when verifying. With --out, write the summary
        and the resolved config.
        """
        run_config: config.RunConfig = self.load_run_config()
        pairs_path: str = self.args["pairs_path"]
        records: list = pairing.read_pair_dataset(pairs_path)
        stats: dict = pairing.compute_stats(records)
        response: dict = {"stats": stats}
        if self.args.get("verify"):
            delta: float = self.verification_delta(pairs_path)
            violations: list = pairing.verify_pairs(records, delta)
            if violations:
                for violation in violations:
                    logger.error(violation)
                raise exceptions.InvariantViolation(
                    f"{len(violations)} violations in {pairs_path}, first: {violations[0]}"
                )
            response["verified"] = {"delta": delta, "violations": 0}
        if self.args.get("out_dir"):
            response["paths"] = {
                "summary": self.out_path(run_config, constants.STATS_SUMMARY_FILE),
                "resolved_config": self.write_resolved_config(run_config),
            }
            utils.atomic_write_text(response["paths"]["summary"], utils.dump_json(stats))
        return response


class TrainHandler(Handler):
    """
    Train the toy policy on the synthetic tasks derived from a pair dataset.
    """

    def handle(self) -> dict:
        """
        Run the configured objective and write the checkpoint, the training
        log and the resolved config.
        """
        run_config: config.RunConfig = self.load_run_config()
        records: list = pairing.read_pair_dataset(self.args["pairs_path"])
        result: training.TrainingResult = training.run_training(records, run_config)
        paths: dict = {
            "checkpoint": self.out_path(run_config, constants.CHECKPOINT_FILE),
            "log": self.out_path(run_config, constants.TRAIN_LOG_FILE),
        }
        policy.save_checkpoint(result.policy, paths["checkpoint"])
        training.write_training_log(result.rows, paths["log"])
        paths["resolved_config"] = self.write_resolved_config(run_config)
        return {
            "objective": run_config.train.objective,
            "sim_weight": run_config.grpo.sim_weight,
            "steps": len(result.rows),
            "final_combined_reward": training.combined_reward(result.rows[-1]),
            "paths": paths,
        }


class AgreementHandler(Handler):
    """
    Run the gradient agreement study over the configured regimes.
    """

    def handle(self) -> dict:
        """
        Run every configured regime and write the per-step cosines, the
        summary and the resolved config.
        """
        run_config: config.RunConfig = self.load_run_config()
        regimes: list = [constants.Regime(regime) for regime in run_config.agreement.regimes]
        result: analysis.AgreementResult = analysis.run_agreement_study(
            regimes, run_config.agreement.steps, run_config.seed, run_config
        )
        paths: dict = {
            "agreement": self.out_path(run_config, constants.AGREEMENT_FILE),
            "summary": self.out_path(run_config, constants.AGREEMENT_SUMMARY_FILE),
        }
        analysis.write_agreement(result, paths["agreement"], paths["summary"])
        paths["resolved_config"] = self.write_resolved_config(run_config)
        return {"summary": result.summary["regimes"], "paths": paths}


class RewardsSummaryHandler(Handler):
    """
    Smooth the per-side reward curves of a training log.
    """

    def handle(self) -> dict:
        """
        Write the smoothed reward curves and the resolved config.
        """
        run_config: config.RunConfig = self.load_run_config()
        rows: list = analysis.summarize_rewards(self.args["log_path"])
        path: str = self.out_path(run_config, constants.REWARD_SUMMARY_FILE)
        analysis.write_reward_summary(rows, path)
        return {
            "rows": len(rows),
            "final": {"und": rows[-1]["smoothed_und"], "gen": rows[-1]["smoothed_gen"]},
            "paths": {"summary": path, "resolved_config": self.write_resolved_config(run_config)},
        }


class SynthHandler(Handler):
    """
    Write a seeded synthetic corpus: understanding and generation feature
    files and the matching quadruple file.
    """

    def handle(self) -> dict:
        """
        Generate the corpus from the command arguments and the root seed.
        """
        run_config: config.RunConfig = self.load_run_config()
        corpus: synthetic.SyntheticCorpus = synthetic.make_synthetic_corpus(
            num_und=self.args.get("num_und", 24),
            num_gen=self.args.get("num_gen", 24),
            dim=self.args.get("dim", 8),
            centers=self.args.get("centers", 4),
            noise=self.args.get("noise", 0.15),
            seed=run_config.seed,
        )
        paths: dict = synthetic.write_corpus(corpus, run_config.out_dir)
        paths["resolved_config"] = self.write_resolved_config(run_config)
        return {"und": len(corpus.und), "gen": len(corpus.gen), "paths": paths}
