# builtins
import functools
import typing

# third party
import click

# modules
import src.constants as constants
import src.controller as cn
import src.utils as utils


controller: cn.Controller = cn.Controller()


def common_options(command: typing.Callable) -> typing.Callable:
    """
    --config, --seed, --out and --log-level on every command.
    """
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Flat dotted YAML config file.")
    @click.option("--seed", type=int, default=None, help="Root seed.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @click.option("--log-level", default="info", show_default=True,
                  type=click.Choice(["debug", "info", "warning", "error"], case_sensitive=False))
    @functools.wraps(command)
    def wrapper(config_path: str | None, seed: int | None, out_dir: str | None, log_level: str, **kwargs):
        utils.configure_logging(log_level)
        return command(
            base_params={"config_path": config_path, "overrides": {"seed": seed, "out_dir": out_dir}},
            **kwargs,
        )
    return wrapper


def dispatch(command: str, base_params: dict, args: dict, overrides: dict | None = None) -> None:
    request_params: dict = {
        "config_path": base_params["config_path"],
        "overrides": {**base_params["overrides"], **(overrides or {})},
        "args": args,
    }
    code: int = controller.handle(command, request_params)
    if code != constants.EXIT_OK:
        raise SystemExit(code)


@click.group()
def cli() -> None:
    """
    Aligned and retrieved UG pair construction, pair-weighted GRPO on a
    toy policy, and gradient agreement diagnostics.
    """


@cli.group()
def pair() -> None:
    """Build and inspect UG pair datasets."""


@pair.command("build")
@click.argument("und_features_path", type=click.Path(dir_okay=False))
@click.argument("gen_features_path", type=click.Path(dir_okay=False))
@click.argument("quadruples_path", type=click.Path(dir_okay=False))
@click.option("--delta", type=float, default=None, help="Similarity threshold for retrieved pairs.")
@click.option("--resume", is_flag=True, help="Reuse a matching cluster model from the output directory.")
@common_options
def pair_build(base_params: dict, und_features_path: str, gen_features_path: str, quadruples_path: str,
               delta: float | None, resume: bool) -> None:
    dispatch(
        "pair build",
        base_params,
        {
            "und_features_path": und_features_path,
            "gen_features_path": gen_features_path,
            "quadruples_path": quadruples_path,
            "resume": resume,
        },
        {"pairing.delta": delta},
    )


@pair.command("stats")
@click.argument("pairs_path", type=click.Path(dir_okay=False))
@click.option("--verify", is_flag=True, help="Fail with exit code 2 on any threshold or weight violation.")
@click.option("--delta", type=float, default=None, help="Threshold to verify against.")
@common_options
def pair_stats(base_params: dict, pairs_path: str, verify: bool, delta: float | None) -> None:
    dispatch(
        "pair stats",
        base_params,
        {"pairs_path": pairs_path, "verify": verify, "delta": delta, "out_dir": base_params["overrides"]["out_dir"]},
    )


@cli.command("train")
@click.argument("pairs_path", type=click.Path(dir_okay=False))
@click.option("--objective", type=click.Choice(constants.OBJECTIVES), default=None)
@click.option("--no-sim-weight", is_flag=True, help="Force every pair weight to 1.")
@common_options
def train(base_params: dict, pairs_path: str, objective: str | None, no_sim_weight: bool) -> None:
    dispatch(
        "train",
        base_params,
        {"pairs_path": pairs_path},
        {"train.objective": objective, "grpo.sim_weight": False if no_sim_weight else None},
    )


@cli.command("agreement")
@common_options
def agreement(base_params: dict) -> None:
    dispatch("agreement", base_params, {})


@cli.group()
def rewards() -> None:
    """Reward curve post-processing."""


@rewards.command("summarize")
@click.argument("log_path", type=click.Path(dir_okay=False))
@common_options
def rewards_summarize(base_params: dict, log_path: str) -> None:
    dispatch("rewards summarize", base_params, {"log_path": log_path})


@cli.command("synth")
@click.option("--num-und", type=int, default=24, show_default=True)
@click.option("--num-gen", type=int, default=24, show_default=True)
@click.option("--dim", type=int, default=8, show_default=True)
@click.option("--centers", type=int, default=4, show_default=True)
@click.option("--noise", type=float, default=0.15, show_default=True)
@common_options
def synth(base_params: dict, num_und: int, num_gen: int, dim: int, centers: int, noise: float) -> None:
    dispatch(
        "synth",
        base_params,
        {"num_und": num_und, "num_gen": num_gen, "dim": dim, "centers": centers, "noise": noise},
    )


if __name__ == "__main__":
    cli()
