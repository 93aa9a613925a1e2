# builtins
import json
import logging
import typing

# third party
import click

# modules
import src.constants as constants
import src.exceptions as exceptions
import src.handlers as handlers


logger: logging.Logger = logging.getLogger(__name__)

HANDLERS_MAP: dict = {
    "pair build": handlers.PairBuildHandler,
    "pair stats": handlers.PairStatsHandler,
    "train": handlers.TrainHandler,
    "agreement": handlers.AgreementHandler,
    "rewards summarize": handlers.RewardsSummaryHandler,
    "synth": handlers.SynthHandler,
}

# checked in order, first match wins
EXIT_CODES: tuple = (
    (
        (
            exceptions.SchemaError,
            exceptions.DuplicateId,
            exceptions.DimMismatch,
            exceptions.ZeroVector,
            exceptions.MissingQuadruple,
            exceptions.TooFewPoints,
            exceptions.ModelMismatch,
            exceptions.InvariantViolation,
            exceptions.MalformedLog,
            exceptions.MalformedRequest,
            exceptions.MalformedCompletion,
        ),
        constants.EXIT_SCHEMA,
    ),
    ((exceptions.ConfigError, exceptions.UnknownScorer), constants.EXIT_CONFIG),
    ((OSError, exceptions.ClientUnavailable), constants.EXIT_IO),
)


def exit_code_for(error: Exception) -> int:
    """
    Exit code of the first EXIT_CODES entry the error is an instance of.
    Unmapped errors give EXIT_FAILURE.
    """
    for kinds, code in EXIT_CODES:
        if isinstance(error, kinds):
            return code
    return constants.EXIT_FAILURE


class Controller:
    """
    Controls the command logic.
    1. Looks up the handler of the command.
    2. Sends the request params to it.
    3. Prints the response of the handler.
    4. Maps exceptions to exit codes.
    """

    def handle(self, command: str, request_params: dict) -> int:
        """
        Run one command and return its exit code.
        """
        try:
            handler: typing.Any = HANDLERS_MAP.get(command)
            if not handler:
                raise exceptions.UnknownCommand(f"Invalid command: {command}")
            response: dict = handler(request_params=request_params).handle()
            click.echo(json.dumps({"response": response}, sort_keys=True))
            return constants.EXIT_OK
        except Exception as e:
            code: int = exit_code_for(e)
            logger.debug("%s failed with exit code %d", command, code, exc_info=True)
            click.echo(json.dumps({"error": f"{type(e).__name__}: {e}"}), err=True)
            return code
