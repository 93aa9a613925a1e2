class ZeroVector(Exception):
    """
    When a vector with (near) zero norm is normalized.
    Signals a degenerate embedding the caller must drop.
    """
    pass


class DimMismatch(Exception):
    """
    When two vectors or feature sets disagree on dimension.
    """
    pass


class SchemaError(Exception):
    """
    When a record in an input file does not conform to its schema.
    Carries the path and line number so the message is line-anchored.
    """

    def __init__(self, reason: str, path: str = "", line: int | None = None) -> None:
        self.reason: str = reason
        self.path: str = path
        self.line: int | None = line
        location: str = path
        if line is not None:
            location = f"{path}:{line}"
        super().__init__(f"{location}: {reason}" if location else reason)


class DuplicateId(Exception):
    """
    When an id appears twice within one source split.
    """
    pass


class TooFewPoints(Exception):
    """
    When clustering is asked for more clusters than there are points.
    """
    pass


class ModelMismatch(Exception):
    """
    When a cluster model references ids the feature set does not contain,
    or the other way round.
    """
    pass


class MissingQuadruple(Exception):
    """
    When a feature id has no quadruple record.
    """

    def __init__(self, key: str) -> None:
        self.key: str = key
        super().__init__(f"no quadruple for feature id {key}")


class MalformedRequest(Exception):
    """
    When an augmentation request lacks the fields its direction needs.
    """
    pass


class ClientUnavailable(Exception):
    """
    When the augmentation client cannot be reached.
    """
    pass


class MalformedCompletion(Exception):
    """
    When the augmentation client answers without a required field.
    """
    pass


class UnknownScorer(Exception):
    """
    When a generation scorer id is not in the registry.
    """
    pass


class IndexOutOfRange(Exception):
    """
    When a prompt row or token id lies outside the policy table.
    """
    pass


class InvalidTrajectory(Exception):
    """
    When a trajectory breaks its length or finiteness invariants.
    """
    pass


class InvalidBatch(Exception):
    """
    When an objective receives a batch it cannot group as required.
    """
    pass


class PolicyMismatch(Exception):
    """
    When trajectories cannot be scored by the policy,
    e.g. token ids out of vocabulary.
    """
    pass


class NonFiniteGradient(Exception):
    """
    When an update step receives a gradient with NaN or inf entries.
    """
    pass


class ShapeMismatch(Exception):
    """
    When two gradient arrays do not share a shape.
    """
    pass


class MalformedLog(Exception):
    """
    When a training log cannot be parsed.
    """
    pass


class ConfigError(Exception):
    """
    When a configuration value is invalid, unknown, or conflicts with another.
    """
    pass


class InvariantViolation(Exception):
    """
    When a generated pair dataset breaks the threshold, weight or uniqueness laws.
    """
    pass


class UnknownCommand(Exception):
    """
    When the controller is asked for a command no handler is registered for.
    """
    pass
