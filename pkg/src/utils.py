"""
Utility tools shared by the pairing, training and analysis modules:
logging setup, seed splitting, atomic file writes and JSON Lines reading.
"""

# builtins
import json
import logging
import os
import tempfile
import typing
import zlib

# third party
import numpy as np

# modules
import src.exceptions as exceptions


LOG_FORMAT: str = "[%(asctime)s] [%(process)d] [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: str = "info") -> None:
    """
    Install one stderr handler on the root logger.
    Calling it twice replaces the handler instead of stacking a second one.
    """
    numeric_level: int = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise exceptions.ConfigError(f"Unknown log level: {level}")
    root: logging.Logger = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_ugpair_handler", False):
            root.removeHandler(handler)
    handler: logging.Handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._ugpair_handler = True
    root.addHandler(handler)
    root.setLevel(numeric_level)


def _seed_sequence(root_seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=int(root_seed),
        spawn_key=(zlib.crc32(name.encode("utf-8")),),
    )


def derive_seed(root_seed: int, name: str) -> int:
    """
    Derive a 64-bit subsystem seed from the root seed and a subsystem name.
    Same inputs give the same seed on every platform.
    """
    state: np.ndarray = _seed_sequence(root_seed, name).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(root_seed: int, name: str) -> np.random.Generator:
    """
    Counter-based random stream for one subsystem.
    """
    return np.random.Generator(np.random.Philox(_seed_sequence(root_seed, name)))


def atomic_write_text(path: str, text: str) -> None:
    """
    Write text to a temporary file next to path and rename it into place,
    so readers never observe a partial file.
    """
    directory: str = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def dump_json(payload: typing.Any) -> str:
    """
    Deterministic JSON text used for every JSON artifact.
    """
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dump_jsonl(records: typing.Iterable[dict]) -> str:
    return "".join(json.dumps(record, ensure_ascii=False) + "\n" for record in records)


def read_jsonl(path: str) -> typing.Iterator[tuple[int, dict]]:
    """
    Yield (line number, object) for every non-blank line.
    Raises SchemaError anchored at the offending line for invalid JSON
    or a line that is not a JSON object.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record: typing.Any = json.loads(line)
            except json.JSONDecodeError as je:
                raise exceptions.SchemaError(f"invalid json: {je.msg}", path, line_number)
            if not isinstance(record, dict):
                raise exceptions.SchemaError("record is not an object", path, line_number)
            yield line_number, record


def read_json(path: str) -> typing.Any:
    """
    Read one JSON document.
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as je:
            raise exceptions.SchemaError(f"invalid json: {je.msg}", path, je.lineno)
