# builtins
import unittest

# modules
import src.constants as constants
import src.controller as controller
import src.exceptions as exceptions


class TestExitCodes(unittest.TestCase):

    def test_input_errors(self) -> None:
        for error in (
            exceptions.SchemaError("bad line", "pairs.jsonl", 3),
            exceptions.MalformedRequest("template_id must not be empty"),
            exceptions.MalformedCompletion("augmentation response is not an object"),
            exceptions.InvariantViolation("weight"),
        ):
            self.assertEqual(controller.exit_code_for(error), constants.EXIT_SCHEMA, msg=type(error).__name__)

    def test_config_and_io_errors(self) -> None:
        self.assertEqual(controller.exit_code_for(exceptions.ConfigError("steps")), constants.EXIT_CONFIG)
        self.assertEqual(controller.exit_code_for(exceptions.UnknownScorer("clip")), constants.EXIT_CONFIG)
        self.assertEqual(controller.exit_code_for(FileNotFoundError("absent")), constants.EXIT_IO)
        self.assertEqual(controller.exit_code_for(exceptions.ClientUnavailable("down")), constants.EXIT_IO)

    def test_anything_else(self) -> None:
        self.assertEqual(controller.exit_code_for(RuntimeError("boom")), constants.EXIT_FAILURE)
        self.assertEqual(controller.exit_code_for(exceptions.UnknownCommand("x")), constants.EXIT_FAILURE)


if __name__ == "__main__":
    unittest.main()
