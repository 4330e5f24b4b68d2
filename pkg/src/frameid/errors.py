"""Exception hierarchy shared by every frameid module.

Each class carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class FrameIdError(Exception):
    exit_code = 1


class ContractError(FrameIdError, ValueError):
    """A function was called outside its documented preconditions."""

    exit_code = 2


class ParseError(FrameIdError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ResolutionError(FrameIdError, KeyError):
    """A name (frame, lexical unit) could not be resolved in the lexicon."""

    exit_code = 3

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UnknownLUError(ResolutionError):
    pass


class ConflictError(FrameIdError, ValueError):
    exit_code = 3


class ValidationError(FrameIdError, ValueError):
    exit_code = 2


class AlignmentError(FrameIdError, ValueError):
    """A target span does not overlap any token."""

    exit_code = 3


class TruncationError(FrameIdError, ValueError):
    """The whole target lies beyond the max sequence length."""

    exit_code = 3


class NonFiniteError(FrameIdError, FloatingPointError):
    exit_code = 3


class CheckpointError(FrameIdError):
    exit_code = 4
