"""Exception hierarchy.

Validation failures (bad files, malformed configs, violated preconditions)
are distinguished from runtime failures so the command-line layer can map
them to distinct exit codes.
"""


class FlowvocError(Exception):
    """Base class for all package errors."""


class ValidationError(FlowvocError):
    """Invalid input data, configuration, or violated precondition."""


class AudioIOError(ValidationError):
    """Audio file is unreadable, empty, or uses an unsupported encoding."""


class CheckpointError(ValidationError):
    """Checkpoint archive is malformed, corrupt, or missing a component."""


class DivergenceError(FlowvocError):
    """Training produced a non-finite loss."""
