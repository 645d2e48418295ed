"""Exception types shared across the toolkit."""

from __future__ import annotations


class GreetcueError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(GreetcueError):
    """A frame or feature block has the wrong cardinality or value range.

    ``block`` names the offending block (e.g. "body", "face", "blendshapes").
    """

    def __init__(self, block: str, message: str):
        self.block = block
        super().__init__(f"{block}: {message}")


class RecordingParseError(GreetcueError):
    """A recording file could not be parsed; carries the 1-based line number."""

    def __init__(self, path: str, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class InvariantViolation(GreetcueError):
    """A domain invariant failed; carries session/frame context when known."""

    def __init__(self, message: str, session_id: str | None = None,
                 frame_index: int | None = None):
        self.session_id = session_id
        self.frame_index = frame_index
        ctx = ""
        if session_id is not None:
            ctx += f" [session={session_id}"
            ctx += f", frame={frame_index}]" if frame_index is not None else "]"
        super().__init__(message + ctx)


class DimensionMismatch(GreetcueError):
    """An input does not match a model's declared feature dimension."""


class TrainingDivergence(GreetcueError):
    """Training produced a non-finite loss; carries the offending epoch."""

    def __init__(self, epoch: int, loss_repr: str):
        self.epoch = epoch
        super().__init__(
            f"non-finite training loss ({loss_repr}) at epoch {epoch}; "
            "try a smaller learning rate"
        )


class ConvergenceError(GreetcueError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
