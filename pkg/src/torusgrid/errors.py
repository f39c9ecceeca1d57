"""Exception types shared across the package."""


class DiagramError(ValueError):
    """Base class for invalid diagram data."""


class SizeTooSmall(DiagramError):
    pass


class NotBijection(DiagramError):
    pass


class CoincidentVertices(DiagramError):
    pass


class GridSyntaxError(DiagramError):
    """Unparseable diagram text."""


class InvalidMove(ValueError):
    pass


class InvalidStep(InvalidMove):
    """A step in a move sequence does not apply to the diagram it reached."""

    def __init__(self, index, reason=""):
        msg = f"step {index} invalid"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.index = index


class CapExceeded(RuntimeError):
    pass


class NotSameType(ValueError):
    pass


class InternalNoProgress(RuntimeError):
    """Connection search failed to reduce its measure; indicates a bug."""


class PreconditionViolated(ValueError):
    pass


class InvalidFrontMove(ValueError):
    pass
