"""Exception hierarchy shared by every graphlite module."""


class GraphLiteError(Exception):
    """Base class for all graphlite errors."""


class GraphBuildError(GraphLiteError, ValueError):
    def __init__(self, edge, message):
        self.edge = edge
        super().__init__(f"{message}: {edge!r}")


class DuplicateEdge(GraphBuildError):
    def __init__(self, edge):
        super().__init__(edge, "duplicate edge")


class SelfLoop(GraphBuildError):
    def __init__(self, edge):
        super().__init__(edge, "self loop")


class EndpointOutOfRange(GraphBuildError, IndexError):
    def __init__(self, edge):
        super().__init__(edge, "endpoint out of range")


class AccessViolation(GraphLiteError):
    """Raised when an update function touches data outside its access mask."""

    def __init__(self, datum, model, access="write"):
        self.datum = datum
        self.model = model
        self.access = access
        super().__init__(f"{access} access to {datum!r} not permitted under {model} consistency")


class DoubleCommit(GraphLiteError):
    pass


class KOutOfRange(GraphLiteError, ValueError):
    pass


class MachinesOutOfRange(GraphLiteError, ValueError):
    pass


class MissingAtom(GraphLiteError):
    pass


class InconsistentAtoms(GraphLiteError):
    pass


class NotOwned(GraphLiteError):
    pass


class DoubleRelease(GraphLiteError):
    pass


class PeerUnreachable(GraphLiteError):
    pass


class InvalidColoring(GraphLiteError, ValueError):
    pass


class ReplayMismatch(GraphLiteError):
    """The sequential replay diverged from the engine's final graph."""

    def __init__(self, datum, expected=None, actual=None):
        self.datum = datum
        self.expected = expected
        self.actual = actual
        super().__init__(f"replay diverged at {datum!r}")


class SingularSystem(GraphLiteError, ArithmeticError):
    pass


class ZeroMass(GraphLiteError, ArithmeticError):
    pass


class BadParams(GraphLiteError, ValueError):
    pass


class EngineAborted(GraphLiteError):
    """A peer machine failed and the run was torn down."""
