"""Exception types raised across the planning stack."""


class AeromeshError(Exception):
    """Base class for all library errors."""


class CoincidentPositions(AeromeshError):
    pass


class NonPositiveDistance(AeromeshError):
    pass


class DemandUnsatisfiableAtAnyRange(AeromeshError):
    pass


class SingularDesign(AeromeshError):
    pass


class DisconnectedRoute(AeromeshError):
    pass


class UnknownSession(AeromeshError):
    pass


class Infeasible(AeromeshError):
    """No configuration meets the requested satisfaction level."""


class NoOrientation(AeromeshError):
    pass


class ScenarioInvalid(AeromeshError):
    pass


class ParseError(AeromeshError):
    """Malformed input file. ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
