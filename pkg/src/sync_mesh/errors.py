"""Exception hierarchy for sync_mesh."""


class SyncMeshError(Exception):
    """Base class for all sync_mesh errors."""


# --- graph construction -------------------------------------------------

class GraphError(SyncMeshError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class DisconnectedGraph(GraphError):
    pass


class NonPositiveWeight(GraphError):
    pass


class NonPositiveGain(SyncMeshError):
    pass


class InvalidRange(SyncMeshError):
    pass


# --- coupling functions -------------------------------------------------

class BOutOfRange(SyncMeshError):
    pass


class NoBreakpointRoot(SyncMeshError):
    pass


# --- oscillator banks ---------------------------------------------------

class OutOfImage(SyncMeshError):
    pass


class OutOfJ(SyncMeshError):
    pass


class MalformedBank(SyncMeshError):
    """Bisection bracket expansion exceeded its iteration cap."""


class AssumptionA7Violated(SyncMeshError):
    pass


# --- dynamics -----------------------------------------------------------

class NonFiniteState(SyncMeshError):
    pass


# --- analysis -----------------------------------------------------------

class NewtonDiverged(SyncMeshError):
    pass


class SingularJacobian(SyncMeshError):
    pass


class NotAnEquilibrium(SyncMeshError):
    pass


class EigenFailure(SyncMeshError):
    pass


# --- cli / configuration ------------------------------------------------

class ConfigParseError(SyncMeshError):
    pass


class ValidationFailed(SyncMeshError):
    """Raised when a run is aborted by a failing validator.

    Carries the offending ValidationReport in ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
