"""Exception hierarchy for the solver."""


class Topp3Error(Exception):
    """Base class for all solver errors."""


class DomainError(Topp3Error, ValueError):
    """Path parameter outside ``[0, s_end]``."""


class DegeneratePathError(Topp3Error):
    pass


class InconsistentBoundaryError(Topp3Error):
    pass


class ProfileRangeError(Topp3Error, ValueError):
    """Query outside the s-range covered by a profile."""


class PreconditionError(Topp3Error, ValueError):
    pass


class NonConvergence(Topp3Error):
    pass


class NoOverlapWindow(Topp3Error):
    pass


class DefectStalled(Topp3Error):
    pass


class EmptySingularCurve(Topp3Error):
    pass


class UnsupportedDoubleZero(Topp3Error):
    pass


class SingularJerkUndefined(Topp3Error):
    pass


class NoConnection(Topp3Error):
    pass


class ExtensionFailed(Topp3Error):
    def __init__(self, msg, s_star=None):
        super().__init__(msg)
        self.s_star = s_star


class InfeasibleBoundary(Topp3Error):
    pass


class SchemaError(Topp3Error, ValueError):
    pass
