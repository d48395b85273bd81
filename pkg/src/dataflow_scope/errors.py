"""Exception hierarchy shared by the simulators, trace codec and attack."""


class DataflowScopeError(Exception):
    pass


class InvalidGeometry(DataflowScopeError, ValueError):
    pass


class UnknownModel(DataflowScopeError, KeyError):
    pass


class EncodingError(DataflowScopeError, ValueError):
    pass


class TruncatedTrace(DataflowScopeError):
    """The collected cycle prefix ends before the targeted event."""


class TooLarge(DataflowScopeError):
    pass


class BoundaryUndetectable(DataflowScopeError):
    pass


class MalformedTrace(DataflowScopeError, ValueError):
    pass


class NotAnFcLayer(DataflowScopeError, ValueError):
    pass


class NoCandidates(DataflowScopeError):
    def __init__(self, message, audit=None):
        super().__init__(message)
        self.audit = list(audit or [])


class NoPoolSolution(DataflowScopeError):
    pass


class RecoveryFailed(DataflowScopeError):
    def __init__(self, message, audit=None):
        super().__init__(message)
        self.audit = list(audit or [])
