"""
Exception hierarchy for the claim/release protocol and its verification tooling.
"""


class ProtocolError(Exception):
    """Base class for every fault raised by this package."""


class ContractViolation(ProtocolError):
    """A caller broke an operation precondition (re-entrant claim, foreign release, ...)."""

    def __init__(self, operation, pid, reason):
        self.operation = operation
        self.pid = pid
        self.reason = reason
        super().__init__(f"{operation}({pid}): {reason}")


class QueueCapacityError(ProtocolError):
    """The node arena has no free slot left."""


class LedgerError(ProtocolError):
    """A CAS event arrived while its issuing process had no open attempt."""


class UnclassifiedPathError(ProtocolError):
    """A claim took a branch path outside the ten resolution scenarios."""

    def __init__(self, signature, granted):
        self.signature = signature
        self.granted = granted
        super().__init__(
            f"claim path {signature!r} (granted={granted}) matches no resolution scenario"
        )


class DeadlockError(ProtocolError):
    """No runnable process is left while some processes have not terminated."""

    def __init__(self, message, dump=None):
        self.dump = dump or {}
        super().__init__(message)
