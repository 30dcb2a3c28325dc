"""Building blocks of the claim/release mutex."""

from .atomics import NULL, AtomicCell, ProcessState, StateTable
from .errors import ContractViolation, DeadlockError, ProtocolError
from .lockfree_queue import LockFreeQueue
from .protocol_core import SharedMutexState, claim, release, schedule, yield_until_scheduled
from .coop_scheduler import Runtime

__all__ = [
    'NULL', 'AtomicCell', 'ProcessState', 'StateTable',
    'ContractViolation', 'DeadlockError', 'ProtocolError',
    'LockFreeQueue', 'SharedMutexState', 'claim', 'release', 'schedule', 'yield_until_scheduled',
    'Runtime',
]
