"""
Trace events emitted by the protocol and queue for the oracles and the CAS ledger.
"""

from enum import Enum
from typing import NamedTuple, Optional


class EventKind(str, Enum):
    BEGIN_CLAIM = 'begin_claim'
    END_CLAIM_GRANTED = 'end_claim_granted'
    END_CLAIM_DENIED = 'end_claim_denied'
    BEGIN_RELEASE = 'begin_release'
    END_RELEASE = 'end_release'
    ENQUEUE_COMMIT = 'enqueue_commit'
    DEQUEUE_COMMIT = 'dequeue_commit'
    PEEK_COMMIT = 'peek_commit'
    CAS = 'cas'
    LOAD = 'load'
    STATE_STORE = 'state_store'
    OWNER_STORE = 'owner_store'
    SCHEDULE_SIGNAL = 'schedule_signal'


class CasTarget(str, Enum):
    OWNER = 'owner'
    STATE = 'state'
    QUEUE_LINK = 'queue-link'
    QUEUE_TAIL = 'queue-tail'
    QUEUE_HEAD = 'queue-head'


class TraceEvent(NamedTuple):
    """One observable step.

    `pid` is always the process performing the step. `subject` is the process
    the step is about when that differs (the pid whose state a SCHEDULE CAS
    targets, the value carried by a queue commit). `line` is the algorithm
    line for protocol-level accesses, 0 for queue internals.
    """

    kind: EventKind
    pid: int
    target: Optional[CasTarget] = None
    expected: object = None
    new: object = None
    success: Optional[bool] = None
    line: int = 0
    subject: int = 0
    resumed: bool = False
    retry: bool = False

    def describe(self):
        """Short human-readable rendering used in counterexample dumps."""
        kind = self.kind.value
        if self.kind is EventKind.CAS:
            outcome = 'ok' if self.success else 'fail'
            where = f"@{self.line}" if self.line else ''
            about = f"[{self.subject}]" if self.target is CasTarget.STATE else ''
            return (f"{kind}.{self.pid} {self.target.value}{about} "
                    f"{_fmt(self.expected)}->{_fmt(self.new)} {outcome}{where}")
        if self.kind in (EventKind.STATE_STORE, EventKind.OWNER_STORE):
            return f"{kind}.{self.pid} {_fmt(self.expected)}->{_fmt(self.new)}@{self.line}"
        if self.kind in (EventKind.ENQUEUE_COMMIT, EventKind.DEQUEUE_COMMIT,
                         EventKind.PEEK_COMMIT, EventKind.SCHEDULE_SIGNAL):
            return f"{kind}.{self.pid}({self.subject})"
        if self.kind is EventKind.LOAD:
            return f"{kind}.{self.pid} {self.target.value if self.target else ''}={_fmt(self.new)}"
        if self.resumed:
            return f"{kind}.{self.pid} (resumed)"
        return f"{kind}.{self.pid}"

    def to_dict(self):
        return {
            'kind': self.kind.value,
            'pid': self.pid,
            'target': self.target.value if self.target else None,
            'expected': _plain(self.expected),
            'new': _plain(self.new),
            'success': self.success,
            'line': self.line,
            'subject': self.subject,
            'resumed': self.resumed,
            'retry': self.retry,
        }


def _plain(value):
    if isinstance(value, Enum):
        return value.name
    if isinstance(value, tuple):
        return list(value)
    return value


def _fmt(value):
    if isinstance(value, Enum):
        return value.name
    if value is None:
        return 'nil'
    return str(value)


def is_cas(event):
    return event.kind is EventKind.CAS
