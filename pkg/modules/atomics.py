"""
Atomic cells, process identifiers and the process state automaton.

CPython exposes no user-level compare-and-swap, so each cell serialises its
own load/store/CAS with a private lock held only for the duration of the
single memory operation. The protocol never waits on these locks for another
process to make progress; they stand in for one hardware instruction each.
All operations are sequentially consistent.
"""

from enum import IntEnum
from threading import Lock

# Reserved process id; never assigned to a process.
NULL = 0


class ProcessState(IntEnum):
    """Cooperative process states."""

    ACTIVE = 1
    ENGAGING = 2
    WAITING = 3
    SCHEDULED = 4


# Every legal edge of the process automaton: (from, to) -> label
ALLOWED_TRANSITIONS = {
    (ProcessState.ACTIVE, ProcessState.ENGAGING): 'claim',
    (ProcessState.ENGAGING, ProcessState.ACTIVE): 'claimed',
    (ProcessState.ENGAGING, ProcessState.WAITING): 'not claimed',
    (ProcessState.ENGAGING, ProcessState.SCHEDULED): 'schedule',
    (ProcessState.WAITING, ProcessState.SCHEDULED): 'schedule',
    (ProcessState.SCHEDULED, ProcessState.ACTIVE): 'run',
}


def is_allowed_transition(old, new):
    """True if old -> new is an edge of the automaton."""
    return (old, new) in ALLOWED_TRANSITIONS


def is_valid_pid(pid):
    """Process ids are positive integers; NULL is never a claimant."""
    return isinstance(pid, int) and not isinstance(pid, bool) and pid > NULL


class AtomicCell:
    """A single shared word supporting load, store, exchange and CAS."""

    __slots__ = ('_value', '_lock')

    def __init__(self, initial_value=None):
        self._value = initial_value
        self._lock = Lock()

    def __repr__(self):
        return f"AtomicCell[value={self._value!r}]"

    def load(self):
        with self._lock:
            return self._value

    def store(self, value):
        with self._lock:
            self._value = value

    def exchange(self, value):
        """Store value and return the value it replaced."""
        with self._lock:
            old = self._value
            self._value = value
            return old

    def compare_and_set(self, expected_value, new_value):
        with self._lock:
            if self._value == expected_value:
                self._value = new_value
                return True
            return False


class StateTable:
    """One ProcessState cell per process id.

    Owned by the runtime; every mutex the processes touch shares the table,
    since a process has exactly one state whatever it is claiming.
    """

    def __init__(self):
        self._cells = {}
        self._lock = Lock()

    def register(self, pid, state=ProcessState.SCHEDULED):
        if not is_valid_pid(pid):
            raise ValueError(f"invalid process id: {pid!r}")
        with self._lock:
            if pid in self._cells:
                raise ValueError(f"process id {pid} already registered")
            self._cells[pid] = AtomicCell(state)

    def cell(self, pid):
        try:
            return self._cells[pid]
        except KeyError:
            raise KeyError(f"unknown process id {pid}") from None

    def load(self, pid):
        return self.cell(pid).load()

    def snapshot(self):
        """Plain dict of pid -> state, for dumps and assertions."""
        with self._lock:
            pids = sorted(self._cells)
        return {pid: self._cells[pid].load() for pid in pids}

    def __contains__(self, pid):
        return pid in self._cells

    def __len__(self):
        return len(self._cells)
