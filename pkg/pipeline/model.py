"""
Finite model of the mutex for the interleaving explorer.

The whole shared memory is a flat tuple of cells:

    [owner, head, tail, state_1 .. state_N, slot_0 .. slot_C]

with arena slots laid out exactly as modules.lockfree_queue lays them out.
Each process carries its script position, its call stack of routine frames
and a running tally of its open attempt. Everything is a tuple so a model
state can be hashed for visited-state pruning.
"""

import logging
from typing import NamedTuple, Optional

from modules.atomics import NULL, ProcessState
from modules.events import EventKind
from modules.errors import QueueCapacityError
from modules.instrumentation import AttemptTally, record_of
from modules.lockfree_queue import FREE, STALE
from modules.machine import StepContext, is_enabled, step
from modules.protocol_core import DEFAULT_PROGRAM

logger = logging.getLogger(__name__)

OWNER, HEAD, TAIL = 0, 1, 2

CLAIM = ('claim',)
RELEASE = ('release',)
DEQUEUE = ('dequeue',)
PEEK = ('peek',)

_QUEUE_OPS = ('enqueue', 'dequeue', 'peek')


def enqueue_op(value):
    return ('enqueue', value)


def mutex_scripts(process_count, cycles):
    """Default workload: every process claims and releases `cycles` times."""
    return tuple((CLAIM, RELEASE) * cycles for _ in range(process_count))


def parse_op(text):
    """'claim', 'release', 'dequeue', 'peek' or 'enqueue <pid>' -> op tuple."""
    parts = text.split()
    if not parts:
        raise ValueError("empty operation")
    name = parts[0].lower()
    if name == 'enqueue':
        if len(parts) != 2 or not parts[1].isdigit() or int(parts[1]) == NULL:
            raise ValueError(f"enqueue needs a positive process id: {text!r}")
        return enqueue_op(int(parts[1]))
    if len(parts) != 1 or name not in ('claim', 'release', 'dequeue', 'peek'):
        raise ValueError(f"unknown operation: {text!r}")
    return (name,)


class ModelMemory:
    """Memory interface of the routines over a list of cells."""

    __slots__ = ('cells', 'process_count', 'base')

    def __init__(self, cells, process_count):
        self.cells = cells
        self.process_count = process_count
        self.base = 3 + process_count

    def load_owner(self):
        return self.cells[OWNER]

    def store_owner(self, value):
        old = self.cells[OWNER]
        self.cells[OWNER] = value
        return old

    def cas_owner(self, expected, new):
        if self.cells[OWNER] != expected:
            return False
        self.cells[OWNER] = new
        return True

    def load_state(self, pid):
        return self.cells[2 + pid]

    def store_state(self, pid, state):
        old = self.cells[2 + pid]
        self.cells[2 + pid] = state
        return old

    def cas_state(self, pid, expected, new):
        if self.cells[2 + pid] != expected:
            return False
        self.cells[2 + pid] = new
        return True

    def load_head(self):
        return self.cells[HEAD]

    def load_tail(self):
        return self.cells[TAIL]

    def cas_head(self, expected, new):
        if self.cells[HEAD] != expected:
            return False
        self.cells[HEAD] = new
        return True

    def cas_tail(self, expected, new):
        if self.cells[TAIL] != expected:
            return False
        self.cells[TAIL] = new
        return True

    def load_node(self, ref):
        gen, value, nxt = self.cells[self.base + ref[0]]
        if gen != ref[1] or value == FREE:
            return STALE
        return value, nxt

    def node_value(self, ref):
        node = self.load_node(ref)
        return STALE if node is STALE else node[0]

    def cas_next(self, ref, expected, new):
        index = self.base + ref[0]
        gen, value, nxt = self.cells[index]
        if gen != ref[1] or value == FREE or nxt != expected:
            return False
        self.cells[index] = (gen, value, new)
        return True

    def alloc(self, value):
        for slot in range(len(self.cells) - self.base):
            gen, current, _ = self.cells[self.base + slot]
            if current == FREE:
                self.cells[self.base + slot] = (gen, value, None)
                return slot, gen
        raise QueueCapacityError(f"model arena full while enqueuing {value}")

    def free(self, ref):
        self.cells[self.base + ref[0]] = (ref[1] + 1, FREE, None)

    # Inspection -------------------------------------------------------------

    def queue_values(self):
        """Abstract queue contents, head first."""
        values = []
        node = self.load_node(self.cells[HEAD])
        while node is not STALE and node[1] is not None and len(values) <= len(self.cells):
            node = self.load_node(node[1])
            if node is STALE:
                break
            values.append(node[0])
        return tuple(values)


class ProcState(NamedTuple):
    index: int = 0
    frames: tuple = ()
    attempt: Optional[AttemptTally] = None
    results: tuple = ()


class ModelState(NamedTuple):
    cells: tuple
    procs: tuple


class ClosedAttempt(NamedTuple):
    pid: int
    kind: str
    tally: AttemptTally
    granted: Optional[bool]


class Transition(NamedTuple):
    state: ModelState
    events: list
    closed: list


class Simulation:
    """Single-step semantics of a workload over the model memory.

    `scripts[i]` is the operation list of process i + 1. Processes start
    ACTIVE; `initial_queue` pre-populates the wait queue (queue workloads).
    """

    def __init__(self, scripts, program=DEFAULT_PROGRAM, initial_queue=(), capacity=None):
        self.scripts = tuple(tuple(s) for s in scripts)
        self.process_count = len(self.scripts)
        self.program = program
        self.initial_queue = tuple(initial_queue)
        self.mutex_workload = all(op[0] not in _QUEUE_OPS for s in self.scripts for op in s)
        if capacity is None:
            enqueues = sum(1 for s in self.scripts for op in s if op[0] == 'enqueue')
            capacity = max(self.process_count, len(self.initial_queue) + enqueues, 1)
        self.capacity = capacity

    # State construction ---------------------------------------------------

    def initial_state(self):
        n = self.process_count
        slots = [(0, FREE, None)] * (self.capacity + 1)
        slots[0] = (0, NULL, None)
        tail = 0
        for slot, value in enumerate(self.initial_queue, start=1):
            slots[slot - 1] = (0, slots[slot - 1][1], (slot, 0))
            slots[slot] = (0, value, None)
            tail = slot
        cells = (NULL, (0, 0), (tail, 0)) + (ProcessState.ACTIVE,) * n + tuple(slots)
        return ModelState(cells, (ProcState(),) * n)

    def memory(self, state, writable=False):
        cells = list(state.cells) if writable else state.cells
        return ModelMemory(cells, self.process_count)

    # Enabledness ----------------------------------------------------------

    def is_done(self, state, pid):
        proc = state.procs[pid - 1]
        return not proc.frames and proc.index >= len(self.scripts[pid - 1])

    def is_final(self, state):
        return all(self.is_done(state, pid) for pid in range(1, self.process_count + 1))

    def enabled(self, state):
        mem = self.memory(state)
        pids = []
        for pid in range(1, self.process_count + 1):
            proc = state.procs[pid - 1]
            if not proc.frames:
                if proc.index < len(self.scripts[pid - 1]):
                    pids.append(pid)
            elif is_enabled(self.program, proc.frames, mem):
                pids.append(pid)
        return pids

    # Stepping -------------------------------------------------------------

    def current_op(self, state, pid):
        proc = state.procs[pid - 1]
        script = self.scripts[pid - 1]
        return script[proc.index] if proc.index < len(script) else None

    def _start(self, op, pid):
        routine = self.program[op[0]]
        if op[0] in ('claim', 'release'):
            return routine.frame(pid)
        if op[0] == 'enqueue':
            return routine.frame(op[1])
        return routine.frame()

    def successor(self, state, pid):
        """Execute one atomic step of `pid`. Protocol faults propagate."""
        proc = state.procs[pid - 1]
        op = self.current_op(state, pid)
        frames = proc.frames or (self._start(op, pid),)
        bottom = frames[0].routine
        mem = self.memory(state, writable=True)
        ctx = StepContext(pid, mem)
        result = step(self.program, frames, ctx)
        events = ctx.events

        attempt = proc.attempt
        closed = []
        for event in events:
            kind = event.kind
            if kind is EventKind.BEGIN_CLAIM or kind is EventKind.BEGIN_RELEASE:
                attempt = AttemptTally()
            elif kind is EventKind.CAS or kind is EventKind.OWNER_STORE:
                if attempt is not None:
                    attempt = attempt.add(record_of(event))
            elif kind is EventKind.END_CLAIM_GRANTED or kind is EventKind.END_CLAIM_DENIED:
                if not event.resumed:
                    closed.append(ClosedAttempt(pid, 'claim', attempt or AttemptTally(),
                                                kind is EventKind.END_CLAIM_GRANTED))
                    attempt = None
            elif kind is EventKind.END_RELEASE:
                closed.append(ClosedAttempt(pid, 'release', attempt or AttemptTally(), None))
                attempt = None

        index, results = proc.index, proc.results
        frames = result.frames
        if result.done:
            if bottom == 'claim' and result.value is False:
                frames = (self.program['yield'].frame(pid),)
            else:
                index += 1
                if op[0] in _QUEUE_OPS:
                    results += (result.value,)
        new_proc = ProcState(index, frames, attempt, results)
        procs = state.procs[:pid - 1] + (new_proc,) + state.procs[pid:]
        return Transition(ModelState(tuple(mem.cells), procs), events, closed)

    # Queries used by the oracles -----------------------------------------

    def holder(self, state, pid):
        """True if `pid` holds the lock: owner, ACTIVE and about to release."""
        proc = state.procs[pid - 1]
        if proc.frames or self.current_op(state, pid) != RELEASE:
            return False
        return state.cells[OWNER] == pid and state.cells[2 + pid] == ProcessState.ACTIVE

    def activity(self, state, pid):
        """Name of the routine at the bottom of pid's stack, or None when idle."""
        proc = state.procs[pid - 1]
        return proc.frames[0].routine if proc.frames else None

    def enqueuer_nodes(self, state):
        """Arena refs allocated by in-flight enqueues that are not linked yet."""
        refs = set()
        for proc in state.procs:
            for frame in proc.frames:
                if frame.routine == 'enqueue' and frame.regs.node is not None:
                    refs.add(frame.regs.node)
        return refs

    def replay(self, pids, state=None):
        """Re-run a schedule from `state` (default: initial).

        Returns (events, final state, exception or None); stops at the first
        protocol fault.
        """
        state = state or self.initial_state()
        events = []
        for pid in pids:
            try:
                transition = self.successor(state, pid)
            except Exception as e:
                return events, state, e
            events.extend(transition.events)
            state = transition.state
        return events, state, None
