"""
Correctness oracles for explored executions.

Trace oracles are small automata (`*Monitor`) advanced event by event; their
state is hashable so the explorer can fold it into the visited-state key. The
same monitors back the trace-replay functions (`mutex_oracle`,
`fair_oracle`, ...) used on recorded traces. State oracles look at a single
model state (`inv_oracle`, `deadlock_oracle`) or at one transition.
"""

import logging
from typing import NamedTuple, Optional

from modules.atomics import ALLOWED_TRANSITIONS, NULL, ProcessState
from modules.events import CasTarget, EventKind
from modules.lockfree_queue import FREE, STALE
from .model import HEAD, OWNER, TAIL

logger = logging.getLogger(__name__)

PROPERTIES = {
    'mutex': 'mutual exclusion',
    'fifo': 'FIFO',
    'safety': 'state safety',
    'inv': 'queue and ownership invariant',
    'deadlock': 'deadlock freedom',
    'queue': 'queue linearizability',
    'window': 'exclusion window',
    'automaton': 'process state automaton',
    'progress': 'owner progress',
    'divergence': 'divergence freedom',
    'scenario': 'resolution scenarios',
    'contract': 'operation contracts',
}

ORACLE_NAMES = tuple(PROPERTIES)

# Only meaningful when every process runs claim/release
MUTEX_ONLY = frozenset({'mutex', 'fifo', 'safety', 'window', 'automaton', 'progress', 'scenario'})

# Steps the holder may take to finish a release on its own
SOLO_RELEASE_BOUND = 64


class Violation(NamedTuple):
    oracle: str
    property: str
    message: str
    path: tuple = ()        # TraceEvents leading to the failure
    schedule: tuple = ()    # pids, one per step, replayable from the initial state


class OracleVerdict(NamedTuple):
    ok: bool
    violation: Optional[Violation] = None


def _violation(name, message, path=()):
    return OracleVerdict(False, Violation(name, PROPERTIES[name], message, tuple(path)))


# ---------------------------------------------------------------------------
# Trace monitors
# ---------------------------------------------------------------------------

class MutexMonitor:
    """At most one process between its grant and its release commit.

    State is (owner, releasing). The lock is considered free once the owner's
    release has dequeued it, since any later grant is ordered after that
    dequeue; without queue events the end of the release frees it.
    """

    name = 'mutex'

    def initial(self):
        return (NULL, False)

    def advance(self, mon, event, state_of=None):
        owner, releasing = mon
        kind, pid = event.kind, event.pid
        if kind is EventKind.END_CLAIM_GRANTED:
            if owner != NULL:
                return mon, f"end_claim_granted.{pid} while process {owner} holds the lock"
            return (pid, False), None
        if kind is EventKind.BEGIN_RELEASE:
            if pid != owner:
                return mon, f"begin_release.{pid} while the lock is held by {owner or 'nobody'}"
            return (owner, True), None
        if kind is EventKind.DEQUEUE_COMMIT and releasing and pid == owner:
            return (NULL, False), None
        if kind is EventKind.END_RELEASE and pid == owner:
            return (NULL, False), None
        return mon, None


class FairMonitor:
    """Grants follow the order in which claimants were enqueued."""

    name = 'fifo'

    def initial(self):
        return (frozenset(), ())

    def advance(self, mon, event, state_of=None):
        claims, waiting = mon
        kind = event.kind
        if kind is EventKind.BEGIN_CLAIM:
            if event.pid in claims:
                return mon, f"begin_claim.{event.pid} while its previous claim is pending"
            return (claims | {event.pid}, waiting), None
        if kind is EventKind.ENQUEUE_COMMIT:
            value = event.subject
            if value not in claims:
                return mon, f"enqueue_commit of {value} without a pending claim"
            if value in waiting:
                return mon, f"{value} enqueued twice"
            return (claims, waiting + (value,)), None
        if kind is EventKind.END_CLAIM_GRANTED:
            if not waiting or waiting[0] != event.pid:
                expected = waiting[0] if waiting else 'nobody'
                return mon, f"end_claim_granted.{event.pid} but {expected} was enqueued first"
            return (claims - {event.pid}, waiting[1:]), None
        return mon, None


class SafetyMonitor:
    """A process is ACTIVE right after its grant and right before its release."""

    name = 'safety'

    def initial(self):
        return None

    def advance(self, mon, event, state_of=None):
        if state_of is None:
            return mon, None
        kind = event.kind
        if kind is EventKind.END_CLAIM_GRANTED or kind is EventKind.BEGIN_RELEASE:
            state = state_of(event.pid)
            if state != ProcessState.ACTIVE:
                name = state.name if isinstance(state, ProcessState) else state
                return mon, f"{kind.value}.{event.pid} with state {name}"
        return mon, None


class WindowMonitor:
    """Nobody else is granted or releases between a grant and its release."""

    name = 'window'

    def initial(self):
        return NULL

    def advance(self, mon, event, state_of=None):
        kind, pid = event.kind, event.pid
        if kind is EventKind.END_CLAIM_GRANTED:
            if mon != NULL and mon != pid:
                return mon, f"end_claim_granted.{pid} inside the window of process {mon}"
            return pid, None
        if kind is EventKind.BEGIN_RELEASE:
            if mon != pid:
                return mon, f"begin_release.{pid} inside the window of process {mon or 'nobody'}"
            return NULL, None
        return mon, None


class QueueMonitor:
    """Sequential FIFO replay of queue commits."""

    name = 'queue'

    def __init__(self, initial_queue=()):
        self.initial_queue = tuple(initial_queue)

    def initial(self):
        return self.initial_queue

    def advance(self, mon, event, state_of=None):
        kind = event.kind
        if kind is EventKind.ENQUEUE_COMMIT:
            return mon + (event.subject,), None
        if kind is EventKind.DEQUEUE_COMMIT or kind is EventKind.PEEK_COMMIT:
            expected = mon[0] if mon else NULL
            if event.subject != expected:
                return mon, (f"{kind.value}.{event.pid} returned {event.subject}, "
                             f"sequential queue {list(mon)} gives {expected}")
            if kind is EventKind.DEQUEUE_COMMIT and mon:
                return mon[1:], None
        return mon, None


class AutomatonMonitor:
    """Every state change is an edge of the process automaton."""

    name = 'automaton'

    def initial(self):
        return None

    def advance(self, mon, event, state_of=None):
        if event.kind is EventKind.STATE_STORE:
            edge = (event.expected, event.new)
        elif event.kind is EventKind.CAS and event.target is CasTarget.STATE and event.success:
            edge = (event.expected, event.new)
        else:
            return mon, None
        if edge not in ALLOWED_TRANSITIONS:
            who = event.subject or event.pid
            return mon, (f"process {who} moved {getattr(edge[0], 'name', edge[0])} -> "
                         f"{getattr(edge[1], 'name', edge[1])}")
        return mon, None


MONITORS = {
    'mutex': MutexMonitor,
    'fifo': FairMonitor,
    'safety': SafetyMonitor,
    'window': WindowMonitor,
    'queue': QueueMonitor,
    'automaton': AutomatonMonitor,
}


def replay_monitor(monitor, trace, state_of_at=None):
    """Run `monitor` over `trace`; `state_of_at(i)` gives states after event i."""
    mon = monitor.initial()
    for i, event in enumerate(trace):
        state_of = state_of_at(i) if state_of_at is not None else None
        mon, message = monitor.advance(mon, event, state_of)
        if message is not None:
            return _violation(monitor.name, message, trace[:i + 1])
    return OracleVerdict(True)


def mutex_oracle(trace):
    return replay_monitor(MutexMonitor(), list(trace))


def fair_oracle(trace):
    return replay_monitor(FairMonitor(), list(trace))


def window_oracle(trace):
    return replay_monitor(WindowMonitor(), list(trace))


def queue_oracle(trace, initial_queue=()):
    return replay_monitor(QueueMonitor(initial_queue), list(trace))


def automaton_oracle(trace):
    return replay_monitor(AutomatonMonitor(), list(trace))


def safety_oracle(trace, states=None):
    """Check ACTIVE at grants and releases.

    `states[i]` maps pid -> ProcessState after event i. Without it the states
    are reconstructed from the state stores and successful state CASes in the
    trace, every process starting ACTIVE.
    """
    trace = list(trace)
    if states is None:
        states = []
        current = {}
        for event in trace:
            if event.kind is EventKind.STATE_STORE:
                current[event.subject or event.pid] = event.new
            elif event.kind is EventKind.CAS and event.target is CasTarget.STATE and event.success:
                current[event.subject] = event.new
            states.append(dict(current))

    def state_of_at(i):
        snapshot = states[i]
        return lambda pid: snapshot.get(pid, ProcessState.ACTIVE)

    return replay_monitor(SafetyMonitor(), trace, state_of_at)


# ---------------------------------------------------------------------------
# State oracles
# ---------------------------------------------------------------------------

def check_structure(sim, state):
    """Arena forms one well-formed list from head; tail is its last or second-last node."""
    mem = sim.memory(state)
    head, tail = state.cells[HEAD], state.cells[TAIL]
    if _stale(mem, head):
        return f"head {head} names a free node"
    refs = [head]
    seen = {head}
    nxt = mem.load_node(head)[1]
    while nxt is not None:
        if nxt in seen:
            return f"cycle in queue links at {nxt}"
        if _stale(mem, nxt):
            return f"queue links to freed node {nxt}"
        refs.append(nxt)
        seen.add(nxt)
        nxt = mem.load_node(nxt)[1]
    if tail not in seen:
        return f"tail {tail} is not reachable from head"
    if refs.index(tail) < len(refs) - 2:
        return f"tail {tail} lags more than one node behind"
    values = [mem.node_value(ref) for ref in refs[1:]]
    if NULL in values:
        return "NULL stored in the queue"
    if sim.mutex_workload and len(set(values)) != len(values):
        return f"duplicate process in queue {values}"
    private = sim.enqueuer_nodes(state)
    for slot in range(sim.capacity + 1):
        gen, value, _ = state.cells[mem.base + slot]
        if value == FREE:
            continue
        if (slot, gen) not in seen and (slot, gen) not in private:
            return f"slot {slot} is allocated but neither linked nor owned by an enqueue"
    return None


def _stale(mem, ref):
    return mem.load_node(ref) is STALE


def check_ownership(sim, state):
    """Exactly one of Unlocked, Claiming, Locked, Releasing holds."""
    owner = state.cells[OWNER]
    queue = sim.memory(state).queue_values()
    cases = []
    if owner == NULL and not queue:
        cases.append('Unlocked')
    if owner == NULL and queue and sim.activity(state, queue[0]) == 'claim':
        cases.append('Claiming')
    if owner != NULL and queue and owner == queue[0]:
        cases.append('Locked')
    if owner != NULL and owner not in queue:
        cases.append('Releasing')
    if len(cases) != 1:
        return (f"owner={owner} queue={list(queue)} satisfies "
                f"{' and '.join(cases) if cases else 'no ownership case'}")
    return None


def _check_cleared(pre, owner, events):
    for event in events:
        if (event.kind is EventKind.CAS and event.target is CasTarget.OWNER
                and event.success and event.new == NULL):
            frames = pre.procs[event.pid - 1].frames
            top = frames[-1] if frames else None
            if top is None or top.routine != 'release' or top.ret != NULL:
                return f"owner {owner} cleared by {event.pid} without observing an empty queue"
            return None
    return f"owner {owner} cleared without a release CAS"


def check_inv_transition(sim, pre, post, events):
    """Queue changes by one enqueue or one dequeue; handover goes to the head.

    The owner field is cleared only by a releaser that just saw the queue empty.
    """
    for event in events:
        if event.kind is EventKind.OWNER_STORE and event.line == 11 and event.expected != NULL:
            return f"owner store by {event.pid} overwrote owner {event.expected}"
    if pre.cells == post.cells:
        return None
    pre_q = sim.memory(pre).queue_values()
    post_q = sim.memory(post).queue_values()
    if len(post_q) == len(pre_q) + 1:
        if post_q[:-1] != pre_q:
            return f"enqueue rewrote the queue {list(pre_q)} -> {list(post_q)}"
    elif len(post_q) == len(pre_q) - 1:
        if post_q != pre_q[1:]:
            return f"dequeue did not remove the head {list(pre_q)} -> {list(post_q)}"
    elif post_q != pre_q:
        return f"queue changed shape {list(pre_q)} -> {list(post_q)}"
    for event in events:
        if event.kind is EventKind.ENQUEUE_COMMIT and (not post_q or post_q[-1] != event.subject):
            return f"enqueue of {event.subject} committed but tail holds {list(post_q)[-1:]}"
    if not sim.mutex_workload:
        return None
    owner, new_owner = pre.cells[OWNER], post.cells[OWNER]
    if owner != NULL and new_owner == NULL:
        return _check_cleared(pre, owner, events)
    if owner != NULL and owner not in pre_q and new_owner != owner:
        if not post_q or new_owner != post_q[0] or len(pre_q) < 1:
            return (f"ownership passed from {owner} to {new_owner} "
                    f"with queue {list(pre_q)} -> {list(post_q)}")
    return None


def inv_oracle(state, sim):
    message = check_structure(sim, state)
    if message is None and sim.mutex_workload:
        message = check_ownership(sim, state)
    if message is not None:
        return _violation('inv', message)
    return OracleVerdict(True)


def deadlock_oracle(state, sim):
    """A non-final state must have an enabled step."""
    if sim.is_final(state) or sim.enabled(state):
        return OracleVerdict(True)
    waiting = [pid for pid in range(1, sim.process_count + 1) if not sim.is_done(state, pid)]
    states = {pid: state.cells[2 + pid].name for pid in waiting}
    return _violation('deadlock', f"no enabled step; unfinished processes {states}")


class ProgressChecker:
    """The lock holder's release completes on its own steps alone."""

    def __init__(self, sim, bound=SOLO_RELEASE_BOUND):
        self.sim = sim
        self.bound = bound
        self._cache = {}

    def check(self, state):
        for pid in range(1, self.sim.process_count + 1):
            if not self.sim.holder(state, pid):
                continue
            key = (state.cells, state.procs[pid - 1])
            if key not in self._cache:
                self._cache[key] = self._solo_release(state, pid)
            if self._cache[key] is not None:
                return self._cache[key]
        return None

    def _solo_release(self, state, pid):
        start = state.procs[pid - 1].index
        for _ in range(self.bound):
            try:
                state = self.sim.successor(state, pid).state
            except Exception as e:
                return f"solo release of process {pid} failed: {e}"
            if state.procs[pid - 1].index > start:
                return None
        return f"release of process {pid} did not finish within {self.bound} solo steps"

