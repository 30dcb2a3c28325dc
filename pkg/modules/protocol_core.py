"""
Spin-free claim/release mutex for cooperatively scheduled processes.

A claimant enqueues itself on the wait queue, then makes one pass over the
owner field and its own state word. It either becomes the owner or parks in
WAITING, after which the releasing owner hands the lock over by CASing the
owner field to the queue head and SCHEDULING it. No code path loops on a
shared location.

The routines below are step machines (modules.machine). `claim`, `release`
and `schedule` run them to completion against a `SharedMutexState`; the
interleaving explorer runs the very same routines one access at a time.
"""

import logging
from typing import NamedTuple

from .atomics import AtomicCell, NULL, ProcessState, StateTable, is_allowed_transition, is_valid_pid
from .errors import ContractViolation
from .events import CasTarget, EventKind
from .lockfree_queue import QUEUE_ROUTINES, LockFreeQueue
from .machine import Call, Goto, Return, Routine, StepContext, run, step

logger = logging.getLogger(__name__)

ACTIVE = ProcessState.ACTIVE
ENGAGING = ProcessState.ENGAGING
WAITING = ProcessState.WAITING
SCHEDULED = ProcessState.SCHEDULED


class RuntimeHooks:
    """Callbacks into the cooperative runtime.

    `on_wait(pid)` fires when `pid` is about to park in WAITING;
    `on_schedule(pid)` fires after a WAITING -> SCHEDULED transition of `pid`
    and must make the process runnable again.
    """

    def on_wait(self, pid):
        pass

    def on_schedule(self, pid):
        pass


class ClaimOutcome(NamedTuple):
    pid: int
    granted: bool


# ---------------------------------------------------------------------------
# Claim (one pass, never blocks)
# ---------------------------------------------------------------------------

class ClaimRegs(NamedTuple):
    pid: int
    head: int = NULL
    owner: int = NULL
    line: int = 0


class ClaimRoutine(Routine):
    """Engage, enqueue self, then resolve against owner and own state.

    Counters carry the algorithm line of the access they perform.
    """

    name = 'claim'
    entry = 'engage'
    regs_type = ClaimRegs
    pure = frozenset({'peek'})

    def engage(self, frame, ctx):
        pid = frame.regs.pid
        ctx.emit(EventKind.BEGIN_CLAIM)
        old = ctx.mem.store_state(pid, ENGAGING)
        ctx.emit(EventKind.STATE_STORE, expected=old, new=ENGAGING, line=1, subject=pid)
        return Call(QUEUE_ROUTINES['enqueue'].frame(pid), 'peek', frame.regs)

    def peek(self, frame, ctx):
        return Call(QUEUE_ROUTINES['peek'].frame(), 'resolve', frame.regs)

    def resolve(self, frame, ctx):
        regs = frame.regs._replace(head=frame.ret)
        if regs.head == regs.pid:
            return self.line5(regs, ctx)
        return self.line32(regs, ctx)

    # Caller is at the head of the queue --------------------------------

    def line5(self, regs, ctx):
        ok = self._cas_owner(ctx, NULL, regs.pid, 5)
        if ok:
            return Goto('activate', regs._replace(line=6))
        return Goto('line9', regs)

    def line9(self, frame, ctx):
        regs = frame.regs
        owner = ctx.mem.load_owner()
        ctx.emit(EventKind.LOAD, target=CasTarget.OWNER, new=owner, line=9)
        if owner == NULL:
            return Goto('line11', regs)
        if owner == regs.pid:
            return Goto('line14', regs)
        return Goto('line19', regs._replace(owner=owner))

    def line11(self, frame, ctx):
        regs = frame.regs
        old = ctx.mem.store_owner(regs.pid)
        ctx.emit(EventKind.OWNER_STORE, expected=old, new=regs.pid, line=11)
        return Goto('activate', regs._replace(line=12))

    def line14(self, frame, ctx):
        regs = frame.regs
        if self._cas_state(ctx, regs.pid, 14):
            return self.deny(ctx, 15)
        return Goto('activate', regs._replace(line=17))

    def line19(self, frame, ctx):
        regs = frame.regs
        if self._cas_owner(ctx, regs.owner, regs.pid, 19):
            return Goto('activate', regs._replace(line=20))
        return Goto('line22', regs)

    def line22(self, frame, ctx):
        regs = frame.regs
        if self._cas_owner(ctx, NULL, regs.pid, 22):
            return Goto('activate', regs._replace(line=23))
        return Goto('line25', regs)

    def line25(self, frame, ctx):
        regs = frame.regs
        if self._cas_state(ctx, regs.pid, 25):
            return self.deny(ctx, 26)
        return Goto('activate', regs._replace(line=28))

    # Someone else is at the head ---------------------------------------

    def line32(self, regs, ctx):
        if self._cas_state(ctx, regs.pid, 32):
            return self.deny(ctx, 33)
        # already SCHEDULED by a releaser
        return Goto('activate', regs._replace(line=35))

    # Outcomes -----------------------------------------------------------

    def activate(self, frame, ctx):
        regs = frame.regs
        old = ctx.mem.store_state(regs.pid, ACTIVE)
        ctx.emit(EventKind.STATE_STORE, expected=old, new=ACTIVE, line=regs.line, subject=regs.pid)
        ctx.emit(EventKind.END_CLAIM_GRANTED, line=regs.line)
        return Return(True)

    def deny(self, ctx, line):
        ctx.emit(EventKind.END_CLAIM_DENIED, line=line)
        return Return(False)

    @staticmethod
    def _cas_owner(ctx, expected, new, line):
        ok = ctx.mem.cas_owner(expected, new)
        ctx.emit(EventKind.CAS, target=CasTarget.OWNER, expected=expected, new=new,
                 success=ok, line=line)
        return ok

    @staticmethod
    def _cas_state(ctx, pid, line):
        ok = ctx.mem.cas_state(pid, ENGAGING, WAITING)
        ctx.emit(EventKind.CAS, target=CasTarget.STATE, expected=ENGAGING, new=WAITING,
                 success=ok, line=line, subject=pid)
        return ok


# ---------------------------------------------------------------------------
# Release
# ---------------------------------------------------------------------------

class ReleaseRegs(NamedTuple):
    pid: int
    head: int = NULL


class ReleaseRoutine(Routine):
    """Leave the queue, then hand the owner field to the next waiter or clear it."""

    name = 'release'
    entry = 'begin'
    regs_type = ReleaseRegs
    pure = frozenset({'begin', 'check_dequeued', 'finish'})

    def begin(self, frame, ctx):
        ctx.emit(EventKind.BEGIN_RELEASE)
        return Call(QUEUE_ROUTINES['dequeue'].frame(), 'check_dequeued', frame.regs)

    def check_dequeued(self, frame, ctx):
        pid = frame.regs.pid
        if frame.ret != pid:
            raise ContractViolation('release', pid, f"dequeued {frame.ret}, caller was not at the head")
        return Call(QUEUE_ROUTINES['peek'].frame(), 'hand_over', frame.regs)

    def hand_over(self, frame, ctx):
        regs = frame.regs._replace(head=frame.ret)
        if regs.head == NULL:
            self._cas_owner(ctx, regs.pid, NULL, 4)
            return Goto('finish', regs)
        if self._cas_owner(ctx, regs.pid, regs.head, 5):
            return Call(SCHEDULE.frame(regs.head), 'finish', regs)
        # the head already took ownership on its own
        return Goto('finish', regs)

    def finish(self, frame, ctx):
        ctx.emit(EventKind.END_RELEASE)
        return Return(None)

    @staticmethod
    def _cas_owner(ctx, expected, new, line):
        ok = ctx.mem.cas_owner(expected, new)
        ctx.emit(EventKind.CAS, target=CasTarget.OWNER, expected=expected, new=new,
                 success=ok, line=line)
        return ok


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------

class ScheduleRegs(NamedTuple):
    target: int


class ScheduleRoutine(Routine):
    """Move `target` to SCHEDULED from ENGAGING or WAITING.

    Only the WAITING -> SCHEDULED edge wakes the target through the runtime;
    an ENGAGING target observes SCHEDULED itself when its state CAS fails.
    """

    name = 'schedule'
    entry = 'from_engaging'
    regs_type = ScheduleRegs

    def from_engaging(self, frame, ctx):
        target = frame.regs.target
        if self._cas_state(ctx, target, ENGAGING):
            return Return(None)
        return Goto('from_waiting', frame.regs)

    def from_waiting(self, frame, ctx):
        target = frame.regs.target
        if self._cas_state(ctx, target, WAITING) and ctx.hooks is not None:
            ctx.hooks.on_schedule(target)
        return Return(None)

    @staticmethod
    def _cas_state(ctx, target, expected):
        ok = ctx.mem.cas_state(target, expected, SCHEDULED)
        ctx.emit(EventKind.CAS, target=CasTarget.STATE, expected=expected, new=SCHEDULED,
                 success=ok, subject=target)
        if ok:
            ctx.emit(EventKind.SCHEDULE_SIGNAL, subject=target)
        return ok


# ---------------------------------------------------------------------------
# Yield (the modelled wait after a denied claim)
# ---------------------------------------------------------------------------

class YieldRegs(NamedTuple):
    pid: int


class YieldRoutine(Routine):
    """Wait until SCHEDULED, then run as the owner."""

    name = 'yield'
    entry = 'observe'
    regs_type = YieldRegs
    guarded = frozenset({'observe'})

    def enabled(self, frame, mem):
        return mem.load_state(frame.regs.pid) == SCHEDULED

    def observe(self, frame, ctx):
        state = ctx.mem.load_state(frame.regs.pid)
        ctx.emit(EventKind.LOAD, target=CasTarget.STATE, new=state, subject=frame.regs.pid)
        return Goto('run', frame.regs)

    def run(self, frame, ctx):
        pid = frame.regs.pid
        old = ctx.mem.store_state(pid, ACTIVE)
        ctx.emit(EventKind.STATE_STORE, expected=old, new=ACTIVE, subject=pid)
        ctx.emit(EventKind.END_CLAIM_GRANTED, resumed=True)
        return Return(True)


SCHEDULE = ScheduleRoutine()

ROUTINES = (ClaimRoutine(), ReleaseRoutine(), SCHEDULE, YieldRoutine())


def build_program(*overrides):
    """Routine table for the protocol, with `overrides` replacing routines by name."""
    program = dict(QUEUE_ROUTINES)
    for routine in ROUTINES + overrides:
        program[routine.name] = routine
    return program


DEFAULT_PROGRAM = build_program()


# ---------------------------------------------------------------------------
# Shared state over atomic cells
# ---------------------------------------------------------------------------

class SharedMutexState:
    """Owner field, wait queue and the processes' state table.

    Implements the memory interface the routines run against. With `strict`
    set, every state store is checked against the process automaton.
    """

    def __init__(self, states: StateTable, capacity: int, strict: bool = True):
        self.owner = AtomicCell(NULL)
        self.wait_queue = LockFreeQueue(capacity)
        self.states = states
        self.strict = strict

    # owner
    def load_owner(self):
        return self.owner.load()

    def store_owner(self, value):
        return self.owner.exchange(value)

    def cas_owner(self, expected, new):
        return self.owner.compare_and_set(expected, new)

    # process states
    def load_state(self, pid):
        return self.states.load(pid)

    def store_state(self, pid, state):
        old = self.states.cell(pid).exchange(state)
        if self.strict and not is_allowed_transition(old, state):
            raise ContractViolation('state', pid, f"illegal transition {old.name} -> {state.name}")
        return old

    def cas_state(self, pid, expected, new):
        return self.states.cell(pid).compare_and_set(expected, new)

    # queue
    def load_head(self):
        return self.wait_queue.load_head()

    def load_tail(self):
        return self.wait_queue.load_tail()

    def cas_head(self, expected, new):
        return self.wait_queue.cas_head(expected, new)

    def cas_tail(self, expected, new):
        return self.wait_queue.cas_tail(expected, new)

    def load_node(self, ref):
        return self.wait_queue.load_node(ref)

    def node_value(self, ref):
        return self.wait_queue.node_value(ref)

    def cas_next(self, ref, expected, new):
        return self.wait_queue.cas_next(ref, expected, new)

    def alloc(self, value):
        return self.wait_queue.alloc(value)

    def free(self, ref):
        self.wait_queue.free(ref)


def _execute(mutex, routine, args, pid, hooks, sink, program):
    ctx = StepContext(pid, mutex, hooks=hooks, tracing=sink is not None)
    try:
        result = run(program, (program[routine].frame(*args),), ctx)
    finally:
        if sink is not None:
            for event in ctx.drain():
                sink(event)
    return result.value


def claim(mutex, pid, hooks=None, sink=None, program=DEFAULT_PROGRAM):
    """Try to acquire `mutex` for `pid` in one pass.

    Returns a ClaimOutcome. When not granted, the caller's state is WAITING
    (or already SCHEDULED) and it must call `yield_until_scheduled` before
    entering the critical section.
    """
    if not is_valid_pid(pid):
        raise ContractViolation('claim', pid, "invalid process id")
    state = mutex.load_state(pid)
    if state != ACTIVE:
        raise ContractViolation('claim', pid, f"caller state is {state.name}, expected ACTIVE")
    if mutex.load_owner() == pid:
        raise ContractViolation('claim', pid, "re-entrant claim by the current owner")
    granted = _execute(mutex, 'claim', (pid,), pid, hooks, sink, program)
    logger.debug(f"claim({pid}) -> {'granted' if granted else 'denied'}")
    return ClaimOutcome(pid, granted)


def release(mutex, pid, hooks=None, sink=None, program=DEFAULT_PROGRAM):
    """Release `mutex`; `pid` must be the owner and ACTIVE."""
    if mutex.load_owner() != pid:
        raise ContractViolation('release', pid, f"owner is {mutex.load_owner()}")
    state = mutex.load_state(pid)
    if state != ACTIVE:
        raise ContractViolation('release', pid, f"caller state is {state.name}, expected ACTIVE")
    _execute(mutex, 'release', (pid,), pid, hooks, sink, program)
    logger.debug(f"release({pid})")


def schedule(mutex, target, caller=NULL, hooks=None, sink=None, program=DEFAULT_PROGRAM):
    """Deliver a schedule signal to `target`."""
    _execute(mutex, 'schedule', (target,), caller, hooks, sink, program)


def yield_until_scheduled(mutex, pid, hooks=None, sink=None, program=DEFAULT_PROGRAM):
    """Generator parking `pid` until its state is SCHEDULED, then making it ACTIVE.

    Each `yield` hands control back to the runtime; `hooks.on_wait` fires
    before every park. Returns True once the process runs as the owner.
    """
    frames = (program['yield'].frame(pid),)
    while True:
        ctx = StepContext(pid, mutex, hooks=hooks, tracing=sink is not None)
        result = step(program, frames, ctx)
        if sink is not None:
            for event in ctx.drain():
                sink(event)
        if result.done:
            return result.value
        if result.blocked:
            if hooks is not None:
                hooks.on_wait(pid)
            yield pid
            continue
        frames = result.frames
