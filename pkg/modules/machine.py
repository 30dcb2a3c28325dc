"""
Step-machine interpreter shared by the threaded runtime and the interleaving explorer.

Protocol operations are written as routines: named program counters, each
performing at most one shared-memory access. Pure counters (branching, calls
into sub-routines, bookkeeping) cost no step and are folded into the
neighbouring access, so one call to `step` executes exactly one atomic access
of the process. The explorer interleaves `step` calls across processes; the
runtime calls `run` and lets the process go as far as it can.

Frames are immutable so a whole call stack can be hashed as part of a model
state.
"""

from typing import NamedTuple, Optional

from .events import TraceEvent


class Frame(NamedTuple):
    routine: str
    pc: str
    regs: tuple
    ret: object = None


class Goto(NamedTuple):
    pc: str
    regs: tuple


class Call(NamedTuple):
    frame: Frame
    resume: str
    regs: tuple


class Return(NamedTuple):
    value: object = None


class StepResult(NamedTuple):
    frames: tuple
    done: bool = False
    value: object = None
    blocked: bool = False


class Routine:
    """Base class for protocol routines.

    Subclasses set `name` and `entry`, list access-free counters in `pure` and
    counters that can only fire under a condition in `guarded`, and implement
    one method per counter returning Goto, Call or Return.
    """

    name = ''
    entry = ''
    regs_type = tuple
    pure = frozenset()
    guarded = frozenset()

    def frame(self, *args):
        return Frame(self.name, self.entry, self.regs_type(*args))

    def enabled(self, frame, mem):
        """Whether a guarded counter may fire; must not mutate memory."""
        return True

    def execute(self, frame, ctx):
        return getattr(self, frame.pc)(frame, ctx)


class StepContext:
    """Everything a routine may touch during one step."""

    __slots__ = ('pid', 'mem', 'hooks', 'events', 'tracing')

    def __init__(self, pid, mem, hooks=None, tracing=True):
        self.pid = pid
        self.mem = mem
        self.hooks = hooks
        self.tracing = tracing
        self.events = []

    def emit(self, kind, **fields):
        if self.tracing:
            self.events.append(TraceEvent(kind, self.pid, **fields))

    def drain(self):
        events, self.events = self.events, []
        return events


def step(program, frames, ctx):
    """Advance the top of `frames` by exactly one shared-memory access.

    Returns the new stack. `done` is set when the bottom routine returned
    (its value in `value`); `blocked` when the next access is guarded and its
    condition does not hold, in which case nothing was executed.
    """
    accessed = False
    while frames:
        top = frames[-1]
        routine = program[top.routine]
        if top.pc not in routine.pure:
            if accessed:
                break
            if top.pc in routine.guarded and not routine.enabled(top, ctx.mem):
                return StepResult(frames, blocked=True)
            accessed = True
        action = routine.execute(top, ctx)
        kind = type(action)
        if kind is Goto:
            frames = frames[:-1] + (Frame(top.routine, action.pc, action.regs),)
        elif kind is Call:
            resumed = Frame(top.routine, action.resume, action.regs)
            frames = frames[:-1] + (resumed, action.frame)
        elif kind is Return:
            frames = frames[:-1]
            if not frames:
                return StepResult((), done=True, value=action.value)
            caller = frames[-1]
            frames = frames[:-1] + (caller._replace(ret=action.value),)
        else:
            raise TypeError(f"{top.routine}.{top.pc} returned {action!r}")
    return StepResult(frames)


def is_enabled(program, frames, mem):
    """True if the next access of `frames` can fire."""
    if not frames:
        return False
    top = frames[-1]
    routine = program[top.routine]
    if top.pc in routine.guarded:
        return routine.enabled(top, mem)
    return True


def run(program, frames, ctx, max_steps: Optional[int] = None):
    """Step until the bottom routine returns or blocks.

    `max_steps` bounds the number of accesses; the result then has neither
    `done` nor `blocked` set.
    """
    taken = 0
    while True:
        result = step(program, frames, ctx)
        if result.done or result.blocked:
            return result
        frames = result.frames
        taken += 1
        if max_steps is not None and taken >= max_steps:
            return result
