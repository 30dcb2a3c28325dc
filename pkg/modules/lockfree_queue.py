"""
Lock-free FIFO queue of process ids (Michael-Scott two-pointer queue).

Nodes live in a fixed arena of `capacity + 1` slots. A node reference is a
`(slot, generation)` pair; freeing a slot bumps its generation, so a CAS or
read through a reference to a recycled node fails instead of corrupting the
list. The slot that is currently the dummy is the one `head` points at.

Each operation is a routine (see modules.machine) so the same code runs to
completion on the atomic arena below and one access at a time inside the
interleaving explorer's model memory.

Two reads share one step. `read_next` loads a node's next link and the value
of the node it points to together: a linked node's value never changes while
its generation lives, and once the slot is recycled the reference reads
STALE and the operation starts over, so no interleaving between the two
loads can be observed. Enqueue claims its arena slot in the same step as its
first tail read: the claim touches only free slots, which no other routine
reads, and the node stays private to its enqueuer until the link CAS.
"""

import logging
from typing import NamedTuple

from .atomics import AtomicCell, NULL
from .errors import QueueCapacityError
from .events import CasTarget, EventKind
from .machine import Goto, Return, Routine, StepContext, run

logger = logging.getLogger(__name__)

# Value stored in an unallocated slot
FREE = -1


class _Stale:
    """Marker returned when a node reference no longer names a live node."""

    def __repr__(self):
        return 'STALE'


STALE = _Stale()


# ---------------------------------------------------------------------------
# Routines
# ---------------------------------------------------------------------------

class EnqueueRegs(NamedTuple):
    value: int
    node: object = None
    tail: object = None
    seen: object = None


class EnqueueRoutine(Routine):
    """Append `value`: allocate, find the last node, link, swing tail.

    A CAS issued by an iteration that did not end in a successful link is
    marked `retry` so the ledger can separate contention from the base cost.
    """

    name = 'enqueue'
    entry = 'allocate'
    regs_type = EnqueueRegs

    def allocate(self, frame, ctx):
        regs = frame.regs._replace(node=ctx.mem.alloc(frame.regs.value))
        return self.read_tail(frame._replace(regs=regs), ctx)

    def read_tail(self, frame, ctx):
        tail = ctx.mem.load_tail()
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_TAIL, new=tail)
        return Goto('read_next', frame.regs._replace(tail=tail))

    def read_next(self, frame, ctx):
        regs = frame.regs
        node = ctx.mem.load_node(regs.tail)
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_LINK, expected=regs.tail,
                 new=None if node is STALE else node[1])
        if node is STALE:
            return Goto('read_tail', regs)
        if node[1] is not None:
            return Goto('help_tail', regs._replace(seen=node[1]))
        return Goto('link', regs)

    def help_tail(self, frame, ctx):
        regs = frame.regs
        ok = ctx.mem.cas_tail(regs.tail, regs.seen)
        ctx.emit(EventKind.CAS, target=CasTarget.QUEUE_TAIL, expected=regs.tail,
                 new=regs.seen, success=ok, retry=True)
        return Goto('read_tail', regs._replace(seen=None))

    def link(self, frame, ctx):
        regs = frame.regs
        ok = ctx.mem.cas_next(regs.tail, None, regs.node)
        ctx.emit(EventKind.CAS, target=CasTarget.QUEUE_LINK, expected=regs.tail,
                 new=regs.node, success=ok, retry=not ok)
        if not ok:
            return Goto('read_tail', regs)
        ctx.emit(EventKind.ENQUEUE_COMMIT, subject=regs.value)
        return Goto('swing_tail', regs)

    def swing_tail(self, frame, ctx):
        regs = frame.regs
        ok = ctx.mem.cas_tail(regs.tail, regs.node)
        ctx.emit(EventKind.CAS, target=CasTarget.QUEUE_TAIL, expected=regs.tail,
                 new=regs.node, success=ok)
        return Return(None)


class DequeueRegs(NamedTuple):
    head: object = None
    tail: object = None
    next: object = None
    value: int = NULL


class DequeueRoutine(Routine):
    """Remove and return the oldest value, or NULL when empty."""

    name = 'dequeue'
    entry = 'read_head'
    regs_type = DequeueRegs

    def read_head(self, frame, ctx):
        head = ctx.mem.load_head()
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_HEAD, new=head)
        return Goto('read_tail', DequeueRegs(head=head))

    def read_tail(self, frame, ctx):
        tail = ctx.mem.load_tail()
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_TAIL, new=tail)
        return Goto('read_next', frame.regs._replace(tail=tail))

    def read_next(self, frame, ctx):
        regs = frame.regs
        node = ctx.mem.load_node(regs.head)
        if node is STALE:
            ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_LINK, expected=regs.head)
            return Goto('read_head', DequeueRegs())
        nxt = node[1]
        value = NULL if nxt is None else ctx.mem.node_value(nxt)
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_LINK, expected=regs.head, new=nxt)
        if regs.head == regs.tail:
            if nxt is None:
                ctx.emit(EventKind.DEQUEUE_COMMIT, subject=NULL)
                return Return(NULL)
            return Goto('help_tail', regs._replace(next=nxt))
        if nxt is None or value is STALE:
            # head moved on between our reads
            return Goto('read_head', DequeueRegs())
        return Goto('swing_head', regs._replace(next=nxt, value=value))

    def help_tail(self, frame, ctx):
        regs = frame.regs
        ok = ctx.mem.cas_tail(regs.tail, regs.next)
        ctx.emit(EventKind.CAS, target=CasTarget.QUEUE_TAIL, expected=regs.tail,
                 new=regs.next, success=ok, retry=True)
        return Goto('read_head', DequeueRegs())

    def swing_head(self, frame, ctx):
        regs = frame.regs
        ok = ctx.mem.cas_head(regs.head, regs.next)
        ctx.emit(EventKind.CAS, target=CasTarget.QUEUE_HEAD, expected=regs.head,
                 new=regs.next, success=ok, retry=not ok)
        if not ok:
            return Goto('read_head', DequeueRegs())
        ctx.mem.free(regs.head)
        ctx.emit(EventKind.DEQUEUE_COMMIT, subject=regs.value)
        return Return(regs.value)


class PeekRegs(NamedTuple):
    head: object = None


class PeekRoutine(Routine):
    """Return the oldest value without removing it, or NULL when empty."""

    name = 'peek'
    entry = 'read_head'
    regs_type = PeekRegs

    def read_head(self, frame, ctx):
        head = ctx.mem.load_head()
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_HEAD, new=head)
        return Goto('read_next', PeekRegs(head))

    def read_next(self, frame, ctx):
        head = frame.regs.head
        node = ctx.mem.load_node(head)
        if node is STALE:
            ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_LINK, expected=head)
            return Goto('read_head', PeekRegs())
        nxt = node[1]
        ctx.emit(EventKind.LOAD, target=CasTarget.QUEUE_LINK, expected=head, new=nxt)
        if nxt is None:
            ctx.emit(EventKind.PEEK_COMMIT, subject=NULL)
            return Return(NULL)
        value = ctx.mem.node_value(nxt)
        if value is STALE:
            return Goto('read_head', PeekRegs())
        ctx.emit(EventKind.PEEK_COMMIT, subject=value)
        return Return(value)


QUEUE_ROUTINES = {
    routine.name: routine
    for routine in (EnqueueRoutine(), DequeueRoutine(), PeekRoutine())
}


# ---------------------------------------------------------------------------
# Atomic arena
# ---------------------------------------------------------------------------

class LockFreeQueue:
    """Queue over AtomicCells, usable from concurrent threads.

    Implements the queue half of the memory interface the routines use
    (`load_head`, `cas_tail`, `load_node`, `alloc`, ...). `SharedMutexState`
    delegates to it.
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError(f"queue capacity must be positive, got {capacity}")
        self.capacity = capacity
        # slot cell: (generation, value, next reference)
        self._slots = [AtomicCell((0, FREE, None)) for _ in range(capacity + 1)]
        self._slots[0].store((0, NULL, None))
        self._head = AtomicCell((0, 0))
        self._tail = AtomicCell((0, 0))
        logger.debug(f"Lock-free queue created (capacity: {capacity})")

    # Memory interface -----------------------------------------------------

    def load_head(self):
        return self._head.load()

    def load_tail(self):
        return self._tail.load()

    def cas_head(self, expected, new):
        return self._head.compare_and_set(expected, new)

    def cas_tail(self, expected, new):
        return self._tail.compare_and_set(expected, new)

    def load_node(self, ref):
        slot, gen = ref
        cur_gen, value, nxt = self._slots[slot].load()
        if cur_gen != gen or value == FREE:
            return STALE
        return value, nxt

    def node_value(self, ref):
        node = self.load_node(ref)
        return STALE if node is STALE else node[0]

    def cas_next(self, ref, expected, new):
        slot, gen = ref
        cell = self._slots[slot]
        cur = cell.load()
        if cur[0] != gen or cur[1] == FREE or cur[2] != expected:
            return False
        return cell.compare_and_set(cur, (cur[0], cur[1], new))

    def alloc(self, value):
        for slot, cell in enumerate(self._slots):
            cur = cell.load()
            if cur[1] == FREE and cell.compare_and_set(cur, (cur[0], value, None)):
                return slot, cur[0]
        raise QueueCapacityError(
            f"no free node for value {value} (capacity {self.capacity})"
        )

    def free(self, ref):
        slot, gen = ref
        cell = self._slots[slot]
        cell.store((gen + 1, FREE, None))

    # Whole operations -----------------------------------------------------

    def _run(self, routine, args, caller, sink):
        ctx = StepContext(caller, self, tracing=sink is not None)
        result = run(QUEUE_ROUTINES, (QUEUE_ROUTINES[routine].frame(*args),), ctx)
        if sink is not None:
            for event in ctx.drain():
                sink(event)
        return result.value

    def enqueue(self, value, caller=NULL, sink=None):
        """Append `value` (a non-NULL process id)."""
        if value == NULL:
            raise ValueError("NULL cannot be enqueued")
        self._run('enqueue', (value,), caller, sink)

    def dequeue(self, caller=NULL, sink=None):
        """Remove and return the oldest value, NULL if empty."""
        return self._run('dequeue', (), caller, sink)

    def peek(self, caller=NULL, sink=None):
        """Return the oldest value without removing it, NULL if empty."""
        return self._run('peek', (), caller, sink)

    def snapshot(self):
        """Values in queue order. Only meaningful while the queue is quiescent."""
        values = []
        node = self.load_node(self.load_head())
        while node is not STALE and node[1] is not None:
            node = self.load_node(node[1])
            if node is STALE:
                break
            values.append(node[0])
        return values

    def __len__(self):
        return len(self.snapshot())
