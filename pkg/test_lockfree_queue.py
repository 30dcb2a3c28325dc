#!/usr/bin/env python3
"""
Tests for the lock-free wait queue: sequential behaviour, the tagged arena,
threaded producers and a stateful comparison against collections.deque.
"""

from collections import deque
from threading import Thread

import pytest
from hypothesis import settings, strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, precondition, rule

from modules.atomics import NULL
from modules.errors import QueueCapacityError
from modules.events import CasTarget, EventKind
from modules.lockfree_queue import STALE, LockFreeQueue
from pipeline.model import DEQUEUE, PEEK, Simulation, enqueue_op


def test_empty_queue_returns_null():
    q = LockFreeQueue(2)
    assert q.dequeue() == NULL
    assert q.peek() == NULL
    assert len(q) == 0


def test_fifo_order():
    q = LockFreeQueue(4)
    for value in (3, 1, 2):
        q.enqueue(value)
    assert q.snapshot() == [3, 1, 2]
    assert q.peek() == 3
    assert [q.dequeue() for _ in range(4)] == [3, 1, 2, NULL]


def test_peek_does_not_remove():
    q = LockFreeQueue(1)
    q.enqueue(5)
    assert q.peek() == 5
    assert q.peek() == 5
    assert len(q) == 1


def test_null_cannot_be_enqueued():
    with pytest.raises(ValueError):
        LockFreeQueue(1).enqueue(NULL)


def test_capacity_is_enforced_and_recycled():
    q = LockFreeQueue(2)
    q.enqueue(1)
    q.enqueue(2)
    with pytest.raises(QueueCapacityError):
        q.enqueue(3)
    assert q.dequeue() == 1
    q.enqueue(3)
    assert q.snapshot() == [2, 3]


def test_freed_reference_goes_stale():
    """A recycled slot answers STALE to holders of the old reference."""
    q = LockFreeQueue(1)
    old_head = q.load_head()
    q.enqueue(4)
    assert q.dequeue() == 4
    assert q.load_node(old_head) is STALE
    assert not q.cas_next(old_head, None, (1, 0))


def test_uncontended_enqueue_costs_two_cas():
    events = []
    q = LockFreeQueue(2)
    q.enqueue(1, caller=1, sink=events.append)
    cases = [e for e in events if e.kind is EventKind.CAS]
    assert [e.target for e in cases] == [CasTarget.QUEUE_LINK, CasTarget.QUEUE_TAIL]
    assert all(e.success and not e.retry for e in cases)
    commits = [e for e in events if e.kind is EventKind.ENQUEUE_COMMIT]
    assert [e.subject for e in commits] == [1]


def test_dequeue_commit_carries_value():
    events = []
    q = LockFreeQueue(1)
    q.enqueue(6)
    assert q.dequeue(caller=2, sink=events.append) == 6
    commits = [e for e in events if e.kind is EventKind.DEQUEUE_COMMIT]
    assert len(commits) == 1 and commits[0].subject == 6 and commits[0].pid == 2


def test_concurrent_producers_keep_per_producer_order():
    producers, per_producer = 4, 50
    q = LockFreeQueue(producers * per_producer)

    def produce(index):
        for k in range(per_producer):
            q.enqueue(index * 1000 + k + 1)

    threads = [Thread(target=produce, args=(i + 1,)) for i in range(producers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    drained = []
    while True:
        value = q.dequeue()
        if value == NULL:
            break
        drained.append(value)
    assert len(drained) == producers * per_producer
    for index in range(1, producers + 1):
        mine = [v for v in drained if v // 1000 == index]
        assert mine == sorted(mine)


def test_concurrent_producers_and_consumers_lose_nothing():
    q = LockFreeQueue(64)
    consumed = []
    produced = list(range(1, 201))

    def produce(values):
        for value in values:
            while True:
                try:
                    q.enqueue(value)
                    break
                except QueueCapacityError:
                    continue

    def consume(count):
        got = 0
        while got < count:
            value = q.dequeue()
            if value != NULL:
                consumed.append(value)
                got += 1

    threads = [Thread(target=produce, args=(produced[:100],)),
               Thread(target=produce, args=(produced[100:],)),
               Thread(target=consume, args=(100,)),
               Thread(target=consume, args=(100,))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=60)
    assert sorted(consumed) == produced


def test_peek_restarts_when_its_head_slot_is_recycled():
    sim = Simulation(((PEEK,), (DEQUEUE, enqueue_op(5))), initial_queue=(1, 2))
    state = sim.successor(sim.initial_state(), 1).state
    assert state.procs[0].frames[-1].pc == 'read_next'
    while not sim.is_done(state, 2):
        state = sim.successor(state, 2).state
    assert state.procs[1].results == (1, None)
    # the peek's head slot now holds the new node under the next generation
    assert state.cells[sim.memory(state).base] == (1, 5, None)
    while not sim.is_done(state, 1):
        state = sim.successor(state, 1).state
    assert state.procs[0].results == (2,)
    assert sim.memory(state).queue_values() == (2, 5)


class QueueAgainstDeque(RuleBasedStateMachine):
    """Sequential LockFreeQueue behaves exactly like a deque."""

    CAPACITY = 6

    def __init__(self):
        super().__init__()
        self.queue = LockFreeQueue(self.CAPACITY)
        self.model = deque()

    @precondition(lambda self: len(self.model) < self.CAPACITY)
    @rule(value=st.integers(min_value=1, max_value=1000))
    def enqueue(self, value):
        self.queue.enqueue(value)
        self.model.append(value)

    @rule()
    def dequeue(self):
        expected = self.model.popleft() if self.model else NULL
        assert self.queue.dequeue() == expected

    @rule()
    def peek(self):
        expected = self.model[0] if self.model else NULL
        assert self.queue.peek() == expected

    @invariant()
    def contents_match(self):
        assert self.queue.snapshot() == list(self.model)


QueueAgainstDeque.TestCase.settings = settings(max_examples=50, stateful_step_count=30,
                                               deadline=None)
TestQueueAgainstDeque = QueueAgainstDeque.TestCase
