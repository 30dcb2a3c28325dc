#!/usr/bin/env python3
"""
Tests for claim / release / schedule run to completion on atomic cells.
"""

import pytest

from modules.atomics import NULL, ProcessState
from modules.errors import ContractViolation
from modules.events import EventKind
from modules.machine import StepContext, step
from modules.protocol_core import (
    DEFAULT_PROGRAM, build_program, claim, release, schedule, yield_until_scheduled,
)
from modules.scenarios import scenario_classify


def finish(generator):
    """Drive a generator that must not park; return its value."""
    with pytest.raises(StopIteration) as stop:
        next(generator)
    return stop.value.value


def test_uncontended_claim_and_release(make_mutex):
    mutex = make_mutex(1)
    events = []
    outcome = claim(mutex, 1, sink=events.append)
    assert outcome.granted
    assert mutex.load_owner() == 1
    assert mutex.load_state(1) == ProcessState.ACTIVE
    assert scenario_classify(events) == 1
    assert mutex.wait_queue.snapshot() == [1]

    release(mutex, 1)
    assert mutex.load_owner() == NULL
    assert mutex.wait_queue.snapshot() == []


def test_contended_claim_waits_then_gets_handover(make_mutex, hooks):
    mutex = make_mutex(2)
    assert claim(mutex, 1, hooks).granted

    events = []
    outcome = claim(mutex, 2, hooks, sink=events.append)
    assert not outcome.granted
    assert mutex.load_state(2) == ProcessState.WAITING
    assert scenario_classify(events) == 2

    waiter = yield_until_scheduled(mutex, 2, hooks)
    assert next(waiter) == 2
    assert hooks.waits == [2]

    release(mutex, 1, hooks)
    assert mutex.load_owner() == 2
    assert mutex.load_state(2) == ProcessState.SCHEDULED
    assert hooks.schedules == [2]

    assert finish(waiter) is True
    assert mutex.load_state(2) == ProcessState.ACTIVE

    release(mutex, 2, hooks)
    assert mutex.load_owner() == NULL
    assert mutex.wait_queue.snapshot() == []


def test_release_during_claim_leaves_claimant_scheduled(make_mutex, hooks):
    """A handover landing before the claimant parks is observed as a failed state CAS."""
    mutex = make_mutex(2)
    claim(mutex, 1)

    ctx = StepContext(2, mutex, hooks=hooks)
    frames = (DEFAULT_PROGRAM['claim'].frame(2),)
    while not (len(frames) == 1 and frames[0].pc == 'resolve'):
        frames = step(DEFAULT_PROGRAM, frames, ctx).frames

    release(mutex, 1, hooks)
    assert mutex.load_state(2) == ProcessState.SCHEDULED
    assert hooks.schedules == []

    result = step(DEFAULT_PROGRAM, frames, ctx)
    while not result.done:
        result = step(DEFAULT_PROGRAM, result.frames, ctx)
    assert result.value is True
    assert mutex.load_owner() == 2
    assert mutex.load_state(2) == ProcessState.ACTIVE
    assert scenario_classify(ctx.events) == 3


def test_claim_rejects_invalid_callers(make_mutex):
    mutex = make_mutex(2)
    with pytest.raises(ContractViolation):
        claim(mutex, NULL)
    claim(mutex, 1)
    with pytest.raises(ContractViolation, match='re-entrant'):
        claim(mutex, 1)
    claim(mutex, 2)
    with pytest.raises(ContractViolation, match='WAITING'):
        claim(mutex, 2)


def test_release_requires_ownership(make_mutex):
    mutex = make_mutex(2)
    with pytest.raises(ContractViolation):
        release(mutex, 1)
    claim(mutex, 1)
    with pytest.raises(ContractViolation):
        release(mutex, 2)


def test_strict_state_table_rejects_illegal_edges(make_mutex):
    mutex = make_mutex(1)
    with pytest.raises(ContractViolation, match='illegal transition'):
        mutex.store_state(1, ProcessState.WAITING)


def test_schedule_moves_waiting_process(make_mutex, hooks):
    mutex = make_mutex(2)
    mutex.states.cell(2).store(ProcessState.WAITING)
    schedule(mutex, 2, caller=1, hooks=hooks)
    assert mutex.load_state(2) == ProcessState.SCHEDULED
    assert hooks.schedules == [2]


def test_schedule_of_active_process_is_a_no_op(make_mutex, hooks):
    mutex = make_mutex(2)
    events = []
    schedule(mutex, 2, caller=1, hooks=hooks, sink=events.append)
    assert mutex.load_state(2) == ProcessState.ACTIVE
    assert hooks.schedules == []
    assert not [e for e in events if e.kind is EventKind.SCHEDULE_SIGNAL]


def test_claim_events_are_bracketed(make_mutex):
    mutex = make_mutex(1)
    events = []
    claim(mutex, 1, sink=events.append)
    release(mutex, 1, sink=events.append)
    kinds = [e.kind for e in events]
    assert kinds[0] is EventKind.BEGIN_CLAIM
    assert EventKind.END_CLAIM_GRANTED in kinds
    assert kinds.index(EventKind.END_CLAIM_GRANTED) < kinds.index(EventKind.BEGIN_RELEASE)
    assert kinds[-1] is EventKind.END_RELEASE
    assert all(e.pid == 1 for e in events)


def test_build_program_overrides_by_name():
    from pipeline.mutants import SingleCasSchedule

    program = build_program(SingleCasSchedule())
    assert isinstance(program['schedule'], SingleCasSchedule)
    assert program['claim'] is DEFAULT_PROGRAM['claim']
