#!/usr/bin/env python3
"""
Tests for the trace and state oracles on hand-built traces and model states.
"""

from modules.atomics import NULL, ProcessState
from modules.events import CasTarget, EventKind, TraceEvent
from pipeline.model import HEAD, OWNER, Simulation, mutex_scripts
from pipeline.oracles import (
    automaton_oracle, check_inv_transition, deadlock_oracle, fair_oracle, inv_oracle, mutex_oracle,
    queue_oracle, safety_oracle, window_oracle,
)

A, E, W, S = (ProcessState.ACTIVE, ProcessState.ENGAGING,
              ProcessState.WAITING, ProcessState.SCHEDULED)


def ev(kind, pid, **fields):
    return TraceEvent(kind, pid, **fields)


def begin(pid):
    return ev(EventKind.BEGIN_CLAIM, pid)


def granted(pid):
    return ev(EventKind.END_CLAIM_GRANTED, pid)


def enq(pid):
    return ev(EventKind.ENQUEUE_COMMIT, pid, subject=pid)


def deq(pid, value):
    return ev(EventKind.DEQUEUE_COMMIT, pid, subject=value)


def release(pid):
    return [ev(EventKind.BEGIN_RELEASE, pid), deq(pid, pid), ev(EventKind.END_RELEASE, pid)]


def test_mutex_accepts_sequential_holders():
    trace = [begin(1), enq(1), granted(1), *release(1), begin(2), enq(2), granted(2), *release(2)]
    assert mutex_oracle(trace).ok
    assert fair_oracle(trace).ok
    assert window_oracle(trace).ok


def test_mutex_rejects_two_holders():
    trace = [begin(1), enq(1), granted(1), begin(2), enq(2), granted(2)]
    verdict = mutex_oracle(trace)
    assert not verdict.ok
    assert verdict.violation.oracle == 'mutex'
    assert verdict.violation.path[-1] == granted(2)


def test_mutex_frees_the_lock_at_the_owners_dequeue():
    trace = [begin(1), enq(1), granted(1), begin(2), enq(2),
             ev(EventKind.BEGIN_RELEASE, 1), deq(1, 1), granted(2), ev(EventKind.END_RELEASE, 1)]
    assert mutex_oracle(trace).ok


def test_fifo_rejects_overtaking():
    trace = [begin(1), begin(2), enq(2), enq(1), granted(1)]
    verdict = fair_oracle(trace)
    assert not verdict.ok
    assert '2 was enqueued first' in verdict.violation.message


def test_window_rejects_foreign_release():
    trace = [begin(1), enq(1), granted(1), ev(EventKind.BEGIN_RELEASE, 2)]
    assert not window_oracle(trace).ok


def test_queue_oracle_replays_fifo():
    ok = [enq(1), enq(2), ev(EventKind.PEEK_COMMIT, 3, subject=1), deq(3, 1), deq(3, 2), deq(3, NULL)]
    assert queue_oracle(ok).ok
    assert not queue_oracle([enq(1), enq(2), deq(3, 2)]).ok
    assert queue_oracle([deq(3, 7)], initial_queue=(7,)).ok


def test_automaton_rejects_illegal_edge():
    legal = [ev(EventKind.STATE_STORE, 1, expected=A, new=E, subject=1),
             ev(EventKind.CAS, 2, target=CasTarget.STATE, expected=E, new=S, success=True, subject=1)]
    assert automaton_oracle(legal).ok
    illegal = [ev(EventKind.STATE_STORE, 1, expected=W, new=A, subject=1)]
    assert not automaton_oracle(illegal).ok
    failed_cas = [ev(EventKind.CAS, 1, target=CasTarget.STATE, expected=A, new=W,
                     success=False, subject=1)]
    assert automaton_oracle(failed_cas).ok


def test_safety_reconstructs_states_from_the_trace():
    good = [begin(1), ev(EventKind.STATE_STORE, 1, expected=A, new=E, subject=1),
            ev(EventKind.STATE_STORE, 1, expected=E, new=A, subject=1), granted(1)]
    assert safety_oracle(good).ok
    bad = [begin(1), ev(EventKind.STATE_STORE, 1, expected=A, new=E, subject=1),
           ev(EventKind.CAS, 1, target=CasTarget.STATE, expected=E, new=W, success=True,
              subject=1), granted(1)]
    verdict = safety_oracle(bad)
    assert not verdict.ok
    assert 'WAITING' in verdict.violation.message


def test_initial_state_satisfies_state_oracles():
    sim = Simulation(mutex_scripts(2, 1))
    state = sim.initial_state()
    assert inv_oracle(state, sim).ok
    assert deadlock_oracle(state, sim).ok


def test_inv_detects_a_queue_cycle():
    sim = Simulation(mutex_scripts(1, 1))
    state = sim.initial_state()
    base = 3 + sim.process_count
    cells = list(state.cells)
    cells[base] = (0, NULL, cells[HEAD])
    corrupted = state._replace(cells=tuple(cells))
    verdict = inv_oracle(corrupted, sim)
    assert not verdict.ok
    assert 'cycle' in verdict.violation.message


def test_inv_detects_a_queued_process_nobody_serves():
    sim = Simulation(mutex_scripts(1, 1), initial_queue=(1,))
    verdict = inv_oracle(sim.initial_state(), sim)
    assert not verdict.ok
    assert 'no ownership case' in verdict.violation.message


def test_deadlock_detects_a_stuck_waiter():
    sim = Simulation(mutex_scripts(1, 1))
    state = sim.initial_state()
    waiting = state.procs[0]._replace(frames=(sim.program['yield'].frame(1),))
    cells = list(state.cells)
    cells[3] = W
    stuck = state._replace(cells=tuple(cells), procs=(waiting,))
    verdict = deadlock_oracle(stuck, sim)
    assert not verdict.ok
    assert 'WAITING' in verdict.violation.message


def _before_hand_over(sim):
    state = sim.initial_state()
    for _ in range(50):
        frames = state.procs[0].frames
        if frames and frames[-1].routine == 'release' and frames[-1].pc == 'hand_over':
            return state
        state = sim.successor(state, 1).state
    raise AssertionError("release never reached its owner CAS")


def test_inv_accepts_clearing_the_owner_after_an_empty_peek():
    sim = Simulation(mutex_scripts(1, 1))
    pre = _before_hand_over(sim)
    assert pre.cells[OWNER] == 1
    assert pre.procs[0].frames[-1].ret == NULL
    transition = sim.successor(pre, 1)
    assert transition.state.cells[OWNER] == NULL
    assert check_inv_transition(sim, pre, transition.state, transition.events) is None


def test_inv_rejects_clearing_the_owner_past_a_waiter():
    sim = Simulation(mutex_scripts(1, 1))
    pre = _before_hand_over(sim)
    transition = sim.successor(pre, 1)
    frames = pre.procs[0].frames
    saw_waiter = frames[:-1] + (frames[-1]._replace(ret=2),)
    forged = pre._replace(procs=(pre.procs[0]._replace(frames=saw_waiter),))
    message = check_inv_transition(sim, forged, transition.state, transition.events)
    assert message is not None and 'without observing an empty queue' in message
    message = check_inv_transition(sim, pre, transition.state, [])
    assert message is not None and 'without a release CAS' in message
