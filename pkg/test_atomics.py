#!/usr/bin/env python3
"""
Tests for atomic cells, process ids and the process state automaton.
"""

from threading import Thread

import pytest

from modules.atomics import (
    ALLOWED_TRANSITIONS, NULL, AtomicCell, ProcessState, StateTable,
    is_allowed_transition, is_valid_pid,
)


def test_cell_load_store_exchange():
    cell = AtomicCell(3)
    assert cell.load() == 3
    cell.store(4)
    assert cell.exchange(5) == 4
    assert cell.load() == 5


def test_compare_and_set_only_on_match():
    cell = AtomicCell(NULL)
    assert cell.compare_and_set(NULL, 7)
    assert not cell.compare_and_set(NULL, 8)
    assert cell.load() == 7


def test_compare_and_set_has_one_winner_per_value():
    """Threads racing to CAS NULL -> own id: exactly one wins."""
    cell = AtomicCell(NULL)
    winners = []

    def contend(pid):
        if cell.compare_and_set(NULL, pid):
            winners.append(pid)

    threads = [Thread(target=contend, args=(pid,)) for pid in range(1, 17)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(winners) == 1
    assert cell.load() == winners[0]


def test_automaton_edges():
    assert is_allowed_transition(ProcessState.ACTIVE, ProcessState.ENGAGING)
    assert is_allowed_transition(ProcessState.WAITING, ProcessState.SCHEDULED)
    assert is_allowed_transition(ProcessState.SCHEDULED, ProcessState.ACTIVE)
    assert not is_allowed_transition(ProcessState.ACTIVE, ProcessState.WAITING)
    assert not is_allowed_transition(ProcessState.WAITING, ProcessState.ACTIVE)
    assert not is_allowed_transition(ProcessState.SCHEDULED, ProcessState.WAITING)
    assert len(ALLOWED_TRANSITIONS) == 6


def test_pid_validity():
    assert is_valid_pid(1)
    assert not is_valid_pid(NULL)
    assert not is_valid_pid(-2)
    assert not is_valid_pid(True)
    assert not is_valid_pid('1')


def test_state_table_registration():
    states = StateTable()
    states.register(1)
    states.register(2, ProcessState.ACTIVE)
    assert states.load(1) == ProcessState.SCHEDULED
    assert states.snapshot() == {1: ProcessState.SCHEDULED, 2: ProcessState.ACTIVE}
    assert 2 in states and len(states) == 2

    with pytest.raises(ValueError):
        states.register(1)
    with pytest.raises(ValueError):
        states.register(NULL)
    with pytest.raises(KeyError):
        states.load(9)
