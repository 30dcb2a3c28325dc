#!/usr/bin/env python3
"""
Tests for scenario classification and the CAS ledger.
"""

import pytest

from modules.errors import LedgerError, UnclassifiedPathError
from modules.events import CasTarget, EventKind, TraceEvent
from modules.instrumentation import CasLedger, CasRecord, ScenarioStats, counts_of, report, tally_of
from modules.protocol_core import claim, release
from modules.scenarios import SCENARIOS, classify_signature, within_bounds

T, F = True, False


@pytest.mark.parametrize('signature,granted,expected', [
    (((5, T),), T, 1),
    (((32, T),), F, 2),
    (((32, F),), T, 3),
    (((5, F), (11, T)), T, 4),
    (((5, F), (14, T)), F, 5),
    (((5, F), (14, F)), T, 6),
    (((5, F), (19, T)), T, 7),
    (((5, F), (19, F), (22, T)), T, 8),
    (((5, F), (19, F), (22, F), (25, T)), F, 9),
    (((5, F), (19, F), (22, F), (25, F)), T, 10),
])
def test_every_path_has_its_scenario(signature, granted, expected):
    assert classify_signature(signature, granted) == expected


def test_impossible_path_is_rejected():
    with pytest.raises(UnclassifiedPathError):
        classify_signature(((5, F), (14, T)), True)
    with pytest.raises(UnclassifiedPathError):
        classify_signature((), True)


def test_table_bounds():
    assert len(SCENARIOS) == 10
    assert SCENARIOS[2].max_cas is None
    assert within_bounds(1, 3, 4)
    assert not within_bounds(1, 2, 3)
    assert not within_bounds(3, 3, 4)
    assert within_bounds(2, 3, 40)


def test_counts_separate_retries_and_stores():
    records = [
        CasRecord(CasTarget.QUEUE_LINK, False, retry=True),
        CasRecord(CasTarget.QUEUE_LINK, True),
        CasRecord(CasTarget.QUEUE_TAIL, True),
        CasRecord(CasTarget.OWNER, False, line=5),
        CasRecord(CasTarget.OWNER, True, line=11, store=True),
    ]
    assert counts_of(records) == (3, 4, 1)


def test_tally_keeps_the_write_path_and_counts():
    records = [
        CasRecord(CasTarget.STATE, True),
        CasRecord(CasTarget.QUEUE_LINK, False, retry=True),
        CasRecord(CasTarget.QUEUE_LINK, True),
        CasRecord(CasTarget.OWNER, False, line=5),
        CasRecord(CasTarget.OWNER, True, line=11, store=True),
    ]
    tally = tally_of(records)
    assert tally.signature == ((5, F), (11, T))
    assert tally.counts == (3, 4, 1)
    assert hash(tally) == hash(tally_of(list(records)))

    by_records, by_tally = CasLedger(), CasLedger()
    assert by_records.absorb(1, records, True) == by_tally.absorb_tally(1, tally, True) == 4
    assert by_records.scenario_stats() == by_tally.scenario_stats()


def test_stats_merge_and_mean():
    a, b = ScenarioStats(), ScenarioStats()
    a.add(3, 3, 0)
    a.add(4, 5, 1)
    b.add(5, 7, 2)
    a.merge(b)
    assert (a.hits, a.min_cas, a.max_cas) == (3, 3, 5)
    assert a.mean_cas == pytest.approx(4.0)
    assert a.max_total_cas == 7 and a.max_retries == 2
    assert ScenarioStats().mean_cas is None


def test_ledger_tallies_real_claims(make_mutex):
    ledger = CasLedger()
    mutex = make_mutex(2)
    claim(mutex, 1, sink=ledger.record)
    claim(mutex, 2, sink=ledger.record)
    release(mutex, 1, sink=ledger.record)

    stats = ledger.scenario_stats()
    assert sorted(stats) == [1, 2]
    assert stats[1].min_cas == stats[1].max_cas == 3
    assert stats[2].min_cas == 3
    assert ledger.open_attempts() == {}

    table = report(ledger)
    assert table[1]['count'] == 1
    assert table[1]['table_min'] == 3 and table[1]['table_max'] == 4
    assert table[2]['table_max'] is None
    # dequeue, owner handover, failed ENGAGING schedule, WAITING schedule
    assert ledger.release_stats().max_total_cas == 4


def test_cas_outside_an_attempt_is_an_error():
    ledger = CasLedger()
    stray = TraceEvent(EventKind.CAS, 3, target=CasTarget.OWNER, expected=0, new=3,
                       success=True, line=5)
    with pytest.raises(LedgerError):
        ledger.record(stray)


def test_end_without_begin_is_an_error():
    ledger = CasLedger()
    with pytest.raises(LedgerError):
        ledger.record(TraceEvent(EventKind.END_RELEASE, 1))
