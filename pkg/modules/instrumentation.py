"""
CAS accounting per claim attempt, aggregated per resolution scenario.

Each process owns its own attempt log and aggregates; nothing is shared
between processes while recording, the per-process tallies are merged when a
report is asked for.
"""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

from .errors import LedgerError
from .events import CasTarget, EventKind
from .scenarios import SCENARIOS, classify_signature

logger = logging.getLogger(__name__)

_PROTOCOL_TARGETS = (CasTarget.OWNER, CasTarget.STATE)


class CasRecord(NamedTuple):
    target: CasTarget
    success: bool
    retry: bool = False
    line: int = 0
    store: bool = False


def record_of(event):
    """CasRecord for a CAS or owner-store event, None for anything else."""
    if event.kind is EventKind.CAS:
        return CasRecord(event.target, bool(event.success), event.retry, event.line)
    if event.kind is EventKind.OWNER_STORE:
        return CasRecord(CasTarget.OWNER, True, False, event.line, True)
    return None


class AttemptTally(NamedTuple):
    """Running summary of one open attempt: its owner/state write path and CAS counts.

    Small and hashable, so the explorer can carry it inside a model state.
    """

    signature: tuple = ()
    base: int = 0
    total: int = 0
    retries: int = 0

    def add(self, record):
        signature = self.signature
        if record.target in _PROTOCOL_TARGETS and record.line:
            signature += ((record.line, record.success),)
        if record.store:
            return self._replace(signature=signature)
        failed_link = record.target is CasTarget.QUEUE_LINK and not record.success
        return AttemptTally(signature,
                            self.base + (0 if record.retry else 1),
                            self.total + 1,
                            self.retries + (1 if failed_link else 0))

    @property
    def counts(self):
        return self.base, self.total, self.retries


def tally_of(records):
    tally = AttemptTally()
    for record in records:
        tally = tally.add(record)
    return tally


def counts_of(records):
    """(base CAS count, total CAS count, failed link CASes) of one attempt."""
    return tally_of(records).counts


@dataclass
class ScenarioStats:
    hits: int = 0
    min_cas: Optional[int] = None
    max_cas: Optional[int] = None
    sum_cas: int = 0
    max_total_cas: int = 0
    max_retries: int = 0

    def add(self, base, total, retries):
        self.hits += 1
        self.min_cas = base if self.min_cas is None else min(self.min_cas, base)
        self.max_cas = base if self.max_cas is None else max(self.max_cas, base)
        self.sum_cas += base
        self.max_total_cas = max(self.max_total_cas, total)
        self.max_retries = max(self.max_retries, retries)

    def merge(self, other):
        if not other.hits:
            return
        self.hits += other.hits
        self.min_cas = other.min_cas if self.min_cas is None else min(self.min_cas, other.min_cas)
        self.max_cas = other.max_cas if self.max_cas is None else max(self.max_cas, other.max_cas)
        self.sum_cas += other.sum_cas
        self.max_total_cas = max(self.max_total_cas, other.max_total_cas)
        self.max_retries = max(self.max_retries, other.max_retries)

    @property
    def mean_cas(self):
        return self.sum_cas / self.hits if self.hits else None


@dataclass
class Attempt:
    pid: int
    kind: str
    records: List[CasRecord] = field(default_factory=list)


class _ProcessLedger:
    def __init__(self):
        self.open: Optional[Attempt] = None
        self.scenarios = {}
        self.releases = ScenarioStats()


class CasLedger:
    """Collects CASes per claim attempt and tallies them by scenario.

    Feed it every trace event of a run through `record`; events other than
    attempt boundaries, CASes and owner stores are ignored.
    """

    def __init__(self):
        self._processes = {}

    def register(self, pid):
        self._processes.setdefault(pid, _ProcessLedger())

    def _of(self, pid):
        ledger = self._processes.get(pid)
        if ledger is None:
            ledger = self._processes.setdefault(pid, _ProcessLedger())
        return ledger

    def record(self, event):
        kind = event.kind
        if kind is EventKind.BEGIN_CLAIM:
            self._of(event.pid).open = Attempt(event.pid, 'claim')
        elif kind is EventKind.BEGIN_RELEASE:
            self._of(event.pid).open = Attempt(event.pid, 'release')
        elif kind is EventKind.CAS or kind is EventKind.OWNER_STORE:
            attempt = self._of(event.pid).open
            if attempt is None:
                if kind is EventKind.OWNER_STORE:
                    return
                raise LedgerError(f"CAS by process {event.pid} outside any claim or release: "
                                  f"{event.describe()}")
            attempt.records.append(record_of(event))
        elif kind in (EventKind.END_CLAIM_GRANTED, EventKind.END_CLAIM_DENIED):
            if event.resumed:
                return
            ledger = self._of(event.pid)
            attempt, ledger.open = ledger.open, None
            if attempt is None or attempt.kind != 'claim':
                raise LedgerError(f"claim end by process {event.pid} without a begin")
            self.absorb(event.pid, attempt.records, kind is EventKind.END_CLAIM_GRANTED)
        elif kind is EventKind.END_RELEASE:
            ledger = self._of(event.pid)
            attempt, ledger.open = ledger.open, None
            if attempt is None or attempt.kind != 'release':
                raise LedgerError(f"release end by process {event.pid} without a begin")
            ledger.releases.add(*counts_of(attempt.records))

    def absorb(self, pid, records, granted):
        """Add one closed claim attempt; returns its scenario id."""
        return self.absorb_tally(pid, tally_of(records), granted)

    def absorb_tally(self, pid, tally, granted):
        scenario = classify_signature(tally.signature, granted)
        stats = self._of(pid).scenarios.setdefault(scenario, ScenarioStats())
        stats.add(*tally.counts)
        return scenario

    def absorb_release(self, pid, records):
        self.absorb_release_tally(pid, tally_of(records))

    def absorb_release_tally(self, pid, tally):
        self._of(pid).releases.add(*tally.counts)

    def open_attempts(self):
        return {pid: l.open for pid, l in self._processes.items() if l.open is not None}

    def scenario_stats(self):
        """Merged per-scenario statistics, keyed by scenario id."""
        merged = {}
        for pid in sorted(self._processes):
            for scenario, stats in self._processes[pid].scenarios.items():
                merged.setdefault(scenario, ScenarioStats()).merge(stats)
        return dict(sorted(merged.items()))

    def release_stats(self):
        merged = ScenarioStats()
        for ledger in self._processes.values():
            merged.merge(ledger.releases)
        return merged

    def report(self):
        """Per-scenario {min, max, mean, count} plus totals and table bounds."""
        table = {}
        for scenario, stats in self.scenario_stats().items():
            row = SCENARIOS[scenario]
            table[scenario] = {
                'name': row.name,
                'count': stats.hits,
                'min': stats.min_cas,
                'max': stats.max_cas,
                'mean': stats.mean_cas,
                'max_total': stats.max_total_cas,
                'max_retries': stats.max_retries,
                'table_min': row.min_cas,
                'table_max': row.max_cas,
            }
        return table


def report(ledger):
    return ledger.report()
