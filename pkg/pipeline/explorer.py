"""
Exhaustive interleaving explorer.

Depth-first enumeration of every interleaving of the processes' atomic steps
with visited-state pruning. A visited-state key is the model state together
with the states of the trace monitors, so pruning never hides a trace-level
violation. Every transition and every new state is checked by the enabled
oracles; the first violation of each oracle is kept with a replayable
schedule and the event path leading to it.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

from tqdm import tqdm

from modules.errors import ProtocolError
from modules.events import EventKind
from modules.instrumentation import CasLedger, ScenarioStats
from modules.scenarios import SCENARIOS
from modules.protocol_core import DEFAULT_PROGRAM
from .model import Simulation, mutex_scripts
from .oracles import (
    MONITORS, MUTEX_ONLY, ORACLE_NAMES, PROPERTIES, OracleVerdict, ProgressChecker,
    QueueMonitor, Violation, check_inv_transition, check_ownership, check_structure,
)

logger = logging.getLogger(__name__)

_MILESTONE = 100_000

MAX_PROCESSES = 4
DEFAULT_MAX_PROCESSES = 3
MAX_CYCLES = 2


@dataclass
class ExplorationConfig:
    process_count: int = 2
    cycles_per_process: int = 1
    oracles: frozenset = frozenset(ORACLE_NAMES)
    state_budget: int = 2_000_000
    long_run: bool = False
    witness: bool = False
    scripts: Optional[tuple] = None
    initial_queue: tuple = ()
    mutant: Optional[str] = None
    show_progress: bool = False
    stop_on_violation: bool = False

    def describe(self):
        return {
            'processes': self.process_count,
            'cycles': self.cycles_per_process,
            'oracles': sorted(self.oracles),
            'state_budget': self.state_budget,
            'long_run': self.long_run,
            'mutant': self.mutant,
            'workload': None if self.scripts is None else [
                [' '.join(str(part) for part in op) for op in script] for script in self.scripts
            ],
            'initial_queue': list(self.initial_queue),
        }


@dataclass
class Witness:
    """Two runs with the same claim-begin order and different grant orders."""

    begin_order: tuple
    end_orders: tuple
    traces: tuple


@dataclass
class ExplorationReport:
    config: dict
    complete: bool
    states: int
    transitions: int
    paths: Optional[int]
    verdicts: Dict[str, OracleVerdict]
    scenarios: Dict[int, ScenarioStats]
    releases: ScenarioStats
    max_enqueue_retries: int
    retry_bound: Optional[int]
    outcomes: list = field(default_factory=list)
    witness: Optional[Witness] = None
    elapsed_s: float = field(default=0.0, compare=False)

    @property
    def ok(self):
        return all(v.ok for v in self.verdicts.values())

    @property
    def violations(self):
        return [v.violation for v in self.verdicts.values() if not v.ok]

    def unobserved_scenarios(self):
        return [sid for sid in SCENARIOS if sid not in self.scenarios]


def _check_size(config):
    n = config.process_count
    if n < 1 or n > MAX_PROCESSES:
        raise ValueError(f"process_count must be 1..{MAX_PROCESSES}, got {n}")
    if n > DEFAULT_MAX_PROCESSES and not config.long_run:
        raise ValueError(f"exploring {n} processes requires long_run")
    if not 1 <= config.cycles_per_process <= MAX_CYCLES:
        raise ValueError(f"cycles_per_process must be 1..{MAX_CYCLES}, got {config.cycles_per_process}")


class Explorer:
    """One exploration of one workload under one protocol program."""

    def __init__(self, config: ExplorationConfig, program=None, track_orders=False):
        self.config = config
        scripts = config.scripts
        if scripts is None:
            _check_size(config)
            scripts = mutex_scripts(config.process_count, config.cycles_per_process)
        self.sim = Simulation(scripts, program or DEFAULT_PROGRAM, config.initial_queue)
        self.track_orders = track_orders

        active = set(config.oracles) | {'contract'}
        if not self.sim.mutex_workload:
            active -= MUTEX_ONLY
        self.active = [name for name in ORACLE_NAMES if name in active]
        self.monitors = []
        for name in self.active:
            if name == 'queue':
                self.monitors.append(QueueMonitor(config.initial_queue))
            elif name in MONITORS:
                self.monitors.append(MONITORS[name]())
        self.progress = ProgressChecker(self.sim) if 'progress' in self.active else None
        self.ledger = CasLedger()
        self.retry_bound = None
        if self.sim.mutex_workload:
            self.retry_bound = (self.sim.process_count - 1) * max(
                (len(s) + 1) // 2 for s in self.sim.scripts)

        self._violations = {}
        self._max_retries = 0
        self._parent = []
        self._via = []

    # Bookkeeping ----------------------------------------------------------

    def _schedule_to(self, node):
        pids = []
        while node > 0:
            pids.append(self._via[node])
            node = self._parent[node]
        return tuple(reversed(pids))

    def _flag(self, name, message, node, pid=None):
        if name in self._violations or name not in self.active:
            return
        schedule = self._schedule_to(node) + ((pid,) if pid is not None else ())
        path, _, error = self.sim.replay(schedule)
        if error is not None:
            message = f"{message} ({type(error).__name__}: {error})"
        self._violations[name] = Violation(name, PROPERTIES[name], message, tuple(path), schedule)
        logger.error(f"{PROPERTIES[name]} violated: {message}")

    # Transition checks ----------------------------------------------------

    def _advance_monitors(self, mon_states, transition, node, pid):
        post = transition.state
        state_of = lambda p: post.cells[2 + p]  # noqa: E731
        mon_states = list(mon_states)
        for i, monitor in enumerate(self.monitors):
            mon = mon_states[i]
            for event in transition.events:
                mon, message = monitor.advance(mon, event, state_of)
                if message is not None:
                    self._flag(monitor.name, message, node, pid)
            mon_states[i] = mon
        return tuple(mon_states)

    def _check_attempts(self, transition, node, pid):
        for attempt in transition.closed:
            if attempt.kind == 'release':
                self.ledger.absorb_release_tally(attempt.pid, attempt.tally)
                continue
            try:
                scenario = self.ledger.absorb_tally(attempt.pid, attempt.tally, attempt.granted)
            except ProtocolError as e:
                self._flag('scenario', str(e), node, pid)
                continue
            base, _, retries = attempt.tally.counts
            self._max_retries = max(self._max_retries, retries)
            row = SCENARIOS[scenario]
            if base < row.min_cas or (row.max_cas is not None and base > row.max_cas):
                self._flag('scenario', f"scenario {scenario} claim by {attempt.pid} used {base} "
                                       f"CASes, table bounds {row.min_cas}..{row.max_cas}", node, pid)
            if self.retry_bound is not None and retries > self.retry_bound:
                self._flag('scenario', f"claim by {attempt.pid} retried its enqueue {retries} times, "
                                       f"bound {self.retry_bound}", node, pid)

    def _check_state(self, state, node):
        if 'inv' in self.active:
            message = check_structure(self.sim, state)
            if message is None and self.sim.mutex_workload:
                message = check_ownership(self.sim, state)
            if message is not None:
                self._flag('inv', message, node)
        if self.progress is not None:
            message = self.progress.check(state)
            if message is not None:
                self._flag('progress', message, node)

    @staticmethod
    def _orders(orders, events):
        begins, ends = orders
        for event in events:
            if event.kind is EventKind.BEGIN_CLAIM:
                begins += (event.pid,)
            elif event.kind is EventKind.END_CLAIM_GRANTED:
                ends += (event.pid,)
        return begins, ends

    # Search ---------------------------------------------------------------

    def run(self):
        started = time.monotonic()
        sim = self.sim
        root_state = sim.initial_state()
        root = (root_state, tuple(m.initial() for m in self.monitors),
                ((), ()) if self.track_orders else None)
        index = {root: 0}
        self._parent, self._via = [0], [0]
        paths = [None]
        on_stack = [True]
        terminals = {}
        outcomes = set()
        transitions = 0
        cyclic = False
        complete = True

        self._check_state(root_state, 0)
        # frame: [node, key, enabled pids, next position, path total]
        stack = [[0, root, sim.enabled(root_state), 0, 0]]

        progress = tqdm(total=None, unit='states', desc='Exploring',
                        disable=not self.config.show_progress)
        progress.update(1)
        try:
            while stack:
                frame = stack[-1]
                node, key, enabled, position, _ = frame
                if position == 0 and not enabled:
                    model = key[0]
                    if sim.is_final(model):
                        outcomes.add(tuple(p.results for p in model.procs))
                        if self.track_orders:
                            terminals.setdefault(key[2][0], {}).setdefault(key[2][1], node)
                    elif 'deadlock' in self.active:
                        self._flag('deadlock', "no enabled step; unfinished processes "
                                   f"{[p for p in range(1, sim.process_count + 1) if not sim.is_done(model, p)]}",
                                   node)
                    frame[4] = 1
                if position >= len(enabled):
                    stack.pop()
                    on_stack[node] = False
                    paths[node] = None if cyclic else frame[4]
                    if stack and not cyclic:
                        stack[-1][4] += frame[4]
                    continue
                if self.config.stop_on_violation and self._violations:
                    complete = False
                    break

                pid = enabled[position]
                frame[3] = position + 1
                model, mon_states, orders = key
                transitions += 1
                try:
                    transition = sim.successor(model, pid)
                except Exception as e:
                    if not isinstance(e, ProtocolError):
                        logger.error(f"Unexpected failure stepping process {pid}", exc_info=True)
                    self._flag('contract', f"{type(e).__name__}: {e}", node, pid)
                    frame[4] += 1
                    continue

                mon_states = self._advance_monitors(mon_states, transition, node, pid)
                if 'inv' in self.active:
                    message = check_inv_transition(sim, model, transition.state, transition.events)
                    if message is not None:
                        self._flag('inv', message, node, pid)
                self._check_attempts(transition, node, pid)
                if self.track_orders:
                    orders = self._orders(orders, transition.events)

                child = (transition.state, mon_states, orders)
                known = index.get(child)
                if known is not None:
                    if on_stack[known]:
                        cyclic = True
                        self._flag('divergence', f"step of process {pid} returns to an earlier state "
                                                 "without progress", node, pid)
                    elif paths[known] is not None:
                        frame[4] += paths[known]
                    continue

                if len(index) >= self.config.state_budget:
                    complete = False
                    logger.warning(f"State budget of {self.config.state_budget} exhausted; "
                                   "exploration is incomplete")
                    break
                child_id = len(index)
                index[child] = child_id
                self._parent.append(node)
                self._via.append(pid)
                paths.append(None)
                on_stack.append(True)
                progress.update(1)
                if child_id % _MILESTONE == 0:
                    logger.debug(f"{child_id} states visited, stack depth {len(stack)}")
                self._check_state(transition.state, child_id)
                stack.append([child_id, child, sim.enabled(transition.state), 0, 0])
        finally:
            progress.close()

        total_paths = paths[0] if complete and not cyclic else None
        verdicts = {}
        for name in self.active:
            violation = self._violations.get(name)
            verdicts[name] = OracleVerdict(violation is None, violation)

        report = ExplorationReport(
            config=self.config.describe(),
            complete=complete,
            states=len(index),
            transitions=transitions,
            paths=total_paths,
            verdicts=verdicts,
            scenarios=self.ledger.scenario_stats(),
            releases=self.ledger.release_stats(),
            max_enqueue_retries=self._max_retries,
            retry_bound=self.retry_bound,
            outcomes=sorted(outcomes),
            elapsed_s=time.monotonic() - started,
        )
        if self.track_orders:
            report.witness = self._witness(terminals)
        return report

    def _witness(self, terminals):
        for begin_order in sorted(terminals):
            ends = terminals[begin_order]
            if len(ends) >= 2:
                first, second = sorted(ends)[:2]
                traces = []
                for end_order in (first, second):
                    events, _, _ = self.sim.replay(self._schedule_to(ends[end_order]))
                    traces.append(tuple(events))
                return Witness(begin_order, (first, second), tuple(traces))
        return None


def explore(config: ExplorationConfig, program=None):
    """Explore `config` and, when asked, search for a nondeterminism witness."""
    logger.info(f"Exploring N={config.process_count}, cycles={config.cycles_per_process}"
                + (f", mutant={config.mutant}" if config.mutant else ''))
    report = Explorer(config, program).run()
    if config.witness and report.complete:
        report.witness = find_witness(config, program)
    logger.info(f"Explored {report.states} states, {report.transitions} transitions, "
                f"paths={report.paths}, complete={report.complete}")
    return report


def find_witness(config: ExplorationConfig, program=None):
    """Two paths with equal claim-begin order and different grant order, if any."""
    if config.scripts is not None or config.process_count < 2:
        return None
    witness_config = ExplorationConfig(
        process_count=min(config.process_count, 2),
        cycles_per_process=1,
        oracles=frozenset(),
        state_budget=config.state_budget,
    )
    return Explorer(witness_config, program, track_orders=True).run().witness
