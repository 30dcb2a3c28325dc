"""
Run orchestration: exhaustive exploration, threaded stress runs and the
resolution-table report.

Every execute_* method returns a status dictionary:

    {'status': 'success' | 'violation' | 'incomplete' | 'error',
     'error_message': str or None,
     'summary': {...},
     'exported_files': [paths]}
"""

import logging
import random
import time
from pathlib import Path

from tqdm import tqdm

from modules.errors import DeadlockError
from modules.instrumentation import CasLedger
from modules.coop_scheduler import Runtime
from utils.report_writer import (
    cas_table, exploration_records, format_summary, format_table, oracle_record,
    parse_records, read_report, row_verdict, scenario_records, write_report,
)
from .explorer import ExplorationConfig, explore
from .mutants import build
from .oracles import ORACLE_NAMES, PROPERTIES, Violation

logger = logging.getLogger(__name__)


def _result(status, summary=None, exported_files=None, error_message=None):
    return {
        'status': status,
        'error_message': error_message,
        'summary': summary or {},
        'exported_files': [str(p) for p in exported_files or ()],
    }


class ExplorationManager:
    """Runs the configured explorations and stress tests and writes their reports."""

    def __init__(self, config: dict):
        self.config = config
        self.mutant = config.get('mutant')
        self.program = build(self.mutant)
        self.output_dir = Path(config['report']['output_dir'])
        self.basename = config['report']['basename']
        if self.mutant:
            logger.warning(f"Running the '{self.mutant}' mutant instead of the real protocol")

    # Explore --------------------------------------------------------------

    def exploration_config(self, section='explorer', oracles=None, witness=None):
        settings = self.config[section]
        return ExplorationConfig(
            process_count=settings['processes'],
            cycles_per_process=settings['cycles'],
            oracles=frozenset(oracles if oracles is not None
                              else settings.get('oracles', ORACLE_NAMES)),
            state_budget=settings.get('state_budget', self.config['explorer']['state_budget']),
            long_run=settings.get('long_run', False),
            witness=settings.get('witness', False) if witness is None else witness,
            mutant=self.mutant,
            show_progress=settings.get('show_progress', False),
            stop_on_violation=settings.get('stop_on_violation', False),
        )

    def execute_explore(self):
        """Explore every interleaving of the configured workload."""
        try:
            report = explore(self.exploration_config(), self.program)
        except Exception as e:
            logger.error(f"Exploration failed: {e}", exc_info=True)
            return _result('error', error_message=str(e))

        for violation in report.violations:
            logger.error(f"{violation.property} violated: {violation.message}")
            logger.error(f"  schedule: {' '.join(str(p) for p in violation.schedule)}")
            for event in violation.path:
                logger.error(f"    {event.describe()}")
        for sid in report.unobserved_scenarios():
            logger.warning(f"Scenario {sid} was never observed")

        records = exploration_records(report)
        exported = write_report(records, self.output_dir, self.basename)

        if not report.ok:
            status = 'violation'
            message = '; '.join(f"{v.oracle}: {v.message}" for v in report.violations)
        elif not report.complete:
            status = 'incomplete'
            message = f"state budget of {report.config['state_budget']} exhausted"
        else:
            status, message = 'success', None
        summary = {
            'states': report.states,
            'transitions': report.transitions,
            'paths': report.paths,
            'complete': report.complete,
            'violations': [v.oracle for v in report.violations],
            'scenarios_hit': sorted(report.scenarios),
            'witness': report.witness is not None,
            'elapsed_s': report.elapsed_s,
        }
        return _result(status, summary, exported, message)

    # Stress ---------------------------------------------------------------

    def _stress_once(self, seed):
        settings = self.config['stress']
        processes = settings['processes']
        iterations = settings['iterations']
        pause_probability = settings['cs_pause_probability']
        rng = random.Random(seed)
        ledger = CasLedger()
        runtime = Runtime(runners=settings['runners'], sink=ledger.record, program=self.program)
        mutex = runtime.new_mutex(processes)
        counter = [0]

        def make_body(process_seed):
            local = random.Random(process_seed)

            def body(ctx):
                for _ in range(iterations):
                    yield from ctx.acquire(mutex)
                    value = counter[0]
                    if local.random() < pause_probability:
                        time.sleep(0)
                    counter[0] = value + 1
                    ctx.release(mutex)
                    if local.random() < pause_probability:
                        yield from ctx.pause()
            return body

        bodies = [make_body(rng.getrandbits(32)) for _ in range(processes)]
        rng.shuffle(bodies)
        for body in bodies:
            runtime.spawn(body)

        run = {'seed': seed, 'counter': None, 'expected': processes * iterations,
               'faults': [], 'deadlock': None, 'timeout': False}
        try:
            runtime.run_to_completion(timeout=settings['timeout_s'])
        except DeadlockError as e:
            logger.error(f"Stress run with seed {seed} deadlocked: {e.dump}")
            run['deadlock'] = str(e)
        except TimeoutError as e:
            logger.error(f"Stress run with seed {seed} timed out: {e}")
            run['timeout'] = True
        run['counter'] = counter[0]
        run['faults'] = [f"process {pid}: {type(e).__name__}: {e}" for pid, e in runtime.faults]
        return run, ledger

    def execute_stress(self):
        """Run the claim/release counter workload on the cooperative runtime."""
        settings = self.config['stress']
        logger.info(f"Stress: {settings['processes']} processes x {settings['iterations']} "
                    f"iterations on {settings['runners']} runners, {settings['repeats']} repeat(s)")
        started = time.monotonic()
        runs = []
        scenarios = {}
        try:
            for repeat in tqdm(range(settings['repeats']), desc='Stress runs', unit='run'):
                run, ledger = self._stress_once(settings['seed'] + repeat)
                runs.append(run)
                for sid, stats in ledger.scenario_stats().items():
                    if sid in scenarios:
                        scenarios[sid].merge(stats)
                    else:
                        scenarios[sid] = stats
                logger.info(f"  seed {run['seed']}: counter {run['counter']} / {run['expected']}")
        except Exception as e:
            logger.error(f"Stress run failed: {e}", exc_info=True)
            return _result('error', error_message=str(e))

        mismatches = [r for r in runs if not r['timeout'] and r['counter'] != r['expected']]
        faulty = [r for r in runs if r['faults']]
        deadlocked = [r for r in runs if r['deadlock']]
        timed_out = [r for r in runs if r['timeout']]

        summary = {
            'record': 'summary',
            'mode': 'stress',
            'processes': settings['processes'],
            'iterations': settings['iterations'],
            'runners': settings['runners'],
            'repeats': settings['repeats'],
            'seed': settings['seed'],
            'mutant': self.mutant,
            'completed_runs': len(runs) - len(timed_out),
            'counter_mismatches': len(mismatches),
            'contract_faults': sum(len(r['faults']) for r in runs),
            'deadlocks': len(deadlocked),
            'timeouts': len(timed_out),
            'runs': runs,
            'retry_bound': None,
            'elapsed_s': round(time.monotonic() - started, 3),
        }
        records = [summary]
        for name, failed, what in (
            ('mutex', mismatches, "protected counter lost updates"),
            ('contract', faulty, "processes raised during claim/release"),
            ('deadlock', deadlocked, "runtime had no runnable process"),
        ):
            violation = None
            if failed:
                violation = Violation(name, PROPERTIES[name],
                                      f"{what} in {len(failed)} run(s), seeds "
                                      f"{[r['seed'] for r in failed]}")
            records.append(oracle_record(name, PROPERTIES[name], not failed, violation=violation))
        records.extend(scenario_records(scenarios))
        exported = write_report(records, self.output_dir, f"{self.basename}_stress")

        if mismatches or faulty or deadlocked:
            status = 'violation'
            message = (f"{len(mismatches)} counter mismatch(es), {summary['contract_faults']} "
                       f"contract fault(s), {len(deadlocked)} deadlock(s)")
        elif timed_out:
            status, message = 'incomplete', f"{len(timed_out)} run(s) timed out"
        else:
            status, message = 'success', None
        return _result(status, summary, exported, message)

    # CAS report -----------------------------------------------------------

    def execute_cas_report(self, input_path=None):
        """Per-scenario CAS table against the resolution-table bounds.

        With `input_path` the table is derived from an existing report file;
        otherwise the coverage configuration is explored first.
        """
        exported = []
        try:
            if input_path is not None:
                logger.info(f"Reading report from {input_path}")
                parsed = read_report(input_path)
            else:
                report = explore(self.exploration_config('cas_report', oracles={'scenario'},
                                                         witness=False), self.program)
                records = exploration_records(report)
                exported.extend(write_report(records, self.output_dir, f"{self.basename}_cas"))
                parsed = parse_records(records)
        except (OSError, ValueError) as e:
            logger.error(f"Cannot build the CAS report: {e}")
            return _result('error', error_message=str(e))

        summary = parsed['summary']
        retry_bound = summary.get('retry_bound')
        table = cas_table(parsed['scenarios'], retry_bound)
        csv_path = self.output_dir / f"{self.basename}_cas_table.csv"
        self.output_dir.mkdir(parents=True, exist_ok=True)
        table.to_csv(csv_path, index=False)
        exported.append(csv_path)

        verdicts = [row_verdict(r, retry_bound) for r in parsed['scenarios']]
        failed = [r['id'] for r, v in zip(parsed['scenarios'], verdicts) if v == 'FAIL']
        not_hit = [r['id'] for r, v in zip(parsed['scenarios'], verdicts) if v == 'NOT HIT']
        for sid in not_hit:
            logger.warning(f"Scenario {sid} was never observed")
        broken = [r['name'] for r in parsed['oracles'] if not r['ok']]

        result_summary = {
            'table': format_table(table),
            'failed_rows': failed,
            'not_hit': not_hit,
            'violations': broken,
            'complete': summary.get('complete', True),
            'report': format_summary(parsed),
        }
        if failed or broken:
            status = 'violation'
            message = f"rows {failed} outside their bounds" if failed else f"oracles {broken} violated"
        elif not summary.get('complete', True):
            status, message = 'incomplete', "exploration did not finish"
        else:
            status, message = 'success', None
        return _result(status, result_summary, exported, message)
