"""
Structured run reports and the summaries derived from them.

A report is a JSON Lines file. The first line is the schema tag, every other
line is one record with a `record` field naming its type: `summary`,
`oracle`, `scenario` or `witness`. The human-readable `.txt` summary and the
CAS table are always built from these records, never from live objects, so
`cas-report --input` sees exactly what a fresh run would.
"""

import json
import logging
from pathlib import Path

import pandas as pd

from modules.scenarios import SCENARIOS
from pipeline.oracles import PROPERTIES

logger = logging.getLogger(__name__)

SCHEMA = 'claim-release-report/1'


def _stats_fields(stats):
    if stats is None or not stats.hits:
        return {'hits': 0, 'min_cas': None, 'max_cas': None, 'mean_cas': None,
                'max_total_cas': None, 'max_retries': None}
    return {
        'hits': stats.hits,
        'min_cas': stats.min_cas,
        'max_cas': stats.max_cas,
        'mean_cas': round(stats.mean_cas, 4),
        'max_total_cas': stats.max_total_cas,
        'max_retries': stats.max_retries,
    }


def scenario_records(scenario_stats):
    """One record per resolution scenario, observed or not."""
    records = []
    for sid, row in SCENARIOS.items():
        record = {'record': 'scenario', 'id': sid, 'name': row.name,
                  'outcome': row.outcome, 'resolution': row.resolution}
        record.update(_stats_fields(scenario_stats.get(sid)))
        record['table_min'] = row.min_cas
        record['table_max'] = row.max_cas
        records.append(record)
    return records


def oracle_record(name, property_name, ok, states=None, paths=None, violation=None):
    record = {
        'record': 'oracle',
        'name': name,
        'property': property_name,
        'ok': ok,
        'states': states,
        'paths': paths,
        'message': None,
        'schedule': None,
        'counterexample': None,
        'rendered': None,
    }
    if violation is not None:
        record['message'] = violation.message
        record['schedule'] = list(violation.schedule)
        record['counterexample'] = [event.to_dict() for event in violation.path]
        record['rendered'] = [event.describe() for event in violation.path]
    return record


def exploration_records(report):
    """Records of one ExplorationReport."""
    summary = {
        'record': 'summary',
        'mode': 'explore',
        'config': report.config,
        'ok': report.ok,
        'complete': report.complete,
        'states': report.states,
        'transitions': report.transitions,
        'paths': report.paths,
        'outcomes': len(report.outcomes),
        'max_enqueue_retries': report.max_enqueue_retries,
        'retry_bound': report.retry_bound,
        'release_cas': _stats_fields(report.releases),
        'elapsed_s': round(report.elapsed_s, 3),
    }
    records = [summary]
    for name, verdict in report.verdicts.items():
        records.append(oracle_record(name, PROPERTIES[name], verdict.ok,
                                     report.states, report.paths, verdict.violation))
    records.extend(scenario_records(report.scenarios))
    if report.witness is not None:
        w = report.witness
        records.append({
            'record': 'witness',
            'begin_order': list(w.begin_order),
            'end_orders': [list(order) for order in w.end_orders],
            'traces': [[event.describe() for event in trace] for trace in w.traces],
        })
    return records


def parse_records(records):
    """Group flat records into {'summary', 'oracles', 'scenarios', 'witness'}."""
    parsed = {'summary': {}, 'oracles': [], 'scenarios': [], 'witness': None}
    for record in records:
        kind = record.get('record')
        if kind == 'summary':
            parsed['summary'] = record
        elif kind == 'oracle':
            parsed['oracles'].append(record)
        elif kind == 'scenario':
            parsed['scenarios'].append(record)
        elif kind == 'witness':
            parsed['witness'] = record
        else:
            logger.warning(f"Ignoring unknown report record {kind!r}")
    return parsed


def write_report(records, output_dir, basename):
    """Write `<basename>.jsonl` and `<basename>.txt`; returns both paths."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    jsonl_path = output_dir / f"{basename}.jsonl"
    txt_path = output_dir / f"{basename}.txt"

    with open(jsonl_path, 'w', encoding='utf-8') as f:
        f.write(json.dumps({'schema': SCHEMA}) + '\n')
        for record in records:
            f.write(json.dumps(record) + '\n')

    with open(txt_path, 'w', encoding='utf-8') as f:
        f.write(format_summary(parse_records(records)))

    logger.info(f"Report saved to: {jsonl_path}")
    return jsonl_path, txt_path


def read_report(path):
    """Parse a report file written by `write_report`.

    Raises ValueError when the schema tag is missing or unknown.
    """
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line for line in f.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"empty report: {path}")
    header = json.loads(lines[0])
    if header.get('schema') != SCHEMA:
        raise ValueError(f"unsupported report schema {header.get('schema')!r} in {path}")
    return parse_records(json.loads(line) for line in lines[1:])


def bound_text(table_min, table_max, retry_bound=None):
    if table_max is not None:
        return f"{table_min}..{table_max}"
    if retry_bound is None:
        return f"{table_min}..∞"
    return f"{table_min}..∞ (≤{retry_bound} retries)"


def row_verdict(record, retry_bound=None):
    """PASS / FAIL for an observed row, NOT HIT otherwise."""
    if not record.get('hits'):
        return 'NOT HIT'
    if record['min_cas'] < record['table_min']:
        return 'FAIL'
    if record['table_max'] is not None and record['max_cas'] > record['table_max']:
        return 'FAIL'
    if retry_bound is not None and (record.get('max_retries') or 0) > retry_bound:
        return 'FAIL'
    return 'PASS'


def cas_table(scenarios, retry_bound=None):
    """Per-scenario CAS counts next to the table bounds, one row per scenario."""
    rows = []
    for record in sorted(scenarios, key=lambda r: r['id']):
        rows.append({
            'id': record['id'],
            'scenario': record['name'],
            'resolution': record.get('resolution'),
            'hits': record.get('hits', 0),
            'min': record.get('min_cas'),
            'max': record.get('max_cas'),
            'mean': record.get('mean_cas'),
            'max_total': record.get('max_total_cas'),
            'max_retries': record.get('max_retries'),
            'bound': bound_text(record['table_min'], record['table_max'], retry_bound),
            'verdict': row_verdict(record, retry_bound),
        })
    return pd.DataFrame(rows)


def format_table(table):
    if table.empty:
        return "(no scenarios)\n"
    return table.fillna('-').to_string(index=False) + '\n'


def format_summary(parsed):
    """Human-readable summary of parsed report records."""
    summary = parsed['summary']
    lines = ["=" * 80]
    mode = summary.get('mode', 'explore')
    lines.append(f"CLAIM/RELEASE {mode.upper()} REPORT")
    lines.append("=" * 80)

    if mode == 'stress':
        for key in ('processes', 'iterations', 'runners', 'repeats', 'seed'):
            lines.append(f"  {key}: {summary.get(key)}")
        lines.append(f"  completed runs: {summary.get('completed_runs')}")
        lines.append(f"  counter mismatches: {summary.get('counter_mismatches')}")
        lines.append(f"  contract faults: {summary.get('contract_faults')}")
        lines.append(f"  deadlocks: {summary.get('deadlocks')}")
        lines.append(f"  timeouts: {summary.get('timeouts')}")
    else:
        config = summary.get('config', {})
        lines.append(f"  processes: {config.get('processes')}, cycles: {config.get('cycles')}"
                     + (f", mutant: {config['mutant']}" if config.get('mutant') else ''))
        lines.append(f"  complete: {summary.get('complete')}")
        lines.append(f"  states: {summary.get('states')}, transitions: {summary.get('transitions')}, "
                     f"paths: {summary.get('paths')}")
        lines.append(f"  max enqueue retries: {summary.get('max_enqueue_retries')} "
                     f"(bound {summary.get('retry_bound')})")
    lines.append(f"  elapsed: {summary.get('elapsed_s')}s")

    lines.append("")
    lines.append("Oracles:")
    for record in parsed['oracles']:
        verdict = 'ok' if record['ok'] else 'VIOLATED'
        lines.append(f"  {record['name']:<12} {record['property']:<32} {verdict}")
    for record in parsed['oracles']:
        if record['ok']:
            continue
        lines.append("")
        lines.append(f"Counterexample for {record['property']}: {record['message']}")
        if record.get('schedule') is not None:
            lines.append(f"  schedule: {' '.join(str(pid) for pid in record['schedule'])}")
        for step in record.get('rendered') or ():
            lines.append(f"    {step}")

    lines.append("")
    lines.append("CAS per scenario:")
    retry_bound = summary.get('retry_bound')
    lines.append(format_table(cas_table(parsed['scenarios'], retry_bound)).rstrip('\n'))

    witness = parsed.get('witness')
    if witness:
        lines.append("")
        lines.append(f"Nondeterminism witness: claim order {witness['begin_order']} granted as "
                     f"{witness['end_orders'][0]} and {witness['end_orders'][1]}")
    lines.append("=" * 80)
    return '\n'.join(lines) + '\n'
