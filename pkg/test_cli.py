#!/usr/bin/env python3
"""
Tests for the command line: subcommands, report files and exit codes.
"""

import pytest

from main import EXIT_INCOMPLETE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main
from utils.report_writer import read_report


def cli(tmp_path, *args):
    return main([*args, '--output', str(tmp_path), '--log-level', 'WARNING'])


def test_explore_clean_run_writes_report(tmp_path):
    assert cli(tmp_path, 'explore', '--processes', '1', '--cycles', '1') == EXIT_OK
    parsed = read_report(tmp_path / 'exploration.jsonl')
    assert parsed['summary']['config']['processes'] == 1
    assert (tmp_path / 'exploration.txt').exists()


def test_explore_two_processes(tmp_path):
    assert cli(tmp_path, 'explore', '--processes', '2', '--cycles', '1', '--no-witness') == EXIT_OK


@pytest.mark.parametrize('mutant', ['blind-owner-store', 'drop-schedule-retry', 'grant-on-wait'])
def test_explore_mutant_is_a_violation(tmp_path, mutant):
    code = cli(tmp_path, 'explore', '--processes', '2', '--cycles', '1', '--no-witness',
               '--mutant', mutant)
    assert code == EXIT_VIOLATION
    parsed = read_report(tmp_path / 'exploration.jsonl')
    broken = [r for r in parsed['oracles'] if not r['ok']]
    assert broken and all(r['counterexample'] for r in broken)


def test_explore_budget_exhaustion(tmp_path):
    code = cli(tmp_path, 'explore', '--processes', '2', '--cycles', '1', '--state-budget', '10')
    assert code == EXIT_INCOMPLETE


@pytest.mark.parametrize('args', [
    ['explore', '--processes', '0'],
    ['explore', '--processes', '4', '--cycles', '1'],
    ['explore', '--cycles', '3'],
    ['explore', '--oracles', 'mutex,telepathy'],
    ['explore', '--mutant', 'no-such-bug'],
    ['stress', '--runners', '0'],
])
def test_bad_values_are_usage_errors(tmp_path, args):
    assert cli(tmp_path, *args) == EXIT_USAGE


def test_argument_errors_are_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(['teleport']) == EXIT_USAGE
    assert cli(tmp_path, 'explore', '--processes', 'two') == EXIT_USAGE


def test_missing_config_file_is_a_usage_error(tmp_path):
    assert main(['explore', '--config', str(tmp_path / 'absent.yaml')]) == EXIT_USAGE


def test_config_file_values_are_used(tmp_path, config_file):
    path = config_file("explorer:\n  processes: 1\n  cycles: 1\n  witness: false\n")
    assert main(['explore', '--config', path, '--output', str(tmp_path)]) == EXIT_OK
    assert read_report(tmp_path / 'exploration.jsonl')['summary']['paths'] == 1


def test_stress_small_run(tmp_path):
    code = cli(tmp_path, 'stress', '--processes', '3', '--iterations', '40', '--runners', '2',
               '--seed', '5', '--repeats', '2', '--timeout', '60')
    assert code == EXIT_OK
    parsed = read_report(tmp_path / 'exploration_stress.jsonl')
    assert parsed['summary']['counter_mismatches'] == 0
    assert [run['counter'] for run in parsed['summary']['runs']] == [120, 120]


def test_cas_report_from_fresh_exploration(tmp_path, capsys):
    code = cli(tmp_path, 'cas-report', '--processes', '1', '--cycles', '1')
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert 'PASS' in out and 'NOT HIT' in out
    assert (tmp_path / 'exploration_cas_table.csv').exists()


def test_cas_report_from_existing_report(tmp_path, capsys):
    assert cli(tmp_path, 'explore', '--processes', '1', '--cycles', '2') == EXIT_OK
    capsys.readouterr()
    code = cli(tmp_path, 'cas-report', '--input', str(tmp_path / 'exploration.jsonl'))
    assert code == EXIT_OK
    assert 'Unclaimed' in capsys.readouterr().out


def test_cas_report_with_unreadable_input(tmp_path):
    assert cli(tmp_path, 'cas-report', '--input', str(tmp_path / 'missing.jsonl')) == EXIT_INCOMPLETE
