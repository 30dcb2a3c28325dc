#!/usr/bin/env python3
"""
Tests for the cooperative k-runner runtime hosting the mutex.
"""

import random
import time

import pytest

from modules.atomics import NULL, ProcessState
from modules.coop_scheduler import Runtime, run_to_completion, spawn
from modules.errors import DeadlockError
from modules.instrumentation import CasLedger


def counter_workload(runtime, processes, iterations, pause_every=0):
    mutex = runtime.new_mutex(processes)
    counter = [0]

    def body(ctx):
        for i in range(iterations):
            yield from ctx.acquire(mutex)
            value = counter[0]
            time.sleep(0)
            counter[0] = value + 1
            ctx.release(mutex)
            if pause_every and i % pause_every == 0:
                yield from ctx.pause()

    for _ in range(processes):
        spawn(runtime, body)
    return mutex, counter


def test_single_process_runs_to_completion():
    runtime = Runtime(runners=1)
    mutex, counter = counter_workload(runtime, 1, 50)
    run_to_completion(runtime, timeout=30)
    assert counter[0] == 50
    assert runtime.faults == []
    assert mutex.load_owner() == NULL


def test_counter_is_protected_on_four_runners():
    runtime = Runtime(runners=4)
    mutex, counter = counter_workload(runtime, 8, 200, pause_every=7)
    runtime.run_to_completion(timeout=60)
    assert counter[0] == 8 * 200
    assert runtime.faults == []
    assert mutex.wait_queue.snapshot() == []
    assert set(runtime.states.snapshot().values()) == {ProcessState.ACTIVE}


def test_more_runners_than_processes():
    runtime = Runtime(runners=6)
    _, counter = counter_workload(runtime, 2, 100)
    runtime.run_to_completion(timeout=30)
    assert counter[0] == 200


def test_ledger_sees_every_claim():
    ledger = CasLedger()
    runtime = Runtime(runners=3, sink=ledger.record)
    counter_workload(runtime, 4, 50)
    runtime.run_to_completion(timeout=60)
    stats = ledger.scenario_stats()
    assert sum(s.hits for s in stats.values()) == 4 * 50
    assert ledger.open_attempts() == {}
    assert stats[1].min_cas == 3


def test_parked_process_without_waker_is_a_deadlock():
    runtime = Runtime(runners=2)

    def sleeper(ctx):
        yield 'park'

    runtime.spawn(sleeper)
    with pytest.raises(DeadlockError) as error:
        runtime.run_to_completion(timeout=30)
    assert error.value.dump['status'] == {1: 'parked'}


def test_failing_process_is_recorded():
    runtime = Runtime(runners=1)

    def broken(ctx):
        raise RuntimeError('boom')

    def fine(ctx):
        yield from ctx.pause()

    runtime.spawn(broken)
    runtime.spawn(fine)
    runtime.run_to_completion(timeout=30)
    assert [pid for pid, _ in runtime.faults] == [1]


def test_plain_function_bodies_are_allowed():
    runtime = Runtime(runners=1)
    seen = []
    runtime.spawn(lambda ctx: seen.append(ctx.pid))
    runtime.run_to_completion(timeout=30)
    assert seen == [1]


def test_runner_count_must_be_positive():
    with pytest.raises(ValueError):
        Runtime(runners=0)


def test_runtime_without_processes_returns_at_once():
    runtime = Runtime(runners=2)
    runtime.run_to_completion(timeout=1)
    assert runtime.pids == []
    assert runtime.faults == []


@pytest.mark.slow
@pytest.mark.parametrize('seed', range(20))
def test_eight_processes_ten_thousand_cycles_on_four_runners(seed):
    processes, iterations = 8, 10_000
    rng = random.Random(seed)
    runtime = Runtime(runners=4)
    mutex = runtime.new_mutex(processes)
    counter = [0]

    def make_body(process_seed):
        local = random.Random(process_seed)

        def body(ctx):
            for _ in range(iterations):
                yield from ctx.acquire(mutex)
                value = counter[0]
                if local.random() < 0.05:
                    time.sleep(0)
                counter[0] = value + 1
                ctx.release(mutex)
                if local.random() < 0.05:
                    yield from ctx.pause()
        return body

    bodies = [make_body(rng.getrandbits(32)) for _ in range(processes)]
    rng.shuffle(bodies)
    for body in bodies:
        runtime.spawn(body)
    runtime.run_to_completion(timeout=60)
    assert counter[0] == processes * iterations
    assert runtime.faults == []
    assert mutex.load_owner() == NULL
