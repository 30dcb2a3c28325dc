"""Shared fixtures."""

import pytest

from modules.atomics import ProcessState, StateTable
from modules.protocol_core import RuntimeHooks, SharedMutexState


class RecordingHooks(RuntimeHooks):
    def __init__(self):
        self.waits = []
        self.schedules = []

    def on_wait(self, pid):
        self.waits.append(pid)

    def on_schedule(self, pid):
        self.schedules.append(pid)


@pytest.fixture
def hooks():
    return RecordingHooks()


@pytest.fixture
def make_mutex():
    """Factory for a mutex whose processes 1..n start ACTIVE."""

    def factory(processes=2):
        states = StateTable()
        for pid in range(1, processes + 1):
            states.register(pid, ProcessState.ACTIVE)
        return SharedMutexState(states, processes)

    return factory


@pytest.fixture
def config_file(tmp_path):
    """Write a small YAML configuration and return its path."""

    def write(text):
        path = tmp_path / 'config.yaml'
        path.write_text(text)
        return str(path)

    return write
