"""
Cooperative k-runner runtime for processes that use the claim/release mutex.

Processes are generator functions taking a ProcessContext. A process runs on
one of `runners` worker threads until it finishes or yields; yielding parks it
(it is *not* put back on the run queue). A parked process becomes runnable
again only when `on_schedule` is called for it, or when its own state turns
SCHEDULED just as it parks. The mutex never spins: a denied claim yields and
the releasing owner schedules the next waiter.
"""

import inspect
import logging
import queue
import time
from enum import Enum
from threading import Lock, Thread

from .atomics import ProcessState, StateTable
from .errors import DeadlockError
from .protocol_core import (
    DEFAULT_PROGRAM, RuntimeHooks, SharedMutexState, claim, release, yield_until_scheduled,
)

logger = logging.getLogger(__name__)

_STOP = object()

# Yielded by a process that wants to stay runnable
PAUSE = object()


class ProcessStatus(str, Enum):
    QUEUED = 'queued'
    RUNNING = 'running'
    PARKED = 'parked'
    DONE = 'done'


class _ProcessRecord:
    __slots__ = ('pid', 'body', 'context', 'generator', 'status', 'lock', 'started', 'error')

    def __init__(self, pid, body, context):
        self.pid = pid
        self.body = body
        self.context = context
        self.generator = None
        self.status = ProcessStatus.QUEUED
        self.lock = Lock()
        self.started = False
        self.error = None


class _Hooks(RuntimeHooks):
    def __init__(self, runtime):
        self.runtime = runtime

    def on_wait(self, pid):
        logger.debug(f"process {pid} parking")

    def on_schedule(self, pid):
        self.runtime.wake(pid)


class ProcessContext:
    """What a process body sees: its pid and mutex helpers bound to it."""

    def __init__(self, runtime, pid):
        self.runtime = runtime
        self.pid = pid

    def acquire(self, mutex):
        """Generator: claim `mutex`, parking until scheduled if denied.

        Use as `outcome = yield from ctx.acquire(mutex)`.
        """
        rt = self.runtime
        outcome = claim(mutex, self.pid, rt.hooks, sink=rt.sink, program=rt.program)
        if not outcome.granted:
            yield from yield_until_scheduled(mutex, self.pid, rt.hooks, sink=rt.sink,
                                             program=rt.program)
        return outcome

    def release(self, mutex):
        rt = self.runtime
        release(mutex, self.pid, rt.hooks, sink=rt.sink, program=rt.program)

    def pause(self):
        """Generator: give up the runner but stay runnable."""
        yield PAUSE


class Runtime:
    """Run queue, `runners` worker threads and the process table."""

    def __init__(self, runners=4, sink=None, program=DEFAULT_PROGRAM, poll_interval_s=0.01):
        if runners < 1:
            raise ValueError(f"runners must be positive, got {runners}")
        self.runners = runners
        self.sink = sink
        self.program = program
        self.poll_interval_s = poll_interval_s
        self.states = StateTable()
        self.run_queue = queue.Queue()
        self.hooks = _Hooks(self)
        self.faults = []

        self._records = {}
        self._next_pid = 1
        self._lock = Lock()
        self._outstanding = 0   # processes queued or running
        self._live = 0
        self._failure = None
        self._threads = []

        logger.info(f"Cooperative runtime initialized ({runners} runners)")

    # Setup ----------------------------------------------------------------

    def new_mutex(self, capacity=None):
        """Mutex whose wait queue holds up to `capacity` processes."""
        return SharedMutexState(self.states, capacity or max(len(self._records), 1))

    def spawn(self, body):
        """Register `body(ctx)` as a new process; returns its pid.

        The process starts SCHEDULED and is queued for its first run.
        """
        with self._lock:
            pid = self._next_pid
            self._next_pid += 1
            self.states.register(pid, ProcessState.SCHEDULED)
            self._records[pid] = _ProcessRecord(pid, body, ProcessContext(self, pid))
            self._live += 1
            self._outstanding += 1
        self.run_queue.put(pid)
        logger.debug(f"Spawned process {pid}")
        return pid

    # Scheduling -----------------------------------------------------------

    def wake(self, pid):
        """Make a parked process runnable again (on_schedule)."""
        record = self._records[pid]
        with record.lock:
            if record.status is ProcessStatus.PARKED:
                self._enqueue(record)

    def _enqueue(self, record):
        # caller holds record.lock
        record.status = ProcessStatus.QUEUED
        with self._lock:
            self._outstanding += 1
        self.run_queue.put(record.pid)

    def _runner(self, index):
        logger.debug(f"Runner {index} started")
        while True:
            try:
                pid = self.run_queue.get(timeout=self.poll_interval_s)
            except queue.Empty:
                if self._idle_check():
                    break
                continue
            if pid is _STOP:
                break
            self._run_process(pid)
        logger.debug(f"Runner {index} stopped")

    def _run_process(self, pid):
        record = self._records[pid]
        with record.lock:
            if record.status is not ProcessStatus.QUEUED:
                self._settle()
                return
            record.status = ProcessStatus.RUNNING
        finished = False
        yielded = None
        try:
            if not record.started:
                record.started = True
                self.states.cell(pid).store(ProcessState.ACTIVE)
                result = record.body(record.context)
                if not inspect.isgenerator(result):
                    finished = True
                else:
                    record.generator = result
            if not finished:
                yielded = next(record.generator)
        except StopIteration:
            finished = True
        except Exception as e:
            logger.error(f"Process {pid} failed: {e}", exc_info=True)
            record.error = e
            self.faults.append((pid, e))
            finished = True

        with record.lock:
            if finished:
                record.status = ProcessStatus.DONE
            elif yielded is PAUSE:
                self._enqueue(record)
            else:
                record.status = ProcessStatus.PARKED
                # a schedule that landed before we parked must not be lost
                if self.states.load(pid) == ProcessState.SCHEDULED:
                    self._enqueue(record)
        if finished:
            with self._lock:
                self._live -= 1
        self._settle()

    def _settle(self):
        with self._lock:
            self._outstanding -= 1
            all_done = self._live == 0
        if all_done:
            self._stop_runners()

    def _idle_check(self):
        """True when runners should exit: all done, or nothing can ever run again."""
        with self._lock:
            if self._live == 0 or self._failure is not None:
                return True
            if self._outstanding > 0:
                return False
            self._failure = DeadlockError(
                f"no runnable process while {self._live} process(es) are unfinished",
                dump=self.dump(),
            )
        logger.error(f"Deadlock detected: {self._failure.dump}")
        self._stop_runners()
        return True

    def _stop_runners(self):
        for _ in range(self.runners):
            self.run_queue.put(_STOP)

    def dump(self):
        """Process states and statuses, for deadlock reports."""
        return {
            'states': {pid: s.name for pid, s in self.states.snapshot().items()},
            'status': {pid: r.status.value for pid, r in sorted(self._records.items())},
            'faults': [(pid, repr(e)) for pid, e in self.faults],
        }

    # Running --------------------------------------------------------------

    def run_to_completion(self, timeout=None):
        """Start the runners and wait until every process has finished.

        Raises DeadlockError when processes remain but none can run, and
        TimeoutError when `timeout` seconds pass first.
        """
        if not self._records:
            return
        started = time.monotonic()
        self._threads = [Thread(target=self._runner, args=(i,), daemon=True)
                         for i in range(self.runners)]
        for thread in self._threads:
            thread.start()
        for thread in self._threads:
            remaining = None if timeout is None else max(0.0, timeout - (time.monotonic() - started))
            thread.join(remaining)
            if thread.is_alive():
                with self._lock:
                    self._live = 0
                self._stop_runners()
                raise TimeoutError(f"runtime did not finish within {timeout}s: {self.dump()}")
        if self._failure is not None:
            raise self._failure
        logger.debug(f"All {len(self._records)} processes finished "
                     f"in {time.monotonic() - started:.3f}s")

    @property
    def pids(self):
        return sorted(self._records)


def spawn(rt, body):
    return rt.spawn(body)


def run_to_completion(rt, timeout=None):
    rt.run_to_completion(timeout)


def hooks(rt):
    return rt.hooks
