"""Worker lifecycle: initial task acquisition, round-robin requests,
termination, and per-worker statistics.

:func:`run_worker` is a generator (see :mod:`rebacktrack.transport`) so the
same code runs on threads, processes and inside the simulator.
:func:`solve_parallel` wires ``c`` workers to a backend and collects results.
"""

from __future__ import annotations

import multiprocessing
import threading
import time
import traceback
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Generator, List, Optional

from .engine import (
    ExplorationAborted,
    ExplorationHooks,
    ExploreLog,
    Incumbent,
    SearchProblem,
    explore_steps,
)
from .index import ROOT, CurrentIndex, IndexPath, fix_index
from .transport import (
    WAIT,
    ConfigurationError,
    Endpoint,
    Message,
    Notification,
    SimSchedule,
    Simulator,
    StatusUpdate,
    TaskRequest,
    TaskResponse,
    TransportError,
    WorkerState,
    drive,
    process_backend,
    threaded_backend,
)

BACKENDS = ("threads", "processes", "sim")


class ProtocolError(RuntimeError):
    """A message arrived that the protocol says cannot exist."""


class WorkerFailed(RuntimeError):
    pass


def get_parent(r: int, c: int) -> int:
    """``r - 2**i`` for the largest ``2**i <= r``; 0 for rank 0."""
    if not 0 <= r < c:
        raise ValueError(f"rank {r} outside [0, {c})")
    if r == 0:
        return 0
    return r - (1 << (r.bit_length() - 1))


@dataclass
class WorkerStats:
    rank: int
    tasks_solved: int = 0
    tasks_requested: int = 0
    nodes_explored: int = 0
    wall_time_ms: float = 0.0
    tasks_served: int = 0
    none_served: int = 0


class WorkerRuntime:
    def __init__(self, rank: int, world_size: int, passes_threshold: int = 3):
        if world_size < 1 or not 0 <= rank < world_size:
            raise ConfigurationError(f"rank {rank} invalid for world size {world_size}")
        if passes_threshold < 1:
            raise ConfigurationError("passes_threshold must be >= 1")
        self.rank = rank
        self.world_size = world_size
        self.parent = get_parent(rank, world_size)
        self.passes = 0
        self.passes_threshold = passes_threshold
        self.statuses = [WorkerState.ACTIVE] * world_size
        self.stats = WorkerStats(rank)
        self.init = True

    @property
    def state(self) -> WorkerState:
        return self.statuses[self.rank]

    def note_status(self, rank: int, state: WorkerState) -> None:
        # states only move forward; a stale update never regresses one
        if state < self.statuses[rank]:
            raise ProtocolError(f"rank {rank} went from {self.statuses[rank].name} to {state.name}")
        self.statuses[rank] = state

    def all_at_least(self, state: WorkerState) -> bool:
        return all(s >= state for s in self.statuses)


def get_next_parent(rt: WorkerRuntime) -> int:
    """Advance the round-robin target, skipping self (and counting a pass)."""
    c = rt.world_size
    if c < 2:
        raise ValueError("get_next_parent needs at least two workers")
    rt.parent = (rt.parent + 1) % c
    if rt.parent == rt.rank:
        rt.parent = (rt.parent + 1) % c
        rt.passes += 1
    return rt.parent


def handle_notification(rt: WorkerRuntime, value, incumbent: Incumbent) -> None:
    incumbent.merge(value)


class EndpointHooks(ExplorationHooks):
    """Exploration callbacks backed by a non-blocking endpoint."""

    def __init__(self, rt: WorkerRuntime, endpoint: Endpoint, abort: Optional[threading.Event] = None):
        self.rt = rt
        self.endpoint = endpoint
        self.abort = abort
        self.requests: Deque[int] = deque()
        self.values: List[Any] = []

    def _drain(self) -> None:
        while True:
            msg = self.endpoint.try_receive()
            if msg is None:
                return
            if isinstance(msg, TaskRequest):
                self.requests.append(msg.requester)
            elif isinstance(msg, Notification):
                self.values.append(msg.solution_value)
            elif isinstance(msg, StatusUpdate):
                self.rt.note_status(msg.rank, msg.state)
            else:
                raise ProtocolError(f"rank {self.rt.rank} got {msg!r} while exploring")

    def poll_task_request(self) -> Optional[int]:
        if not self.requests:
            self._drain()
        return self.requests.popleft() if self.requests else None

    def poll_broadcasts(self):
        self._drain()
        values, self.values = self.values, []
        return values

    def send_task(self, raw_index: Optional[IndexPath], requester: int) -> None:
        stats = self.rt.stats
        if raw_index is None:
            stats.none_served += 1
        else:
            stats.tasks_served += 1
        self.endpoint.send(requester, TaskResponse(raw_index))

    def announce_solution(self, value) -> None:
        self.endpoint.log("solution", f"value={value}")
        self.endpoint.broadcast(Notification(value))

    def should_abort(self) -> bool:
        return self.abort is not None and self.abort.is_set()


@dataclass
class WorkerResult:
    rank: int
    best_value: Any
    certificate: Any
    certificate_value: Any
    stats: WorkerStats
    log: ExploreLog


def _set_state(rt: WorkerRuntime, endpoint: Endpoint, state: WorkerState) -> None:
    # broadcast first, then take effect locally
    endpoint.broadcast(StatusUpdate(rt.rank, state))
    endpoint.log("state", state.name.lower())
    rt.note_status(rt.rank, state)


def _idle_message(rt: WorkerRuntime, endpoint: Endpoint, msg: Message, incumbent: Incumbent) -> None:
    """React to a message received while holding no work."""
    if isinstance(msg, TaskRequest):
        rt.stats.none_served += 1
        endpoint.send(msg.requester, TaskResponse(None))
    elif isinstance(msg, StatusUpdate):
        rt.note_status(msg.rank, msg.state)
    elif isinstance(msg, Notification):
        handle_notification(rt, msg.solution_value, incumbent)
    else:
        raise ProtocolError(f"rank {rt.rank} got an unsolicited {msg!r}")


def termination_protocol(rt: WorkerRuntime, endpoint: Endpoint, incumbent: Incumbent) -> Generator:
    """Go inactive, wait until everyone is, then go dead and wait for the
    others' death notices so no message is left in flight towards us."""
    _set_state(rt, endpoint, WorkerState.INACTIVE)
    while not rt.all_at_least(WorkerState.INACTIVE):
        _idle_message(rt, endpoint, (yield WAIT), incumbent)
    _set_state(rt, endpoint, WorkerState.DEAD)
    while not rt.all_at_least(WorkerState.DEAD):
        _idle_message(rt, endpoint, (yield WAIT), incumbent)


def _request_task(rt: WorkerRuntime, endpoint: Endpoint, target: int, incumbent: Incumbent) -> Generator:
    rt.stats.tasks_requested += 1
    if rt.statuses[target] != WorkerState.ACTIVE:
        endpoint.log("skip", f"to={target}")
        return None
    endpoint.send(target, TaskRequest(rt.rank))
    while True:
        msg = yield WAIT
        if isinstance(msg, TaskResponse):
            return msg.raw_index
        _idle_message(rt, endpoint, msg, incumbent)


def run_worker(
    rt: WorkerRuntime,
    problem: SearchProblem,
    endpoint: Endpoint,
    *,
    prune: bool = True,
    poll_interval: int = 1,
    log: Optional[ExploreLog] = None,
    abort: Optional[threading.Event] = None,
) -> Generator[str, Optional[Message], WorkerResult]:
    """One worker from start to death; the generator returns a :class:`WorkerResult`."""
    start_time = time.perf_counter()
    log = log if log is not None else ExploreLog()
    incumbent = Incumbent()
    hooks = EndpointHooks(rt, endpoint, abort)
    c, r = rt.world_size, rt.rank

    def solve(path, received: bool):
        if received:
            rt.stats.tasks_solved += 1
            rt.passes = 0
        endpoint.log("task", ",".join(map(str, path)))
        problem.convert_index(path)
        ci = CurrentIndex.for_task(path)
        for value in hooks.poll_broadcasts():
            incumbent.merge(value)
        yield from explore_steps(
            problem, path, ci, hooks, incumbent, prune=prune, poll_interval=poll_interval, log=log
        )

    if c == 1:
        rt.init = False
        yield from solve(ROOT, False)
        rt.statuses[r] = WorkerState.DEAD
    else:
        while True:
            if rt.passes >= rt.passes_threshold:
                yield from termination_protocol(rt, endpoint, incumbent)
                break
            if rt.init:
                rt.init = False
                if r == 0:
                    yield from solve(ROOT, False)
                else:
                    raw = yield from _request_task(rt, endpoint, rt.parent, incumbent)
                    rt.parent = (r + 1) % c
                    if raw is not None:
                        yield from solve(fix_index(raw), True)
            target = get_next_parent(rt)
            raw = yield from _request_task(rt, endpoint, target, incumbent)
            if raw is not None:
                yield from solve(fix_index(raw), True)
    endpoint.close()
    rt.stats.nodes_explored = log.nodes
    rt.stats.wall_time_ms = (time.perf_counter() - start_time) * 1000.0
    cert_value = log.announced[-1] if log.announced else None
    return WorkerResult(r, incumbent.best_value, incumbent.best_certificate, cert_value, rt.stats, log)


# -- orchestration ------------------------------------------------------------------


@dataclass
class ParallelResult:
    best_value: Any
    certificate: Any
    stats: List[WorkerStats]
    wall_time_ms: float
    logs: List[ExploreLog] = field(default_factory=list)
    trace: Optional[List[str]] = None
    simulator: Optional[Simulator] = None

    @property
    def workers(self) -> int:
        return len(self.stats)

    @property
    def ts_avg(self) -> float:
        return sum(s.tasks_solved for s in self.stats) / len(self.stats)

    @property
    def tr_avg(self) -> float:
        return sum(s.tasks_requested for s in self.stats) / len(self.stats)


def _combine(results: List[WorkerResult], wall_ms: float, **extra) -> ParallelResult:
    results = sorted(results, key=lambda w: w.rank)
    finders = [w for w in results if w.certificate_value is not None]
    best_value = None
    certificate = None
    if finders:
        winner = min(finders, key=lambda w: (w.certificate_value, w.rank))
        best_value, certificate = winner.certificate_value, winner.certificate
    for w in results:
        # every bound a worker knows was found, with a certificate, somewhere
        if w.best_value is not None and (best_value is None or w.best_value < best_value):
            raise ProtocolError(f"rank {w.rank} holds bound {w.best_value} with no certificate behind it")
    return ParallelResult(
        best_value, certificate, [w.stats for w in results], wall_ms, [w.log for w in results], **extra
    )


def _new_log(record_visits: bool) -> ExploreLog:
    return ExploreLog.recording() if record_visits else ExploreLog()


def _run_sim(factory, c, schedule, passes_threshold, record_visits, kwargs) -> ParallelResult:
    sim = Simulator(c, schedule if schedule is not None else SimSchedule())
    for r in range(c):
        rt = WorkerRuntime(r, c, passes_threshold)
        gen = run_worker(rt, factory(), sim.endpoints[r], log=_new_log(record_visits), **kwargs)
        sim.spawn(r, gen)
    t0 = time.perf_counter()
    results = sim.run()
    wall = (time.perf_counter() - t0) * 1000.0
    if not sim.quiescent():
        raise ProtocolError("simulation ended with messages still in flight")
    return _combine(results, wall, trace=sim.trace, simulator=sim)


def _run_threads(factory, c, passes_threshold, record_visits, timeout, kwargs) -> ParallelResult:
    endpoints = threaded_backend(c)
    abort = threading.Event()
    results: List[Optional[WorkerResult]] = [None] * c
    errors: List[str] = []
    problems = [factory() for _ in range(c)]

    def body(r: int) -> None:
        rt = WorkerRuntime(r, c, passes_threshold)
        try:
            gen = run_worker(rt, problems[r], endpoints[r], log=_new_log(record_visits), abort=abort, **kwargs)
            results[r] = drive(gen, endpoints[r], abort)
        except BaseException:
            rt.statuses[r] = WorkerState.DEAD
            errors.append(f"rank {r}:\n{traceback.format_exc()}")
            abort.set()

    threads = [threading.Thread(target=body, args=(r,), name=f"worker-{r}", daemon=True) for r in range(c)]
    t0 = time.perf_counter()
    for t in threads:
        t.start()
    deadline = None if timeout is None else t0 + timeout
    for t in threads:
        t.join(None if deadline is None else max(0.0, deadline - time.perf_counter()))
    wall = (time.perf_counter() - t0) * 1000.0
    if any(t.is_alive() for t in threads):
        abort.set()
        for t in threads:
            t.join(5.0)
        raise WorkerFailed(f"workers still running after {timeout} s")
    if errors:
        raise WorkerFailed("\n".join(errors))
    return _combine(results, wall)


def _process_body(r, c, factory, endpoint, passes_threshold, record_visits, kwargs, out) -> None:
    rt = WorkerRuntime(r, c, passes_threshold)
    try:
        gen = run_worker(rt, factory(), endpoint, log=_new_log(record_visits), **kwargs)
        out.put((r, drive(gen, endpoint), None))
    except BaseException:
        out.put((r, None, traceback.format_exc()))


def _run_processes(factory, c, passes_threshold, record_visits, timeout, kwargs) -> ParallelResult:
    ctx = multiprocessing.get_context("fork")
    endpoints = process_backend(c, ctx)
    out = ctx.Queue()
    t0 = time.perf_counter()
    procs = [
        ctx.Process(
            target=_process_body,
            args=(r, c, factory, endpoints[r], passes_threshold, record_visits, kwargs, out),
            daemon=True,
        )
        for r in range(c)
    ]
    for p in procs:
        p.start()
    results, errors = [], []
    deadline = None if timeout is None else t0 + timeout
    try:
        while len(results) + len(errors) < c:
            wait = None if deadline is None else deadline - time.perf_counter()
            if wait is not None and wait <= 0:
                raise WorkerFailed(f"workers still running after {timeout} s")
            try:
                r, res, err = out.get(timeout=1.0 if wait is None else min(wait, 1.0))
            except Exception:
                if all(not p.is_alive() for p in procs) and out.empty():
                    raise WorkerFailed("worker processes exited without reporting")
                continue
            if err is not None:
                errors.append(f"rank {r}:\n{err}")
                break
            results.append(res)
        wall = (time.perf_counter() - t0) * 1000.0
    finally:
        for p in procs:
            if errors or p.is_alive():
                p.join(0.5)
            if p.is_alive():
                p.terminate()
            p.join()
    if errors:
        raise WorkerFailed("\n".join(errors))
    return _combine(results, wall)


def solve_parallel(
    factory: Callable[[], SearchProblem],
    workers: int,
    *,
    backend: str = "threads",
    schedule: Optional[SimSchedule] = None,
    prune: bool = True,
    poll_interval: int = 1,
    passes_threshold: int = 3,
    record_visits: bool = False,
    timeout: Optional[float] = None,
) -> ParallelResult:
    """Solve with ``workers`` cooperating workers.

    ``factory`` builds one independent problem instance per worker.  The
    ``sim`` backend runs everything on the calling thread under ``schedule``.
    """
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    if poll_interval < 1:
        raise ConfigurationError("poll_interval must be >= 1")
    if passes_threshold < 1:
        raise ConfigurationError("passes_threshold must be >= 1")
    kwargs = dict(prune=prune, poll_interval=poll_interval)
    if backend == "sim":
        return _run_sim(factory, workers, schedule, passes_threshold, record_visits, kwargs)
    if schedule is not None:
        raise ConfigurationError("a schedule only applies to the sim backend")
    if backend == "threads":
        return _run_threads(factory, workers, passes_threshold, record_visits, timeout, kwargs)
    if backend == "processes":
        return _run_processes(factory, workers, passes_threshold, record_visits, timeout, kwargs)
    raise ConfigurationError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


__all__ = [
    "BACKENDS",
    "ExplorationAborted",
    "ParallelResult",
    "ProtocolError",
    "TransportError",
    "WorkerFailed",
    "WorkerResult",
    "WorkerRuntime",
    "WorkerStats",
    "get_next_parent",
    "get_parent",
    "handle_notification",
    "run_worker",
    "solve_parallel",
    "termination_protocol",
]
