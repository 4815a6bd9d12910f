"""Messages, their wire format, and the backends that carry them.

Every backend hands out one :class:`Endpoint` per rank with the same
contract: reliable delivery, FIFO order per sender/receiver pair, no
duplicates.  Three backends exist:

* :func:`threaded_backend` -- in-process queues, one thread per worker;
* :func:`process_backend` -- ``multiprocessing`` queues carrying encoded
  frames, one OS process per worker (real CPU parallelism under the GIL);
* :class:`Simulator` -- a single-threaded discrete-event loop that runs worker
  generators one search node at a time under a seeded :class:`SimSchedule`
  and records a replayable trace.

Workers are written as generators yielding :data:`~rebacktrack.engine.STEP`
after each search node and :data:`WAIT` when they need to block for the next
message (the message is sent back into the generator).
"""

from __future__ import annotations

import enum
import heapq
import multiprocessing
import queue
import random
import struct
import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Deque, Generator, List, Optional, Sequence, Tuple, Union

from .engine import STEP
from .index import IndexPath, decode_index, encode_index

WAIT = "wait"


class TransportError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


class WorkerState(enum.IntEnum):
    ACTIVE = 0
    INACTIVE = 1
    DEAD = 2


@dataclass(frozen=True)
class TaskRequest:
    requester: int


@dataclass(frozen=True)
class TaskResponse:
    raw_index: Optional[IndexPath]


@dataclass(frozen=True)
class StatusUpdate:
    rank: int
    state: WorkerState


@dataclass(frozen=True)
class Notification:
    solution_value: int


Message = Union[TaskRequest, TaskResponse, StatusUpdate, Notification]

_REQ, _RESP, _STATUS, _NOTE = 1, 2, 3, 4


def encode_message(msg: Message) -> bytes:
    """One type byte followed by the payload (little-endian)."""
    if isinstance(msg, TaskRequest):
        return struct.pack("<Bi", _REQ, msg.requester)
    if isinstance(msg, TaskResponse):
        return struct.pack("<B", _RESP) + encode_index(msg.raw_index)
    if isinstance(msg, StatusUpdate):
        return struct.pack("<BiB", _STATUS, msg.rank, int(msg.state))
    if isinstance(msg, Notification):
        return struct.pack("<Bq", _NOTE, msg.solution_value)
    raise TypeError(f"not a message: {msg!r}")


def decode_message(frame: bytes) -> Message:
    if not frame:
        raise TransportError("empty frame")
    kind = frame[0]
    try:
        if kind == _REQ:
            return TaskRequest(struct.unpack_from("<i", frame, 1)[0])
        if kind == _RESP:
            return TaskResponse(decode_index(frame, 1)[0])
        if kind == _STATUS:
            rank, state = struct.unpack_from("<iB", frame, 1)
            return StatusUpdate(rank, WorkerState(state))
        if kind == _NOTE:
            return Notification(struct.unpack_from("<q", frame, 1)[0])
    except (struct.error, ValueError) as exc:
        raise TransportError(f"corrupt frame: {exc}") from None
    raise TransportError(f"unknown message type {kind}")


def format_message(msg: Message) -> str:
    if isinstance(msg, TaskRequest):
        return f"TaskRequest requester={msg.requester}"
    if isinstance(msg, TaskResponse):
        idx = "none" if msg.raw_index is None else ",".join(map(str, msg.raw_index))
        return f"TaskResponse index={idx}"
    if isinstance(msg, StatusUpdate):
        return f"StatusUpdate rank={msg.rank} state={msg.state.name.lower()}"
    if isinstance(msg, Notification):
        return f"Notification value={msg.solution_value}"
    return repr(msg)


class Endpoint:
    """One rank's view of the interconnect."""

    rank: int
    world_size: int

    def send(self, to: int, msg: Message) -> None:
        raise NotImplementedError

    def broadcast(self, msg: Message) -> None:
        for r in range(self.world_size):
            if r != self.rank:
                self.send(r, msg)

    def try_receive(self) -> Optional[Message]:
        raise NotImplementedError

    def receive_blocking(self, timeout: Optional[float] = None) -> Optional[Message]:
        """Next message, or ``None`` on timeout."""
        raise NotImplementedError

    def log(self, event: str, payload: str = "") -> None:
        """Record a protocol event (only the simulator keeps these)."""

    def close(self) -> None:
        pass


# -- threads ------------------------------------------------------------------------


class _Hub:
    def __init__(self, c: int):
        self.queues = [queue.SimpleQueue() for _ in range(c)]
        self.closed = [False] * c


class ThreadedEndpoint(Endpoint):
    def __init__(self, hub: _Hub, rank: int):
        self._hub = hub
        self.rank = rank
        self.world_size = len(hub.queues)
        self._inbox = hub.queues[rank]

    def send(self, to: int, msg: Message) -> None:
        if not 0 <= to < self.world_size:
            raise TransportError(f"no rank {to}")
        if self._hub.closed[to]:
            raise TransportError(f"rank {to} has disconnected")
        self._hub.queues[to].put(msg)

    def try_receive(self) -> Optional[Message]:
        try:
            return self._inbox.get_nowait()
        except queue.Empty:
            return None

    def receive_blocking(self, timeout: Optional[float] = None) -> Optional[Message]:
        try:
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        self._hub.closed[self.rank] = True


def threaded_backend(c: int) -> List[ThreadedEndpoint]:
    if c < 1:
        raise ConfigurationError("need at least one endpoint")
    hub = _Hub(c)
    return [ThreadedEndpoint(hub, r) for r in range(c)]


# -- processes ----------------------------------------------------------------------


class ProcessEndpoint(Endpoint):
    """Endpoint over ``multiprocessing`` queues; frames travel encoded."""

    def __init__(self, queues, closed, rank: int):
        self._queues = queues
        self._closed = closed
        self.rank = rank
        self.world_size = len(queues)

    def send(self, to: int, msg: Message) -> None:
        if not 0 <= to < self.world_size:
            raise TransportError(f"no rank {to}")
        if self._closed[to]:
            raise TransportError(f"rank {to} has disconnected")
        self._queues[to].put(encode_message(msg))

    def try_receive(self) -> Optional[Message]:
        try:
            return decode_message(self._queues[self.rank].get_nowait())
        except queue.Empty:
            return None

    def receive_blocking(self, timeout: Optional[float] = None) -> Optional[Message]:
        try:
            return decode_message(self._queues[self.rank].get(timeout=timeout))
        except queue.Empty:
            return None

    def close(self) -> None:
        self._closed[self.rank] = 1


def process_backend(c: int, ctx=None) -> List[ProcessEndpoint]:
    if c < 1:
        raise ConfigurationError("need at least one endpoint")
    ctx = ctx or multiprocessing.get_context("fork")
    queues = [ctx.Queue() for _ in range(c)]
    closed = ctx.Array("b", c, lock=False)
    return [ProcessEndpoint(queues, closed, r) for r in range(c)]


def drive(gen: Generator, endpoint: Endpoint, abort: Optional[threading.Event] = None, poll: float = 0.05):
    """Run a worker generator against a real (blocking) endpoint."""
    value = None
    while True:
        try:
            action = gen.send(value)
        except StopIteration as stop:
            return stop.value
        value = None
        if action is WAIT:
            while value is None:
                value = endpoint.receive_blocking(poll)
                if value is None and abort is not None and abort.is_set():
                    gen.close()
                    raise TransportError("aborted while waiting for a message")
        elif action is not STEP:
            raise TypeError(f"unexpected worker action {action!r}")


# -- simulator ----------------------------------------------------------------------


@dataclass
class SimSchedule:
    """Everything that decides the interleaving of a simulated run.

    ``latency`` is drawn uniformly from ``[min_latency, max_latency]`` per
    message unless ``status_latency`` pins status updates to a fixed delay.
    Each rank gets a per-node step time drawn once from ``step_time``.
    ``admission`` lists ``(rank, start_time)`` pairs; ranks absent from it
    never start, so it must name every rank exactly once.
    """

    seed: int = 0
    min_latency: int = 1
    max_latency: int = 1
    status_latency: Optional[int] = None
    step_time: Tuple[int, int] = (1, 1)
    admission: Optional[Sequence[Tuple[int, int]]] = None
    latency_fn: Optional[Callable[[int, int, Message, random.Random], int]] = None

    @classmethod
    def rank_order(cls, c: int, gap: int = 20, seed: int = 0) -> "SimSchedule":
        """Workers join one by one in increasing rank order."""
        return cls(seed=seed, admission=[(r, r * gap) for r in range(c)])

    @classmethod
    def randomized(cls, seed: int, c: Optional[int] = None) -> "SimSchedule":
        rng = random.Random(seed)
        lo = rng.randint(1, 5)
        hi = lo + rng.randint(0, 40)
        step_hi = rng.randint(1, 4)
        admission = None
        if c is not None:
            admission = [(r, rng.randint(0, 30)) for r in range(c)]
        return cls(seed=seed, min_latency=lo, max_latency=hi, step_time=(1, step_hi), admission=admission)

    @classmethod
    def adversarial(cls, seed: int, slow: int = 500) -> "SimSchedule":
        """Every message at the slowest latency, status updates slower still."""
        return cls(seed=seed, min_latency=slow // 10, max_latency=slow // 10, status_latency=slow, step_time=(1, 3))

    def latency(self, src: int, dst: int, msg: Message, rng: random.Random) -> int:
        if self.latency_fn is not None:
            return max(1, int(self.latency_fn(src, dst, msg, rng)))
        if self.status_latency is not None and isinstance(msg, StatusUpdate):
            return self.status_latency
        return rng.randint(self.min_latency, self.max_latency)


class SimEndpoint(Endpoint):
    def __init__(self, sim: "Simulator", rank: int):
        self._sim = sim
        self.rank = rank
        self.world_size = sim.c

    def send(self, to: int, msg: Message) -> None:
        self._sim._send(self.rank, to, msg)

    def try_receive(self) -> Optional[Message]:
        return self._sim._take(self.rank)

    def receive_blocking(self, timeout=None) -> Optional[Message]:
        # blocking inside the event loop would deadlock it; workers yield WAIT
        return self._sim._take(self.rank)

    def log(self, event: str, payload: str = "") -> None:
        self._sim._record(self.rank, event, payload)

    def close(self) -> None:
        self._sim._record(self.rank, "close", "")


_RESUME, _DELIVER, _START = 0, 1, 2


class Simulator:
    """Deterministic discrete-event loop over ``c`` worker generators.

    Time is logical.  A worker that yields ``STEP`` is resumed after its step
    time; one that yields ``WAIT`` sleeps until its inbox is non-empty.
    Deliveries between a given pair of ranks never overtake each other.
    """

    def __init__(self, c: int, schedule: Optional[SimSchedule] = None, max_events: int = 50_000_000):
        if c < 1:
            raise ConfigurationError("need at least one rank")
        self.c = c
        self.schedule = schedule or SimSchedule()
        admission = self.schedule.admission
        if admission is None:
            admission = [(r, 0) for r in range(c)]
        ranks = [r for r, _ in admission]
        if sorted(ranks) != list(range(c)):
            raise ConfigurationError(f"admission must name each of ranks 0..{c - 1} exactly once: {ranks}")
        if any(t < 0 for _, t in admission):
            raise ConfigurationError("admission times must be non-negative")
        self._admission = list(admission)
        self.rng = random.Random(self.schedule.seed)
        lo, hi = self.schedule.step_time
        if not 1 <= lo <= hi:
            raise ConfigurationError(f"bad step_time range {self.schedule.step_time}")
        self.step_times = [self.rng.randint(lo, hi) for _ in range(c)]
        self.max_events = max_events
        self.now = 0
        self.events = 0
        self.trace: List[str] = []
        self.endpoints = [SimEndpoint(self, r) for r in range(c)]
        self._heap: list = []
        self._seq = 0
        self._inbox: List[Deque[Tuple[int, Message]]] = [deque() for _ in range(c)]
        self._gens: List[Optional[Generator]] = [None] * c
        self._waiting = [False] * c
        self._last_arrival = {}
        self.finished = [False] * c
        self.results: List[Any] = [None] * c
        self.sent = 0
        self.consumed = 0

    # -- plumbing used by endpoints -------------------------------------------------

    def _push(self, t: int, kind: int, rank: int, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, rank, payload))

    def _record(self, rank: int, event: str, payload: str) -> None:
        self.trace.append(f"t={self.now} {rank} {event} {payload}".rstrip())

    def _send(self, src: int, dst: int, msg: Message) -> None:
        if not 0 <= dst < self.c:
            raise TransportError(f"no rank {dst}")
        if self.finished[dst]:
            raise TransportError(f"rank {dst} has exited")
        arrive = self.now + self.schedule.latency(src, dst, msg, self.rng)
        key = (src, dst)
        arrive = max(arrive, self._last_arrival.get(key, 0))
        self._last_arrival[key] = arrive
        self.sent += 1
        self._record(src, "send", f"to={dst} {format_message(msg)}")
        self._push(arrive, _DELIVER, dst, (src, msg))

    def _take(self, rank: int) -> Optional[Message]:
        box = self._inbox[rank]
        if not box:
            return None
        src, msg = box.popleft()
        self.consumed += 1
        self._record(rank, "recv", f"from={src} {format_message(msg)}")
        return msg

    # -- driving ------------------------------------------------------------------------

    def spawn(self, rank: int, gen: Generator) -> None:
        self._gens[rank] = gen

    def _advance(self, rank: int, value) -> None:
        gen = self._gens[rank]
        while True:
            try:
                action = gen.send(value)
            except StopIteration as stop:
                self.finished[rank] = True
                self.results[rank] = stop.value
                self._record(rank, "exit", "")
                return
            if action is STEP:
                self._push(self.now + self.step_times[rank], _RESUME, rank)
                return
            if action is WAIT:
                value = self._take(rank)
                if value is None:
                    self._waiting[rank] = True
                    return
                continue
            raise TypeError(f"unexpected worker action {action!r}")

    def run(self) -> List[Any]:
        """Run to quiescence and return each rank's generator result."""
        missing = [r for r in range(self.c) if self._gens[r] is None]
        if missing:
            raise ConfigurationError(f"no worker spawned for ranks {missing}")
        for r, t in self._admission:
            self._push(t, _START, r)
        heap = self._heap
        while heap:
            t, _, kind, rank, payload = heapq.heappop(heap)
            self.now = t
            self.events += 1
            if self.events > self.max_events:
                raise SimulationError(f"no quiescence after {self.max_events} events")
            if kind == _DELIVER:
                self._inbox[rank].append(payload)
                if self._waiting[rank]:
                    self._waiting[rank] = False
                    self._advance(rank, self._take(rank))
            elif kind == _RESUME:
                self._advance(rank, None)
            else:
                self._record(rank, "admit", "")
                self._advance(rank, None)
        stuck = [r for r in range(self.c) if not self.finished[r]]
        if stuck:
            raise SimulationError(f"deadlock at t={self.now}: ranks {stuck} still waiting")
        return self.results

    @property
    def undelivered(self) -> int:
        return sum(len(b) for b in self._inbox)

    def quiescent(self) -> bool:
        return not self._heap and all(self.finished) and self.undelivered == 0 and self.sent == self.consumed

    def trace_text(self) -> str:
        return "\n".join(self.trace) + ("\n" if self.trace else "")


def sim_backend(c: int, schedule: Optional[SimSchedule] = None, **kwargs) -> Tuple[List[SimEndpoint], Simulator]:
    sim = Simulator(c, schedule, **kwargs)
    return sim.endpoints, sim
