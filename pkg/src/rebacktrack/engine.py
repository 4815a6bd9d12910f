"""Problem contract and the tree-exploration drivers.

``serial_solve`` is the plain depth-first backtracking loop.  ``explore_steps``
is the same traversal for a worker that shares its tree: it records the path
in a :class:`~rebacktrack.index.CurrentIndex`, answers task requests by
splitting off the heaviest unexplored sibling, folds in bounds broadcast by
other workers and skips siblings that were handed away.  It is a generator
that yields :data:`STEP` after every node so a scheduler (the simulator) can
interleave workers one node at a time.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable, List, Optional, Sequence, Union

from .index import (
    DELEGATED,
    ROOT,
    CurrentIndex,
    GeneralCurrentIndex,
    GeneralTaskSlice,
    IndexPath,
    extract_heaviest,
    validate_index,
)

# explicit-stack depth cap; deeper trees almost certainly mean a broken problem
MAX_DEPTH = 10**6

STEP = "step"


class MalformedTaskError(ValueError):
    """An index does not name a node of this instance's search tree."""


class ExplorationAborted(RuntimeError):
    pass


class DepthLimitExceeded(RuntimeError):
    pass


class SearchProblem(ABC):
    """A deterministic branching procedure over some mutable problem state.

    Subclasses keep the state of the *current* search node.  ``descend(k)``
    moves to the k-th child and ``backtrack()`` undoes the most recent
    ``descend`` exactly.  Child generation must be a pure function of the
    state so that replaying an index always reaches the same node.
    """

    @abstractmethod
    def reset(self) -> None:
        """Return to the root state."""

    @abstractmethod
    def num_children(self) -> int: ...

    @abstractmethod
    def descend(self, ordinal: int) -> None: ...

    @abstractmethod
    def backtrack(self) -> None: ...

    @abstractmethod
    def is_leaf(self) -> bool: ...

    @abstractmethod
    def is_solution(self) -> bool:
        """The current node is a complete feasible solution.

        The drivers only record it when its value beats the incumbent.
        """

    @abstractmethod
    def solution_value(self) -> Any: ...

    def certificate(self) -> Any:
        return None

    def prunable(self, incumbent: Optional[Any]) -> bool:
        """True if no node below can beat ``incumbent`` (``None`` = no bound)."""
        return False

    def convert_index(self, path: Sequence[int]) -> None:
        """Reset to the root and replay ``path`` digit by digit."""
        path = validate_index(path, binary=False)
        self.reset()
        for depth, digit in enumerate(path[1:], 1):
            nc = self.num_children()
            if digit >= nc:
                raise MalformedTaskError(
                    f"digit {digit} at depth {depth} of {path!r} but the node has {nc} children"
                )
            self.descend(digit)

    def state_key(self) -> Any:
        raise NotImplementedError

    def fingerprint(self) -> int:
        """64-bit hash of :meth:`state_key`; used to compare states in tests."""
        blob = repr(self.state_key()).encode()
        return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


@dataclass
class Incumbent:
    """Best objective value seen (minimization) and, if found locally, its
    certificate."""

    best_value: Optional[Any] = None
    best_certificate: Any = None

    def beats(self, value) -> bool:
        return self.best_value is None or value < self.best_value

    def offer(self, value, certificate: Union[Callable[[], Any], Any] = None) -> bool:
        """Record a local solution if strictly better.  ``certificate`` may be a
        callable so the payload is only built when it is kept."""
        if not self.beats(value):
            return False
        self.best_value = value
        self.best_certificate = certificate() if callable(certificate) else certificate
        return True

    def merge(self, value) -> bool:
        """Tighten the bound with a value found elsewhere; the local
        certificate is left alone."""
        if value is None or not self.beats(value):
            return False
        self.best_value = value
        return True


class ExplorationHooks:
    """Non-blocking callbacks through which a worker talks to its peers.

    The base class is the "no peers" case.
    """

    def poll_task_request(self) -> Optional[int]:
        return None

    def send_task(self, raw_index: Optional[IndexPath], requester: int) -> None:
        pass

    def poll_broadcasts(self) -> Iterable[Any]:
        return ()

    def announce_solution(self, value) -> None:
        pass

    def should_abort(self) -> bool:
        return False


NO_PEERS = ExplorationHooks()


@dataclass
class ExploreLog:
    """Per-worker exploration record.  ``visited`` is only filled when it
    starts out as a list (test instrumentation)."""

    nodes: int = 0
    visited: Optional[List[IndexPath]] = None
    skipped: List[IndexPath] = field(default_factory=list)
    served: List[IndexPath] = field(default_factory=list)
    announced: List[Any] = field(default_factory=list)

    @classmethod
    def recording(cls) -> "ExploreLog":
        return cls(visited=[])


def serial_solve(
    problem: SearchProblem,
    *,
    prune: bool = True,
    log: Optional[ExploreLog] = None,
    max_depth: int = MAX_DEPTH,
) -> Incumbent:
    """Exhaustive depth-first search from the root; returns the optimum."""
    problem.reset()
    incumbent = Incumbent()
    visited = log.visited if log is not None else None
    path = [1]
    stack: list = []
    nodes = 0
    while True:
        nodes += 1
        if visited is not None:
            visited.append(tuple(path))
        if problem.is_solution():
            incumbent.offer(problem.solution_value(), problem.certificate)
        nc = 0
        if not problem.is_leaf() and not (prune and problem.prunable(incumbent.best_value)):
            nc = problem.num_children()
        if nc:
            if len(stack) >= max_depth:
                raise DepthLimitExceeded(f"search depth exceeded {max_depth}")
            stack.append([nc, 0])
        elif stack:
            problem.backtrack()
            path.pop()
        while stack:
            frame = stack[-1]
            if frame[1] < frame[0]:
                k = frame[1]
                frame[1] = k + 1
                problem.descend(k)
                path.append(k)
                break
            stack.pop()
            if stack:
                problem.backtrack()
                path.pop()
        else:
            break
    if log is not None:
        log.nodes += nodes
    return incumbent


def replay_index(problem: SearchProblem, path: Sequence[int]) -> None:
    problem.convert_index(path)


def _service(hooks: ExplorationHooks, ci: CurrentIndex, incumbent: Incumbent, log: ExploreLog) -> None:
    for value in hooks.poll_broadcasts():
        incumbent.merge(value)
    requester = hooks.poll_task_request()
    while requester is not None:
        raw = extract_heaviest(ci)
        if raw is not None:
            log.served.append(raw)
        hooks.send_task(raw, requester)
        requester = hooks.poll_task_request()
    if hooks.should_abort():
        raise ExplorationAborted("abort requested")


def explore_steps(
    problem: SearchProblem,
    start: Sequence[int],
    ci: CurrentIndex,
    hooks: ExplorationHooks = NO_PEERS,
    incumbent: Optional[Incumbent] = None,
    *,
    prune: bool = True,
    poll_interval: int = 1,
    log: Optional[ExploreLog] = None,
    max_depth: int = MAX_DEPTH,
) -> Generator[str, None, Incumbent]:
    """Explore the subtree rooted at ``start`` one node per ``yield``.

    ``problem`` must already be in the state of ``start`` and ``ci`` must
    describe it (see :meth:`CurrentIndex.for_task`).  The generator's return
    value is the incumbent.  A sibling whose ``ci`` entry was set to -1 by an
    extraction is never entered; the problem ends in the ``start`` state.
    """
    if incumbent is None:
        incumbent = Incumbent()
    if log is None:
        log = ExploreLog()
    if poll_interval < 1:
        raise ValueError("poll_interval must be >= 1")
    path = list(start)
    base = len(path) - 1
    visited = log.visited
    digits = ci.digits
    stack: list = []
    tick = 0
    while True:
        # node entry
        log.nodes += 1
        if visited is not None:
            visited.append(tuple(path))
        tick += 1
        if tick >= poll_interval:
            tick = 0
            _service(hooks, ci, incumbent, log)
            digits = ci.digits
        if problem.is_solution():
            value = problem.solution_value()
            if incumbent.offer(value, problem.certificate):
                log.announced.append(value)
                hooks.announce_solution(value)
        nc = 0
        if not problem.is_leaf() and not (prune and problem.prunable(incumbent.best_value)):
            nc = problem.num_children()
            if nc > 2:
                raise ValueError(f"binary exploration got a node with {nc} children")
        if nc:
            if len(stack) >= max_depth:
                raise DepthLimitExceeded(f"search depth exceeded {max_depth}")
            stack.append([nc, 0])
        elif stack:
            problem.backtrack()
            path.pop()
        yield STEP
        # move to the next node to enter
        while stack:
            frame = stack[-1]
            nc, k = frame
            if k < nc:
                depth = base + len(stack)
                if k > 0 and digits[depth] == DELEGATED:
                    log.skipped.append(tuple(path) + (k,))
                    frame[1] = nc
                    continue
                frame[1] = k + 1
                problem.descend(k)
                path.append(k)
                # a lone child has no sibling to give away
                ci.set(depth, DELEGATED if nc == 1 else k)
                digits = ci.digits
                break
            stack.pop()
            if stack:
                problem.backtrack()
                path.pop()
        else:
            return incumbent


def parallel_explore(
    problem: SearchProblem,
    start: Sequence[int],
    ci: CurrentIndex,
    hooks: ExplorationHooks = NO_PEERS,
    incumbent: Optional[Incumbent] = None,
    **kwargs,
) -> Incumbent:
    """Run :func:`explore_steps` to completion."""
    gen = explore_steps(problem, start, ci, hooks, incumbent, **kwargs)
    while True:
        try:
            next(gen)
        except StopIteration as stop:
            return stop.value


def explore_general(
    problem: SearchProblem,
    task: Union[Sequence[int], GeneralTaskSlice],
    *,
    poll: Optional[Callable[[GeneralCurrentIndex], None]] = None,
    incumbent: Optional[Incumbent] = None,
    prune: bool = True,
    log: Optional[ExploreLog] = None,
) -> Incumbent:
    """Depth-first exploration for trees of any branching factor.

    ``task`` is either a node path or a :class:`GeneralTaskSlice` (a suffix
    of some node's children).  ``poll`` is called with the two-row index at
    every node entry and may delegate work with
    :func:`~rebacktrack.index.general_extract_heaviest`; siblings given away
    are then never entered because iteration only advances while the
    remaining-sibling count is positive.
    """
    if incumbent is None:
        incumbent = Incumbent()
    if log is None:
        log = ExploreLog()
    visited = log.visited
    stack: List[int] = []
    if isinstance(task, GeneralTaskSlice):
        problem.convert_index(task.prefix)
        path = list(task.prefix)
        gci = GeneralCurrentIndex.for_path(task.prefix)
        nc = problem.num_children()
        last = task.start_ordinal + task.count - 1
        if last >= nc:
            raise MalformedTaskError(f"slice {task} exceeds the node's {nc} children")
        depth = len(path)
        problem.descend(task.start_ordinal)
        path.append(task.start_ordinal)
        gci.set(depth, task.start_ordinal, task.count - 1)
        stack.append(depth)
    else:
        problem.convert_index(task)
        path = list(task)
        gci = GeneralCurrentIndex.for_path(task)
    while True:
        log.nodes += 1
        if visited is not None:
            visited.append(tuple(path))
        if poll is not None:
            poll(gci)
        if problem.is_solution():
            incumbent.offer(problem.solution_value(), problem.certificate)
        nc = 0
        if not problem.is_leaf() and not (prune and problem.prunable(incumbent.best_value)):
            nc = problem.num_children()
        if nc:
            depth = len(path)
            problem.descend(0)
            path.append(0)
            gci.set(depth, 0, nc - 1)
            stack.append(depth)
            continue
        while stack:
            depth = stack[-1]
            problem.backtrack()
            path.pop()
            if gci.take_next_sibling(depth):
                k = gci.path_digits[depth]
                problem.descend(k)
                path.append(k)
                break
            stack.pop()
        else:
            return incumbent


__all__ = [
    "STEP",
    "MAX_DEPTH",
    "ROOT",
    "SearchProblem",
    "Incumbent",
    "ExplorationHooks",
    "ExploreLog",
    "NO_PEERS",
    "MalformedTaskError",
    "ExplorationAborted",
    "DepthLimitExceeded",
    "serial_solve",
    "replay_index",
    "explore_steps",
    "parallel_explore",
    "explore_general",
]
