"""Synthetic search trees whose shape is a pure function of the node path.

Handy for protocol tests: the full node set can be enumerated directly and
there is no problem state beyond the path itself.
"""

from __future__ import annotations

import hashlib
from typing import Iterator, List, Tuple

from ..engine import SearchProblem
from ..index import IndexPath


def _mix(seed: int, path: Tuple[int, ...]) -> int:
    blob = repr((seed, path)).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


class PathTree(SearchProblem):
    """Base class: subclasses define ``arity(path)`` and ``value(path)``."""

    def __init__(self):
        self.path: List[int] = [1]

    def arity(self, path: Tuple[int, ...]) -> int:
        raise NotImplementedError

    def value(self, path: Tuple[int, ...]) -> int:
        return _mix(0, path) % 1000

    def reset(self) -> None:
        self.path = [1]

    def num_children(self) -> int:
        return self.arity(tuple(self.path))

    def descend(self, ordinal: int) -> None:
        if not 0 <= ordinal < self.num_children():
            raise ValueError(f"no child {ordinal} at {self.path}")
        self.path.append(ordinal)

    def backtrack(self) -> None:
        self.path.pop()

    def is_leaf(self) -> bool:
        return self.num_children() == 0

    def is_solution(self) -> bool:
        return self.is_leaf()

    def solution_value(self) -> int:
        return self.value(tuple(self.path))

    def certificate(self) -> IndexPath:
        return tuple(self.path)

    def state_key(self):
        return tuple(self.path)

    def nodes(self) -> Iterator[IndexPath]:
        """Every node path in depth-first order (independent of the engine)."""
        todo = [(1,)]
        while todo:
            p = todo.pop()
            yield p
            todo.extend(p + (k,) for k in reversed(range(self.arity(p))))

    def best_leaf_value(self) -> int:
        return min(self.value(p) for p in self.nodes() if self.arity(p) == 0)


class FullBinaryTree(PathTree):
    def __init__(self, depth: int, seed: int = 0):
        super().__init__()
        self.depth = depth
        self.seed = seed

    def arity(self, path) -> int:
        return 2 if len(path) - 1 < self.depth else 0

    def value(self, path) -> int:
        return _mix(self.seed, path) % 1000


class RandomTree(PathTree):
    """Seeded random tree: each node has 0..``max_branching`` children.

    The root always branches; below it a node stops with probability
    ``p_stop`` and otherwise draws its child count uniformly from
    ``1..max_branching``.
    """

    def __init__(self, seed: int, max_depth: int = 8, max_branching: int = 2, p_stop: float = 0.25):
        super().__init__()
        self.seed = seed
        self.max_depth = max_depth
        self.max_branching = max_branching
        self.p_stop = p_stop

    def arity(self, path) -> int:
        depth = len(path) - 1
        if depth >= self.max_depth:
            return 0
        h = _mix(self.seed, path)
        if depth > 0 and (h % 10_000) < self.p_stop * 10_000:
            return 0
        return 1 + (h >> 16) % self.max_branching

    def value(self, path) -> int:
        return (_mix(self.seed, path) >> 32) % 1000
