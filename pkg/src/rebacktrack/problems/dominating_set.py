"""Minimum dominating set by vertex branching.

At each node the candidate ``v`` (neither chosen nor excluded) whose closed
neighbourhood contains the most undominated vertices is picked, smallest id
on ties.  The left child chooses ``v``; the right child excludes it from every
solution below.  A node is dead when some undominated vertex has its whole
closed neighbourhood excluded.
"""

from __future__ import annotations

from typing import List, Optional

from ..engine import SearchProblem
from .graph import JournaledGraph, bits


class DominatingSetProblem(SearchProblem):
    def __init__(self, graph: JournaledGraph):
        self.graph = graph.copy()
        n = graph.n
        self.closed = [graph.adj[v] | 1 << v for v in range(n)]
        self.full = (1 << n) - 1
        self.reset()

    def reset(self) -> None:
        self.chosen = 0
        self.excluded = 0
        self.dominated = 0
        self._frames: list = []
        self._cache = None

    # -- derived state --------------------------------------------------------

    def undominated(self) -> int:
        return self.full & ~self.dominated

    def infeasible(self) -> bool:
        excluded_not = ~self.excluded
        closed = self.closed
        for u in bits(self.full & ~self.dominated):
            if not closed[u] & excluded_not:
                return True
        return False

    def _scan(self):
        """(branch vertex, its coverage), or (-1, 0) when there is none."""
        if self._cache is None:
            und = self.full & ~self.dominated
            best, best_cov = -1, 0
            if und:
                closed = self.closed
                for v in bits(self.full & ~(self.chosen | self.excluded)):
                    c = (closed[v] & und).bit_count()
                    if c > best_cov:
                        best, best_cov = v, c
            self._cache = (best, best_cov)
        return self._cache

    def branch_vertex(self) -> int:
        return self._scan()[0]

    # -- tree ---------------------------------------------------------------------

    def is_leaf(self) -> bool:
        return self.dominated == self.full or self.infeasible()

    def is_solution(self) -> bool:
        return self.dominated == self.full

    def num_children(self) -> int:
        return 0 if self.is_leaf() else 2

    def descend(self, ordinal: int) -> None:
        v = self.branch_vertex()
        if v < 0:
            raise ValueError("descend called at a leaf")
        self._frames.append((self.chosen, self.excluded, self.dominated))
        bit = 1 << v
        if ordinal == 0:
            self.chosen |= bit
            self.dominated |= self.closed[v]
        elif ordinal == 1:
            self.excluded |= bit
        else:
            raise ValueError(f"dominating set nodes are binary, got ordinal {ordinal}")
        self._cache = None

    def backtrack(self) -> None:
        self.chosen, self.excluded, self.dominated = self._frames.pop()
        self._cache = None

    def solution_value(self) -> int:
        return self.chosen.bit_count()

    def certificate(self) -> List[int]:
        return bits(self.chosen)

    def lower_bound(self) -> int:
        und = (self.full & ~self.dominated).bit_count()
        if und == 0:
            return 0
        cov = self._scan()[1]
        if cov == 0:
            return self.graph.n + 1
        return -(-und // cov)

    def prunable(self, incumbent: Optional[int]) -> bool:
        if incumbent is None:
            return False
        return self.chosen.bit_count() + self.lower_bound() >= incumbent

    def state_key(self):
        return (self.chosen, self.excluded, self.dominated)
