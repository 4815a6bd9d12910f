"""Minimum vertex cover by branch and reduce.

Branch on a highest-degree vertex ``v`` (smallest id on ties): the left child
puts ``v`` in the cover, the right child puts all of ``N(v)`` in it.  After
every branch, degree-0 vertices are dropped and degree-1 vertices have their
neighbour forced into the cover, in ascending id order until nothing changes.
"""

from __future__ import annotations

from typing import List, Optional

from ..engine import SearchProblem
from .graph import JournaledGraph, bits


class VertexCoverProblem(SearchProblem):
    def __init__(self, graph: JournaledGraph, reductions: bool = True):
        self.template = graph.copy()
        self.reductions = reductions
        self.graph = self.template.copy()
        self.cover: List[int] = []
        self._marks: List[int] = []
        self._branch: Optional[int] = None
        self.reset()

    def reset(self) -> None:
        self.graph = self.template.copy()
        self.cover = []
        self._marks = []
        self._branch = None
        if self.reductions:
            self._reduce()

    # -- branching --------------------------------------------------------

    def branch_vertex(self) -> int:
        """The vertex the current node branches on (-1 at a leaf)."""
        if self._branch is None:
            self._branch = self.graph.max_degree_vertex()
        return self._branch

    def num_children(self) -> int:
        return 0 if self.graph.m == 0 else 2

    def descend(self, ordinal: int) -> None:
        v = self.branch_vertex()
        if v < 0:
            raise ValueError("descend called at a leaf")
        g = self.graph
        g.push_frame()
        self._marks.append(len(self.cover))
        if ordinal == 0:
            self.cover.append(v)
            g.delete(1 << v)
        elif ordinal == 1:
            nb = g.neighbors_mask(v)
            self.cover.extend(bits(nb))
            g.delete(nb | 1 << v)
        else:
            raise ValueError(f"vertex cover nodes are binary, got ordinal {ordinal}")
        if self.reductions:
            self._reduce()
        self._branch = None

    def backtrack(self) -> None:
        self.graph.pop_frame()
        del self.cover[self._marks.pop():]
        self._branch = None

    def _reduce(self) -> None:
        g = self.graph
        degree, adj = g.degree, g.adj
        changed = True
        while changed:
            changed = False
            for v in bits(g.alive):
                if not g.alive >> v & 1:
                    continue
                d = degree[v]
                if d == 0:
                    g.delete(1 << v)
                    changed = True
                elif d == 1:
                    w = (adj[v] & g.alive).bit_length() - 1
                    self.cover.append(w)
                    g.delete(1 << v | 1 << w)
                    changed = True

    # -- evaluation ---------------------------------------------------------

    def is_leaf(self) -> bool:
        return self.graph.m == 0

    def is_solution(self) -> bool:
        return self.graph.m == 0

    def solution_value(self) -> int:
        return len(self.cover)

    def certificate(self) -> List[int]:
        return sorted(self.cover)

    def lower_bound(self) -> int:
        m = self.graph.m
        if m == 0:
            return 0
        top = self.graph.degree[self.branch_vertex()]
        return -(-m // top)

    def prunable(self, incumbent) -> bool:
        if incumbent is None:
            return False
        return len(self.cover) + self.lower_bound() >= incumbent

    def state_key(self):
        return self.graph.state_key() + (tuple(sorted(self.cover)),)
