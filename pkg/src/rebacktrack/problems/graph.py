"""Hybrid graph with an undo journal, and instance readers.

Rows of the adjacency matrix are Python ints used as bitsets, which gives
O(1) edge tests and cheap set algebra on neighbourhoods; the adjacency lists
serve plain iteration.  Vertex deletions are recorded in a journal grouped in
frames so that a search can roll back to any earlier node exactly.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union


class ParseError(ValueError):
    pass


class InstanceWarning(UserWarning):
    pass


def bits(mask: int) -> List[int]:
    """Positions of the set bits of ``mask`` in ascending order."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


class JournaledGraph:
    """Simple undirected graph on vertices ``0..n-1`` supporting journaled
    vertex deletion.

    ``degree[v]`` counts the alive neighbours of every alive ``v``; the
    entry of a deleted vertex keeps its value from deletion time.
    """

    __slots__ = ("n", "adj", "adj_lists", "alive", "degree", "m", "_journal", "_frames")

    def __init__(self, n: int, edges: Iterable[Tuple[int, int]] = ()):
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        self.n = n
        adj = [0] * n
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        self.adj = adj
        self.adj_lists = [bits(row) for row in adj]
        self.alive = (1 << n) - 1
        self.degree = [len(lst) for lst in self.adj_lists]
        self.m = sum(self.degree) // 2
        self._journal: list = []
        self._frames: List[int] = []

    # -- construction -------------------------------------------------------

    def copy(self) -> "JournaledGraph":
        """Independent graph in the current state, with an empty journal."""
        g = JournaledGraph.__new__(JournaledGraph)
        g.n = self.n
        g.adj = self.adj  # never mutated
        g.adj_lists = self.adj_lists
        g.alive = self.alive
        g.degree = list(self.degree)
        g.m = self.m
        g._journal = []
        g._frames = []
        return g

    def edges(self) -> List[Tuple[int, int]]:
        """Edges of the input graph, ignoring deletions."""
        return [(u, v) for u in range(self.n) for v in self.adj_lists[u] if u < v]

    def alive_edges(self) -> List[Tuple[int, int]]:
        alive = self.alive
        return [(u, v) for u, v in self.edges() if alive >> u & 1 and alive >> v & 1]

    def __getstate__(self):
        return {s: getattr(self, s) for s in self.__slots__}

    def __setstate__(self, state):
        for k, v in state.items():
            setattr(self, k, v)

    # -- queries --------------------------------------------------------------

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def is_alive(self, v: int) -> bool:
        return bool(self.alive >> v & 1)

    def alive_vertices(self) -> List[int]:
        return bits(self.alive)

    def num_alive(self) -> int:
        return self.alive.bit_count()

    def neighbors_mask(self, v: int) -> int:
        """Alive neighbours of ``v`` as a bitset."""
        return self.adj[v] & self.alive

    def neighbors(self, v: int) -> List[int]:
        alive = self.alive
        return [u for u in self.adj_lists[v] if alive >> u & 1]

    def max_degree_vertex(self) -> int:
        """Alive vertex of largest degree, smallest id on ties; -1 if edgeless."""
        degree = self.degree
        best, best_deg = -1, 0
        for v in bits(self.alive):
            d = degree[v]
            if d > best_deg:
                best, best_deg = v, d
        return best

    # -- journaled mutation ---------------------------------------------------------

    def push_frame(self) -> None:
        self._frames.append(len(self._journal))

    def pop_frame(self) -> None:
        """Undo every mutation since the matching :meth:`push_frame`."""
        mark = self._frames.pop()
        journal = self._journal
        adj, degree = self.adj, self.degree
        while len(journal) > mark:
            mask, touched, removed = journal.pop()
            self.alive |= mask
            self.m += removed
            for u in bits(touched):
                degree[u] += (adj[u] & mask).bit_count()

    @property
    def depth(self) -> int:
        return len(self._frames)

    def delete(self, mask: int) -> None:
        """Delete the alive vertices in ``mask`` (a bitset)."""
        mask &= self.alive
        if not mask:
            return
        adj, degree = self.adj, self.degree
        removed_vertices = bits(mask)
        reach = 0
        internal = 0
        for s in removed_vertices:
            row = adj[s]
            reach |= row
            internal += (row & mask).bit_count()
        alive = self.alive & ~mask
        touched = reach & alive
        removed = internal // 2
        for u in bits(touched):
            d = (adj[u] & mask).bit_count()
            degree[u] -= d
            removed += d
        self.alive = alive
        self.m -= removed
        self._journal.append((mask, touched, removed))

    def delete_vertex(self, v: int) -> None:
        self.delete(1 << v)

    def state_key(self):
        return (self.alive, tuple(self.degree), self.m)

    def check(self) -> None:
        """Assert the degree/edge-count invariants (tests only)."""
        alive = self.alive
        total = 0
        for v in bits(alive):
            d = (self.adj[v] & alive).bit_count()
            assert self.degree[v] == d, (v, self.degree[v], d)
            total += d
        assert self.m == total // 2, (self.m, total // 2)


# -- readers ------------------------------------------------------------------------


def _text(data: Union[bytes, str]) -> str:
    return data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data


def parse_dimacs(data: Union[bytes, str]) -> JournaledGraph:
    """Read ``p edge n m`` / ``e u v`` (1-based) DIMACS graph text."""
    n = None
    declared_m = 0
    edges = set()
    for lineno, raw in enumerate(_text(data).splitlines(), 1):
        line = raw.strip()
        if not line or line[0] == "c":
            continue
        parts = line.split()
        if parts[0] == "p":
            if n is not None:
                raise ParseError(f"line {lineno}: second problem line")
            if len(parts) < 4:
                raise ParseError(f"line {lineno}: malformed problem line {line!r}")
            try:
                n, declared_m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed problem line {line!r}") from None
        elif parts[0] in ("e", "a"):
            if n is None:
                raise ParseError(f"line {lineno}: edge before the 'p' header")
            try:
                u, v = int(parts[1]) - 1, int(parts[2]) - 1
            except (IndexError, ValueError):
                raise ParseError(f"line {lineno}: malformed edge {line!r}") from None
            if not (0 <= u < n and 0 <= v < n):
                raise ParseError(f"line {lineno}: vertex out of range in {line!r}")
            if u == v:
                raise ParseError(f"line {lineno}: self-loop on vertex {u + 1}")
            edges.add((min(u, v), max(u, v)))
        # other DIMACS line types (n, x, ...) carry nothing for plain graphs
    if n is None:
        raise ParseError("missing 'p edge n m' header")
    if declared_m != len(edges):
        warnings.warn(
            f"header declares {declared_m} edges, found {len(edges)} distinct", InstanceWarning, stacklevel=2
        )
    return JournaledGraph(n, sorted(edges))


def parse_edge_list(data: Union[bytes, str], n: int = None) -> JournaledGraph:
    """Read 0-based ``u v`` pairs; ``#`` starts a comment."""
    edges = set()
    top = -1
    for lineno, raw in enumerate(_text(data).splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            u, v = int(parts[0]), int(parts[1])
        except (IndexError, ValueError):
            raise ParseError(f"line {lineno}: malformed edge {raw.strip()!r}") from None
        if u < 0 or v < 0:
            raise ParseError(f"line {lineno}: negative vertex id")
        if u == v:
            raise ParseError(f"line {lineno}: self-loop on vertex {u}")
        edges.add((min(u, v), max(u, v)))
        top = max(top, u, v)
    if n is None:
        n = top + 1
    elif top >= n:
        raise ParseError(f"vertex {top} out of range for n={n}")
    return JournaledGraph(n, sorted(edges))


def detect_format(path: Union[str, Path], data: bytes) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".clq", ".mis", ".dimacs", ".col"):
        return "dimacs"
    if suffix in (".el", ".edges", ".txt"):
        return "edgelist"
    for raw in _text(data).splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        return "dimacs" if line[0] in "cpe" else "edgelist"
    return "edgelist"


def load_graph(path: Union[str, Path], fmt: str = "auto") -> JournaledGraph:
    data = Path(path).read_bytes()
    if fmt == "auto":
        fmt = detect_format(path, data)
    if fmt == "dimacs":
        return parse_dimacs(data)
    if fmt == "edgelist":
        return parse_edge_list(data)
    raise ValueError(f"unknown graph format {fmt!r}")


def to_dimacs(graph: JournaledGraph, comment: str = "") -> str:
    lines = [f"c {comment}"] if comment else []
    edges = graph.edges()
    lines.append(f"p edge {graph.n} {len(edges)}")
    lines.extend(f"e {u + 1} {v + 1}" for u, v in edges)
    return "\n".join(lines) + "\n"


def random_graph(n: int, p: float, seed: int) -> JournaledGraph:
    """G(n, p) from a seeded ``random.Random``."""
    import random

    rng = random.Random(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return JournaledGraph(n, edges)


def is_vertex_cover(graph: JournaledGraph, cover: Sequence[int]) -> bool:
    c = mask_of(cover)
    return all(c >> u & 1 or c >> v & 1 for u, v in graph.edges())


def is_dominating_set(graph: JournaledGraph, ds: Sequence[int]) -> bool:
    d = mask_of(ds)
    return all(d >> v & 1 or graph.adj[v] & d for v in range(graph.n))
