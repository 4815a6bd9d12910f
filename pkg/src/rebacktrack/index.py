"""Search-tree index encoding and heaviest-task extraction.

A node of the search tree is named by the digits of its root-to-node path.
The root is ``(1,)``; the k-th child (0-based ordinal) of a node appends ``k``.
These tuples are the only thing that travels between workers: a receiver
rebuilds the full problem state by replaying the digits from the root.

Binary trees use a single digit row (:class:`CurrentIndex`).  Trees with an
arbitrary branching factor keep a second row counting the unexplored later
siblings at every depth (:class:`GeneralCurrentIndex`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

IndexPath = Tuple[int, ...]

ROOT: IndexPath = (1,)

# -1 in a CurrentIndex marks a sibling subtree that is no longer ours.
DELEGATED = -1

_INT16_MIN, _INT16_MAX = -(1 << 15), (1 << 15) - 1


class MalformedIndexError(ValueError):
    """Raised for malformed index paths or wire tasks."""


def validate_index(path: Sequence[int], binary: bool = True) -> IndexPath:
    """Return ``path`` as a tuple after checking it names a tree node."""
    path = tuple(path)
    if not path or path[0] != 1:
        raise MalformedIndexError(f"index must start with the root digit 1: {path!r}")
    for d in path[1:]:
        if d < 0 or (binary and d > 1):
            raise MalformedIndexError(f"bad digit {d} in index {path!r}")
    return path


def child_index(parent: Sequence[int], ordinal: int) -> IndexPath:
    if ordinal < 0:
        raise MalformedIndexError(f"child ordinal must be non-negative, got {ordinal}")
    return tuple(parent) + (ordinal,)


def depth_of(path: Sequence[int]) -> int:
    return len(path) - 1


def position(path: Sequence[int]) -> Tuple[int, int]:
    """(depth, left-to-right position) of ``path`` in a complete binary tree.

    >>> position((1, 0, 1, 0))
    (3, 2)
    """
    p = 0
    for d in path[1:]:
        p = 2 * p + d
    return len(path) - 1, p


def task_weight(depth: int) -> Fraction:
    """Estimated relative size of the subtree rooted at ``depth``."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    return Fraction(1, depth + 1)


@dataclass
class CurrentIndex:
    """Digits of the path a worker is currently exploring.

    ``digits[d]`` is the child ordinal taken at depth ``d`` or ``DELEGATED``.
    Entries beyond ``active_depth`` are left over from earlier paths and are
    never consulted.
    """

    digits: list = field(default_factory=lambda: [1])
    active_depth: int = 0

    @classmethod
    def for_task(cls, path: Sequence[int]) -> "CurrentIndex":
        """Index for a worker whose main task is ``path``.

        Interior zeros become ``DELEGATED``: the right siblings along the
        task's own prefix belong to other workers and must never be handed out
        again.  ``fix_index`` maps them back to 0 when a later extraction is
        normalized, so the encoded path stays exact.
        """
        path = validate_index(path)
        digits = [1] + [DELEGATED if d == 0 else d for d in path[1:]]
        return cls(digits, len(path) - 1)

    def set(self, depth: int, digit: int) -> None:
        """Record the digit taken on entering a node at ``depth``."""
        digits = self.digits
        if depth < len(digits):
            digits[depth] = digit
        else:
            while len(digits) < depth:
                digits.append(DELEGATED)
            digits.append(digit)
        self.active_depth = depth

    def is_delegated(self, depth: int) -> bool:
        return depth < len(self.digits) and self.digits[depth] == DELEGATED

    def active(self) -> list:
        return self.digits[: self.active_depth + 1]


def extract_heaviest(ci: CurrentIndex) -> Optional[IndexPath]:
    """Split off the shallowest unexplored right sibling of the active path.

    The shallowest 0 at depth ``d`` is overwritten with ``DELEGATED`` and the
    raw prefix ``digits[0..d]`` (ending in -1) is returned; the receiver turns
    it into a real path with :func:`fix_index`.  ``None`` means nothing can be
    given away.
    """
    digits = ci.digits
    for d in range(1, ci.active_depth + 1):
        if digits[d] == 0:
            digits[d] = DELEGATED
            return tuple(digits[: d + 1])
    return None


def fix_index(raw: Sequence[int]) -> IndexPath:
    """Normalize a raw extracted prefix into the path of the delegated node."""
    raw = list(raw)
    if len(raw) < 2 or raw[-1] != DELEGATED:
        raise MalformedIndexError(f"raw task must end in -1: {raw!r}")
    if raw[0] != 1:
        raise MalformedIndexError(f"raw task must start with 1: {raw!r}")
    for i in range(len(raw) - 1):
        if raw[i] < 0:
            raw[i] = 0
        elif raw[i] > 1:
            raise MalformedIndexError(f"bad digit {raw[i]} in raw task {raw!r}")
    raw[-1] = 1
    return tuple(raw)


def delegation_sound(ci: CurrentIndex) -> bool:
    """Every delegated entry has only final (1 or -1) entries above it."""
    digits = ci.active()
    for d, x in enumerate(digits):
        if x == DELEGATED and d > 0:
            if any(e not in (1, DELEGATED) for e in digits[1:d]):
                return False
    return True


# -- arbitrary branching factor ------------------------------------------------


def general_child_index(
    parent_idx1: Sequence[int], parent_idx2: Sequence[int], k: int, num_children: int
) -> Tuple[IndexPath, IndexPath]:
    """Two-row index of the ``k``-th (1-based) of ``num_children`` children."""
    if not 1 <= k <= num_children:
        raise MalformedIndexError(f"child {k} out of range 1..{num_children}")
    return tuple(parent_idx1) + (k - 1,), tuple(parent_idx2) + (num_children - k,)


@dataclass
class GeneralCurrentIndex:
    """Path digits plus remaining-sibling counts, one column per depth."""

    path_digits: list = field(default_factory=lambda: [1])
    remaining_siblings: list = field(default_factory=lambda: [0])
    active_depth: int = 0

    @classmethod
    def for_path(cls, path: Sequence[int]) -> "GeneralCurrentIndex":
        # nothing above the task root may be handed out
        path = validate_index(path, binary=False)
        return cls(list(path), [0] * len(path), len(path) - 1)

    def set(self, depth: int, digit: int, remaining: int) -> None:
        for row in (self.path_digits, self.remaining_siblings):
            del row[depth:]
        self.path_digits.append(digit)
        self.remaining_siblings.append(remaining)
        self.active_depth = depth

    def take_next_sibling(self, depth: int) -> bool:
        """Consume one later sibling at ``depth`` if any is still ours."""
        if self.remaining_siblings[depth] > 0:
            self.remaining_siblings[depth] -= 1
            self.path_digits[depth] += 1
            self.active_depth = depth
            return True
        return False


@dataclass(frozen=True)
class GeneralTaskSlice:
    """Children ``start_ordinal .. start_ordinal+count-1`` of node ``prefix``."""

    prefix: IndexPath
    start_ordinal: int
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise MalformedIndexError("a task slice holds at least one node")

    def paths(self) -> list:
        return [self.prefix + (k,) for k in range(self.start_ordinal, self.start_ordinal + self.count)]


def general_extract_heaviest(gci: GeneralCurrentIndex, max_count: int) -> Optional[GeneralTaskSlice]:
    """Give away up to ``max_count`` of the last unexplored siblings at the
    shallowest depth that still has any.

    The delegated set is always a suffix of the sibling list so that the owner
    can keep iterating siblings from the left and stop early.
    """
    if max_count < 1:
        raise ValueError("max_count must be positive")
    rem = gci.remaining_siblings
    for d in range(1, gci.active_depth + 1):
        r = rem[d]
        if r > 0:
            s = min(max_count, r)
            start = gci.path_digits[d] + r - s + 1
            rem[d] = DELEGATED if s == r else r - s
            return GeneralTaskSlice(tuple(gci.path_digits[:d]), start, s)
    return None


# -- wire format -----------------------------------------------------------------


def encode_index(path: Optional[Sequence[int]]) -> bytes:
    """Length-prefixed little-endian int16 digits; ``None`` encodes as length 0."""
    if path is None:
        return struct.pack("<I", 0)
    digits = tuple(path)
    if not digits:
        raise MalformedIndexError("cannot encode an empty index")
    for d in digits:
        if not _INT16_MIN <= d <= _INT16_MAX:
            raise MalformedIndexError(f"digit {d} does not fit in 16 bits")
    return struct.pack(f"<I{len(digits)}h", len(digits), *digits)


def decode_index(data: bytes, offset: int = 0) -> Tuple[Optional[IndexPath], int]:
    """Inverse of :func:`encode_index`; returns ``(path, next_offset)``."""
    try:
        (n,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if n == 0:
            return None, offset
        digits = struct.unpack_from(f"<{n}h", data, offset)
    except struct.error as exc:
        raise MalformedIndexError(f"truncated index frame: {exc}") from None
    return tuple(digits), offset + 2 * n


def encode_slice(s: GeneralTaskSlice) -> bytes:
    return encode_index(s.prefix) + struct.pack("<hh", s.start_ordinal, s.count)


def decode_slice(data: bytes, offset: int = 0) -> Tuple[GeneralTaskSlice, int]:
    prefix, offset = decode_index(data, offset)
    if prefix is None:
        raise MalformedIndexError("slice frame without a prefix")
    start, count = struct.unpack_from("<hh", data, offset)
    return GeneralTaskSlice(prefix, start, count), offset + 4
