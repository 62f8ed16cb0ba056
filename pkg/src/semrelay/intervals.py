"""Finite unions of closed time intervals.

Intervals that overlap or touch are merged on construction and zero-length
pieces are dropped, so the stored representation is canonical: two sets
are equal exactly when they cover the same points up to measure zero.
"""

from __future__ import annotations

from typing import Iterable


def _normalize(pairs) -> tuple:
    items = sorted((float(a), float(b)) for a, b in pairs if b > a)
    out = []
    for a, b in items:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


class IntervalSet:
    """Immutable sorted union of disjoint closed intervals.

    Examples
    --------
    >>> IntervalSet([(0, 1), (1, 2)]).measure
    2.0
    >>> (IntervalSet([(0, 10), (20, 30)]) & IntervalSet([(5, 25)])).measure
    10.0
    """

    __slots__ = ("_parts",)

    def __init__(self, pairs: Iterable = ()):
        self._parts = _normalize(pairs)

    @classmethod
    def single(cls, start, end) -> "IntervalSet":
        return cls([(start, end)])

    @property
    def parts(self) -> tuple:
        return self._parts

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self._parts))

    def is_empty(self) -> bool:
        return not self._parts

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self._parts + other._parts)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        a, b = self._parts, other._parts
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(out)

    def subtract(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a, b in self._parts:
            cur = a
            for c, d in other._parts:
                if d <= cur or c >= b:
                    continue
                if c > cur:
                    out.append((cur, c))
                cur = max(cur, d)
                if cur >= b:
                    break
            if cur < b:
                out.append((cur, b))
        return IntervalSet(out)

    def clip(self, start, end) -> "IntervalSet":
        return self.intersect(IntervalSet.single(start, end))

    def overlap(self, start, end) -> float:
        """Length of the intersection with ``[start, end]``."""
        return self.clip(start, end).measure

    __or__ = union
    __and__ = intersect
    __sub__ = subtract

    def __contains__(self, t) -> bool:
        return any(a <= t <= b for a, b in self._parts)

    def __iter__(self):
        return iter(self._parts)

    def __len__(self):
        return len(self._parts)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self._parts == other._parts

    def __hash__(self):
        return hash(self._parts)

    def __repr__(self):
        body = ", ".join(f"[{a:g}, {b:g}]" for a, b in self._parts)
        return f"IntervalSet({body})"
