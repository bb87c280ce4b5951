"""Exact Euclidean nearest-neighbour search with bounding-box pruning."""
from __future__ import annotations

import heapq
import itertools
from collections.abc import Iterator

import numpy as np


class _Node:
    __slots__ = ("lo", "hi", "rows", "left", "right")

    def __init__(self, lo, hi, rows=None, left=None, right=None):
        self.lo = lo
        self.hi = hi
        self.rows = rows
        self.left = left
        self.right = right


class KDTree:
    """k-d tree over ``points``; results refer to positions in ``ids``.

    ``ids`` defaults to ``0..n-1`` and is also the tie-break key: among
    equidistant points the smallest id comes first.
    """

    def __init__(self, points, ids=None, leafsize: int = 8):
        self.points = np.asarray(points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        n = len(self.points)
        self.ids = np.arange(n) if ids is None else np.asarray(ids, dtype=int)
        self.leafsize = max(1, int(leafsize))
        self.root = self._build(np.arange(n)) if n else None

    def __len__(self):
        return len(self.points)

    def _build(self, rows):
        P = self.points[rows]
        lo, hi = P.min(axis=0), P.max(axis=0)
        if len(rows) <= self.leafsize or not (hi > lo).any():
            return _Node(lo, hi, rows=rows)
        axis = int(np.argmax(hi - lo))
        order = np.argsort(P[:, axis], kind="stable")
        mid = len(rows) // 2
        return _Node(lo, hi, left=self._build(rows[order[:mid]]), right=self._build(rows[order[mid:]]))

    @staticmethod
    def _box_d2(node, q):
        gap = np.maximum(np.maximum(node.lo - q, q - node.hi), 0.0)
        return float(gap @ gap)

    def iter_nearest(self, q) -> Iterator[tuple[int, float]]:
        """Yield ``(id, distance)`` for every point in increasing distance order."""
        if self.root is None:
            return
        q = np.asarray(q, dtype=float)
        tick = itertools.count()
        # (d2, kind, key, node): kind 0 = node, 1 = point, so at equal d2 boxes
        # are opened before points are emitted and point ties resolve by id
        heap = [(self._box_d2(self.root, q), 0, next(tick), self.root)]
        while heap:
            d2, kind, key, node = heapq.heappop(heap)
            if kind == 1:
                yield key, float(np.sqrt(d2))
                continue
            if node.rows is not None:
                P = self.points[node.rows]
                dist2 = ((P - q) ** 2).sum(axis=1)
                for r, dd in zip(node.rows, dist2):
                    heapq.heappush(heap, (float(dd), 1, int(self.ids[r]), None))
            else:
                for child in (node.left, node.right):
                    heapq.heappush(heap, (self._box_d2(child, q), 0, next(tick), child))

    def nearest(self, q) -> tuple[int, float] | None:
        """Single nearest neighbour with depth-first descent and box pruning."""
        if self.root is None:
            return None
        q = np.asarray(q, dtype=float)
        best = [np.inf, -1]

        def visit(node):
            if self._box_d2(node, q) > best[0]:
                return
            if node.rows is not None:
                P = self.points[node.rows]
                dist2 = ((P - q) ** 2).sum(axis=1)
                for r, dd in zip(node.rows, dist2):
                    key = int(self.ids[r])
                    if dd < best[0] or (dd == best[0] and key < best[1]):
                        best[0], best[1] = float(dd), key
                return
            a, b = node.left, node.right
            if self._box_d2(b, q) < self._box_d2(a, q):
                a, b = b, a
            visit(a)
            visit(b)

        visit(self.root)
        return best[1], float(np.sqrt(best[0]))
