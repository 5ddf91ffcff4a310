"""Exact combinatorial construction of regular {p,q} tiling 1-skeletons.

The tiling is grown as an oriented planar map, one vertex layer at a time.
Every vertex owns q dart slots in a fixed rotational order; the faces of the
map are the orbits of the permutation "flip dart, then rotate one slot", and
in the {p,q} tiling every such orbit must have length exactly p.  Vertices
are completed in breadth-first order: before a missing slot is filled with a
fresh neighbour, the builder checks whether some face already has p-1 of its
darts in place, in which case the last edge of that face is forced and glued
to an existing vertex.  Gluings are propagated to a fixpoint after every edge
insertion, so no identification is ever missed.  The two local rules (q slots
per vertex, p-cycle faces) determine the tiling uniquely, giving an exact
integer construction with no group presentation and no floating point.

Darts are encoded flat: dart = vertex * q + slot.  A single int array maps
each dart to its reverse dart (-1 while unmatched); the neighbour across a
dart is its reverse dart divided by q.
"""

from __future__ import annotations

from array import array

import numpy as np

from .errors import ResourceLimitError


class _MapBuilder:
    def __init__(self, p: int, q: int, vertex_cap: int):
        self.p = p
        self.q = q
        self.vertex_cap = vertex_cap
        self.rv = array("i")  # dart -> reverse dart, -1 unmatched
        self.level = array("i")
        self.edges = array("i")  # flat (u, v) pairs in creation order
        self.nv = 0
        self._pending: list[int] = []  # darts whose face chain was just extended
        self._blank = array("i", [-1] * q)
        self._new_vertex(0)

    def _new_vertex(self, lvl: int) -> int:
        if self.nv >= self.vertex_cap:
            raise ResourceLimitError(
                f"tiling ball exceeds vertex cap {self.vertex_cap}"
            )
        self.rv.extend(self._blank)
        self.level.append(lvl)
        vid = self.nv
        self.nv += 1
        return vid

    def _match_raw(self, d1: int, d2: int) -> None:
        rv = self.rv
        assert rv[d1] == -1 and rv[d2] == -1
        rv[d1] = d2
        rv[d2] = d1
        self.edges.append(d1 // self.q)
        self.edges.append(d2 // self.q)
        self._pending.append(d1)
        self._pending.append(d2)

    def _rot_next(self, d: int) -> int:
        # next slot at the same vertex, cyclically
        return d + 1 if (d % self.q) != self.q - 1 else d - (self.q - 1)

    def _rot_prev(self, d: int) -> int:
        return d - 1 if (d % self.q) != 0 else d + (self.q - 1)

    def _closure_target(self, d: int) -> int:
        """If the face ending at unmatched dart d has its other p-1 darts, return
        the dart that d must be glued to, else -1."""
        rv = self.rv
        cur = d
        for _ in range(self.p - 1):
            prev = self._rot_prev(cur)
            back = rv[prev]
            if back == -1:
                return -1
            cur = back
        # cur is the first dart of the face; d glues to the slot before it
        target = self._rot_prev(cur)
        assert rv[target] == -1, "face would exceed p edges"
        return target

    def _drain(self) -> None:
        rv = self.rv
        pending = self._pending
        while pending:
            d = pending.pop()
            # walk forward along the face containing dart d to its open end
            start = d
            cur = d
            steps = 0
            open_end = -1
            while True:
                nxt = self._rot_next(rv[cur])
                if rv[nxt] == -1:
                    open_end = nxt
                    break
                cur = nxt
                steps += 1
                if cur == start:
                    break  # face already closed
                if steps > self.p:
                    raise AssertionError("face of length > p")
            if open_end >= 0:
                tgt = self._closure_target(open_end)
                if tgt >= 0:
                    self._match_raw(open_end, tgt)

    def complete_vertex(self, v: int) -> None:
        q = self.q
        base = v * q
        for i in range(q):
            d = base + i
            if self.rv[d] != -1:
                continue
            tgt = self._closure_target(d)
            if tgt == -1:
                w = self._new_vertex(self.level[v] + 1)
                tgt = w * q  # slot 0 of the fresh vertex points back
            self._match_raw(d, tgt)
            self._drain()


def build_tiling_graph(
    p: int, q: int, radius: int, vertex_cap: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vertex levels and edge list of the radius-`radius` ball of the {p,q} tiling.

    Vertices ids are in breadth-first creation order and edge ids in creation
    order; both are stable under increasing the radius (the smaller ball's
    arrays are prefixes of the larger ball's).
    """
    builder = _MapBuilder(p, q, vertex_cap)
    idx = 0
    while idx < builder.nv and builder.level[idx] <= radius - 1:
        builder.complete_vertex(idx)
        idx += 1
    levels = np.asarray(builder.level, dtype=np.int16)
    edges = np.asarray(builder.edges, dtype=np.int32).reshape(-1, 2)
    assert levels.max(initial=0) <= radius
    return levels, edges
