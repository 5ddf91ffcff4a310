"""Finite balls of the model graphs, with stable vertex/edge indexing."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ResourceLimitError
from .models import FREE, SURFACE, TESS, GraphModel
from .tiling import build_tiling_graph
from . import wordproblem as wp

DEFAULT_VERTEX_CAP = 5_000_000

_MAGIC = b"HYPB1"


@dataclass
class CayleyBall:
    """Radius-n ball of a model graph.

    Vertex ids are breadth-first creation order (root = 0), levels are exact
    word distances from the root, and edge ids are creation order.  Both
    indexings are deterministic and stable under growing the radius.
    Instances are immutable after construction and safe to share across
    worker processes.
    """

    model: GraphModel | None
    radius: int
    level: np.ndarray
    edges: np.ndarray
    root: int = 0
    word_parent: np.ndarray | None = None
    word_letter: np.ndarray | None = None
    _adj: tuple | None = field(default=None, repr=False, compare=False)
    _delta_pad: int | None = field(default=None, repr=False, compare=False)

    @property
    def nv(self) -> int:
        return len(self.level)

    @property
    def ne(self) -> int:
        return len(self.edges)

    @property
    def is_tree(self) -> bool:
        return self.ne == self.nv - 1

    def sphere_sizes(self) -> list[int]:
        return np.bincount(self.level, minlength=self.radius + 1).tolist()

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.nv, dtype=np.int32)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR triple (indptr, neighbour ids, incident edge ids)."""
        if self._adj is None:
            e = self.edges
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            eids = np.tile(np.arange(self.ne, dtype=np.int32), 2)
            order = np.lexsort((cols, rows))
            rows, cols, eids = rows[order], cols[order], eids[order]
            indptr = np.zeros(self.nv + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=self.nv), out=indptr[1:])
            object.__setattr__(self, "_adj", (indptr, cols.astype(np.int32), eids))
        return self._adj

    def neighbors(self, v: int) -> np.ndarray:
        indptr, cols, _ = self.adjacency()
        return cols[indptr[v] : indptr[v + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        indptr, _, eids = self.adjacency()
        return eids[indptr[v] : indptr[v + 1]]

    @property
    def delta_pad(self) -> int:
        """Truncation padding for word-metric validity; see geometry.delta_pad."""
        if self._delta_pad is None:
            from .geometry import compute_delta_pad

            object.__setattr__(self, "_delta_pad", compute_delta_pad(self))
        return self._delta_pad

    @property
    def valid_max_level(self) -> int:
        return self.radius - self.delta_pad

    def canonical_id(self, v: int) -> str:
        """Canonical identifier: normal-form word for group models, layered
        coordinate for tessellations."""
        if self.model is not None and self.model.kind == TESS:
            lvl = int(self.level[v])
            first = int(np.searchsorted(self.level, lvl))
            return f"t{lvl}.{v - first}"
        if self.word_parent is None:
            return f"v{v}"
        letters = []
        cur = v
        while cur != self.root:
            letters.append(int(self.word_letter[cur]))
            cur = int(self.word_parent[cur])
        return wp.letters_to_str(tuple(reversed(letters)))

    def vertex_by_word(self, text: str) -> int:
        """Vertex whose group element is the given word (group models only)."""
        if self.model is None or self.model.kind == TESS:
            raise ModelError("words are only defined for group models")
        letters = wp.str_to_letters(text)
        if self.model.kind == FREE:
            target = wp.free_reduce(letters)
            for v in range(self.nv):
                if self._free_word(v) == target:
                    return v
            raise KeyError(text)
        for v in range(self.nv):
            cand = wp.str_to_letters(self.canonical_id(v)) if v else ()
            if wp.surface_equal(cand, letters):
                return v
        raise KeyError(text)

    def _free_word(self, v: int) -> tuple[int, ...]:
        letters = []
        cur = v
        while cur != self.root:
            letters.append(int(self.word_letter[cur]))
            cur = int(self.word_parent[cur])
        return tuple(reversed(letters))

    # -- serialization ----------------------------------------------------

    def save(self, path) -> None:
        if self.model is None:
            raise ModelError("only model-backed balls serialize")
        desc = self.model.describe().encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            flags = 1 if self.word_parent is not None else 0
            fh.write(struct.pack("<BH", flags, len(desc)))
            fh.write(desc)
            fh.write(struct.pack("<III", self.radius, self.nv, self.ne))
            fh.write(self.edges.astype("<u4").tobytes())
            if flags & 1:
                fh.write(self.word_parent.astype("<u4").tobytes())
                fh.write(self.word_letter.astype("u1").tobytes())

    @classmethod
    def load(cls, path) -> "CayleyBall":
        from .models import parse_model

        with open(path, "rb") as fh:
            data = fh.read()
        buf = io.BytesIO(data)
        if buf.read(5) != _MAGIC:
            raise ModelError(f"{path}: not a HYPB1 ball file")
        flags, dlen = struct.unpack("<BH", buf.read(3))
        model = parse_model(buf.read(dlen).decode())
        radius, nv, ne = struct.unpack("<III", buf.read(12))
        edges = np.frombuffer(buf.read(8 * ne), dtype="<u4").astype(np.int32)
        edges = edges.reshape(ne, 2)
        word_parent = word_letter = None
        if flags & 1:
            word_parent = np.frombuffer(buf.read(4 * nv), dtype="<u4").astype(np.int32)
            word_letter = np.frombuffer(buf.read(nv), dtype="u1").astype(np.int8)
        level = _bfs_levels(nv, edges, 0)
        if level.max(initial=0) > radius or np.any(level < 0):
            raise ModelError(f"{path}: corrupt ball file")
        ball = cls(model=model, radius=radius, level=level.astype(np.int16),
                   edges=edges, word_parent=word_parent, word_letter=word_letter)
        return ball

    def summary(self) -> dict:
        out = {
            "model": self.model.describe() if self.model else "custom",
            "radius": self.radius,
            "vertices": self.nv,
            "edges": self.ne,
            "valence": self.model.valence if self.model else None,
            "sphere_sizes": self.sphere_sizes(),
            "is_tree": bool(self.is_tree),
        }
        return out


def _bfs_levels(nv: int, edges: np.ndarray, root: int) -> np.ndarray:
    level = np.full(nv, -1, dtype=np.int32)
    level[root] = 0
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.argsort(rows, kind="stable")
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nv), out=indptr[1:])
    frontier = np.array([root], dtype=np.int64)
    current = 0
    while len(frontier):
        spans = [cols[indptr[v] : indptr[v + 1]] for v in frontier]
        nxt = np.unique(np.concatenate(spans)) if spans else np.array([], dtype=np.int64)
        nxt = nxt[level[nxt] < 0]
        current += 1
        level[nxt] = current
        frontier = nxt
    return level


def _build_free(rank: int, radius: int, cap: int):
    D = 2 * rank
    level = [0]
    parent = [-1]
    letter = [-1]
    edges: list[tuple[int, int]] = []
    head = 0
    while head < len(level):
        v = head
        head += 1
        if level[v] >= radius:
            break
        skip = letter[v] ^ 1 if v else -1
        for l in range(D):
            if l == skip:
                continue
            if len(level) >= cap:
                raise ResourceLimitError(f"free ball exceeds vertex cap {cap}")
            w = len(level)
            level.append(level[v] + 1)
            parent.append(v)
            letter.append(l)
            edges.append((v, w))
    return (
        np.asarray(level, dtype=np.int16),
        np.asarray(edges, dtype=np.int32).reshape(-1, 2),
        np.asarray(parent, dtype=np.int32),
        np.asarray(letter, dtype=np.int8),
    )


def _build_surface(radius: int, cap: int):
    """BFS over the genus-2 surface group, deduplicating with Dehn's algorithm.

    Buckets on the abelianization keep the number of expensive equality tests
    per candidate word tiny.
    """
    words: list[tuple[int, ...]] = [()]
    level = [0]
    parent = [-1]
    letter = [-1]
    buckets: dict[tuple[int, ...], list[int]] = {(0, 0, 0, 0): [0]}
    edges: list[tuple[int, int]] = []
    edge_seen: set[tuple[int, int]] = set()

    def lookup(word, lo_level, hi_level):
        for cand in buckets.get(wp.abelianized(word, 4), ()):
            if lo_level <= level[cand] <= hi_level and wp.surface_equal(words[cand], word):
                return cand
        return -1

    head = 0
    while head < len(words):
        v = head
        head += 1
        lv = level[v]
        if lv > radius:
            break
        for l in range(8):
            w_word = wp.append_letter(words[v], l)
            u = lookup(w_word, lv - 1, lv + 1)
            if u < 0:
                if lv >= radius:
                    continue  # neighbour would fall outside the ball
                if len(words) >= cap:
                    raise ResourceLimitError(f"surface ball exceeds vertex cap {cap}")
                u = len(words)
                words.append(w_word)
                level.append(lv + 1)
                parent.append(v)
                letter.append(l)
                buckets.setdefault(wp.abelianized(w_word, 4), []).append(u)
            key = (v, u) if v < u else (u, v)
            if key not in edge_seen:
                edge_seen.add(key)
                edges.append((v, u))
    return (
        np.asarray(level, dtype=np.int16),
        np.asarray(edges, dtype=np.int32).reshape(-1, 2),
        np.asarray(parent, dtype=np.int32),
        np.asarray(letter, dtype=np.int8),
    )


def build_ball(model: GraphModel, radius: int, vertex_cap: int = DEFAULT_VERTEX_CAP) -> CayleyBall:
    """Construct the full radius-n ball of the model graph.

    Deterministic: repeated calls produce identical vertex and edge indexings,
    and the arrays for radius r are prefixes of those for any radius > r.
    Raises ResourceLimitError when the vertex count would exceed the cap.
    """
    if radius < 0:
        raise ModelError("radius must be nonnegative")
    if model.kind == FREE:
        level, edges, parent, letter = _build_free(model.rank, radius, vertex_cap)
    elif model.kind == SURFACE:
        level, edges, parent, letter = _build_surface(radius, vertex_cap)
    else:
        level, edges = build_tiling_graph(model.p, model.q, radius, vertex_cap)
        parent = letter = None
    return CayleyBall(
        model=model,
        radius=radius,
        level=level,
        edges=edges,
        word_parent=parent,
        word_letter=letter,
    )


def custom_ball(edges, radius: int, nv: int | None = None) -> CayleyBall:
    """Ball over an explicit edge list, for tests and toy examples.

    Levels are recomputed by BFS from vertex 0.
    """
    edges = np.asarray(edges, dtype=np.int32).reshape(-1, 2)
    if nv is None:
        nv = int(edges.max()) + 1 if len(edges) else 1
    level = _bfs_levels(nv, edges, 0).astype(np.int16)
    return CayleyBall(model=None, radius=radius, level=level, edges=edges)
