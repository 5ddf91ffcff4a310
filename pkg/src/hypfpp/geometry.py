"""Deterministic word-metric geometry on a CayleyBall.

All pairwise queries are gated by the truncation padding delta_pad: distances
between vertices whose level is at most radius - delta_pad are exact in the
infinite graph, because thin triangles keep their geodesics inside the ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ball import CayleyBall, build_ball
from .errors import ResourceLimitError, ValidityError

_EXHAUSTIVE_QUAD_CAP = 2 * 10**8


@dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    sample_size: int
    exhaustive: bool


@dataclass(frozen=True)
class WordGeodesic:
    vertices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vertices) - 1

    def __getitem__(self, i: int) -> int:
        return self.vertices[i]


def bfs_distances(ball: CayleyBall, source: int, limit: int | None = None) -> np.ndarray:
    """In-ball graph distances from one source (-1 where unreached)."""
    indptr, cols, _ = ball.adjacency()
    dist = np.full(ball.nv, -1, dtype=np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while len(frontier) and (limit is None or d < limit):
        nxt = np.unique(
            np.concatenate([cols[indptr[v] : indptr[v + 1]] for v in frontier])
        )
        nxt = nxt[dist[nxt] < 0]
        d += 1
        dist[nxt] = d
        frontier = nxt
    return dist


def hop_distances(ball: CayleyBall, sources) -> np.ndarray:
    """Unweighted distances from several sources at once (scipy-backed)."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra as _dij

    indptr, cols, _ = ball.adjacency()
    graph = csr_matrix(
        (np.ones(len(cols), dtype=np.int8), cols, indptr), shape=(ball.nv, ball.nv)
    )
    out = _dij(graph, directed=True, indices=np.asarray(sources), unweighted=True)
    return out


def _require_valid(ball: CayleyBall, *vertices: int) -> None:
    vmax = ball.valid_max_level
    for v in vertices:
        if ball.level[v] > vmax:
            raise ValidityError(
                f"vertex {v} at level {int(ball.level[v])} exceeds valid level "
                f"{vmax} (radius {ball.radius}, padding {ball.delta_pad})"
            )


def word_distance(ball: CayleyBall, x: int, y: int) -> int:
    """Exact graph distance in the infinite graph, for valid vertices."""
    _require_valid(ball, x, y)
    if x == y:
        return 0
    d = bfs_distances(ball, x)[y]
    assert d >= 0
    return int(d)


def word_geodesic(ball: CayleyBall, x: int, y: int) -> WordGeodesic:
    """One geodesic from x to y, tie-broken by least successor id at each step."""
    _require_valid(ball, x, y)
    dist_to_y = bfs_distances(ball, y)
    path = [x]
    cur = x
    while cur != y:
        nbrs = ball.neighbors(cur)
        closer = nbrs[dist_to_y[nbrs] == dist_to_y[cur] - 1]
        cur = int(closer.min())
        path.append(cur)
    return WordGeodesic(tuple(path))


def gromov_product(ball: CayleyBall, x: int, y: int, base: int) -> float:
    _require_valid(ball, x, y, base)
    dbx = bfs_distances(ball, base)
    dxy = word_distance(ball, x, y)
    return (int(dbx[x]) + int(dbx[y]) - dxy) / 2.0


def _four_point_delta(dm: np.ndarray, quads: np.ndarray) -> float:
    """Max four-point defect over the given quadruples of pool indices."""
    x, y, z, w = quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3]
    s = np.stack(
        [dm[x, y] + dm[z, w], dm[x, z] + dm[y, w], dm[x, w] + dm[y, z]], axis=1
    )
    s.sort(axis=1)
    return float((s[:, 2] - s[:, 1]).max(initial=0)) / 2.0


def _distance_matrix(ball: CayleyBall, pool: np.ndarray) -> np.ndarray:
    dm = hop_distances(ball, pool)[:, pool].astype(np.int32)
    assert dm.min() >= 0
    return dm


def estimate_delta(ball: CayleyBall, mode: str = "exhaustive",
                   count: int = 100_000, seed: int = 0) -> DeltaEstimate:
    """Four-point hyperbolicity constant over quadruples of safely-interior vertices.

    The pool is restricted to levels <= radius // 2, where in-ball distances
    equal infinite-graph distances unconditionally (a geodesic between two
    level-l vertices never climbs past level 2l).
    """
    if ball.nv == 1:
        return DeltaEstimate(0.0, 1, True)
    if ball.is_tree:
        exhaustive = mode == "exhaustive"
        return DeltaEstimate(0.0, ball.nv, exhaustive)
    pool = np.flatnonzero(ball.level <= ball.radius // 2)
    dm = _distance_matrix(ball, pool)
    n = len(pool)
    if mode == "exhaustive":
        if n**4 > _EXHAUSTIVE_QUAD_CAP:
            raise ResourceLimitError(
                f"exhaustive delta over {n}^4 quadruples exceeds cap"
            )
        idx = np.arange(n)
        quads = np.stack(np.meshgrid(idx, idx, idx, idx, indexing="ij"), axis=-1)
        quads = quads.reshape(-1, 4)
        return DeltaEstimate(_four_point_delta(dm, quads), n**4, True)
    rng = np.random.default_rng(seed)
    quads = rng.integers(0, n, size=(count, 4))
    return DeltaEstimate(_four_point_delta(dm, quads), count, False)


_DELTA_PAD_CACHE: dict[tuple[str, int], int] = {}
_REFERENCE_SIZE_CAP = 250_000


def compute_delta_pad(ball: CayleyBall) -> int:
    """Truncation padding 2*ceil(delta_est) + 2, with delta_est measured on a
    smaller reference ball of the same model."""
    if ball.model is None:
        return 0
    if ball.model.is_tree:
        return 2
    model = ball.model
    if model.kind == "surface":
        # the genus-2 Cayley graph is the {8,8} skeleton (verified in tests);
        # measuring on the tessellation avoids slow Dehn reference builds
        from .models import tessellation

        model = tessellation(8, 8)
    ref_radius = min(6, ball.radius)
    key = (model.describe(), ref_radius)
    if key not in _DELTA_PAD_CACHE:
        while ref_radius > 2:
            try:
                ref = build_ball(model, ref_radius, vertex_cap=_REFERENCE_SIZE_CAP)
                break
            except ResourceLimitError:
                ref_radius -= 1
        else:
            ref = build_ball(model, ref_radius, vertex_cap=_REFERENCE_SIZE_CAP)
        pool = np.flatnonzero(ref.level <= ref.radius // 2)
        if len(pool) ** 4 <= 10**7:
            est = estimate_delta(ref, mode="exhaustive")
        else:
            est = estimate_delta(ref, mode="sampled", count=1_000_000, seed=0)
        _DELTA_PAD_CACHE[key] = 2 * int(np.ceil(est.delta)) + 2
    return _DELTA_PAD_CACHE[key]


def nearest_point_projection(ball: CayleyBall, w: int, geod: WordGeodesic) -> set[int]:
    """Vertices of the geodesic at minimal word distance from w."""
    _require_valid(ball, w, geod[0], geod[-1])
    dw = bfs_distances(ball, w)
    verts = np.asarray(geod.vertices)
    dists = dw[verts]
    best = dists.min()
    return set(int(v) for v in verts[dists == best])


def shadow(ball: CayleyBall, v: int, R: int, m: int) -> set[int]:
    """Level-m vertices with some root geodesic passing within distance R of v.

    All word geodesics are tested: z qualifies iff some u in B_R(v) lies on a
    geodesic from the root to z, i.e. level(u) + d(u, z) == m.
    """
    if not (ball.level[v] + R <= m <= ball.valid_max_level):
        raise ValidityError(
            f"shadow needs level(v)+R <= m <= {ball.valid_max_level}"
        )
    dv = bfs_distances(ball, v, limit=R)
    near = np.flatnonzero((dv >= 0) & (dv <= R))
    sphere = np.flatnonzero(ball.level == m)
    out: set[int] = set()
    for u in near:
        du = bfs_distances(ball, int(u))
        hits = sphere[ball.level[u] + du[sphere] == m]
        out.update(int(z) for z in hits)
    return out


def cone_membership(ball: CayleyBall, ray: WordGeodesic, eps: float, w: int) -> bool:
    """True iff w lies within eps*i of the i-th ray vertex for some i >= 1.

    Distances are in-ball graph distances; the ray must start at the root.
    """
    if ray[0] != ball.root:
        raise ValidityError("cone rays must start at the root")
    dw = bfs_distances(ball, w)
    for i in range(1, len(ray) + 1):
        d = dw[ray[i]]
        if 0 <= d <= eps * i:
            return True
    return False
