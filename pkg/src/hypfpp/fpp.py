"""First-passage distances, geodesics, and certified shortest-path trees."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .ball import CayleyBall
from .errors import CertificationError, NonAdjacentStepError
from .weights import OmegaSample

NO_EDGE = -1


@dataclass
class GeodesicTree:
    """Certified shortest-path tree of one omega sample.

    certified(v) means dist(v) is the exact infinite-graph distance: every
    path escaping the ball costs at least the cheapest in-ball route to the
    outer sphere, so dist(v) strictly below that minimum cannot be beaten
    from outside.  On tree balls every finite distance is exact (escape
    routes must backtrack), so everything reached is certified.
    """

    ball: CayleyBall
    omega: OmegaSample
    root: int
    dist: np.ndarray
    parent_vertex: np.ndarray
    parent_edge: np.ndarray
    certified: np.ndarray
    boundary_min: float
    _root_branch: np.ndarray | None = field(default=None, repr=False)

    def path_to(self, v: int) -> list[int]:
        """Tree path root -> v as vertex ids."""
        out = [int(v)]
        cur = int(v)
        while cur != self.root:
            cur = int(self.parent_vertex[cur])
            out.append(cur)
        out.reverse()
        return out

    def path_edges_to(self, v: int) -> list[int]:
        out = []
        cur = int(v)
        while cur != self.root:
            out.append(int(self.parent_edge[cur]))
            cur = int(self.parent_vertex[cur])
        out.reverse()
        return out

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("vertex,level,parent,dist,certified\n")
            for v in range(self.ball.nv):
                fh.write(
                    f"{v},{int(self.ball.level[v])},{int(self.parent_vertex[v])},"
                    f"{self.dist[v]!r},{int(self.certified[v])}\n"
                )


@dataclass(frozen=True)
class OmegaGeodesic:
    vertices: tuple[int, ...]
    edge_ids: tuple[int, ...]
    total_weight: float

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def target(self) -> int:
        return self.vertices[-1]


def _weight_csr(ball: CayleyBall, omega: OmegaSample) -> csr_matrix:
    indptr, cols, eids = ball.adjacency()
    data = omega.weights[eids]
    return csr_matrix((data, cols, indptr), shape=(ball.nv, ball.nv))


def _canonical_parents(ball, omega, dist):
    """Parent selection independent of solver internals: among incident edges
    with dist[u] + w == dist[v] exactly, the smallest edge id wins."""
    e = ball.edges
    w = omega.weights
    nv = ball.nv
    best = np.full(nv, 2**31 - 1, dtype=np.int64)
    eid = np.arange(ball.ne, dtype=np.int64)
    for src, dst in ((e[:, 0], e[:, 1]), (e[:, 1], e[:, 0])):
        ok = np.isfinite(dist[dst]) & (dist[src] + w == dist[dst])
        np.minimum.at(best, dst[ok], eid[ok])
    has = best < 2**31 - 1
    parent_edge = np.where(has, best, NO_EDGE).astype(np.int32)
    parent_vertex = np.full(nv, -1, dtype=np.int32)
    which = np.flatnonzero(has)
    pe = parent_edge[which]
    a, b = e[pe, 0], e[pe, 1]
    parent_vertex[which] = np.where(a == which, b, a)
    return parent_vertex, parent_edge


def dijkstra_tree(ball: CayleyBall, omega: OmegaSample, root: int) -> GeodesicTree:
    """Exact in-ball shortest-path tree with truncation certificates.

    Ties are broken by the smallest predecessor edge id (a measure-zero event
    for atomless weights, pinned for bitwise determinism).
    """
    graph = _weight_csr(ball, omega)
    dist = _csgraph_dijkstra(graph, directed=True, indices=root)
    parent_vertex, parent_edge = _canonical_parents(ball, omega, dist)
    parent_vertex[root] = -1
    parent_edge[root] = NO_EDGE
    boundary = ball.level == ball.radius
    if ball.is_tree or ball.model is None or ball.radius == 0 or not boundary.any():
        # trees admit no escape routes (any exit must backtrack over positive
        # weights), and custom balls are their own complete universe
        boundary_min = np.inf
    else:
        boundary_min = float(dist[boundary].min())
    certified = np.isfinite(dist) & (dist < boundary_min)
    # weights are positive, so parent dist is strictly smaller: acyclic
    ok = parent_vertex >= 0
    assert np.all(dist[parent_vertex[ok]] < dist[ok])
    return GeodesicTree(
        ball=ball,
        omega=omega,
        root=root,
        dist=dist,
        parent_vertex=parent_vertex,
        parent_edge=parent_edge,
        certified=certified,
        boundary_min=boundary_min,
    )


def forward_tree(ball: CayleyBall, omega: OmegaSample) -> GeodesicTree:
    """Union of omega-geodesics from the root; equals the shortest-path tree
    on the certified region by a.s. uniqueness."""
    return dijkstra_tree(ball, omega, ball.root)


def backward_tree_approx(ball: CayleyBall, omega: OmegaSample, target: int) -> GeodesicTree:
    """In-tree toward a far target, the finite proxy for a boundary direction."""
    return dijkstra_tree(ball, omega, target)


def boundary_clearance(ball: CayleyBall, omega: OmegaSample) -> np.ndarray:
    """Cheapest in-ball route from each vertex to the outer sphere.

    Any path that leaves the ball and returns costs at least clearance at each
    end, which is the escape bound used to certify pair geodesics.
    """
    boundary = np.flatnonzero(ball.level == ball.radius)
    if ball.is_tree or ball.model is None or len(boundary) == 0:
        return np.full(ball.nv, np.inf)
    graph = _weight_csr(ball, omega)
    return _csgraph_dijkstra(graph, directed=True, indices=boundary, min_only=True)


def _walk_canonical_path(ball, omega, dist, source, target):
    """Walk target -> source picking, at every vertex, the smallest incident
    edge id attaining exact equality dist[u] + w == dist[v]."""
    indptr, cols, eids = ball.adjacency()
    w = omega.weights
    verts = [int(target)]
    edges = []
    cur = int(target)
    while cur != source:
        lo, hi = indptr[cur], indptr[cur + 1]
        nbrs = cols[lo:hi]
        incid = eids[lo:hi]
        ok = dist[nbrs] + w[incid] == dist[cur]
        assert ok.any()
        k = int(incid[ok].min())
        pick = int(nbrs[ok][incid[ok] == k][0])
        edges.append(k)
        verts.append(pick)
        cur = pick
    verts.reverse()
    edges.reverse()
    return verts, edges


def omega_geodesic(
    ball: CayleyBall,
    omega: OmegaSample,
    x: int,
    y: int,
    tree: GeodesicTree | None = None,
    clearance: np.ndarray | None = None,
) -> OmegaGeodesic:
    """The unique minimizing path between x and y, certified to stay exact.

    A path escaping the ball pays at least clearance(x) + clearance(y), so an
    in-ball distance strictly below that bound is the true distance.  Raises
    CertificationError when the bound cannot be beaten.
    """
    if x == y:
        return OmegaGeodesic(vertices=(int(x),), edge_ids=(), total_weight=0.0)
    if tree is not None and tree.root == x:
        dist = tree.dist
    else:
        graph = _weight_csr(ball, omega)
        limit = np.inf
        if clearance is not None and not ball.is_tree:
            limit = float(clearance[x] + clearance[y])
            if not np.isfinite(limit):
                limit = np.inf
        dist = _csgraph_dijkstra(graph, directed=True, indices=x, limit=limit)
    d = float(dist[y])
    if not np.isfinite(d):
        raise CertificationError(f"no certified geodesic {x}->{y} within the ball")
    if not ball.is_tree and ball.model is not None:
        if clearance is None:
            clearance = boundary_clearance(ball, omega)
        if not d < clearance[x] + clearance[y]:
            raise CertificationError(
                f"geodesic {x}->{y} cannot be certified: weight {d} is not below "
                f"escape bound {float(clearance[x] + clearance[y])}"
            )
    verts, edges = _walk_canonical_path(ball, omega, dist, x, y)
    return OmegaGeodesic(vertices=tuple(verts), edge_ids=tuple(edges), total_weight=d)


def path_weight(ball: CayleyBall, omega: OmegaSample, path) -> float:
    """Sum of edge weights along an explicit vertex path."""
    verts = list(path)
    if len(verts) <= 1:
        return 0.0
    indptr, cols, eids = ball.adjacency()
    total = 0.0
    for a, b in zip(verts, verts[1:]):
        lo, hi = indptr[a], indptr[a + 1]
        hit = np.flatnonzero(cols[lo:hi] == b)
        if len(hit) == 0:
            raise NonAdjacentStepError(f"vertices {a} and {b} are not adjacent")
        total += float(omega.weights[eids[lo:hi][hit[0]]])
    return total
