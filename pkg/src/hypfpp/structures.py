"""Analysis of geodesic trees: lifts, wandering, coalescence, shadows,
crossing radii, properness profiles, and disjoint slab crossings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ball import CayleyBall
from .errors import (
    CertificationError,
    NoEligiblePairError,
    ResourceLimitError,
    ValidityError,
)
from .fpp import GeodesicTree, OmegaGeodesic, omega_geodesic
from .geometry import WordGeodesic, bfs_distances, word_geodesic
from .weights import OmegaSample


@dataclass
class ExceptionalLiftReport:
    n: int
    eps: float
    sphere_vertices: np.ndarray
    indicators: np.ndarray
    count: int
    fraction: float


@dataclass(frozen=True)
class SlabSpec:
    """Sphere slab around an axis geodesic, the computable surrogate for a pair
    of separating hyperplanes: every geodesic in the cone around the axis must
    cross from the inner sphere to the outer one."""

    axis: WordGeodesic
    inner: int
    outer: int
    cone_eps: float

    def __post_init__(self):
        if not (0 < self.inner < self.outer <= len(self.axis)):
            raise ValidityError("slab needs 0 < inner < outer <= axis length")


@dataclass
class CrossingFamily:
    segments: list[OmegaGeodesic]

    def __post_init__(self):
        used: set[int] = set()
        for seg in self.segments:
            eids = set(seg.edge_ids)
            if used & eids:
                raise ValidityError("crossing segments share an edge")
            used |= eids

    def __len__(self) -> int:
        return len(self.segments)


@dataclass
class RadiusStatistic:
    C: int
    R_value: int
    pairs_tested: int
    pairs_skipped: int = 0
    pair_values: list[int] = field(default_factory=list)


def root_branch(tree: GeodesicTree, v: int) -> int:
    """Edge id of the first step of the tree path root -> v."""
    if v == tree.root:
        raise ValidityError("root has no root branch")
    if not tree.certified[v]:
        raise CertificationError(f"vertex {v} is not certified")
    return _root_branch_array(tree)[v]


def _root_branch_array(tree: GeodesicTree) -> np.ndarray:
    if tree._root_branch is None:
        nv = tree.ball.nv
        branch = np.full(nv, -1, dtype=np.int32)
        order = np.argsort(tree.dist, kind="stable")
        pv = tree.parent_vertex
        pe = tree.parent_edge
        for v in order:
            p = pv[v]
            if p < 0:
                continue
            branch[v] = pe[v] if p == tree.root else branch[p]
        tree._root_branch = branch
    return tree._root_branch


def _window(ball: CayleyBall, v: int, r: int) -> np.ndarray:
    """Vertices within graph distance r of v; exact because a path of length
    <= r from level(v) never climbs past level(v) + r, which must fit in the
    ball."""
    if ball.level[v] + r > ball.radius:
        raise ValidityError(
            f"window of radius {r} around level-{int(ball.level[v])} vertex "
            f"does not fit in a radius-{ball.radius} ball"
        )
    if r == 0:
        return np.array([v], dtype=np.int64)
    dv = bfs_distances(ball, v, limit=r)
    return np.flatnonzero((dv >= 0) & (dv <= r))


def exceptional_lift_indicator(
    tree: GeodesicTree, ball: CayleyBall, v: int, eps: float,
    window_radius: int | None = None,
) -> bool:
    """True iff the eps*n window around sphere vertex v contains two certified
    vertices whose root geodesics leave the root by different edges.

    Inside a tree, distinct first edges are exactly edge-disjointness of the
    two root geodesics.  window_radius overrides floor(eps*n) (used by the
    experiment layer to clamp degenerate eps).
    """
    n = int(ball.level[v])
    r = int(np.floor(eps * n)) if window_radius is None else window_radius
    window = _window(ball, v, r)
    if not tree.certified[window].all():
        raise CertificationError(
            f"window around vertex {v} contains uncertified vertices"
        )
    branch = _root_branch_array(tree)
    branches = np.unique(branch[window])
    branches = branches[branches >= 0]
    return len(branches) >= 2


def lift_fraction(
    tree: GeodesicTree, ball: CayleyBall, n: int, eps: float,
    window_radius: int | None = None,
) -> ExceptionalLiftReport:
    """Aggregate the lift indicator over the whole n-sphere."""
    sphere = np.flatnonzero(ball.level == n)
    if len(sphere) == 0:
        raise ValidityError(f"no vertices at level {n}")
    indicators = np.array(
        [
            exceptional_lift_indicator(tree, ball, int(v), eps, window_radius)
            for v in sphere
        ],
        dtype=bool,
    )
    count = int(indicators.sum())
    return ExceptionalLiftReport(
        n=n,
        eps=eps,
        sphere_vertices=sphere,
        indicators=indicators,
        count=count,
        fraction=count / len(sphere),
    )


def wandering_check(tree: GeodesicTree, ball: CayleyBall, z: int, eps: float,
                    window_radius: int | None = None) -> bool:
    """True iff the omega-path root -> z misses the eps*m window around the
    midpoint marker of the word geodesic, where m = level(z) / 2."""
    lz = int(ball.level[z])
    if lz % 2 != 0 or lz == 0:
        raise ValidityError("wandering targets must sit at an even level 2m > 0")
    m = lz // 2
    if lz > ball.valid_max_level:
        raise ValidityError(
            f"target level {lz} exceeds valid level {ball.valid_max_level}"
        )
    if not tree.certified[z]:
        raise CertificationError(f"target {z} is not certified")
    marker = word_geodesic(ball, tree.root, z)[m]
    r = int(np.floor(eps * m)) if window_radius is None else window_radius
    window = set(int(u) for u in _window(ball, marker, r))
    path = tree.path_to(z)
    return not any(u in window for u in path)


def coalescence_point(
    g1: OmegaGeodesic, g2: OmegaGeodesic
) -> tuple[int, bool] | None:
    """Earliest vertex of g1 lying on g2, plus whether the two paths agree
    from there on (they must, for unique geodesics to a common target)."""
    if g1.target != g2.target:
        raise ValidityError("coalescence needs a common target")
    pos2 = {v: i for i, v in enumerate(g2.vertices)}
    for i1, v in enumerate(g1.vertices):
        i2 = pos2.get(v)
        if i2 is not None:
            agree = g1.vertices[i1:] == g2.vertices[i2:]
            return int(v), bool(agree)
    return None


def omega_shadow(
    tree: GeodesicTree, ball: CayleyBall, r: int, m: int
) -> dict[int, list[int]]:
    """Partition of the certified m-sphere by the first r-sphere vertex on the
    tree path from the root."""
    if not r < m:
        raise ValidityError("omega shadows need r < m")
    sphere_r = np.flatnonzero(ball.level == r)
    sphere_m = np.flatnonzero(ball.level == m)
    if len(sphere_r) == 0 or len(sphere_m) == 0:
        raise ValidityError("spheres out of range")
    if not tree.certified[sphere_m].all():
        raise CertificationError(f"sphere {m} is not fully certified")
    first_hit = np.full(ball.nv, -1, dtype=np.int64)
    order = np.argsort(tree.dist, kind="stable")
    level = ball.level
    pv = tree.parent_vertex
    for v in order:
        p = pv[v]
        if p < 0:
            first_hit[v] = v if (level[v] == r and v != tree.root) else -1
            if v == tree.root and level[v] == r:
                first_hit[v] = v
            continue
        first_hit[v] = first_hit[p] if first_hit[p] >= 0 else (
            v if level[v] == r else -1
        )
    fibers: dict[int, list[int]] = {}
    for z in sphere_m:
        hit = int(first_hit[z])
        assert hit >= 0, "a root path to level m must cross level r"
        fibers.setdefault(hit, []).append(int(z))
    return fibers


def _crossing_pairs(ball, sphere, C, pair_budget, seed):
    """Seeded sample of distinct sphere pairs whose canonical word geodesic
    meets the C-neighbourhood of the root."""
    rng = np.random.default_rng(seed)
    pairs: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int]] = set()
    attempts = 0
    cap = max(200, 60 * pair_budget)
    while len(pairs) < pair_budget and attempts < cap:
        attempts += 1
        x, y = rng.choice(sphere, size=2, replace=False)
        key = (min(x, y), max(x, y))
        if key in seen:
            continue
        seen.add(key)
        geod = word_geodesic(ball, int(x), int(y))
        cross = int(min(ball.level[v] for v in geod.vertices))
        if cross <= C:
            pairs.append((int(x), int(y), cross))
    return pairs


def r_omega_estimate(
    ball: CayleyBall,
    omega: OmegaSample,
    C: int,
    pair_budget: int = 16,
    seed: int = 0,
    clearance: np.ndarray | None = None,
) -> RadiusStatistic:
    """Largest root-distance of certified omega-geodesics over sampled
    root-crossing pairs: a certified lower bound for the crossing radius.

    Pairs whose geodesic cannot be certified inside the ball are skipped and
    counted; the statistic is exact when the tested family is exhaustive and
    fully certified.
    """
    sphere = np.flatnonzero(ball.level == ball.valid_max_level)
    if len(sphere) < 2:
        raise NoEligiblePairError("no valid outer-sphere vertices")
    pairs = _crossing_pairs(ball, sphere, C, pair_budget, seed)
    if not pairs:
        raise NoEligiblePairError(
            f"no sampled sphere pair crosses the {C}-neighbourhood of the root"
        )
    from .fpp import boundary_clearance

    if clearance is None:
        clearance = boundary_clearance(ball, omega)
    values: list[int] = []
    skipped = 0
    by_source: dict[int, list[int]] = {}
    for x, y, _ in pairs:
        by_source.setdefault(x, []).append(y)
    for x, ys in sorted(by_source.items()):
        for y, geod in _certified_geodesics(ball, omega, x, ys, clearance):
            if geod is None:
                skipped += 1
                continue
            values.append(int(min(ball.level[v] for v in geod.vertices)))
    if not values:
        raise CertificationError("no pair geodesic could be certified")
    return RadiusStatistic(
        C=C,
        R_value=max(values),
        pairs_tested=len(values),
        pairs_skipped=skipped,
        pair_values=values,
    )


def _certified_geodesics(ball, omega, x, targets, clearance):
    """One limited Dijkstra from x, then certified geodesics to each target
    (None where certification fails)."""
    from scipy.sparse.csgraph import dijkstra as _dij

    from .fpp import _walk_canonical_path, _weight_csr

    graph = _weight_csr(ball, omega)
    if ball.is_tree or ball.model is None:
        limit = np.inf
    else:
        limit = float(clearance[x] + max(clearance[y] for y in targets))
    dist = _dij(graph, directed=True, indices=x, limit=limit)
    out = []
    for y in targets:
        d = float(dist[y])
        certified = np.isfinite(d) and (
            ball.is_tree or ball.model is None or d < clearance[x] + clearance[y]
        )
        if not certified:
            out.append((y, None))
            continue
        verts, eids = _walk_canonical_path(ball, omega, dist, x, y)
        out.append(
            (y, OmegaGeodesic(vertices=tuple(verts), edge_ids=tuple(eids), total_weight=d))
        )
    return out


def properness_profile(
    ball: CayleyBall,
    omega: OmegaSample,
    C_values,
    pair_budget: int = 16,
    seed: int = 0,
    clearance: np.ndarray | None = None,
) -> dict[int, int]:
    """M(C) over nested pair families: one master family at max(C), filtered
    down for smaller C, so the profile is nondecreasing by construction."""
    from .fpp import boundary_clearance

    C_values = sorted(int(c) for c in C_values)
    c_max = C_values[-1]
    sphere = np.flatnonzero(ball.level == ball.valid_max_level)
    if len(sphere) < 2:
        raise NoEligiblePairError("no valid outer-sphere vertices")
    pairs = _crossing_pairs(ball, sphere, c_max, pair_budget, seed)
    if not pairs:
        raise NoEligiblePairError("no crossing pair sampled")
    if clearance is None:
        clearance = boundary_clearance(ball, omega)
    by_source: dict[int, list[tuple[int, int]]] = {}
    for x, y, cross in pairs:
        by_source.setdefault(x, []).append((y, cross))
    evaluated: list[tuple[int, int]] = []  # (crossing level, path min level)
    for x, items in sorted(by_source.items()):
        ys = [y for y, _ in items]
        cross_of = dict(items)
        for y, geod in _certified_geodesics(ball, omega, x, ys, clearance):
            if geod is None:
                continue
            value = int(min(ball.level[v] for v in geod.vertices))
            evaluated.append((cross_of[y], value))
    if not evaluated:
        raise CertificationError("no pair geodesic could be certified")
    profile: dict[int, int] = {}
    for C in C_values:
        vals = [val for cross, val in evaluated if cross <= C]
        if vals:
            profile[C] = max(vals)
        elif profile:
            profile[C] = max(v for v in profile.values())
        else:
            profile[C] = 0
    return profile


def slab_boundary_sets(ball: CayleyBall, slab: SlabSpec) -> tuple[np.ndarray, np.ndarray]:
    """Inner and outer sphere sections of the cone around the slab axis."""
    from .geometry import hop_distances

    axis = np.asarray(slab.axis.vertices[1:])  # indices i >= 1
    dists = hop_distances(ball, axis)
    idx = np.arange(1, len(axis) + 1)[:, None]
    in_cone = (dists <= slab.cone_eps * idx).any(axis=0)
    sets = []
    for lvl in (slab.inner, slab.outer):
        sel = np.flatnonzero((ball.level == lvl) & in_cone)
        if len(sel) == 0:
            raise ValidityError(f"slab cone meets no vertices at level {lvl}")
        sets.append(sel)
    return sets[0], sets[1]


def min_edge_cut(ball: CayleyBall, inner: np.ndarray, outer: np.ndarray) -> int:
    """Unit-capacity max-flow between the two vertex sets (Menger bound)."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import maximum_flow

    nv = ball.nv
    big = ball.ne + 1
    e = ball.edges
    src_extra = np.full(len(inner), nv, dtype=np.int64)
    dst_extra = np.full(len(outer), nv + 1, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1], src_extra, outer])
    cols = np.concatenate([e[:, 1], e[:, 0], inner, dst_extra])
    caps = np.concatenate(
        [
            np.ones(2 * ball.ne, dtype=np.int32),
            np.full(len(inner) + len(outer), big, dtype=np.int32),
        ]
    )
    graph = csr_matrix((caps, (rows, cols)), shape=(nv + 2, nv + 2))
    return int(maximum_flow(graph.astype(np.int32), nv, nv + 1).flow_value)


def _max_disjoint(candidates: list[frozenset], k_max: int, exact: bool) -> int:
    """Largest pairwise-disjoint subfamily of edge-id sets."""
    if exact:
        if len(candidates) > 26:
            raise ResourceLimitError(
                f"exact disjoint search over {len(candidates)} candidates"
            )
        best = 0

        def recurse(idx: int, used: frozenset, size: int):
            nonlocal best
            best = max(best, size)
            if best >= k_max or idx >= len(candidates):
                return
            if size + (len(candidates) - idx) <= best:
                return
            for j in range(idx, len(candidates)):
                if not (candidates[j] & used):
                    recurse(j + 1, used | candidates[j], size + 1)

        recurse(0, frozenset(), 0)
        return min(best, k_max)

    # greedy by insertion order (callers pre-sort by weight), then 1-for-2 swaps
    chosen: list[int] = []
    used: set[int] = set()
    for j, cand in enumerate(candidates):
        if len(chosen) >= k_max:
            break
        if not (cand & used):
            chosen.append(j)
            used |= cand
    improved = True
    while improved and len(chosen) < k_max:
        improved = False
        unused = [j for j in range(len(candidates)) if j not in chosen]
        for j in unused:
            conflicts = [c for c in chosen if candidates[c] & candidates[j]]
            if len(conflicts) != 1:
                continue
            base = used - candidates[conflicts[0]]
            if candidates[j] & base:
                continue
            trial = base | candidates[j]
            for j2 in unused:
                if j2 != j and not (candidates[j2] & trial):
                    chosen.remove(conflicts[0])
                    chosen += [j, j2]
                    used = trial | candidates[j2]
                    improved = True
                    break
            if improved:
                break
    return min(len(chosen), k_max)


def disjoint_geodesic_count(
    ball: CayleyBall,
    omega: OmegaSample,
    slab: SlabSpec,
    k_max: int = 6,
    strategy: str = "greedy",
    clearance: np.ndarray | None = None,
) -> int:
    """Size of the largest found family of pairwise edge-disjoint certified
    omega-geodesic segments from the slab's inner set to its outer set.

    The exact strategy enumerates subsets (tiny instances only); the greedy
    strategy adds segments in weight order and then tries one-for-two swaps.
    The result never exceeds the unit-capacity min cut between the two sets.
    """
    from .fpp import boundary_clearance

    inner, outer = slab_boundary_sets(ball, slab)
    if clearance is None:
        clearance = boundary_clearance(ball, omega)
    segments: list[tuple[float, frozenset]] = []
    for a in inner:
        for y, geod in _certified_geodesics(
            ball, omega, int(a), [int(b) for b in outer], clearance
        ):
            if geod is not None:
                segments.append((geod.total_weight, frozenset(geod.edge_ids)))
    if not segments:
        raise CertificationError("no certified slab crossing")
    segments.sort(key=lambda t: t[0])
    candidates = [s for _, s in segments]
    return _max_disjoint(candidates, k_max, exact=(strategy == "exact"))
