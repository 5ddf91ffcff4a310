"""Monte Carlo harness: replicated experiments, aggregation, and records.

Every statistic of a run is a pure function of (config, master_seed): each
replication derives its weights and auxiliary sampling seeds from
SeedSequence(master_seed, replication), aggregation merges per-replication
results keyed by index, and worker count only affects wall time.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .ball import DEFAULT_VERTEX_CAP, CayleyBall, build_ball
from .errors import (
    CertificationError,
    ConfigError,
    HypFppError,
    RunFailedError,
)
from .fpp import boundary_clearance, forward_tree
from .geometry import word_distance, word_geodesic
from .models import parse_model
from .structures import (
    SlabSpec,
    _certified_geodesics,
    coalescence_point,
    disjoint_geodesic_count,
    lift_fraction,
    min_edge_cut,
    omega_shadow,
    r_omega_estimate,
    slab_boundary_sets,
    wandering_check,
)
from .tailfit import fit_decay_slope, tail_estimate
from .weights import OmegaSample, WeightDistribution, sample_weights
from .fpp import OmegaGeodesic

SCHEMA = "hypfpp-record/1"
MAX_FAILURE_RATE = 0.05

EXPERIMENTS = (
    "r-tail",
    "exceptional-fraction",
    "wandering",
    "coalescence",
    "multiplicity",
    "density-probe",
)


@dataclass
class ExperimentConfig:
    experiment: str
    model: str
    radius: int
    distribution: dict
    replications: int
    master_seed: int
    eps: float = 0.2
    workers: int = 1
    vertex_cap: int = DEFAULT_VERTEX_CAP
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.master_seed is None or not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed is mandatory and must be a 64-bit integer")
        if self.radius < 0:
            raise ConfigError("radius must be nonnegative")
        WeightDistribution.from_dict(self.distribution)
        parse_model(self.model)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "radius": self.radius,
            "distribution": dict(self.distribution),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "eps": self.eps,
            "vertex_cap": self.vertex_cap,
            "params": _jsonable(self.params),
        }

    @staticmethod
    def from_mapping(data: dict, experiment: str | None = None,
                     workers: int | None = None,
                     seed_override: int | None = None,
                     cap_override: int | None = None) -> "ExperimentConfig":
        data = dict(data)
        if experiment is not None:
            data.setdefault("experiment", experiment)
            if data["experiment"] != experiment:
                raise ConfigError(
                    f"config is for {data['experiment']!r}, not {experiment!r}"
                )
        required = ("experiment", "model", "radius", "distribution",
                    "replications", "master_seed")
        missing = [k for k in required if k not in data]
        if missing:
            raise ConfigError(f"config missing keys: {', '.join(missing)}")
        cfg = ExperimentConfig(
            experiment=data["experiment"],
            model=data["model"],
            radius=int(data["radius"]),
            distribution=dict(data["distribution"]),
            replications=int(data["replications"]),
            master_seed=int(seed_override if seed_override is not None
                            else data["master_seed"]),
            eps=float(data.get("eps", 0.2)),
            workers=int(workers if workers is not None else data.get("workers", 1)),
            vertex_cap=int(cap_override if cap_override is not None
                           else data.get("vertex_cap", DEFAULT_VERTEX_CAP)),
            params=dict(data.get("params", {})),
        )
        return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def record_hash(record: dict) -> str:
    """Content hash over everything except provenance (timestamps, wall time)."""
    stripped = {k: v for k, v in record.items() if k != "provenance"}
    return hashlib.sha256(canonical_json(stripped).encode()).hexdigest()


def _rep_seed(master_seed: int, rep: int, stream: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(rep, stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _distribution(cfg) -> WeightDistribution:
    return WeightDistribution.from_dict(cfg.distribution)


def _lift_window(eps: float, n: int, radius: int) -> tuple[int, bool]:
    """Window radius floor(eps*n) clamped into [1, radius - n]; flags clamps."""
    raw = int(np.floor(eps * n))
    clamped = min(max(raw, 1), max(radius - n, 1))
    return clamped, clamped != raw


# -- per-replication statistics ------------------------------------------


def _rep_r_tail(ball: CayleyBall, cfg: ExperimentConfig, rep: int) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    clearance = boundary_clearance(ball, om)
    stat = r_omega_estimate(
        ball,
        om,
        C=int(cfg.params.get("C", 2)),
        pair_budget=int(cfg.params.get("pair_budget", 8)),
        seed=_rep_seed(cfg.master_seed, rep, 1),
        clearance=clearance,
    )
    return {
        "replication": rep,
        "R_value": stat.R_value,
        "pairs_tested": stat.pairs_tested,
        "pairs_skipped": stat.pairs_skipped,
        "pair_values": stat.pair_values,
    }


def _agg_r_tail(ball, cfg, reps: list[dict]) -> dict:
    values = [r["R_value"] for r in reps]
    est = tail_estimate(values, seed=cfg.master_seed)
    return {
        "R_values": values,
        "tail": est.to_dict(),
        "pairs_tested": sum(r["pairs_tested"] for r in reps),
        "pairs_skipped": sum(r["pairs_skipped"] for r in reps),
        "tables": {
            "r_survival": {
                "columns": ["R", "survival"],
                "rows": [[float(x), float(s)] for x, s in
                         zip(est.support, est.survival)],
            }
        },
    }


def _rep_exceptional(ball, cfg, rep) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    tree = forward_tree(ball, om)
    n_range = [int(n) for n in cfg.params["n_range"]]
    fractions = {}
    flags = {}
    for n in n_range:
        wr, clamped = _lift_window(cfg.eps, n, ball.radius)
        report = lift_fraction(tree, ball, n, cfg.eps, window_radius=wr)
        fractions[str(n)] = report.fraction
        if clamped:
            flags[str(n)] = "window_clamped"
    out = {"replication": rep, "fractions": fractions}
    if flags:
        out["flags"] = flags
    return out


def _agg_exceptional(ball, cfg, reps) -> dict:
    n_range = [int(n) for n in cfg.params["n_range"]]
    rows = np.array(
        [[r["fractions"][str(n)] for n in n_range] for r in reps], dtype=float
    )
    fit = fit_decay_slope(n_range, rows, seed=cfg.master_seed)
    sizes = ball.sphere_sizes()
    growth = [sizes[n] for n in n_range]
    entropy = float(
        np.polyfit(n_range, np.log(growth), 1)[0]
    ) if len(n_range) > 1 else None
    return {
        "n_range": n_range,
        "mean_fractions": fit["means"],
        "decay_fit": fit,
        "sphere_sizes": growth,
        "volume_entropy": entropy,
        "tables": {
            "lift_fractions": {
                "columns": ["n", "mean_fraction", "sphere_size"],
                "rows": [
                    [n, fit["means"][i], growth[i]] for i, n in enumerate(n_range)
                ],
            }
        },
    }


def _rep_wandering(ball, cfg, rep) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    tree = forward_tree(ball, om)
    m_values = [int(m) for m in cfg.params["m_values"]]
    budget = int(cfg.params.get("target_budget", 64))
    rng = np.random.default_rng(_rep_seed(cfg.master_seed, rep, 2))
    freqs = {}
    flags = {}
    for m in m_values:
        if cfg.eps >= 1.0:
            freqs[str(m)] = 0.0
            flags[str(m)] = "degenerate_eps_clamped"
            continue
        wr = int(np.floor(cfg.eps * m))
        if wr < 1:
            wr = 1
            flags[str(m)] = "window_clamped"
        sphere = np.flatnonzero(ball.level == 2 * m)
        if len(sphere) == 0:
            raise CertificationError(f"no targets at level {2 * m}")
        if len(sphere) > budget:
            sphere = rng.choice(sphere, size=budget, replace=False)
        hits = [
            wandering_check(tree, ball, int(z), cfg.eps, window_radius=wr)
            for z in np.sort(sphere)
        ]
        freqs[str(m)] = float(np.mean(hits))
    out = {"replication": rep, "frequencies": freqs}
    if flags:
        out["flags"] = flags
    return out


def _agg_wandering(ball, cfg, reps) -> dict:
    m_values = [int(m) for m in cfg.params["m_values"]]
    rows = np.array(
        [[r["frequencies"][str(m)] for m in m_values] for r in reps], dtype=float
    )
    fit = fit_decay_slope(m_values, rows, seed=cfg.master_seed)
    return {
        "m_values": m_values,
        "mean_frequencies": fit["means"],
        "decay_fit": fit,
        "tables": {
            "wandering": {
                "columns": ["m", "mean_frequency"],
                "rows": [[m, fit["means"][i]] for i, m in enumerate(m_values)],
            }
        },
    }


def _pick_sources(ball: CayleyBall, offset: int) -> tuple[int, int]:
    """First pair of level-1 vertices at mutual word distance `offset`
    (o1 = o2 for offset 0)."""
    level1 = np.flatnonzero(ball.level == 1)
    if offset == 0:
        return int(level1[0]), int(level1[0])
    for i in range(len(level1)):
        for j in range(i + 1, len(level1)):
            if word_distance(ball, int(level1[i]), int(level1[j])) == offset:
                return int(level1[i]), int(level1[j])
    raise ConfigError(f"no level-1 source pair at distance {offset}")


def _rep_coalescence(ball, cfg, rep) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    clearance = boundary_clearance(ball, om)
    o1, o2 = _pick_sources(ball, int(cfg.params.get("source_offset", 2)))
    target_levels = [int(m) for m in cfg.params["target_levels"]]
    budget = int(cfg.params.get("target_budget", 12))
    rng = np.random.default_rng(_rep_seed(cfg.master_seed, rep, 3))
    by_level = {}
    for m in target_levels:
        sphere = np.flatnonzero(ball.level == m)
        if len(sphere) == 0:
            raise CertificationError(f"no targets at level {m}")
        targets = sphere if len(sphere) <= budget else np.sort(
            rng.choice(sphere, size=budget, replace=False)
        )
        tested = coalesced = skipped = 0
        cp_levels = []
        for z in targets:
            pair = _certified_geodesics(
                ball, om, int(z), sorted({o1, o2}), clearance
            )
            geos = dict(pair)
            if geos.get(o1) is None or geos.get(o2) is None:
                skipped += 1
                continue
            g1 = _reverse_geodesic(geos[o1])
            g2 = _reverse_geodesic(geos[o2]) if o1 != o2 else g1
            tested += 1
            cp = coalescence_point(g1, g2)
            assert cp is not None
            vertex, agree = cp
            assert agree
            if vertex != int(z):
                coalesced += 1
                cp_levels.append(int(ball.level[vertex]))
        if tested == 0:
            raise CertificationError(
                f"no certified target geodesics at level {m}"
            )
        by_level[str(m)] = {
            "tested": tested,
            "coalesced": coalesced,
            "skipped": skipped,
            "cp_levels": cp_levels,
        }
    return {"replication": rep, "by_level": by_level}


def _reverse_geodesic(g: OmegaGeodesic) -> OmegaGeodesic:
    return OmegaGeodesic(
        vertices=tuple(reversed(g.vertices)),
        edge_ids=tuple(reversed(g.edge_ids)),
        total_weight=g.total_weight,
    )


def _agg_coalescence(ball, cfg, reps) -> dict:
    target_levels = [int(m) for m in cfg.params["target_levels"]]
    rows = []
    probs = []
    for m in target_levels:
        tested = sum(r["by_level"][str(m)]["tested"] for r in reps)
        coal = sum(r["by_level"][str(m)]["coalesced"] for r in reps)
        skipped = sum(r["by_level"][str(m)]["skipped"] for r in reps)
        p = coal / tested if tested else None
        se = float(np.sqrt(p * (1 - p) / tested)) if tested and p is not None else None
        cp = [lv for r in reps for lv in r["by_level"][str(m)]["cp_levels"]]
        probs.append({"m": m, "tested": tested, "coalesced": coal,
                      "skipped": skipped, "probability": p, "std_error": se,
                      "cp_level_mean": float(np.mean(cp)) if cp else None})
        rows.append([m, p, tested, se])
    return {
        "by_level": probs,
        "tables": {
            "coalescence": {
                "columns": ["m", "probability", "tested", "std_error"],
                "rows": rows,
            }
        },
    }


def _slab_from_config(ball: CayleyBall, cfg: ExperimentConfig) -> SlabSpec:
    p = cfg.params
    axis_level = int(p.get("axis_level", min(2 * int(p["outer"]),
                                             ball.valid_max_level)))
    candidates = np.flatnonzero(ball.level == axis_level)
    if len(candidates) == 0:
        raise ConfigError(f"no axis vertex at level {axis_level}")
    axis = word_geodesic(ball, ball.root, int(candidates[0]))
    return SlabSpec(
        axis=axis,
        inner=int(p["inner"]),
        outer=int(p["outer"]),
        cone_eps=float(p.get("cone_eps", 0.75)),
    )


def _rep_multiplicity(ball, cfg, rep) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    clearance = boundary_clearance(ball, om)
    slab = _slab_from_config(ball, cfg)
    count = disjoint_geodesic_count(
        ball, om, slab,
        k_max=int(cfg.params.get("k_max", 6)),
        strategy=str(cfg.params.get("strategy", "greedy")),
        clearance=clearance,
    )
    return {"replication": rep, "count": int(count)}


def _agg_multiplicity(ball, cfg, reps) -> dict:
    k_max = int(cfg.params.get("k_max", 6))
    counts = np.array([r["count"] for r in reps])
    slab = _slab_from_config(ball, cfg)
    inner, outer = slab_boundary_sets(ball, slab)
    cut = min_edge_cut(ball, inner, outer)
    p_ge = [float((counts >= k).mean()) for k in range(1, k_max + 1)]
    return {
        "counts": [int(c) for c in counts],
        "k_range": list(range(1, k_max + 1)),
        "p_ge_k": p_ge,
        "min_edge_cut": cut,
        "inner_size": int(len(inner)),
        "outer_size": int(len(outer)),
        "tables": {
            "multiplicity": {
                "columns": ["k", "p_count_ge_k"],
                "rows": [[k, p_ge[k - 1]] for k in range(1, k_max + 1)],
            }
        },
    }


def _rep_density(ball, cfg, rep) -> dict:
    om = sample_weights(ball, _distribution(cfg), cfg.master_seed, rep)
    tree = forward_tree(ball, om)
    r = int(cfg.params["coarse_radius"])
    n = int(cfg.params["fine_level"])
    if not r < n:
        raise ConfigError("density probe needs coarse_radius < fine_level")
    fibers = omega_shadow(tree, ball, r, n)
    wr, clamped = _lift_window(cfg.eps, n, ball.radius)
    report = lift_fraction(tree, ball, n, cfg.eps, window_radius=wr)
    lifted = set(
        int(v) for v in report.sphere_vertices[report.indicators]
    )
    hit = sum(1 for members in fibers.values() if lifted & set(members))
    out = {
        "replication": rep,
        "cells": len(fibers),
        "cells_hit": hit,
        "hit_fraction": hit / len(fibers),
        "lift_fraction": report.fraction,
    }
    if clamped:
        out["flags"] = {"window": "clamped"}
    return out


def _agg_density(ball, cfg, reps) -> dict:
    fractions = np.array([r["hit_fraction"] for r in reps])
    rng = np.random.default_rng(cfg.master_seed)
    boots = [
        float(np.mean(fractions[rng.integers(0, len(fractions), len(fractions))]))
        for _ in range(1000)
    ]
    lo, hi = np.percentile(boots, [2.5, 97.5])
    return {
        "mean_hit_fraction": float(fractions.mean()),
        "ci95": [float(lo), float(hi)],
        "tables": {
            "density": {
                "columns": ["replication", "hit_fraction"],
                "rows": [[r["replication"], r["hit_fraction"]] for r in reps],
            }
        },
    }


_RUNNERS = {
    "r-tail": (_rep_r_tail, _agg_r_tail),
    "exceptional-fraction": (_rep_exceptional, _agg_exceptional),
    "wandering": (_rep_wandering, _agg_wandering),
    "coalescence": (_rep_coalescence, _agg_coalescence),
    "multiplicity": (_rep_multiplicity, _agg_multiplicity),
    "density-probe": (_rep_density, _agg_density),
}


# -- execution -------------------------------------------------------------

_WORKER_CTX: tuple | None = None


def _worker_rep(rep: int) -> dict:
    ball, cfg, rep_fn = _WORKER_CTX
    return _safe_rep(ball, cfg, rep_fn, rep)


def _safe_rep(ball, cfg, rep_fn, rep: int) -> dict:
    try:
        return rep_fn(ball, cfg, rep)
    except HypFppError as exc:
        return {"replication": rep, "error": f"{type(exc).__name__}: {exc}"}


def run_experiment(cfg: ExperimentConfig, ball: CayleyBall | None = None) -> dict:
    """Execute all replications and return the (JSON-ready) experiment record.

    The record's `failed` field is set when more than 5% of replications
    abort; callers decide whether to raise (see run_experiment_strict).
    """
    rep_fn, agg_fn = _RUNNERS[cfg.experiment]
    start = time.time()
    if ball is None:
        ball = build_ball(parse_model(cfg.model), cfg.radius, cfg.vertex_cap)
    if ball.radius != cfg.radius or (
        ball.model is not None and ball.model.describe() != cfg.model
    ):
        raise ConfigError("supplied ball does not match the config")
    ball.delta_pad  # compute once before forking
    if cfg.workers > 1:
        global _WORKER_CTX
        _WORKER_CTX = (ball, cfg, rep_fn)
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as ex:
                results = list(ex.map(_worker_rep, range(cfg.replications)))
        finally:
            _WORKER_CTX = None
    else:
        results = [
            _safe_rep(ball, cfg, rep_fn, rep) for rep in range(cfg.replications)
        ]
    ok = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    aggregates = agg_fn(ball, cfg, ok) if ok else {}
    flags = sorted(
        {f for r in ok for f in r.get("flags", {}).values()}
    )
    record = {
        "schema": SCHEMA,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "replications": _jsonable(results),
        "aggregates": _jsonable(aggregates),
        "failures": {
            "count": len(failures),
            "rate": len(failures) / cfg.replications,
        },
        "flags": flags,
        "failed": len(failures) / cfg.replications > MAX_FAILURE_RATE,
        "provenance": {
            "tool_version": __version__,
            "wall_time_s": round(time.time() - start, 3),
            "master_seed": cfg.master_seed,
            "workers": cfg.workers,
        },
    }
    return record


def run_experiment_strict(cfg: ExperimentConfig, ball: CayleyBall | None = None) -> dict:
    record = run_experiment(cfg, ball)
    if record["failed"]:
        raise RunFailedError(
            f"{record['failures']['count']} of {cfg.replications} replications failed"
        )
    return record


def run_r_tail(cfg, ball=None):
    return run_experiment(cfg, ball)


def run_exceptional_fraction(cfg, ball=None):
    return run_experiment(cfg, ball)


def run_wandering(cfg, ball=None):
    return run_experiment(cfg, ball)


def run_coalescence(cfg, ball=None):
    return run_experiment(cfg, ball)


def run_multiplicity(cfg, ball=None):
    return run_experiment(cfg, ball)


def run_density_probe(cfg, ball=None):
    return run_experiment(cfg, ball)
