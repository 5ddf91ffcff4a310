"""Random edge weights: i.i.d. atomless draws keyed by (seed, replication, edge id)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ball import CayleyBall
from .errors import ModelError

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class WeightDistribution:
    """Edge-length law: Exponential(rate) or Uniform(a, b).

    Both are continuous with exponential tails; heavier laws are out of scope.
    """

    kind: str
    rate: float = 1.0
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "exponential":
            if not self.rate > 0:
                raise ModelError("exponential rate must be positive")
        elif self.kind == "uniform":
            if not (0 <= self.a < self.b):
                raise ModelError("uniform needs 0 <= a < b")
        else:
            raise ModelError(f"unknown distribution {self.kind!r}")

    def describe(self) -> dict:
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        return {"kind": "uniform", "a": self.a, "b": self.b}

    @staticmethod
    def from_dict(d: dict) -> "WeightDistribution":
        if d.get("kind") == "exponential":
            return WeightDistribution("exponential", rate=float(d.get("rate", 1.0)))
        if d.get("kind") == "uniform":
            return WeightDistribution("uniform", a=float(d.get("a", 0.0)), b=float(d.get("b", 1.0)))
        raise ModelError(f"unknown distribution {d!r}")


@dataclass
class OmegaSample:
    """One weight configuration: strictly positive weight per edge id.

    Regenerating from (ball, distribution, master_seed, replication_index)
    reproduces the vector bit for bit, independent of iteration order, because
    weight e is the e-th draw of a counter-based stream keyed on the seeds.
    """

    ball: CayleyBall
    distribution: WeightDistribution
    master_seed: int
    replication_index: int
    weights: np.ndarray

    def weight(self, edge_id: int) -> float:
        return float(self.weights[edge_id])


def sample_weights(
    ball: CayleyBall,
    distribution: WeightDistribution,
    master_seed: int,
    replication_index: int = 0,
) -> OmegaSample:
    if not 0 <= master_seed < 2**64:
        raise ModelError("master_seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(replication_index,))
    gen = np.random.Generator(np.random.Philox(ss))
    u = gen.random(ball.ne)
    if distribution.kind == "exponential":
        w = -np.log1p(-u) / distribution.rate
    else:
        w = distribution.a + (distribution.b - distribution.a) * u
    np.maximum(w, _TINY, out=w)  # weights are strictly positive
    return OmegaSample(
        ball=ball,
        distribution=distribution,
        master_seed=master_seed,
        replication_index=replication_index,
        weights=w,
    )
