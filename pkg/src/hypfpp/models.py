"""Graph model descriptors: free groups, the genus-2 surface group, {p,q} tessellations."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError

FREE = "free"
SURFACE = "surface"
TESS = "tess"


@dataclass(frozen=True)
class GraphModel:
    """Which infinite graph a ball is cut from.

    kind: "free" (rank-k free group, standard generators), "surface"
    (genus-2 surface group, presentation <a,b,c,d | [a,b][c,d]>), or
    "tess" (1-skeleton of the regular {p,q} hyperbolic tiling).
    """

    kind: str
    p: int = 0
    q: int = 0
    rank: int = 0

    def __post_init__(self):
        if self.kind == FREE:
            if self.rank < 2:
                raise ModelError(f"free group rank must be >= 2, got {self.rank}")
        elif self.kind == SURFACE:
            if self.rank != 2:
                raise ModelError("only genus 2 is supported for surface models")
        elif self.kind == TESS:
            if self.p < 3 or self.q < 3:
                raise ModelError(f"tessellation needs p, q >= 3, got ({self.p}, {self.q})")
            if (self.p - 2) * (self.q - 2) <= 4:
                raise ModelError(
                    f"({self.p}-2)({self.q}-2) = {(self.p - 2) * (self.q - 2)} <= 4: "
                    "not a hyperbolic tessellation"
                )
        else:
            raise ModelError(f"unknown model kind {self.kind!r}")

    @property
    def valence(self) -> int:
        """Degree of every interior vertex."""
        if self.kind == FREE:
            return 2 * self.rank
        if self.kind == SURFACE:
            return 8
        return self.q

    @property
    def is_tree(self) -> bool:
        return self.kind == FREE

    def describe(self) -> str:
        if self.kind == FREE:
            return f"free:{self.rank}"
        if self.kind == SURFACE:
            return "surface:2"
        return f"tess:{self.p},{self.q}"


def free_group(rank: int) -> GraphModel:
    return GraphModel(kind=FREE, rank=rank)


def surface_genus2() -> GraphModel:
    return GraphModel(kind=SURFACE, rank=2)


def tessellation(p: int, q: int) -> GraphModel:
    return GraphModel(kind=TESS, p=p, q=q)


def parse_model(spec: str) -> GraphModel:
    """Parse a model spec string such as "free:2", "surface:2", "tess:8,8"."""
    spec = spec.strip()
    head, sep, tail = spec.partition(":")
    if not sep:
        raise ModelError(f"bad model spec {spec!r}: expected kind:params")
    try:
        if head == FREE:
            return free_group(int(tail))
        if head == SURFACE:
            if int(tail) != 2:
                raise ModelError("only surface:2 is supported")
            return surface_genus2()
        if head == TESS:
            p_str, _, q_str = tail.partition(",")
            return tessellation(int(p_str), int(q_str))
    except ValueError as exc:
        raise ModelError(f"bad model spec {spec!r}: {exc}") from None
    raise ModelError(f"unknown model kind {head!r}")
