"""Dominance, non-dominated filtering, and exact two-objective hypervolume.

Scores are maximized, costs minimized. The hypervolume of a front relative
to a reference point is the area of the region that is at least as good as
the reference in both objectives and dominated by some front point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple

from .errors import InvalidConfigurationError


class ObjectiveVector(NamedTuple):
    score: float  # higher is better
    cost: float   # lower is better


@dataclass(frozen=True)
class FrontEntry:
    config: Any
    vector: ObjectiveVector


@dataclass(frozen=True)
class ParetoFront:
    """Mutually non-dominated entries, sorted by ascending cost."""

    entries: tuple[FrontEntry, ...]

    @property
    def vectors(self) -> list[ObjectiveVector]:
        return [e.vector for e in self.entries]

    @property
    def configs(self) -> list[Any]:
        return [e.config for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def dominates(u: ObjectiveVector, v: ObjectiveVector) -> bool:
    """True iff u is no worse in both objectives and strictly better in one."""
    return (
        u.score >= v.score
        and u.cost <= v.cost
        and (u.score > v.score or u.cost < v.cost)
    )


def non_dominated(points: Iterable[tuple[Any, ObjectiveVector]]) -> ParetoFront:
    """Extract the maximal set under :func:`dominates`.

    Cost-sort sweep, O(n log n). Cost ties keep the higher-score point;
    exact duplicate vectors are deduplicated keeping the first seen.
    """
    indexed = [
        (vec.cost, -vec.score, i, cfg, ObjectiveVector(*vec))
        for i, (cfg, vec) in enumerate(points)
    ]
    indexed.sort(key=lambda t: (t[0], t[1], t[2]))
    kept: list[FrontEntry] = []
    best_score = float("-inf")
    for _, _, _, cfg, vec in indexed:
        if vec.score > best_score:
            kept.append(FrontEntry(cfg, vec))
            best_score = vec.score
    return ParetoFront(tuple(kept))


def hypervolume(points: Iterable[ObjectiveVector], ref: ObjectiveVector) -> float:
    """Exact 2-D hypervolume of the points' front over ``ref``.

    Points that do not dominate the reference contribute nothing, so any
    point set (not only a clean front) is accepted.
    """
    pts = [
        ObjectiveVector(*p)
        for p in points
        if p[0] > ref.score and p[1] < ref.cost
    ]
    pts.sort(key=lambda p: (-p.score, p.cost))
    total = 0.0
    prev_cost = ref.cost
    for p in pts:
        if p.cost < prev_cost:
            total += (p.score - ref.score) * (prev_cost - p.cost)
            prev_cost = p.cost
    return total


def nadir(points: Iterable[ObjectiveVector]) -> ObjectiveVector:
    """Componentwise worst corner: (min score, max cost)."""
    pts = [ObjectiveVector(*p) for p in points]
    if not pts:
        raise InvalidConfigurationError("nadir of an empty point set")
    return ObjectiveVector(
        min(p.score for p in pts), max(p.cost for p in pts)
    )


def write_front(front: ParetoFront, fileobj) -> None:
    """Line-delimited front export: one {config, score, cost} object per line."""
    for entry in front.entries:
        cfg = entry.config
        record = {
            "config": cfg.to_dict() if hasattr(cfg, "to_dict") else cfg,
            "score": entry.vector.score,
            "cost": entry.vector.cost,
        }
        fileobj.write(json.dumps(record, sort_keys=True) + "\n")
