"""Resolution-tier routing and per-tier threshold filtering.

A clip lands in the highest tier whose minimum dimensions it satisfies;
that tier's floors/ceilings then decide acceptance. Dimension matching is
orientation-agnostic: (short, long) of the clip is compared against
(short, long) of the tier, so portrait and landscape route identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import MissingScore
from .scoring import ScoreSet


class Criterion(Enum):
    RESOLUTION = "resolution"
    SIMILARITY = "similarity"
    AESTHETIC = "aesthetic"
    OCR = "ocr"
    MOTION = "motion"


@dataclass(frozen=True)
class Tier:
    name: str
    min_dims: tuple[int, int]
    sim_floor: float
    aesthetic_floor: float
    ocr_ceiling: float
    motion_range: tuple[float, float]

    def __post_init__(self):
        if self.motion_range[0] >= self.motion_range[1]:
            raise ValueError("motion_range must be (low, high) with low < high")

    def matches_dims(self, width: int, height: int) -> bool:
        short, long = sorted((width, height))
        t_short, t_long = sorted(self.min_dims)
        return short >= t_short and long >= t_long

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "min_dims": list(self.min_dims),
            "sim_floor": self.sim_floor,
            "aesthetic_floor": self.aesthetic_floor,
            "ocr_ceiling": self.ocr_ceiling,
            "motion_range": list(self.motion_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tier":
        return cls(
            name=d["name"],
            min_dims=tuple(d["min_dims"]),
            sim_floor=float(d["sim_floor"]),
            aesthetic_floor=float(d["aesthetic_floor"]),
            ocr_ceiling=float(d["ocr_ceiling"]),
            motion_range=tuple(float(x) for x in d["motion_range"]),
        )


def default_tiers() -> list[Tier]:
    """The stock 480p/720p/1080p tier ladder."""
    return [
        Tier("T480", (480, 864), 0.85, 4.3, 0.02, (0.3, 20.0)),
        Tier("T720", (720, 1280), 0.90, 4.5, 0.01, (0.5, 15.0)),
        Tier("T1080", (1080, 1920), 0.90, 4.5, 0.01, (0.5, 8.0)),
    ]


@dataclass(frozen=True)
class FilterReport:
    clip_id: str
    tier: str | None
    rejected_by: frozenset[Criterion]

    @property
    def accepted(self) -> bool:
        return self.tier is not None and not self.rejected_by

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "tier": self.tier,
            "rejected_by": sorted(c.value for c in self.rejected_by),
        }


def route_and_filter(
    clip_id: str,
    width: int,
    height: int,
    scores: ScoreSet,
    tiers: list[Tier],
    check_similarity: bool = True,
    check_motion: bool = True,
) -> FilterReport:
    """Route a clip to its tier and evaluate every criterion against it.

    All failing criteria are reported, not just the first. Still images go
    through the same routing with similarity/motion checks disabled.
    """
    if scores is None:
        raise MissingScore(f"clip {clip_id} has no scores")

    matched = [t for t in tiers if t.matches_dims(width, height)]
    if not matched:
        return FilterReport(clip_id, None, frozenset({Criterion.RESOLUTION}))
    # highest tier = largest minimum-dimension requirement
    tier = max(matched, key=lambda t: sorted(t.min_dims))

    failed: set[Criterion] = set()
    if check_similarity and scores.min_adjacent_similarity < tier.sim_floor:
        failed.add(Criterion.SIMILARITY)
    if scores.aesthetic < tier.aesthetic_floor:
        failed.add(Criterion.AESTHETIC)
    if scores.ocr_coverage > tier.ocr_ceiling:
        failed.add(Criterion.OCR)
    if check_motion:
        low, high = tier.motion_range
        if not (low <= scores.motion <= high):
            failed.add(Criterion.MOTION)
    if failed:
        return FilterReport(clip_id, None, frozenset(failed))
    return FilterReport(clip_id, tier.name, frozenset())
