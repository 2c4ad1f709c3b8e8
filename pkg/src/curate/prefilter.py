"""Basic-attribute prefiltering of raw sources.

Cheap container-level checks (duration, resolution, bitrate, frame rate)
run before any frame is decoded. All thresholds are inclusive; frame rate
gets a 1e-9 epsilon so the NTSC boundary value 23.976 is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .media import VideoMeta

_FPS_EPSILON = 1e-9


class Reason(Enum):
    TOO_SHORT = "too_short"
    TOO_SMALL = "too_small"
    LOW_BITRATE = "low_bitrate"
    LOW_FPS = "low_fps"
    UNKNOWN_BITRATE = "unknown_bitrate"


@dataclass(frozen=True)
class PrefilterConfig:
    min_duration: float = 4.0
    min_dimension: int = 480
    min_bitrate: int = 500_000
    min_fps: float = 23.976
    # bitrate == 0 means unknown; by default such sources are rejected
    allow_unknown_bitrate: bool = False

    def __post_init__(self):
        if (
            self.min_duration <= 0
            or self.min_dimension <= 0
            or self.min_bitrate <= 0
            or self.min_fps <= 0
        ):
            raise ValueError("prefilter thresholds must be positive")


@dataclass(frozen=True)
class PrefilterVerdict:
    accepted: bool
    reasons: frozenset[Reason] = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "reasons": sorted(r.value for r in self.reasons),
        }


def evaluate_prefilter(meta: VideoMeta, config: PrefilterConfig) -> PrefilterVerdict:
    """Check every threshold independently and report all failures."""
    reasons: set[Reason] = set()
    if meta.duration < config.min_duration:
        reasons.add(Reason.TOO_SHORT)
    if min(meta.width, meta.height) < config.min_dimension:
        reasons.add(Reason.TOO_SMALL)
    if meta.bitrate == 0:
        reasons.add(Reason.UNKNOWN_BITRATE)
    elif meta.bitrate < config.min_bitrate:
        reasons.add(Reason.LOW_BITRATE)
    if float(meta.fps) < config.min_fps - _FPS_EPSILON:
        reasons.add(Reason.LOW_FPS)

    blocking = set(reasons)
    if config.allow_unknown_bitrate:
        blocking.discard(Reason.UNKNOWN_BITRATE)
    return PrefilterVerdict(accepted=not blocking, reasons=frozenset(reasons))
