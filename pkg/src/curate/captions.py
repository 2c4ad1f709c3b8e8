"""Caption assembly from keyframe/video caption parts.

Semantic merging belongs to a language-model sidecar; the built-in path is
a plain template (video caption preferred, else joined keyframe captions).
The motion score rides on the end of the text in a fixed, machine-
strippable suffix so downstream prompt tooling can add or remove it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from .errors import EmptyParts

MOTION_SUFFIX_RE = re.compile(r" Motion score: (\d+\.\d)\.$")


@dataclass(frozen=True)
class CaptionParts:
    keyframe_captions: tuple[str, ...] = ()
    video_caption: str | None = None
    camera_motion: str | None = None

    def is_empty(self) -> bool:
        return not self.video_caption and not any(self.keyframe_captions)

    def to_dict(self) -> dict:
        return {
            "keyframe_captions": list(self.keyframe_captions),
            "video_caption": self.video_caption,
            "camera_motion": self.camera_motion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaptionParts":
        return cls(
            keyframe_captions=tuple(d.get("keyframe_captions") or ()),
            video_caption=d.get("video_caption"),
            camera_motion=d.get("camera_motion"),
        )


@dataclass(frozen=True)
class Caption:
    text: str
    motion_score: float | None = None

    def to_dict(self) -> dict:
        return {"text": self.text, "motion_score": self.motion_score}

    @classmethod
    def from_dict(cls, d: dict) -> "Caption":
        return cls(text=d["text"], motion_score=d.get("motion_score"))


def motion_suffix(motion: float) -> str:
    # {:.1f} rounds half to even, so 7.25 formats as 7.2
    return f" Motion score: {motion:.1f}."


def compose_caption(
    parts: CaptionParts,
    motion: float | None = None,
    merger: Callable[[CaptionParts], str] | None = None,
) -> Caption:
    """Merge caption parts (via the merger when configured) and append the
    motion suffix."""
    if parts.is_empty():
        raise EmptyParts("no non-empty caption parts")
    if merger is not None:
        text = merger(parts)
    elif parts.video_caption:
        text = parts.video_caption
    else:
        text = "; ".join(c for c in parts.keyframe_captions if c)
    if motion is not None:
        text += motion_suffix(motion)
    return Caption(text=text, motion_score=motion)


def strip_motion_suffix(text: str) -> tuple[str, float | None]:
    """Inverse of the suffix append: (base caption, parsed score or None)."""
    m = MOTION_SUFFIX_RE.search(text)
    if m is None:
        return text, None
    return text[: m.start()], float(m.group(1))
