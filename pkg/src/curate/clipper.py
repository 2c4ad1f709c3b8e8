"""Two-stage clip extraction plus within-source near-duplicate removal.

Stage one finds hard cuts with an HSV-histogram content detector; stage
two samples one frame per second, embeds the samples, and splits wherever
adjacent-sample cosine similarity drops below the tier threshold. Emitted
clips are capped at a maximum duration and deduplicated per source video
by perceptual keyframe hashes, keeping the highest-aesthetic clip of each
duplicate group.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import EmbedderFailure, MissingScore, ZeroVector
from .media import FrameBuffer
from .scoring import ScoreSet, frame_similarity, hamming_distance

if TYPE_CHECKING:
    from .balance import TaxonomyTag
    from .captions import Caption

Embedder = Callable[[FrameBuffer], np.ndarray]


@dataclass(frozen=True)
class ShotBoundary:
    frame_index: int
    dissimilarity: float


@dataclass(frozen=True)
class Clip:
    """A contiguous frame range of one source video."""

    clip_id: str
    source: str
    start_frame: int
    end_frame: int  # exclusive
    fps: Fraction
    keyframe_indices: tuple[int, ...] = ()
    scores: ScoreSet | None = None
    tier: str | None = None
    caption: "Caption | None" = None
    tags: tuple["TaxonomyTag", ...] = ()

    def __post_init__(self):
        if self.start_frame >= self.end_frame:
            raise ValueError("start_frame must be < end_frame")
        for k in self.keyframe_indices:
            if not self.start_frame <= k < self.end_frame:
                raise ValueError("keyframe outside clip range")

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame

    @property
    def duration(self) -> Fraction:
        return Fraction(self.frame_count) / self.fps


def make_clip_id(source: str, start_frame: int, end_frame: int) -> str:
    """Stable identifier: source digest plus the frame range."""
    digest = hashlib.sha256(source.encode("utf-8")).hexdigest()[:12]
    return f"{digest}:{start_frame:06d}-{end_frame:06d}"


# --- stage one: hard cuts ----------------------------------------------------

_HIST_BINS = 16


def _hsv_histograms(frame: FrameBuffer) -> np.ndarray:
    """Normalized 16-bin histogram per HSV channel, shape (3, 16)."""
    rgb = frame.rgb().astype(np.float64) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    cmax = np.max(rgb, axis=2)
    cmin = np.min(rgb, axis=2)
    delta = cmax - cmin

    hue = np.zeros_like(cmax)
    mask = delta > 0
    rm = mask & (cmax == r)
    gm = mask & (cmax == g) & ~rm
    bm = mask & ~rm & ~gm
    hue[rm] = np.mod((g[rm] - b[rm]) / delta[rm], 6.0)
    hue[gm] = (b[gm] - r[gm]) / delta[gm] + 2.0
    hue[bm] = (r[bm] - g[bm]) / delta[bm] + 4.0
    hue /= 6.0

    sat = np.where(cmax > 0, delta / np.where(cmax > 0, cmax, 1.0), 0.0)
    val = cmax

    hists = np.empty((3, _HIST_BINS), dtype=np.float64)
    n = hue.size
    for i, channel in enumerate((hue, sat, val)):
        bins = np.minimum((channel * _HIST_BINS).astype(int), _HIST_BINS - 1)
        hists[i] = np.bincount(bins.reshape(-1), minlength=_HIST_BINS) / n
    return hists


def histogram_dissimilarity(a: FrameBuffer, b: FrameBuffer) -> float:
    """Mean per-channel L1 distance of normalized HSV histograms, in [0, 2]."""
    ha, hb = _hsv_histograms(a), _hsv_histograms(b)
    return float(np.abs(ha - hb).sum(axis=1).mean())


def detect_shots(
    frames: Sequence[FrameBuffer], threshold: float = 0.30
) -> list[ShotBoundary]:
    """Boundary at index i wherever d(frame[i-1], frame[i]) > threshold."""
    if not 0.0 < threshold <= 2.0:
        raise ValueError("threshold must be in (0, 2]")
    if len(frames) < 2:
        return []
    hists = [_hsv_histograms(f) for f in frames]
    boundaries = []
    for i in range(1, len(frames)):
        d = float(np.abs(hists[i - 1] - hists[i]).sum(axis=1).mean())
        if d > threshold:
            boundaries.append(ShotBoundary(frame_index=i, dissimilarity=d))
    return boundaries


def shots_to_clips(
    source: str,
    frame_count: int,
    fps: Fraction,
    boundaries: Sequence[ShotBoundary],
) -> list[Clip]:
    """Coarse clips between consecutive shot boundaries."""
    cuts = [0] + [b.frame_index for b in boundaries] + [frame_count]
    return [
        Clip(
            clip_id=make_clip_id(source, s, e),
            source=source,
            start_frame=s,
            end_frame=e,
            fps=fps,
        )
        for s, e in zip(cuts[:-1], cuts[1:])
        if e > s
    ]


# --- stage two: similarity refinement + duration cap -------------------------


def refine_clips(
    clip: Clip,
    sampled: Sequence[tuple[int, FrameBuffer]],
    embedder: Embedder,
    sim_threshold: float,
    max_clip_seconds: float = 10.0,
    min_clip_seconds: float = 4.0,
) -> list[Clip]:
    """Split at similarity drops, cap duration, drop short remainders.

    `sampled` is the clip's one-frame-per-second grid (absolute indices);
    the same grid supplies the keyframes of every emitted sub-clip.
    """
    if not -1.0 <= sim_threshold <= 1.0:
        raise ValueError("sim_threshold must be in [-1, 1]")

    split_points: list[int] = []
    if len(sampled) >= 2:
        embeddings = []
        for _, frame in sampled:
            try:
                embeddings.append(embedder(frame))
            except EmbedderFailure:
                raise
            except Exception as exc:
                raise EmbedderFailure(str(exc)) from exc
        for i in range(len(sampled) - 1):
            try:
                sim = frame_similarity(embeddings[i], embeddings[i + 1])
            except ZeroVector:
                sim = 1.0  # mean-centered flat frames; nothing to split on
            if sim < sim_threshold:
                split_points.append(sampled[i + 1][0])

    cuts = [clip.start_frame] + split_points + [clip.end_frame]
    max_frames = int(Fraction(max_clip_seconds) * clip.fps)
    if max_frames < 1:
        raise ValueError("max_clip_seconds shorter than one frame")

    sample_grid = [idx for idx, _ in sampled]
    out: list[Clip] = []
    for seg_start, seg_end in zip(cuts[:-1], cuts[1:]):
        pos = seg_start
        while pos < seg_end:
            end = min(pos + max_frames, seg_end)
            if Fraction(end - pos) / clip.fps >= Fraction(min_clip_seconds):
                keyframes = tuple(k for k in sample_grid if pos <= k < end) or (pos,)
                out.append(
                    Clip(
                        clip_id=make_clip_id(clip.source, pos, end),
                        source=clip.source,
                        start_frame=pos,
                        end_frame=end,
                        fps=clip.fps,
                        keyframe_indices=keyframes,
                    )
                )
            pos = end
    return out


# --- within-source dedup -----------------------------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def dedup_clips(
    clips: Sequence[Clip],
    hashes: dict[str, Sequence[int]],
    max_hamming: int = 8,
) -> list[Clip]:
    """Collapse near-duplicate clips of the same source video.

    A pair is duplicate when the closest keyframe-hash pair is within
    max_hamming bits; duplicate groups are the transitive closure of that
    relation (Hamming thresholds are not transitive). The survivor is the
    highest-aesthetic clip, ties going to the lexicographically earlier
    clip_id. Input order is preserved.
    """
    clips = list(clips)
    for clip in clips:
        if clip.scores is None:
            raise MissingScore(f"clip {clip.clip_id} lacks an aesthetic score")
        if not hashes.get(clip.clip_id):
            raise ValueError(f"clip {clip.clip_id} carries no keyframe hashes")

    uf = _UnionFind(len(clips))
    by_source: dict[str, list[int]] = {}
    for i, clip in enumerate(clips):
        by_source.setdefault(clip.source, []).append(i)

    for indices in by_source.values():
        for ai in range(len(indices)):
            for bi in range(ai + 1, len(indices)):
                i, j = indices[ai], indices[bi]
                ha, hb = hashes[clips[i].clip_id], hashes[clips[j].clip_id]
                closest = min(
                    hamming_distance(x, y) for x in ha for y in hb
                )
                if closest <= max_hamming:
                    uf.union(i, j)

    winners: dict[int, int] = {}
    for i, clip in enumerate(clips):
        root = uf.find(i)
        if root not in winners:
            winners[root] = i
            continue
        cur = clips[winners[root]]
        better = clip.scores.aesthetic > cur.scores.aesthetic or (
            clip.scores.aesthetic == cur.scores.aesthetic
            and clip.clip_id < cur.clip_id
        )
        if better:
            winners[root] = i

    keep = set(winners.values())
    return [clip for i, clip in enumerate(clips) if i in keep]
