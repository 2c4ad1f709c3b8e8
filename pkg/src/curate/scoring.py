"""Per-clip quality signals: aesthetic proxy, cosine similarity, OCR text
coverage, block-matching motion, and perceptual hashes.

Production deployments bolt real models (aesthetic predictors, DINO-style
embedders, OCR, dense optical flow) onto the sidecar protocol; everything
here is a deterministic pixel-level stand-in with the same output ranges,
so thresholds and plumbing stay testable without model weights. Proxy
scales are NOT calibrated to any model's scale; thresholds are
config-overridable for that reason.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    LengthMismatch,
    WrongPixelFormat,
    ZeroVector,
)
from .media import FrameBuffer, PixelFormat


@dataclass(frozen=True)
class ScoreSet:
    """All quality signals for one clip."""

    aesthetic: float
    min_adjacent_similarity: float
    ocr_coverage: float
    motion: float

    def __post_init__(self):
        if not 0.0 <= self.aesthetic <= 10.0:
            raise ValueError("aesthetic must be in [0, 10]")
        if not -1.0 <= self.min_adjacent_similarity <= 1.0:
            raise ValueError("similarity must be in [-1, 1]")
        if not 0.0 <= self.ocr_coverage <= 1.0:
            raise ValueError("ocr_coverage must be in [0, 1]")
        if self.motion < 0.0:
            raise ValueError("motion must be >= 0")

    def to_dict(self) -> dict:
        return {
            "aesthetic": self.aesthetic,
            "min_adjacent_similarity": self.min_adjacent_similarity,
            "ocr_coverage": self.ocr_coverage,
            "motion": self.motion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreSet":
        return cls(
            aesthetic=d["aesthetic"],
            min_adjacent_similarity=d["min_adjacent_similarity"],
            ocr_coverage=d["ocr_coverage"],
            motion=d["motion"],
        )


# --- aesthetic proxy ---------------------------------------------------------


def combine_aesthetic_components(
    sharpness: float, colorfulness: float, contrast: float
) -> float:
    """Weighted sum of the three [0,1]-ish components, clamped to [0, 10]."""
    return float(np.clip(4.0 * sharpness + 3.0 * colorfulness + 3.0 * contrast, 0.0, 10.0))


def aesthetic_components(frame: FrameBuffer) -> tuple[float, float, float]:
    """(sharpness, colorfulness, contrast) of an RGB24 frame.

    sharpness: 4-neighbor Laplacian variance over interior pixels, /1000,
    capped at 1. colorfulness: Hasler-Suesstrunk statistic /100, capped at
    1. contrast: RMS luminance contrast /128 (cannot exceed ~0.996).
    """
    if frame.format is not PixelFormat.RGB24:
        raise WrongPixelFormat(f"aesthetic proxy needs RGB24, got {frame.format}")
    rgb = frame.rgb().astype(np.float64)
    gray = frame.gray()

    if frame.height >= 3 and frame.width >= 3:
        lap = (
            gray[:-2, 1:-1]
            + gray[2:, 1:-1]
            + gray[1:-1, :-2]
            + gray[1:-1, 2:]
            - 4.0 * gray[1:-1, 1:-1]
        )
        sharpness = min(1.0, float(np.var(lap)) / 1000.0)
    else:
        sharpness = 0.0

    rg = rgb[:, :, 0] - rgb[:, :, 1]
    yb = 0.5 * (rgb[:, :, 0] + rgb[:, :, 1]) - rgb[:, :, 2]
    stat = np.sqrt(np.var(rg) + np.var(yb)) + 0.3 * np.sqrt(
        np.mean(rg) ** 2 + np.mean(yb) ** 2
    )
    colorfulness = min(1.0, float(stat) / 100.0)

    contrast = float(np.std(gray)) / 128.0
    return sharpness, colorfulness, contrast


def aesthetic_proxy(frame: FrameBuffer) -> float:
    """Deterministic 0-10 visual-quality score of one RGB24 frame."""
    return combine_aesthetic_components(*aesthetic_components(frame))


# --- embeddings / similarity -------------------------------------------------


def proxy_embedding(frame: FrameBuffer) -> np.ndarray:
    """32x32 grayscale downsample, flattened and mean-centered."""
    small = bilinear_resize(frame.gray(), 32, 32)
    flat = small.reshape(-1)
    return flat - flat.mean()


def frame_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two embeddings, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


# --- OCR coverage proxy ------------------------------------------------------

_OCR_BLOCK = 8
_OCR_FACTOR = 4.0


def ocr_coverage_proxy(frame: FrameBuffer) -> float:
    """Largest text-like box area over frame area, via gradient density.

    8x8 blocks of the horizontal-gradient map qualify when their mean
    gradient exceeds 4x the whole-map mean; 4-connected qualifying blocks
    merge into boxes and the largest box's pixel area is returned as a
    ratio. Text bands are dense in horizontal gradients, which is exactly
    what this picks up; it is a proxy, not an OCR model.
    """
    gray = frame.gray()
    h, w = gray.shape
    if w < 2:
        return 0.0
    grad = np.abs(np.diff(gray, axis=1))  # (h, w-1)
    overall = float(grad.mean())
    if overall <= 0.0:
        return 0.0

    gh, gw = grad.shape
    nby = (gh + _OCR_BLOCK - 1) // _OCR_BLOCK
    nbx = (gw + _OCR_BLOCK - 1) // _OCR_BLOCK
    qualifies = np.zeros((nby, nbx), dtype=bool)
    for by in range(nby):
        for bx in range(nbx):
            block = grad[
                by * _OCR_BLOCK : (by + 1) * _OCR_BLOCK,
                bx * _OCR_BLOCK : (bx + 1) * _OCR_BLOCK,
            ]
            if float(block.mean()) > _OCR_FACTOR * overall:
                qualifies[by, bx] = True

    best_area = 0
    seen = np.zeros_like(qualifies)
    for by in range(nby):
        for bx in range(nbx):
            if not qualifies[by, bx] or seen[by, bx]:
                continue
            # flood fill one 4-connected component of qualifying blocks
            stack = [(by, bx)]
            seen[by, bx] = True
            min_y = max_y = by
            min_x = max_x = bx
            while stack:
                cy, cx = stack.pop()
                min_y, max_y = min(min_y, cy), max(max_y, cy)
                min_x, max_x = min(min_x, cx), max(max_x, cx)
                for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny < nby and 0 <= nx < nbx and qualifies[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            px_top = min_y * _OCR_BLOCK
            px_bottom = min((max_y + 1) * _OCR_BLOCK, h)
            px_left = min_x * _OCR_BLOCK
            px_right = min((max_x + 1) * _OCR_BLOCK, w)
            best_area = max(best_area, (px_bottom - px_top) * (px_right - px_left))

    return best_area / (w * h)


# --- motion proxy ------------------------------------------------------------

_MOTION_BLOCK = 16
_MOTION_RADIUS = 8


def _pair_motion(a: np.ndarray, b: np.ndarray) -> float:
    """Mean best-match displacement magnitude over interior 16x16 blocks.

    Exhaustive +-8 px search minimizing SAD; ties resolve to the smallest
    magnitude, then lexicographic (dy, dx), which makes the search
    symmetric under time reversal on translation fixtures.
    """
    h, w = a.shape
    blk, rad = _MOTION_BLOCK, _MOTION_RADIUS
    by_idx = [
        y0
        for y0 in range(0, h - blk + 1, blk)
        if y0 - rad >= 0 and y0 + blk + rad <= h
    ]
    bx_idx = [
        x0
        for x0 in range(0, w - blk + 1, blk)
        if x0 - rad >= 0 and x0 + blk + rad <= w
    ]
    if not by_idx or not bx_idx:
        return 0.0

    nby, nbx = len(by_idx), len(bx_idx)
    y0s = np.array(by_idx)
    x0s = np.array(bx_idx)
    # block view of the reference frame: (nby, nbx, blk, blk)
    ref = np.stack(
        [np.stack([a[y : y + blk, x : x + blk] for x in x0s]) for y in y0s]
    )

    best_sad = np.full((nby, nbx), np.inf)
    best_mag2 = np.full((nby, nbx), np.iinfo(np.int64).max, dtype=np.int64)
    best_dy = np.zeros((nby, nbx), dtype=np.int64)
    best_dx = np.zeros((nby, nbx), dtype=np.int64)
    for dy in range(-rad, rad + 1):
        for dx in range(-rad, rad + 1):
            cand = np.stack(
                [
                    np.stack(
                        [b[y + dy : y + dy + blk, x + dx : x + dx + blk] for x in x0s]
                    )
                    for y in y0s
                ]
            )
            sad = np.abs(ref - cand).sum(axis=(2, 3))
            mag2 = dy * dy + dx * dx
            better = sad < best_sad
            tie = sad == best_sad
            tie_mag = tie & (mag2 < best_mag2)
            tie_lex = (
                tie
                & (mag2 == best_mag2)
                & ((dy < best_dy) | ((dy == best_dy) & (dx < best_dx)))
            )
            update = better | tie_mag | tie_lex
            best_sad = np.where(update, sad, best_sad)
            best_mag2 = np.where(update, mag2, best_mag2)
            best_dy = np.where(update, dy, best_dy)
            best_dx = np.where(update, dx, best_dx)

    mags = np.sqrt((best_dy.astype(np.float64)) ** 2 + (best_dx.astype(np.float64)) ** 2)
    return float(mags.mean())


def motion_score(frames: list[FrameBuffer], sample_rate: float = 1.0) -> float:
    """Mean block displacement per sampled pair, rescaled by the sample rate
    to per-second-equivalent units."""
    if len(frames) < 2:
        raise ValueError("motion score needs >= 2 sampled frames")
    dims = {(f.width, f.height) for f in frames}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed frame dimensions: {sorted(dims)}")
    grays = [f.gray() for f in frames]
    pair_scores = [
        _pair_motion(grays[i], grays[i + 1]) for i in range(len(grays) - 1)
    ]
    return float(np.mean(pair_scores)) * sample_rate


# --- perceptual hash ---------------------------------------------------------


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers (identity at equal size)."""
    h, w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bottom = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bottom * wy


def phash64(frame: FrameBuffer) -> int:
    """Average hash: 8x8 bilinear downsample of the luma, bit k set iff
    cell k exceeds the 64-cell mean. Row-major, MSB first."""
    cells = bilinear_resize(frame.gray(), 8, 8)
    mean = cells.mean()
    bits = 0
    for k, value in enumerate(cells.reshape(-1)):
        if value > mean:
            bits |= 1 << (63 - k)
    return bits


def hamming_distance(a: int, b: int) -> int:
    """Population count of the XOR of two 64-bit hashes."""
    return ((a ^ b) & 0xFFFFFFFFFFFFFFFF).bit_count()
