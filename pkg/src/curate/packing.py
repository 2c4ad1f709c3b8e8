"""Token-sequence construction and batch packing for training.

Pixels map to latent cells through the autoencoder strides (8x8 spatial,
4 temporal with the first frame kept), latent cells to tokens through the
spatial patch size. Variable-length sequences pack into fixed-length
batches by first-fit-decreasing, with per-token segment ids so attention
masks can isolate segments. Each packed sequence can carry a
noise-to-data interpolation payload for flow training.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndivisibleDimensions,
    IndivisibleHeadDim,
    NonFiniteInput,
    SequenceTooLong,
)
from .rng import SplitMix64

SPATIAL_STRIDE = 8
TEMPORAL_STRIDE = 4


@dataclass(frozen=True)
class LatentShape:
    lt: int
    lh: int
    lw: int
    patch: int = 2

    def __post_init__(self):
        if self.lt < 1 or self.lh < 1 or self.lw < 1:
            raise ValueError("latent dims must be >= 1")
        if self.lh % self.patch or self.lw % self.patch:
            raise ValueError("lh/lw must be divisible by patch")

    @property
    def grid(self) -> tuple[int, int, int]:
        """Token grid (t, h, w) after patching."""
        return (self.lt, self.lh // self.patch, self.lw // self.patch)

    @property
    def n_tokens(self) -> int:
        t, h, w = self.grid
        return t * h * w


def latent_token_count(
    frames: int,
    height: int,
    width: int,
    modality: str = "video",
    patch: int = 2,
) -> tuple[LatentShape, int]:
    """Latent shape and token count of a pixel-space clip or image.

    Temporal length keeps the first frame and strides by 4 thereafter:
    lt = (T-1)//4 + 1, so an image (T=1) and a one-frame video agree.
    """
    if modality not in ("image", "video"):
        raise ValueError(f"unknown modality {modality!r}")
    if frames < 1:
        raise ValueError("frame count must be >= 1")
    if modality == "image" and frames != 1:
        raise ValueError("images must have exactly one frame")
    if height % SPATIAL_STRIDE or width % SPATIAL_STRIDE:
        raise IndivisibleDimensions(
            f"{height}x{width} not divisible by the {SPATIAL_STRIDE}px stride"
        )
    lh = height // SPATIAL_STRIDE
    lw = width // SPATIAL_STRIDE
    if lh % patch or lw % patch:
        raise IndivisibleDimensions(
            f"latent {lh}x{lw} not divisible by patch {patch}"
        )
    lt = 1 if modality == "image" else (frames - 1) // TEMPORAL_STRIDE + 1
    shape = LatentShape(lt=lt, lh=lh, lw=lw, patch=patch)
    return shape, shape.n_tokens


@dataclass(frozen=True)
class TokenSequence:
    clip_id: str
    shape: LatentShape
    modality: str

    @property
    def n_tokens(self) -> int:
        return self.shape.n_tokens

    def coords(self) -> np.ndarray:
        """Per-token (t, h, w) grid coordinates, row-major with t outermost."""
        t, h, w = self.shape.grid
        tt, hh, ww = np.meshgrid(
            np.arange(t), np.arange(h), np.arange(w), indexing="ij"
        )
        return np.stack([tt.reshape(-1), hh.reshape(-1), ww.reshape(-1)], axis=1)


@dataclass(frozen=True)
class Segment:
    sequence: TokenSequence
    offset: int


@dataclass
class PackedBatch:
    max_len: int
    segments: list[Segment]

    @property
    def used(self) -> int:
        return sum(s.sequence.n_tokens for s in self.segments)

    @property
    def occupancy(self) -> float:
        return self.used / self.max_len

    def segment_ids(self) -> np.ndarray:
        """Per-token segment index (attention-mask source); -1 is padding."""
        ids = np.full(self.max_len, -1, dtype=np.int32)
        for i, seg in enumerate(self.segments):
            ids[seg.offset : seg.offset + seg.sequence.n_tokens] = i
        return ids


def pack_sequences(
    seqs: list[TokenSequence], max_len: int
) -> list[PackedBatch]:
    """First-fit-decreasing packing into batches of at most max_len tokens.

    Sequences sort by token count descending (ties by clip_id ascending);
    each goes into the first batch with room, else opens a new batch.
    Batches come back in creation order with contiguous segments from
    offset 0.
    """
    for seq in seqs:
        if seq.n_tokens > max_len:
            raise SequenceTooLong(
                f"{seq.clip_id}: {seq.n_tokens} tokens > max_len {max_len}"
            )
    ordered = sorted(seqs, key=lambda s: (-s.n_tokens, s.clip_id))
    batches: list[PackedBatch] = []
    # remaining capacity per open batch; vectorized first-fit scan
    remaining = np.empty(len(ordered), dtype=np.int64)
    n_open = 0
    for seq in ordered:
        need = seq.n_tokens
        fits = remaining[:n_open] >= need
        if fits.any():
            i = int(np.argmax(fits))
            batches[i].segments.append(Segment(seq, max_len - int(remaining[i])))
            remaining[i] -= need
        else:
            batches.append(PackedBatch(max_len=max_len, segments=[Segment(seq, 0)]))
            remaining[n_open] = max_len - need
            n_open += 1
    return batches


# --- rotary phases -----------------------------------------------------------


def rope_axis_groups(head_dim: int) -> tuple[int, int, int]:
    """Channel split (t, h, w) = (d/4, 3d/8, 3d/8); every group must be even."""
    if head_dim % 8:
        raise IndivisibleHeadDim(f"head_dim {head_dim} not divisible by 8")
    groups = (head_dim // 4, 3 * head_dim // 8, 3 * head_dim // 8)
    if any(g % 2 for g in groups):
        # 3d/8 is odd when d == 8 (mod 16); phase pairs need even groups
        raise IndivisibleHeadDim(
            f"head_dim {head_dim} splits into odd axis groups {groups}"
        )
    return groups


def rope_phases(
    coords: tuple[int, int, int], head_dim: int, base: float = 10000.0
) -> np.ndarray:
    """Rotation phases (length head_dim/2) for a token at (t, h, w).

    Within each axis group of size g, pair j rotates by
    coordinate * base^(-2j/g). Phases are linear in each coordinate, which
    is what makes attention depend only on coordinate differences once the
    consumer applies the rotations.
    """
    groups = rope_axis_groups(head_dim)
    parts = []
    for coord, g in zip(coords, groups):
        j = np.arange(g // 2, dtype=np.float64)
        freqs = base ** (-2.0 * j / g)
        parts.append(coord * freqs)
    return np.concatenate(parts)


# --- flow samples ------------------------------------------------------------


@dataclass(frozen=True)
class FlowSample:
    t: float
    x0: np.ndarray
    x1: np.ndarray
    xt: np.ndarray
    v: np.ndarray


def make_flow_sample(x1: np.ndarray, t: float, rng_seed: int) -> FlowSample:
    """Linear noise-to-data interpolation sample with its velocity target.

    x0 is i.i.d. standard normal from the seeded deterministic stream;
    xt = t*x1 + (1-t)*x0 and v = x1 - x0 elementwise, so xt equals x0 at
    t=0 and x1 at t=1 exactly.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must be in [0, 1]")
    x1 = np.asarray(x1, dtype=np.float64)
    if not np.all(np.isfinite(x1)):
        raise NonFiniteInput("data tensor contains NaN/inf")
    x0 = SplitMix64(rng_seed).gauss_array(x1.size).reshape(x1.shape)
    xt = t * x1 + (1.0 - t) * x0
    v = x1 - x0
    return FlowSample(t=t, x0=x0, x1=x1, xt=xt, v=v)


def synthetic_latent(clip_id: str, n_tokens: int, latent_dim: int, seed: int) -> np.ndarray:
    """Seeded pseudo-data standing in for real autoencoder latents."""
    from .rng import derive_seed

    rng = SplitMix64(derive_seed(seed, "latent", clip_id))
    return rng.gauss_array(n_tokens * latent_dim).reshape(n_tokens, latent_dim)


# --- binary sidecar ----------------------------------------------------------

FLOW_MAGIC = b"CFSB"
FLOW_VERSION = 1
_DTYPE_F32 = 1


def write_flow_sidecar(path: str, array: np.ndarray) -> None:
    """Write a float32 little-endian tensor with a self-describing header:
    magic, u32 version, u32 dtype tag, u32 ndim, u64 dims, row-major payload."""
    data = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(struct.pack("<II", FLOW_VERSION, _DTYPE_F32))
        fh.write(struct.pack("<I", data.ndim))
        fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        fh.write(data.tobytes())


def read_flow_sidecar(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != FLOW_MAGIC:
            raise ValueError("bad flow sidecar magic")
        version, dtype_tag = struct.unpack("<II", fh.read(8))
        if version != FLOW_VERSION or dtype_tag != _DTYPE_F32:
            raise ValueError(f"unsupported sidecar version/dtype {version}/{dtype_tag}")
        ndim = struct.unpack("<I", fh.read(4))[0]
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        payload = fh.read()
    return np.frombuffer(payload, dtype="<f4").reshape(shape)
