"""Media container and frame-stream parsing.

Three input paths feed the pipeline:

* ISO-BMFF (MP4) files, parsed for metadata only -- enough to run the
  basic-attribute prefilter without touching a codec.
* Y4M streams, the uncompressed frame carrier produced by an external
  decoder hook; every frame becomes a YUV420 FrameBuffer.
* Binary PPM/PGM for the still-image path.

All parsers are pure over their input bytes and bounds-checked: a declared
box size is never trusted past the remaining length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    BadSignature,
    BadStreamHeader,
    FrameShorterThanPlaneSize,
    MaxvalUnsupported,
    MissingDimension,
    MissingMoov,
    NoVideoTrack,
    TruncatedBox,
    TruncatedPayload,
    ZeroTimescale,
)


class PixelFormat(Enum):
    GRAY8 = "gray8"
    RGB24 = "rgb24"
    YUV420 = "yuv420"


def plane_size(fmt: PixelFormat, width: int, height: int) -> int:
    """Total byte size of all planes for one frame."""
    if fmt is PixelFormat.GRAY8:
        return width * height
    if fmt is PixelFormat.RGB24:
        return width * height * 3
    # YUV420: full-res luma plus two quarter-res chroma planes
    return width * height + 2 * ((width // 2) * (height // 2))


@dataclass(frozen=True)
class FrameBuffer:
    """One decoded frame. Immutable; safe to share between workers."""

    width: int
    height: int
    format: PixelFormat
    data: bytes
    timestamp: Fraction = Fraction(0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be >= 1")
        if self.format is PixelFormat.YUV420 and (
            self.width % 2 or self.height % 2
        ):
            raise ValueError("YUV420 requires even width and height")
        expected = plane_size(self.format, self.width, self.height)
        if len(self.data) != expected:
            raise ValueError(
                f"frame data length {len(self.data)} != expected {expected}"
            )

    def gray(self) -> np.ndarray:
        """Luminance as float64 (h, w); BT.601 luma for RGB, Y plane for YUV."""
        if self.format is PixelFormat.GRAY8:
            return (
                np.frombuffer(self.data, dtype=np.uint8)
                .reshape(self.height, self.width)
                .astype(np.float64)
            )
        if self.format is PixelFormat.RGB24:
            rgb = np.frombuffer(self.data, dtype=np.uint8).reshape(
                self.height, self.width, 3
            ).astype(np.float64)
            return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
        y = np.frombuffer(self.data[: self.width * self.height], dtype=np.uint8)
        return y.reshape(self.height, self.width).astype(np.float64)

    def rgb(self) -> np.ndarray:
        """Pixels as uint8 (h, w, 3); YUV420 converted via full-range BT.601."""
        if self.format is PixelFormat.RGB24:
            return np.frombuffer(self.data, dtype=np.uint8).reshape(
                self.height, self.width, 3
            )
        if self.format is PixelFormat.GRAY8:
            g = np.frombuffer(self.data, dtype=np.uint8).reshape(
                self.height, self.width
            )
            return np.repeat(g[:, :, None], 3, axis=2)
        w, h = self.width, self.height
        y = np.frombuffer(self.data[: w * h], dtype=np.uint8).reshape(h, w)
        cw, ch = w // 2, h // 2
        u = np.frombuffer(
            self.data[w * h : w * h + cw * ch], dtype=np.uint8
        ).reshape(ch, cw)
        v = np.frombuffer(self.data[w * h + cw * ch :], dtype=np.uint8).reshape(
            ch, cw
        )
        uf = np.repeat(np.repeat(u, 2, axis=0), 2, axis=1).astype(np.float64) - 128.0
        vf = np.repeat(np.repeat(v, 2, axis=0), 2, axis=1).astype(np.float64) - 128.0
        yf = y.astype(np.float64)
        r = yf + 1.402 * vf
        g = yf - 0.344136 * uf - 0.714136 * vf
        b = yf + 1.772 * uf
        out = np.stack([r, g, b], axis=2)
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class VideoMeta:
    """Container-level attributes driving the basic-attribute prefilter.

    duration == 0 or fps == 0 are degenerate markers (empty/unknown); the
    prefilter rejects both, so they never survive past ingestion.
    """

    duration: Fraction
    width: int
    height: int
    bitrate: int
    fps: Fraction
    codec_tag: str = ""
    source_path: str = ""

    def __post_init__(self):
        if self.duration < 0 or self.fps < 0:
            raise ValueError("duration/fps must be >= 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("dimensions must be positive")
        if self.bitrate < 0:
            raise ValueError("bitrate must be >= 0 (0 = unknown)")

    def to_dict(self) -> dict:
        """Exact-rational serialization; round-trips bit-for-bit."""
        return {
            "duration": [self.duration.numerator, self.duration.denominator],
            "width": self.width,
            "height": self.height,
            "bitrate": self.bitrate,
            "fps": [self.fps.numerator, self.fps.denominator],
            "codec_tag": self.codec_tag,
            "source_path": self.source_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VideoMeta":
        return cls(
            duration=Fraction(*d["duration"]),
            width=d["width"],
            height=d["height"],
            bitrate=d["bitrate"],
            fps=Fraction(*d["fps"]),
            codec_tag=d.get("codec_tag", ""),
            source_path=d.get("source_path", ""),
        )


# --- ISO-BMFF metadata ------------------------------------------------------

_VISUAL_ENTRY_FORMATS = {
    b"avc1", b"avc3", b"hvc1", b"hev1", b"mp4v", b"vp08", b"vp09", b"av01",
    b"encv",
}


def _iter_boxes(data: bytes, start: int, end: int) -> Iterator[tuple[bytes, int, int]]:
    """Yield (fourcc, payload_start, payload_end) for boxes in [start, end)."""
    pos = start
    while pos < end:
        if end - pos < 8:
            raise TruncatedBox(f"{end - pos} bytes left, box header needs 8")
        size = struct.unpack_from(">I", data, pos)[0]
        fourcc = data[pos + 4 : pos + 8]
        header = 8
        if size == 1:
            if end - pos < 16:
                raise TruncatedBox("largesize header truncated")
            size = struct.unpack_from(">Q", data, pos + 8)[0]
            header = 16
        elif size == 0:
            size = end - pos  # box extends to the end of the container
        if size < header:
            raise TruncatedBox(f"box size {size} smaller than its header")
        if pos + size > end:
            raise TruncatedBox(
                f"box '{fourcc!r}' declares {size} bytes, {end - pos} remain"
            )
        yield fourcc, pos + header, pos + size
        pos += size


def _find_box(data: bytes, start: int, end: int, fourcc: bytes) -> tuple[int, int] | None:
    for name, s, e in _iter_boxes(data, start, end):
        if name == fourcc:
            return s, e
    return None


def _parse_fullbox_version(data: bytes, start: int) -> int:
    return data[start]


@dataclass
class _TrackInfo:
    tkhd_width: int = 0
    tkhd_height: int = 0
    stsd_format: bytes = b""
    stsd_width: int = 0
    stsd_height: int = 0
    avg_bitrate: int = 0
    sample_count: int = 0
    total_delta: int = 0
    media_timescale: int = 0

    @property
    def is_video(self) -> bool:
        if self.tkhd_width > 0 and self.tkhd_height > 0:
            return True
        return self.stsd_format in _VISUAL_ENTRY_FORMATS and self.stsd_width > 0

    @property
    def width(self) -> int:
        return self.tkhd_width or self.stsd_width

    @property
    def height(self) -> int:
        return self.tkhd_height or self.stsd_height


def _parse_tkhd(data: bytes, start: int, end: int, track: _TrackInfo) -> None:
    version = _parse_fullbox_version(data, start)
    # width/height are the last 8 bytes of tkhd, 16.16 fixed point
    off = start + 4 + (32 if version == 1 else 20) + 8 + 2 + 2 + 2 + 2 + 36
    if off + 8 > end:
        return
    w_fixed, h_fixed = struct.unpack_from(">II", data, off)
    track.tkhd_width = w_fixed >> 16
    track.tkhd_height = h_fixed >> 16


def _parse_stsd(data: bytes, start: int, end: int, track: _TrackInfo) -> None:
    if start + 8 > end:
        return
    entry_count = struct.unpack_from(">I", data, start + 4)[0]
    pos = start + 8
    if entry_count < 1 or pos + 8 > end:
        return
    entry_size = struct.unpack_from(">I", data, pos)[0]
    entry_fmt = data[pos + 4 : pos + 8]
    entry_end = min(pos + entry_size, end)
    track.stsd_format = entry_fmt
    if entry_fmt in _VISUAL_ENTRY_FORMATS and pos + 36 <= entry_end:
        w, h = struct.unpack_from(">HH", data, pos + 32)
        track.stsd_width, track.stsd_height = w, h
    # visual sample entry body is 78 bytes; btrt may follow as a child box
    child_start = pos + 8 + 78
    if child_start < entry_end:
        try:
            found = _find_box(data, child_start, entry_end, b"btrt")
        except TruncatedBox:
            found = None
        if found is not None:
            s, e = found
            if s + 12 <= e:
                track.avg_bitrate = struct.unpack_from(">I", data, s + 8)[0]


def _parse_stts(data: bytes, start: int, end: int, track: _TrackInfo) -> None:
    if start + 8 > end:
        return
    entry_count = struct.unpack_from(">I", data, start + 4)[0]
    pos = start + 8
    count = 0
    delta_total = 0
    for _ in range(entry_count):
        if pos + 8 > end:
            raise TruncatedBox("stts entries truncated")
        n, delta = struct.unpack_from(">II", data, pos)
        count += n
        delta_total += n * delta
        pos += 8
    track.sample_count = count
    track.total_delta = delta_total


def _parse_mdhd(data: bytes, start: int, end: int, track: _TrackInfo) -> None:
    version = _parse_fullbox_version(data, start)
    off = start + 4 + (16 if version == 1 else 8)
    if off + 4 > end:
        return
    track.media_timescale = struct.unpack_from(">I", data, off)[0]


def _parse_trak(data: bytes, start: int, end: int) -> _TrackInfo:
    track = _TrackInfo()
    for name, s, e in _iter_boxes(data, start, end):
        if name == b"tkhd":
            _parse_tkhd(data, s, e, track)
        elif name == b"mdia":
            for mname, ms, me in _iter_boxes(data, s, e):
                if mname == b"mdhd":
                    _parse_mdhd(data, ms, me, track)
                elif mname == b"minf":
                    stbl = _find_box(data, ms, me, b"stbl")
                    if stbl is not None:
                        for sname, ss, se in _iter_boxes(data, stbl[0], stbl[1]):
                            if sname == b"stsd":
                                _parse_stsd(data, ss, se, track)
                            elif sname == b"stts":
                                _parse_stts(data, ss, se, track)
    return track


def parse_mp4_metadata(data: bytes, source_path: str = "") -> VideoMeta:
    """Extract VideoMeta from an ISO-BMFF byte stream without decoding.

    duration comes from mvhd, dimensions from the first video trak's tkhd
    (stsd sample entry as fallback), fps from stts sample counts, bitrate
    from btrt or the whole-file-bytes/duration fallback.
    """
    moov = _find_box(data, 0, len(data), b"moov")
    if moov is None:
        raise MissingMoov("no moov box in input")

    timescale = 0
    duration_units = 0
    tracks: list[_TrackInfo] = []
    for name, s, e in _iter_boxes(data, moov[0], moov[1]):
        if name == b"mvhd":
            version = _parse_fullbox_version(data, s)
            if version == 1:
                timescale = struct.unpack_from(">I", data, s + 4 + 16)[0]
                duration_units = struct.unpack_from(">Q", data, s + 4 + 20)[0]
            else:
                timescale = struct.unpack_from(">I", data, s + 4 + 8)[0]
                duration_units = struct.unpack_from(">I", data, s + 4 + 12)[0]
        elif name == b"trak":
            tracks.append(_parse_trak(data, s, e))

    if timescale == 0:
        raise ZeroTimescale("mvhd timescale is zero")
    video = next((t for t in tracks if t.is_video), None)
    if video is None:
        raise NoVideoTrack("no trak with video dimensions")

    duration = Fraction(duration_units, timescale)
    if video.sample_count > 0 and video.total_delta > 0 and video.media_timescale > 0:
        fps = Fraction(video.sample_count * video.media_timescale, video.total_delta)
    else:
        fps = Fraction(0)  # unknown marker
    if video.avg_bitrate > 0:
        bitrate = video.avg_bitrate
    elif duration > 0:
        bitrate = int(Fraction(len(data) * 8) / duration)
    else:
        bitrate = 0
    codec = video.stsd_format.decode("latin-1") if video.stsd_format else ""
    return VideoMeta(
        duration=duration,
        width=video.width,
        height=video.height,
        bitrate=bitrate,
        fps=fps,
        codec_tag=codec,
        source_path=source_path,
    )


# --- Y4M --------------------------------------------------------------------

_Y4M_SIGNATURE = b"YUV4MPEG2"


def decode_y4m(data: bytes, source_path: str = "") -> tuple[VideoMeta, list[FrameBuffer]]:
    """Parse a Y4M stream into VideoMeta plus YUV420 frames.

    Only the C420 colorspace family is accepted; the external decoder hook
    is expected to emit it. Frame timestamps are exact rationals index/fps.
    """
    if not data.startswith(_Y4M_SIGNATURE):
        raise BadSignature("missing YUV4MPEG2 signature")
    nl = data.find(b"\n")
    if nl < 0:
        raise BadStreamHeader("unterminated stream header")
    header = data[len(_Y4M_SIGNATURE) : nl].decode("latin-1")

    width = height = 0
    fps = Fraction(0)
    for token in header.split():
        tag, rest = token[0], token[1:]
        if tag == "W":
            width = int(rest)
        elif tag == "H":
            height = int(rest)
        elif tag == "F":
            num, _, den = rest.partition(":")
            if int(den or "1") == 0:
                raise BadStreamHeader("zero fps denominator")
            fps = Fraction(int(num), int(den or "1"))
        elif tag == "C":
            if not rest.startswith("420"):
                raise BadStreamHeader(f"unsupported colorspace C{rest}")
        # I (interlacing) and A (aspect) tokens carry no information we use

    if width <= 0 or height <= 0:
        raise MissingDimension("header lacks W or H")
    if width % 2 or height % 2:
        raise BadStreamHeader("YUV420 requires even dimensions")
    if fps <= 0:
        raise BadStreamHeader("header lacks a positive F rate")

    frame_bytes = plane_size(PixelFormat.YUV420, width, height)
    frames: list[FrameBuffer] = []
    pos = nl + 1
    while pos < len(data):
        line_end = data.find(b"\n", pos)
        if line_end < 0:
            raise BadStreamHeader("unterminated FRAME marker")
        marker = data[pos:line_end]
        if not marker.startswith(b"FRAME"):
            raise BadStreamHeader(f"expected FRAME marker, got {marker[:16]!r}")
        payload_start = line_end + 1
        payload_end = payload_start + frame_bytes
        if payload_end > len(data):
            raise FrameShorterThanPlaneSize(
                f"frame {len(frames)} has {len(data) - payload_start} of "
                f"{frame_bytes} bytes"
            )
        frames.append(
            FrameBuffer(
                width=width,
                height=height,
                format=PixelFormat.YUV420,
                data=data[payload_start:payload_end],
                timestamp=Fraction(len(frames)) / fps,
            )
        )
        pos = payload_end

    duration = Fraction(len(frames)) / fps
    # Y4M is uncompressed; the raw data rate stands in for container bitrate
    bitrate = int(Fraction(len(data) * 8) / duration) if duration > 0 else 0
    meta = VideoMeta(
        duration=duration,
        width=width,
        height=height,
        bitrate=bitrate,
        fps=fps,
        codec_tag="y4m",
        source_path=source_path,
    )
    return meta, frames


# --- PPM/PGM ----------------------------------------------------------------


def _ppm_header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ints, honoring # comments."""
    tokens: list[int] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedPayload("header ended before all fields")
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1  # single whitespace byte separates header from payload


def load_ppm(data: bytes) -> FrameBuffer:
    """Load a binary PPM (P6, RGB24) or PGM (P5, Gray8) image."""
    magic = data[:2]
    if magic == b"P6":
        fmt, channels = PixelFormat.RGB24, 3
    elif magic == b"P5":
        fmt, channels = PixelFormat.GRAY8, 1
    else:
        raise BadMagic(f"expected P5/P6, got {magic!r}")
    try:
        (width, height, maxval), payload_start = _ppm_header_tokens(data[2:], 3)
    except ValueError as exc:
        raise BadMagic(f"malformed header: {exc}") from exc
    payload_start += 2
    if maxval != 255:
        raise MaxvalUnsupported(f"maxval {maxval} (only 255 supported)")
    need = width * height * channels
    payload = data[payload_start : payload_start + need]
    if len(payload) < need:
        raise TruncatedPayload(f"{len(payload)} of {need} payload bytes")
    return FrameBuffer(width=width, height=height, format=fmt, data=payload)


def write_ppm(frame: FrameBuffer) -> bytes:
    """Serialize a frame as binary PPM/PGM (sidecar frame spooling)."""
    if frame.format is PixelFormat.RGB24:
        return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.data
    if frame.format is PixelFormat.GRAY8:
        return b"P5\n%d %d\n255\n" % (frame.width, frame.height) + frame.data
    rgb = frame.rgb()
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + rgb.tobytes()


# --- frame sampling ---------------------------------------------------------


def sample_frames(
    frames: Sequence[FrameBuffer],
    fps: Fraction | float,
    rate: Fraction | float = 1,
) -> list[tuple[int, FrameBuffer]]:
    """Pick frames on the `rate` samples/second grid: index floor(k*fps/rate).

    Indices are strictly increasing with duplicates removed, so rate >= fps
    degenerates to every frame exactly once.
    """
    if not frames:
        return []
    fps = Fraction(fps)
    rate = Fraction(rate)
    if fps <= 0 or rate <= 0:
        raise ValueError("fps and rate must be positive")
    out: list[tuple[int, FrameBuffer]] = []
    last = -1
    k = 0
    while True:
        idx = int(k * fps / rate)  # floor for non-negative rationals
        if idx >= len(frames):
            break
        if idx > last:
            out.append((idx, frames[idx]))
            last = idx
        k += 1
    return out
