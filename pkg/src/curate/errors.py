"""Exception hierarchy for the curation engine.

Every error raised by the engine derives from CurateError so callers can
catch pipeline-level failures with a single except clause while tests can
assert on the specific condition.
"""

from __future__ import annotations


class CurateError(Exception):
    """Base class for all engine errors."""


# --- media parsing ---------------------------------------------------------


class MediaParseError(CurateError):
    """Base class for container/stream parsing failures."""


class TruncatedBox(MediaParseError):
    """Declared ISO-BMFF box size exceeds the remaining bytes."""


class MissingMoov(MediaParseError):
    """No moov box found in the input."""


class NoVideoTrack(MediaParseError):
    """moov present but no track carries video dimensions."""


class ZeroTimescale(MediaParseError):
    """mvhd/mdhd timescale is zero; durations are undefined."""


class BadSignature(MediaParseError):
    """Y4M stream does not start with the YUV4MPEG2 signature."""


class MissingDimension(MediaParseError):
    """Y4M header lacks a W or H token."""


class BadStreamHeader(MediaParseError):
    """Y4M header is present but unusable (bad rate, odd dims, colorspace)."""


class FrameShorterThanPlaneSize(MediaParseError):
    """Y4M FRAME payload truncated before the full YUV420 planes."""


class BadMagic(MediaParseError):
    """PPM/PGM input does not start with P6 or P5."""


class MaxvalUnsupported(MediaParseError):
    """PPM/PGM maxval other than 255."""


class TruncatedPayload(MediaParseError):
    """PPM/PGM pixel payload shorter than width*height*channels."""


# --- scoring ---------------------------------------------------------------


class WrongPixelFormat(CurateError):
    """Scorer received a frame in an unsupported pixel format."""


class ZeroVector(CurateError):
    """Cosine similarity of a zero-length-norm vector is undefined."""


class LengthMismatch(CurateError):
    """Embedding vectors have different lengths."""


class DimensionMismatch(CurateError):
    """Frames in one clip disagree on width/height."""


class DetectorFailure(CurateError):
    """External OCR/score detector failed."""


# --- sidecar protocol ------------------------------------------------------


class SidecarError(CurateError):
    """Base class for external scorer plugin failures."""


class Timeout(SidecarError):
    """Plugin did not answer within the configured timeout."""


class ProtocolError(SidecarError):
    """Plugin broke the JSON-lines protocol or reported ok=false."""


class SpawnFailure(SidecarError):
    """Plugin process could not be started."""


# --- clipper / filters -----------------------------------------------------


class EmbedderFailure(CurateError):
    """Frame embedder raised while refining clips."""


class MissingScore(CurateError):
    """Operation requires a ScoreSet field that is absent."""


# --- captioning ------------------------------------------------------------


class EmptyParts(CurateError):
    """Caption assembly got no non-empty parts."""


# --- balancing -------------------------------------------------------------


class EmptyTaxonomy(CurateError):
    """Balance plan requested with no positive-weight subcategories."""


class PlanMismatch(CurateError):
    """Balance plan references a subcategory absent from the clip set."""


# --- packing ---------------------------------------------------------------


class IndivisibleDimensions(CurateError):
    """Pixel dims not divisible by the latent stride / patch size."""


class SequenceTooLong(CurateError):
    """A token sequence exceeds the packing max length."""


class IndivisibleHeadDim(CurateError):
    """RoPE head dimension cannot be split into even axis groups."""


class NonFiniteInput(CurateError):
    """Flow-sample data tensor contains NaN or infinity."""


# --- pipeline --------------------------------------------------------------


class ConfigError(CurateError):
    """Pipeline configuration is invalid or contains unknown keys."""


class CorruptManifest(CurateError):
    """Manifest file cannot be parsed or fails schema checks."""
