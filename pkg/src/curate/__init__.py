"""Video/image dataset curation and training-batch packing engine."""

from .balance import (
    BalancedClip,
    DistributionSpec,
    TaxonomyTag,
    plan_balance,
    sample_balanced,
    tally_distribution,
)
from .captions import Caption, CaptionParts, compose_caption, strip_motion_suffix
from .clipper import (
    Clip,
    ShotBoundary,
    dedup_clips,
    detect_shots,
    make_clip_id,
    refine_clips,
)
from .config import PipelineConfig, load_config
from .manifest import Manifest, load_manifest, save_manifest
from .media import (
    FrameBuffer,
    PixelFormat,
    VideoMeta,
    decode_y4m,
    load_ppm,
    parse_mp4_metadata,
    sample_frames,
)
from .packing import (
    FlowSample,
    LatentShape,
    PackedBatch,
    TokenSequence,
    latent_token_count,
    make_flow_sample,
    pack_sequences,
    rope_phases,
)
from .pipeline import RunResult, run_pipeline
from .prefilter import PrefilterConfig, PrefilterVerdict, evaluate_prefilter
from .report import emit_report, format_report
from .scoring import (
    ScoreSet,
    aesthetic_proxy,
    frame_similarity,
    hamming_distance,
    motion_score,
    ocr_coverage_proxy,
    phash64,
)
from .sidecar import ScorerSpec, SidecarClient
from .tiers import FilterReport, Tier, default_tiers, route_and_filter

__version__ = "0.1.0"
