"""End-to-end pipeline: ingest -> prefilter -> clip extraction/scoring/
filtering -> captioning -> balancing -> packing, over a persistent manifest.

Work is source-parallel: every source runs its stages in one worker task,
results re-sorted by path before each atomic manifest commit, which makes
output independent of worker count and scheduling. Per-source failures are
recorded, never fatal; only config/IO-root problems abort a run.
"""

from __future__ import annotations

import atexit
import hashlib
import json
import logging
import os
import shlex
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .balance import (
    DistributionSpec,
    TaxonomyTag,
    sample_balanced,
    plan_balance,
    tally_distribution,
    validate_tag,
)
from .captions import CaptionParts, compose_caption
from .clipper import Clip, detect_shots, dedup_clips, refine_clips, shots_to_clips
from .config import PipelineConfig
from .errors import ConfigError, CurateError, MediaParseError
from .manifest import Manifest, SourceRecord, save_manifest, load_manifest
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
    TokenSequence,
    latent_token_count,
    make_flow_sample,
    pack_sequences,
    synthetic_latent,
    write_flow_sidecar,
)
from .prefilter import PrefilterVerdict, Reason, evaluate_prefilter
from .rng import SplitMix64, derive_seed
from .scoring import (
    ScoreSet,
    aesthetic_proxy,
    frame_similarity,
    motion_score,
    ocr_coverage_proxy,
    phash64,
    proxy_embedding,
)
from .sidecar import FrameSpool, SidecarClient
from .tiers import Tier, route_and_filter

log = logging.getLogger("curate")

VIDEO_EXTENSIONS = {".y4m", ".mp4"}
IMAGE_EXTENSIONS = {".ppm", ".pgm"}

# per-worker-process plugin clients, created lazily after fork; keyed by
# pid so a forked child never reuses its parent's pipe pair
_clients: dict[str, SidecarClient] = {}
_clients_pid: int | None = None
_spool: FrameSpool | None = None


def _reset_process_state() -> None:
    global _clients, _clients_pid, _spool
    if _clients_pid == os.getpid():
        # only ever close clients this process created; fork children drop
        # inherited handles without touching the parent's processes
        for client in _clients.values():
            client.close()
    _clients = {}
    _clients_pid = None
    if _spool is not None:
        _spool.cleanup()
        _spool = None


@dataclass
class RunStats:
    executed: dict = field(default_factory=dict)
    reused: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    errors: int = 0

    def bump(self, table: str, stage: str, n: int = 1) -> None:
        d = getattr(self, table)
        d[stage] = d.get(stage, 0) + n


@dataclass
class RunResult:
    manifest: Manifest
    manifest_path: str
    stats: RunStats
    exit_code: int


# --- input discovery ----------------------------------------------------------


def discover_inputs(input_path: str | Path) -> list[dict]:
    """Input entries {path, tags?, caption_parts?} from a directory or a
    .jsonl input manifest."""
    input_path = Path(input_path)
    if input_path.is_dir():
        paths = sorted(
            p
            for p in input_path.iterdir()
            if p.suffix.lower() in VIDEO_EXTENSIONS | IMAGE_EXTENSIONS
        )
        return [{"path": str(p)} for p in paths]
    if input_path.is_file():
        entries = []
        with open(input_path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ConfigError(
                        f"input manifest {input_path}:{lineno}: {exc}"
                    ) from exc
        for e in entries:
            if "path" not in e:
                raise ConfigError("input manifest entries need a 'path' field")
        return sorted(entries, key=lambda e: e["path"])
    raise ConfigError(f"input {input_path} is neither a directory nor a file")


# --- external scorer helpers ----------------------------------------------------


def _client(task: str, config: PipelineConfig) -> SidecarClient | None:
    global _clients, _clients_pid
    spec = getattr(config.scorers, task)
    if spec.kind != "external":
        return None
    if _clients_pid != os.getpid():
        # fresh process (or fork child holding inherited handles): start over
        _clients = {}
        _clients_pid = os.getpid()
        atexit.register(_reset_process_state)
    if task not in _clients:
        _clients[task] = SidecarClient(spec)
    return _clients[task]


def _spool_frames(frames: list[FrameBuffer]) -> list[str]:
    global _spool
    if _spool is None:
        _spool = FrameSpool()
        atexit.register(_reset_process_state)
    return _spool.write(frames)


def _as_rgb24(frame: FrameBuffer) -> FrameBuffer:
    if frame.format is PixelFormat.RGB24:
        return frame
    return FrameBuffer(
        width=frame.width,
        height=frame.height,
        format=PixelFormat.RGB24,
        data=frame.rgb().tobytes(),
        timestamp=frame.timestamp,
    )


def _clip_aesthetic(keyframes: list[FrameBuffer], config: PipelineConfig) -> float:
    client = _client("aesthetic", config)
    if client is not None:
        response = client.request("aesthetic", _spool_frames(keyframes))
        return float(np.mean(response["scores"]))
    return float(np.mean([aesthetic_proxy(_as_rgb24(f)) for f in keyframes]))


def _clip_ocr(keyframes: list[FrameBuffer], config: PipelineConfig) -> float:
    client = _client("ocr", config)
    if client is not None:
        worst = 0.0
        for frame, path in zip(keyframes, _spool_frames(keyframes)):
            response = client.request("ocr", [path])
            for x, y, w, h in response.get("boxes", []):
                worst = max(worst, (w * h) / (frame.width * frame.height))
        return min(worst, 1.0)
    return max(ocr_coverage_proxy(f) for f in keyframes)


def _embedder(config: PipelineConfig):
    client = _client("embed", config)
    if client is None:
        return proxy_embedding

    def embed(frame: FrameBuffer) -> np.ndarray:
        response = client.request("embed", _spool_frames([frame]))
        return np.asarray(response["embedding"], dtype=np.float64)

    return embed


def _clip_motion(
    samples: list[FrameBuffer], rate: float, config: PipelineConfig
) -> float:
    if len(samples) < 2:
        return 0.0
    client = _client("motion", config)
    if client is not None:
        response = client.request(
            "motion", _spool_frames(samples), params={"sample_rate": rate}
        )
        return float(response["scores"][0])
    return motion_score(samples, rate)


def _classify(keyframes: list[FrameBuffer], config: PipelineConfig) -> list[dict]:
    client = _client("classify", config)
    if client is None:
        return []
    picked = _even_pick(keyframes, 4)
    response = client.request("classify", _spool_frames(picked))
    primary, _, sub = response.get("text", "").partition("/")
    if primary and sub:
        return [{"primary": primary, "sub": sub}]
    return []


def _caption_clip(
    clip_dict: dict,
    keyframes: list[FrameBuffer],
    motion: float | None,
    config: PipelineConfig,
) -> dict:
    client = _client("caption", config)
    if client is not None:
        paths = _spool_frames(keyframes)
        task = "caption_image" if clip_dict["kind"] == "image" else "caption_video"
        kf_caps = []
        if task == "caption_video":
            kf_caps = [
                client.request("caption_image", [p])["text"] for p in paths[:2]
            ]
        main = client.request(task, paths)["text"]
        parts = CaptionParts(keyframe_captions=tuple(kf_caps), video_caption=main)
        merged = client.request(
            "caption_merge", [], params=parts.to_dict()
        )["text"]
        caption = compose_caption(parts, motion=motion, merger=lambda _p: merged)
        return caption.to_dict()
    # built-in stub: a deterministic description of measurable attributes
    if clip_dict["kind"] == "image":
        text = f"still image, {clip_dict['width']}x{clip_dict['height']}"
    else:
        seconds = clip_dict["frame_count"] / (
            clip_dict["fps"][0] / clip_dict["fps"][1]
        )
        text = (
            f"video clip, {clip_dict['width']}x{clip_dict['height']}, "
            f"{seconds:.1f} s"
        )
    return compose_caption(CaptionParts(video_caption=text), motion=motion).to_dict()


def _even_pick(items: list, k: int) -> list:
    if len(items) <= k:
        return list(items)
    idx = np.linspace(0, len(items) - 1, k).round().astype(int)
    return [items[i] for i in idx]


def _valid_tags(tags: list, config: PipelineConfig) -> list:
    """Drop tags whose subcategory is not in the configured taxonomy."""
    taxonomy = config.balance.taxonomy
    if not taxonomy:
        return list(tags)
    kept = []
    for tag in tags:
        if validate_tag(taxonomy, TaxonomyTag.from_dict(tag)):
            kept.append(tag)
        else:
            log.warning("dropping tag outside taxonomy: %s", tag)
    return kept


# --- per-source worker ----------------------------------------------------------


def _decode_source(path: str, config: PipelineConfig) -> tuple[VideoMeta, list[FrameBuffer]]:
    suffix = Path(path).suffix.lower()
    if suffix == ".y4m":
        return decode_y4m(Path(path).read_bytes(), source_path=path)
    if suffix == ".mp4":
        if not config.decoder_command:
            raise CurateError(
                "mp4 sources need a decoder_command producing Y4M on stdout"
            )
        cmd = [
            part.replace("{input}", path)
            for part in shlex.split(config.decoder_command)
        ]
        proc = subprocess.run(cmd, capture_output=True, check=False)
        if proc.returncode != 0:
            raise CurateError(
                f"decoder exited {proc.returncode}: {proc.stderr[:200]!r}"
            )
        return decode_y4m(proc.stdout, source_path=path)
    raise CurateError(f"unsupported video container {suffix!r}")


def process_source(entry: dict, config: PipelineConfig) -> dict:
    """Full per-source pass: ingest, prefilter, clip/score/filter/caption.

    Returns a manifest source-record dict; any failure lands in 'error'
    instead of raising so one bad file never kills the run.
    """
    path = entry["path"]
    record = SourceRecord(source_path=path)
    record.pre_tags = _valid_tags(entry.get("tags", []), config)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        record.error = f"unreadable: {exc}"
        record.stages["ingest"] = "error"
        return record.to_dict()
    record.content_hash = hashlib.sha256(data).hexdigest()

    suffix = Path(path).suffix.lower()
    record.kind = "image" if suffix in IMAGE_EXTENSIONS else "video"
    try:
        if record.kind == "image":
            frame = load_ppm(data)
            meta = VideoMeta(
                duration=Fraction(0),
                width=frame.width,
                height=frame.height,
                bitrate=0,
                fps=Fraction(0),
                codec_tag="ppm",
                source_path=path,
            )
        elif suffix == ".y4m":
            meta, _ = decode_y4m(data, source_path=path)
        else:
            meta = parse_mp4_metadata(data, source_path=path)
    except (MediaParseError, ValueError) as exc:
        record.error = f"parse: {exc}"
        record.stages["ingest"] = "error"
        return record.to_dict()
    record.meta = meta.to_dict()
    record.stages["ingest"] = "done"

    # prefilter: container attributes for video, dimensions only for stills
    if record.kind == "image":
        small = min(meta.width, meta.height) < config.prefilter.min_dimension
        verdict = PrefilterVerdict(
            accepted=not small,
            reasons=frozenset({Reason.TOO_SMALL}) if small else frozenset(),
        )
    else:
        verdict = evaluate_prefilter(meta, config.prefilter)
    record.prefilter = verdict.to_dict()
    record.stages["prefilter"] = "done"
    if not verdict.accepted:
        return record.to_dict()

    try:
        if record.kind == "image":
            record.clips = _process_image(path, data, meta, record.pre_tags, config)
        else:
            record.clips = _process_video(path, record.pre_tags, config, data)
        record.stages["clip"] = "done"
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as exc:  # per-source isolation: record, never abort
        record.error = f"clip: {exc}"
        record.stages["clip"] = "error"
    return record.to_dict()


def _score_video_clip(
    clip: Clip,
    frames: list[FrameBuffer],
    config: PipelineConfig,
) -> tuple[ScoreSet, list[int]]:
    keyframes = [frames[i] for i in clip.keyframe_indices]
    rate = config.clipper.sample_rate
    rel = sample_frames(
        frames[clip.start_frame : clip.end_frame], clip.fps, rate
    )
    samples = [f for _, f in rel]

    aesthetic = _clip_aesthetic(keyframes, config)
    ocr = _clip_ocr(keyframes, config)
    motion = _clip_motion(samples, rate, config)

    min_sim = 1.0
    if len(samples) >= 2:
        embed = _embedder(config)
        embeddings = [embed(f) for f in samples]
        for a, b in zip(embeddings, embeddings[1:]):
            try:
                min_sim = min(min_sim, frame_similarity(a, b))
            except CurateError:
                pass  # flat frames embed to zero vectors; treat as identical
    scores = ScoreSet(
        aesthetic=min(max(aesthetic, 0.0), 10.0),
        min_adjacent_similarity=min_sim,
        ocr_coverage=min(max(ocr, 0.0), 1.0),
        motion=max(motion, 0.0),
    )
    hashes = [phash64(f) for f in keyframes]
    return scores, hashes


def _refine_threshold(meta: VideoMeta, tiers: tuple[Tier, ...]) -> float:
    matched = [t for t in tiers if t.matches_dims(meta.width, meta.height)]
    if matched:
        return max(matched, key=lambda t: sorted(t.min_dims)).sim_floor
    return min(tiers, key=lambda t: sorted(t.min_dims)).sim_floor


def _process_video(
    path: str,
    pre_tags: list,
    config: PipelineConfig,
    raw: bytes,
) -> list[dict]:
    if Path(path).suffix.lower() == ".y4m":
        meta, frames = decode_y4m(raw, source_path=path)
    else:
        meta, frames = _decode_source(path, config)
    if not frames:
        raise CurateError("no frames decoded")

    boundaries = detect_shots(frames, config.clipper.shot_threshold)
    coarse = shots_to_clips(path, len(frames), meta.fps, boundaries)
    sim_floor = _refine_threshold(meta, config.tiers)
    embed = _embedder(config)

    refined: list[Clip] = []
    for clip in coarse:
        rel = sample_frames(
            frames[clip.start_frame : clip.end_frame],
            clip.fps,
            config.clipper.sample_rate,
        )
        sampled = [(clip.start_frame + i, f) for i, f in rel]
        refined.extend(
            refine_clips(
                clip,
                sampled,
                embed,
                sim_floor,
                max_clip_seconds=config.clipper.max_clip_seconds,
                min_clip_seconds=config.clipper.min_clip_seconds,
            )
        )

    scored: list[Clip] = []
    hash_table: dict[str, list[int]] = {}
    for clip in refined:
        scores, hashes = _score_video_clip(clip, frames, config)
        scored.append(
            Clip(
                clip_id=clip.clip_id,
                source=clip.source,
                start_frame=clip.start_frame,
                end_frame=clip.end_frame,
                fps=clip.fps,
                keyframe_indices=clip.keyframe_indices,
                scores=scores,
            )
        )
        hash_table[clip.clip_id] = hashes

    survivors = dedup_clips(scored, hash_table, config.clipper.dedup_max_hamming)
    survivor_ids = {c.clip_id for c in survivors}

    out = []
    for clip in scored:
        clip_dict = {
            "clip_id": clip.clip_id,
            "kind": "video",
            "start_frame": clip.start_frame,
            "end_frame": clip.end_frame,
            "frame_count": clip.frame_count,
            "fps": [clip.fps.numerator, clip.fps.denominator],
            "width": meta.width,
            "height": meta.height,
            "keyframes": list(clip.keyframe_indices),
            "keyframe_hashes": [f"{h:016x}" for h in hash_table[clip.clip_id]],
            "scores": clip.scores.to_dict(),
            "dedup_dropped": clip.clip_id not in survivor_ids,
            "filter": None,
            "caption": None,
            "tags": list(pre_tags),
        }
        if clip_dict["dedup_dropped"]:
            out.append(clip_dict)
            continue
        report = route_and_filter(
            clip.clip_id, meta.width, meta.height, clip.scores, list(config.tiers)
        )
        clip_dict["filter"] = report.to_dict()
        if report.accepted:
            keyframes = [frames[i] for i in clip.keyframe_indices]
            if not clip_dict["tags"]:
                clip_dict["tags"] = _valid_tags(_classify(keyframes, config), config)
            if config.captioning.enabled:
                clip_dict["caption"] = _caption_clip(
                    clip_dict, keyframes, clip.scores.motion, config
                )
        out.append(clip_dict)
    return out


def _process_image(
    path: str,
    data: bytes,
    meta: VideoMeta,
    pre_tags: list,
    config: PipelineConfig,
) -> list[dict]:
    frame = load_ppm(data)
    rgb = _as_rgb24(frame)
    aesthetic = _clip_aesthetic([rgb], config)
    ocr = _clip_ocr([rgb], config)
    scores = ScoreSet(
        aesthetic=min(max(aesthetic, 0.0), 10.0),
        min_adjacent_similarity=1.0,
        ocr_coverage=min(max(ocr, 0.0), 1.0),
        motion=0.0,
    )
    from .clipper import make_clip_id

    clip_id = make_clip_id(path, 0, 1)
    clip_dict = {
        "clip_id": clip_id,
        "kind": "image",
        "start_frame": 0,
        "end_frame": 1,
        "frame_count": 1,
        "fps": [1, 1],
        "width": meta.width,
        "height": meta.height,
        "keyframes": [0],
        "keyframe_hashes": [f"{phash64(frame):016x}"],
        "scores": scores.to_dict(),
        "dedup_dropped": False,
        "filter": None,
        "caption": None,
        "tags": list(pre_tags),
    }
    report = route_and_filter(
        clip_id,
        meta.width,
        meta.height,
        scores,
        list(config.tiers),
        check_similarity=False,
        check_motion=False,
    )
    clip_dict["filter"] = report.to_dict()
    if report.accepted:
        if not clip_dict["tags"]:
            clip_dict["tags"] = _valid_tags(_classify([rgb], config), config)
        if config.captioning.enabled:
            clip_dict["caption"] = _caption_clip(clip_dict, [rgb], None, config)
    return [clip_dict]


# --- corpus-level stages ----------------------------------------------------------


def accepted_clips(manifest: Manifest) -> list[dict]:
    out = []
    for record in manifest.ordered_sources():
        for clip in record.clips:
            if clip.get("filter") and clip["filter"].get("tier"):
                out.append(clip)
    return out


def _clip_from_dict(d: dict) -> Clip:
    return Clip(
        clip_id=d["clip_id"],
        source=d["clip_id"].split(":")[0],
        start_frame=d["start_frame"],
        end_frame=d["end_frame"],
        fps=Fraction(*d["fps"]),
        tags=tuple(TaxonomyTag.from_dict(t) for t in d.get("tags", [])),
    )


def run_balance_stage(manifest: Manifest, config: PipelineConfig) -> dict:
    clips = accepted_clips(manifest)
    objs = [_clip_from_dict(c) for c in clips]
    counts = tally_distribution(objs)
    if not counts:
        return {"counts_before": {}, "plan": {}, "entries": []}
    budget = config.balance.budget or len(objs)
    weights = dict(config.balance.target_weights) or {k: 1.0 for k in counts}
    spec = DistributionSpec(
        target_weights=weights,
        budget=budget,
        max_oversample=config.balance.max_oversample,
    )
    plan = plan_balance(counts, spec)
    entries = sample_balanced(objs, plan, config.seed)
    return {
        "counts_before": counts,
        "plan": plan,
        "entries": [
            {
                "clip_id": e.clip.clip_id,
                "ordinal": e.ordinal,
                "subcategory": e.clip.tags[0].key if e.clip.tags else "untagged",
            }
            for e in entries
        ],
    }


def _packable_dims(width: int, height: int, patch: int) -> tuple[int, int]:
    unit = 8 * patch
    return (width // unit) * unit, (height // unit) * unit


def run_pack_stage(
    manifest: Manifest, config: PipelineConfig, output_dir: Path
) -> dict:
    clips = {c["clip_id"]: c for c in accepted_clips(manifest)}
    if manifest.balance is not None and config.balance.enabled:
        chosen = [
            (e["clip_id"], e["ordinal"]) for e in manifest.balance["entries"]
        ]
    else:
        chosen = [(cid, 0) for cid in sorted(clips)]

    sequences: list[TokenSequence] = []
    errors: list[dict] = []
    for clip_id, ordinal in chosen:
        clip = clips[clip_id]
        w, h = _packable_dims(clip["width"], clip["height"], config.pack.patch)
        if w == 0 or h == 0:
            errors.append({"clip_id": clip_id, "error": "too small to patch"})
            continue
        modality = "image" if clip["kind"] == "image" else "video"
        try:
            shape, n_tokens = latent_token_count(
                clip["frame_count"], h, w, modality=modality, patch=config.pack.patch
            )
        except CurateError as exc:
            errors.append({"clip_id": clip_id, "error": str(exc)})
            continue
        if n_tokens > config.pack.max_len:
            errors.append(
                {
                    "clip_id": clip_id,
                    "error": f"{n_tokens} tokens exceed max_len {config.pack.max_len}",
                }
            )
            continue
        sequences.append(TokenSequence(clip_id, shape, modality))

    batches = pack_sequences(sequences, config.pack.max_len)

    batch_docs = []
    for bi, batch in enumerate(batches):
        segments = []
        for seg in batch.segments:
            shape = seg.sequence.shape
            segments.append(
                {
                    "clip_id": seg.sequence.clip_id,
                    "offset": seg.offset,
                    "n_tokens": seg.sequence.n_tokens,
                    "modality": seg.sequence.modality,
                    "shape": [shape.lt, shape.lh, shape.lw, shape.patch],
                }
            )
        doc = {"index": bi, "occupancy": batch.occupancy, "segments": segments}
        if config.pack.emit_flow:
            doc["flow_file"] = f"flow-{bi:05d}.bin"
            doc["flow_t"] = []
            payload = np.zeros((2, batch.used, config.pack.latent_dim), dtype=np.float64)
            for seg in batch.segments:
                key = f"{seg.sequence.clip_id}@{bi}:{seg.offset}"
                x1 = synthetic_latent(
                    seg.sequence.clip_id,
                    seg.sequence.n_tokens,
                    config.pack.latent_dim,
                    config.seed,
                )
                t = SplitMix64(derive_seed(config.seed, "flow_t", key)).next_float()
                sample = make_flow_sample(
                    x1, t, derive_seed(config.seed, "flow_x0", key)
                )
                sl = slice(seg.offset, seg.offset + seg.sequence.n_tokens)
                payload[0, sl] = sample.xt
                payload[1, sl] = sample.v
                doc["flow_t"].append(t)
            write_flow_sidecar(str(output_dir / doc["flow_file"]), payload)
        batch_docs.append(doc)

    occupancies = [b["occupancy"] for b in batch_docs]
    pack_doc = {
        "max_len": config.pack.max_len,
        "n_sequences": len(sequences),
        "n_batches": len(batch_docs),
        "mean_occupancy": float(np.mean(occupancies)) if occupancies else 0.0,
        "occupancies": occupancies,
        "errors": errors,
        "batch_file": "batches.json",
    }
    batch_path = output_dir / "batches.json"
    batch_path.write_text(
        json.dumps(
            {"max_len": config.pack.max_len, "batches": batch_docs},
            sort_keys=True,
            separators=(",", ":"),
        )
        + "\n"
    )
    return pack_doc


# --- orchestration ------------------------------------------------------------


def _pool_map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


def run_pipeline(
    config: PipelineConfig,
    input_path: str | Path,
    output_dir: str | Path,
    resume: bool = False,
) -> RunResult:
    """Run every stage over the corpus; returns the committed manifest.

    With resume=True, sources whose content hash matches a previous run
    under the same config hash are not re-processed; corpus-level stages
    re-run only when any source changed or their records are missing.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = output_dir / "manifest.jsonl"
    stats = RunStats()

    entries = discover_inputs(input_path)
    config_hash = config.config_hash()

    previous: Manifest | None = None
    if resume and manifest_path.exists():
        try:
            candidate = load_manifest(manifest_path)
            if candidate.config_hash == config_hash:
                previous = candidate
            else:
                log.info("config changed; previous manifest invalidated")
        except CurateError as exc:
            log.warning("ignoring unreadable previous manifest: %s", exc)

    manifest = Manifest(config_hash=config_hash, seed=config.seed)

    try:
        # decide per source: reuse or recompute (content hash gates reuse)
        t0 = time.monotonic()
        todo: list[dict] = []
        any_changed = False
        for entry in entries:
            path = entry["path"]
            prev = previous.sources.get(path) if previous else None
            if prev is not None and prev.stage_done("ingest") and prev.error is None:
                try:
                    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
                except OSError:
                    digest = None
                if digest == prev.content_hash:
                    manifest.sources[path] = prev
                    stats.bump("reused", "source")
                    continue
            todo.append(entry)
            any_changed = True
        if previous is not None and set(previous.sources) != {e["path"] for e in entries}:
            any_changed = True  # removed sources also invalidate corpus stages

        results = _pool_map(process_source, [(e, config) for e in todo], config.workers)
        for record_dict in results:
            record = SourceRecord.from_dict(record_dict)
            manifest.sources[record.source_path] = record
            stats.bump("executed", "source")
            if record.error:
                stats.errors += 1
        stats.timings["sources"] = time.monotonic() - t0
        save_manifest(manifest, manifest_path)

        # balance stage
        t0 = time.monotonic()
        if config.balance.enabled:
            if previous is not None and not any_changed and previous.balance is not None:
                manifest.balance = previous.balance
                stats.bump("reused", "balance")
            else:
                manifest.balance = run_balance_stage(manifest, config)
                stats.bump("executed", "balance")
            stats.timings["balance"] = time.monotonic() - t0
            save_manifest(manifest, manifest_path)

        # pack stage
        t0 = time.monotonic()
        if config.pack.enabled:
            batch_file = output_dir / "batches.json"
            if (
                previous is not None
                and not any_changed
                and previous.pack is not None
                and batch_file.exists()
            ):
                manifest.pack = previous.pack
                stats.bump("reused", "pack")
            else:
                manifest.pack = run_pack_stage(manifest, config, output_dir)
                stats.bump("executed", "pack")
            stats.timings["pack"] = time.monotonic() - t0
            save_manifest(manifest, manifest_path)
    finally:
        # plugin processes are reused within a run, not across runs
        _reset_process_state()

    exit_code = 2 if any(r.error for r in manifest.sources.values()) else 0
    return RunResult(
        manifest=manifest,
        manifest_path=str(manifest_path),
        stats=stats,
        exit_code=exit_code,
    )
