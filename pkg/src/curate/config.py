"""Pipeline configuration: dataclass tree, file loading, validation.

Config files are JSON or YAML trees mirroring the dataclass structure.
Unknown keys are rejected rather than ignored so typos fail loudly.
Precedence is CLI flags > config file > defaults. The config hash that
gates manifest reuse covers everything that affects outputs; worker count
deliberately stays out of it because results are worker-independent.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .prefilter import PrefilterConfig
from .sidecar import ScorerSpec
from .tiers import Tier, default_tiers


@dataclass(frozen=True)
class ClipperConfig:
    shot_threshold: float = 0.30
    max_clip_seconds: float = 10.0
    min_clip_seconds: float = 4.0
    dedup_max_hamming: int = 8
    sample_rate: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.shot_threshold <= 2.0:
            raise ConfigError("clipper.shot_threshold must be in (0, 2]")
        if self.max_clip_seconds <= 0 or self.min_clip_seconds <= 0:
            raise ConfigError("clip durations must be positive")
        if not 0 <= self.dedup_max_hamming <= 64:
            raise ConfigError("clipper.dedup_max_hamming must be in [0, 64]")


@dataclass(frozen=True)
class ScorersConfig:
    aesthetic: ScorerSpec = field(default_factory=ScorerSpec)
    embed: ScorerSpec = field(default_factory=ScorerSpec)
    ocr: ScorerSpec = field(default_factory=ScorerSpec)
    motion: ScorerSpec = field(default_factory=ScorerSpec)
    caption: ScorerSpec = field(default_factory=ScorerSpec)
    classify: ScorerSpec = field(default_factory=ScorerSpec)


@dataclass(frozen=True)
class CaptioningConfig:
    enabled: bool = True


@dataclass(frozen=True)
class BalanceConfig:
    enabled: bool = True
    # budget 0 means "use the accepted clip count"
    budget: int = 0
    max_oversample: float = 5.0
    target_weights: dict = field(default_factory=dict)  # empty = uniform
    taxonomy: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PackConfig:
    enabled: bool = True
    max_len: int = 4096
    patch: int = 2
    rope_head_dim: int = 64
    rope_base: float = 10000.0
    latent_dim: int = 8
    emit_flow: bool = False

    def __post_init__(self):
        if self.max_len < 1:
            raise ConfigError("pack.max_len must be >= 1")
        if self.patch < 1:
            raise ConfigError("pack.patch must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    prefilter: PrefilterConfig = field(default_factory=PrefilterConfig)
    clipper: ClipperConfig = field(default_factory=ClipperConfig)
    scorers: ScorersConfig = field(default_factory=ScorersConfig)
    tiers: tuple[Tier, ...] = field(default_factory=lambda: tuple(default_tiers()))
    captioning: CaptioningConfig = field(default_factory=CaptioningConfig)
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    pack: PackConfig = field(default_factory=PackConfig)
    decoder_command: str = ""  # e.g. "ffmpeg -loglevel error -i {input} -f yuv4mpegpipe -"
    workers: int = 1
    seed: int = 0

    def config_hash(self) -> str:
        """Digest of everything output-relevant (worker count excluded)."""
        payload = self.to_dict()
        payload.pop("workers")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "prefilter": dataclasses.asdict(self.prefilter),
            "clipper": dataclasses.asdict(self.clipper),
            "scorers": {
                f.name: getattr(self.scorers, f.name).to_dict()
                for f in fields(ScorersConfig)
            },
            "tiers": [t.to_dict() for t in self.tiers],
            "captioning": dataclasses.asdict(self.captioning),
            "balance": dataclasses.asdict(self.balance),
            "pack": dataclasses.asdict(self.pack),
            "decoder_command": self.decoder_command,
            "workers": self.workers,
            "seed": self.seed,
        }


def _build_section(cls, data: dict, path: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(data) - valid
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under {path!r}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {path!r} section: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    """Validate a raw config tree and build the dataclass form."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    top_fields = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - top_fields
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    kwargs: dict = {}
    if "prefilter" in data:
        kwargs["prefilter"] = _build_section(PrefilterConfig, data["prefilter"], "prefilter")
    if "clipper" in data:
        kwargs["clipper"] = _build_section(ClipperConfig, data["clipper"], "clipper")
    if "scorers" in data:
        specs = {}
        valid_tasks = {f.name for f in fields(ScorersConfig)}
        for task, spec in data["scorers"].items():
            if task not in valid_tasks:
                raise ConfigError(f"unknown scorer task {task!r}")
            try:
                specs[task] = ScorerSpec.from_dict(spec)
            except ValueError as exc:
                raise ConfigError(f"invalid scorer {task!r}: {exc}") from exc
        kwargs["scorers"] = ScorersConfig(**specs)
    if "tiers" in data:
        try:
            kwargs["tiers"] = tuple(Tier.from_dict(t) for t in data["tiers"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid tiers section: {exc}") from exc
    if "captioning" in data:
        kwargs["captioning"] = _build_section(CaptioningConfig, data["captioning"], "captioning")
    if "balance" in data:
        kwargs["balance"] = _build_section(BalanceConfig, data["balance"], "balance")
    if "pack" in data:
        kwargs["pack"] = _build_section(PackConfig, data["pack"], "pack")
    for key in ("decoder_command", "workers", "seed"):
        if key in data:
            kwargs[key] = data[key]
    if not isinstance(kwargs.get("workers", 1), int) or kwargs.get("workers", 1) < 1:
        raise ConfigError("workers must be a positive integer")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    """Load and validate a JSON (.json) or YAML (.yaml/.yml) config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        elif path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        else:
            raise ConfigError(f"unsupported config extension {path.suffix!r}")
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)
