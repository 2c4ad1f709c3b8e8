#!/usr/bin/env python3
"""Generate a synthetic Y4M corpus plus a matching desk-scale config.

The corpus is multi-scene random-texture video with real motion and hard
cuts, sized so the whole pipeline (shot detection, scoring, filtering,
captioning, balancing, packing) runs in seconds on a laptop:

    python3 scripts/make_corpus.py --output demo
    curate run --config demo/config.yaml --input demo/corpus --output demo/out
    curate report --manifest demo/out/manifest.jsonl
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import yaml

BANDS = [(10, 60), (90, 140), (180, 230)]


def motion_scene(width, height, n_frames, seed, lo, hi, step=1):
    rng = np.random.default_rng(seed)
    canvas = rng.integers(lo, hi, size=(height + step * n_frames, width)).astype(np.uint8)
    return [canvas[i * step : i * step + height] for i in range(n_frames)]


def write_y4m(path: Path, frames, fps=(8, 1)) -> None:
    h, w = frames[0].shape
    chroma = bytes([128]) * ((w // 2) * (h // 2)) * 2
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{w} H{h} F{fps[0]}:{fps[1]} Ip A1:1 C420\n".encode())
        for frame in frames:
            fh.write(b"FRAME\n" + frame.tobytes() + chroma)


def desk_config_dict(width: int, height: int) -> dict:
    return {
        "prefilter": {
            "min_duration": 1.0,
            "min_dimension": 32,
            "min_bitrate": 1000,
            "min_fps": 4.0,
        },
        "clipper": {"shot_threshold": 0.30, "min_clip_seconds": 1.0},
        "tiers": [
            {
                "name": "desk",
                "min_dims": [min(width, height) // 2, max(width, height)],
                "sim_floor": -1.0,
                "aesthetic_floor": 0.0,
                "ocr_ceiling": 1.0,
                "motion_range": [0.0, 1000.0],
            }
        ],
        "pack": {"max_len": 4096, "emit_flow": True, "latent_dim": 8},
        "seed": 7,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="demo", help="output root directory")
    parser.add_argument("--sources", type=int, default=10)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--seed", type=int, default=1000)
    args = parser.parse_args()

    root = Path(args.output)
    corpus = root / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    for i in range(args.sources):
        n_scenes = int(rng.integers(1, 4))
        frames = []
        for si in range(n_scenes):
            lo, hi = BANDS[(i + si) % len(BANDS)]
            length = int(rng.integers(16, 90))
            frames.extend(
                motion_scene(args.width, args.height, length, args.seed + i * 101 + si, lo, hi)
            )
        write_y4m(corpus / f"src{i:03d}.y4m", frames)

    config_path = root / "config.yaml"
    config_path.write_text(yaml.safe_dump(desk_config_dict(args.width, args.height)))
    print(f"corpus: {corpus} ({args.sources} sources)")
    print(f"config: {config_path}")
    print(
        f"next:   curate run --config {config_path} --input {corpus} "
        f"--output {root / 'out'}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
