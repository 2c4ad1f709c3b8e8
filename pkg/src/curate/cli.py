"""Command-line entry points.

    curate run --config cfg.yaml --input corpus/ --output out/ [--workers N]
               [--resume] [--seed S]
    curate report --manifest out/manifest.jsonl --format text|json
    curate validate-config cfg.yaml
    curate pack --manifest out/manifest.jsonl --max-len T [--output dir]

Exit codes: 0 success, 1 fatal config/IO error, 2 completed with
per-item errors recorded in the manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import ConfigError, CurateError
from .manifest import load_manifest, save_manifest
from .pipeline import run_pack_stage, run_pipeline
from .report import emit_report, format_report

log = logging.getLogger("curate")


def _cmd_run(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = dataclasses.replace(config, **overrides)
    result = run_pipeline(
        config, args.input, args.output, resume=args.resume
    )
    stats = result.stats
    log.info(
        "done: %d sources executed, %d reused, %d errors",
        stats.executed.get("source", 0),
        stats.reused.get("source", 0),
        stats.errors,
    )
    for stage, seconds in stats.timings.items():
        log.info("stage %-8s %.2fs", stage, seconds)
    print(result.manifest_path)
    return result.exit_code


def _cmd_report(args) -> int:
    manifest = load_manifest(args.manifest)
    report = emit_report(manifest)
    sys.stdout.write(format_report(report, args.format))
    return 0


def _cmd_validate_config(args) -> int:
    config = load_config(args.config_file)
    print(f"ok: {args.config_file} (hash {config.config_hash()})")
    return 0


def _cmd_pack(args) -> int:
    manifest = load_manifest(args.manifest)
    config = load_config(args.config) if args.config else PipelineConfig()
    config = dataclasses.replace(
        config, pack=dataclasses.replace(config.pack, max_len=args.max_len)
    )
    output_dir = Path(args.output or Path(args.manifest).parent)
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest.pack = run_pack_stage(manifest, config, output_dir)
    save_manifest(manifest, args.manifest)
    print(output_dir / "batches.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curate", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline over a corpus")
    run.add_argument("--config", help="JSON/YAML pipeline config")
    run.add_argument("--input", required=True, help="input directory or .jsonl manifest")
    run.add_argument("--output", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--resume", action="store_true", help="reuse matching previous results")
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(fn=_cmd_run)

    report = sub.add_parser("report", help="summarize a manifest")
    report.add_argument("--manifest", required=True)
    report.add_argument("--format", choices=("json", "text"), default="text")
    report.set_defaults(fn=_cmd_report)

    validate = sub.add_parser("validate-config", help="check a config file")
    validate.add_argument("config_file")
    validate.set_defaults(fn=_cmd_validate_config)

    pack = sub.add_parser("pack", help="re-pack an existing manifest")
    pack.add_argument("--manifest", required=True)
    pack.add_argument("--max-len", type=int, required=True)
    pack.add_argument("--config", help="config for patch/flow settings")
    pack.add_argument("--output", help="directory for batches.json (default: manifest dir)")
    pack.set_defaults(fn=_cmd_pack)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except CurateError as exc:
        log.error("fatal: %s", exc)
        return 1
    except OSError as exc:
        log.error("io error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
