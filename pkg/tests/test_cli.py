"""Command-line interface tests."""

import json

import pytest
import yaml

from curate.cli import main
from fixture_builders import write_corpus_video


@pytest.fixture()
def desk_config_file(tmp_path):
    config = {
        "prefilter": {
            "min_duration": 1.0,
            "min_dimension": 32,
            "min_bitrate": 1000,
            "min_fps": 4.0,
        },
        "clipper": {"min_clip_seconds": 1.0},
        "tiers": [
            {
                "name": "D64",
                "min_dims": [48, 64],
                "sim_floor": -1.0,
                "aesthetic_floor": 0.0,
                "ocr_ceiling": 1.0,
                "motion_range": [0.0, 1000.0],
            }
        ],
        "seed": 7,
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config))
    return path


class TestCli:
    def test_validate_config_ok(self, desk_config_file, capsys):
        assert main(["validate-config", str(desk_config_file)]) == 0
        assert "ok:" in capsys.readouterr().out

    def test_validate_config_bad(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("unknown_section: {}\n")
        assert main(["validate-config", str(bad)]) == 1

    def test_run_report_pack_cycle(self, tmp_path, desk_config_file, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        write_corpus_video(corpus / "a.y4m", [16, 24], seed=1)
        write_corpus_video(corpus / "b.y4m", [32], seed=2)
        out = tmp_path / "out"

        code = main(
            [
                "run",
                "--config",
                str(desk_config_file),
                "--input",
                str(corpus),
                "--output",
                str(out),
                "--workers",
                "1",
                "--seed",
                "7",
            ]
        )
        assert code == 0
        manifest_path = capsys.readouterr().out.strip()
        assert manifest_path.endswith("manifest.jsonl")

        assert main(["report", "--manifest", manifest_path, "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["funnel"]["sources_in"] == 2
        assert report["conservation_ok"]

        assert main(["report", "--manifest", manifest_path, "--format", "text"]) == 0
        assert "filter funnel" in capsys.readouterr().out

        assert (
            main(["pack", "--manifest", manifest_path, "--max-len", "512"]) == 0
        )
        batch_path = capsys.readouterr().out.strip()
        batches = json.loads(open(batch_path).read())
        assert batches["max_len"] == 512

    def test_run_exit_code_two_on_item_errors(self, tmp_path, desk_config_file):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        write_corpus_video(corpus / "good.y4m", [16], seed=1)
        (corpus / "broken.y4m").write_bytes(b"garbage")
        code = main(
            [
                "run",
                "--config",
                str(desk_config_file),
                "--input",
                str(corpus),
                "--output",
                str(tmp_path / "out"),
            ]
        )
        assert code == 2

    def test_run_missing_input_is_fatal(self, tmp_path, desk_config_file):
        code = main(
            [
                "run",
                "--config",
                str(desk_config_file),
                "--input",
                str(tmp_path / "nope"),
                "--output",
                str(tmp_path / "out"),
            ]
        )
        assert code == 1

    def test_report_missing_manifest_is_fatal(self, tmp_path):
        assert main(["report", "--manifest", str(tmp_path / "none.jsonl")]) == 1
