import hashlib
import json
from pathlib import Path

import pytest

from conftest import DATA_DIR
from pcrqa.cli import EXIT_BAD_CONFIG, EXIT_MISSING_INPUT, EXIT_OK, EXIT_STAGE_FAILURE, main
from pcrqa.config import ConfigError, PipelineConfig, load_config

FIXTURE = str(DATA_DIR / "posts_fixture.xml")

FAST = [
    "--rare-tag-theta", "3", "--folds", "4", "--seed", "7",
    "--epochs", "5", "--learning-rate", "0.05", "--embedding-dim", "16",
]


def _hash_artifacts(out_dir: Path) -> dict:
    out = {}
    for path in sorted(out_dir.iterdir()):
        if path.name.endswith(".manifest.json"):
            continue
        out[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


class TestConfig:
    def test_defaults_match_published_settings(self):
        cfg = PipelineConfig()
        assert cfg.necessity_threshold == 4
        assert cfg.rare_tag_theta == 50
        assert cfg.max_len == 300
        assert cfg.prefix_len == 50
        assert cfg.code_len == 150
        assert cfg.learning_rate == 1e-5
        assert cfg.epochs == 6
        assert cfg.batch_size == 4
        assert cfg.k_set == (3, 5, 10)
        assert cfg.folds == 10

    def test_precedence_flags_env_file_defaults(self, tmp_path):
        cfg_file = tmp_path / "pcr.cfg"
        cfg_file.write_text("# comment\nrare_tag_theta = 5\nepochs = 2\nseed = 1\n")
        env = {"PCR_EPOCHS": "3", "PCR_MAX_LEN": "200"}
        cfg = load_config(cfg_file, env=env, overrides={"seed": 9})
        assert cfg.rare_tag_theta == 5  # file beats default
        assert cfg.epochs == 3  # env beats file
        assert cfg.max_len == 200  # env beats default
        assert cfg.seed == 9  # flag beats file

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "pcr.cfg"
        cfg_file.write_text("not_a_key = 1\n")
        with pytest.raises(ConfigError):
            load_config(cfg_file)

    def test_validation_names_field(self):
        with pytest.raises(ConfigError) as exc_info:
            load_config(overrides={"folds": 1})
        assert exc_info.value.field == "folds"

    def test_hash_stable_and_sensitive(self):
        assert PipelineConfig().hash() == PipelineConfig().hash()
        assert PipelineConfig().hash() != PipelineConfig(seed=1).hash()


class TestExitCodes:
    def test_missing_input_exit_2(self, tmp_path, capsys):
        code = main(["evaluate", "--out", str(tmp_path)])
        assert code == EXIT_MISSING_INPUT
        assert "predictions.ndjson" in capsys.readouterr().err

    def test_bad_config_exit_3(self, tmp_path, capsys):
        code = main(["preprocess", "--out", str(tmp_path), "--folds", "1"])
        assert code == EXIT_BAD_CONFIG
        assert "folds" in capsys.readouterr().err

    def test_stage_failure_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "broken.xml"
        bad.write_text('<posts><row Id="1" Score="2"/><posts>')
        code = main(["ingest", "--dump", str(bad), "--out", str(tmp_path / "out")])
        assert code == EXIT_STAGE_FAILURE
        assert "ingest" in capsys.readouterr().err

    def test_missing_dump_exit_2(self, tmp_path):
        code = main(["ingest", "--dump", str(tmp_path / "nope.xml"), "--out", str(tmp_path)])
        assert code == EXIT_MISSING_INPUT


class TestStages:
    def test_ingest_writes_ndjson(self, tmp_path):
        out = tmp_path / "arts"
        assert main(["ingest", "--dump", FIXTURE, "--out", str(out)]) == EXIT_OK
        lines = [json.loads(l) for l in (out / "posts.ndjson").read_text().splitlines()]
        posts = [l for l in lines if "error" not in l]
        errors = [l for l in lines if "error" in l]
        assert len(posts) == 50
        assert len(errors) == 2
        assert all({"id", "score", "title", "text", "code_snippets", "tags", "created_at"} <= set(p) for p in posts)
        assert all({"error", "offset"} == set(e) for e in errors)

    def test_ingest_reads_stdin(self, tmp_path, monkeypatch):
        import io
        import sys

        data = Path(FIXTURE).read_bytes()
        monkeypatch.setattr(sys, "stdin", type("S", (), {"buffer": io.BytesIO(data)})())
        out = tmp_path / "arts"
        assert main(["ingest", "--dump", "-", "--out", str(out)]) == EXIT_OK
        assert len((out / "posts.ndjson").read_text().splitlines()) == 52

    def test_manifest_written(self, tmp_path):
        out = tmp_path / "arts"
        main(["ingest", "--dump", FIXTURE, "--out", str(out)])
        manifest = json.loads((out / "ingest.manifest.json").read_text())
        assert {"stage", "config_hash", "input_hashes", "versions", "created_at"} <= set(manifest)
        assert manifest["stage"] == "ingest"
        assert FIXTURE in manifest["input_hashes"]

    def test_rerun_stage_byte_identical(self, tmp_path):
        out = tmp_path / "arts"
        main(["ingest", "--dump", FIXTURE, "--out", str(out)])
        main(["preprocess", "--out", str(out)] + FAST)
        first = _hash_artifacts(out)
        main(["preprocess", "--out", str(out)] + FAST)
        assert _hash_artifacts(out) == first

    def test_all_runs_end_to_end_deterministically(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            code = main(["all", "--dump", FIXTURE, "--out", str(out)] + FAST)
            assert code == EXIT_OK
            assert (out / "report.json").exists()
        assert _hash_artifacts(out_a) == _hash_artifacts(out_b)

    def test_report_schema(self, tmp_path):
        out = tmp_path / "arts"
        main(["all", "--dump", FIXTURE, "--out", str(out)] + FAST)
        report = json.loads((out / "report.json").read_text())
        assert set(report["per_k"]) == {"3", "5", "10"}
        assert 0.0 <= report["accuracy"] <= 1.0
