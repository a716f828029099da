import hashlib
import json
import os

import pytest

from viasnet.cli import main
from viasnet.config import ConfigErrors, RunConfig, validate_config

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(path)


def test_minimal_config_defaults(tmp_path):
    cfg = validate_config(write(tmp_path, {"profile": "desk"}))
    assert isinstance(cfg, RunConfig)
    assert cfg.train.learning_rate == 1e-4 and cfg.train.steps == 2000 and cfg.metrics.n_splits == 100
    assert cfg.model_config_obj().height == 56
    assert cfg.train_config().seed == cfg.seed


def test_shipped_desk_config_valid():
    cfg = validate_config(os.path.join(CONFIGS, "desk.json"))
    assert cfg.profile == "desk" and cfg.corpus.viewers_per_video == 20


def test_negative_learning_rate_named(tmp_path):
    with pytest.raises(ConfigErrors) as err:
        validate_config(write(tmp_path, {"train": {"learning_rate": -0.1}}))
    assert any(e.startswith("train.learning_rate:") for e in err.value.errors)


def test_unknown_key_suggestion(tmp_path):
    with pytest.raises(ConfigErrors) as err:
        validate_config(write(tmp_path, {"modle": {}}))
    assert "did you mean 'model'" in err.value.errors[0]
    with pytest.raises(ConfigErrors) as err:
        validate_config(write(tmp_path, {"train": {"stpes": 3}}))
    assert "train.steps" in err.value.errors[0]


def test_all_errors_reported_at_once(tmp_path):
    with pytest.raises(ConfigErrors) as err:
        validate_config(write(tmp_path, {"train": {"learning_rate": 0, "batch_size": -1}, "profile": "huge"}))
    paths = {e.split(":")[0] for e in err.value.errors}
    assert {"train.learning_rate", "train.batch_size", "profile"} <= paths


def test_parse_error_line_column(tmp_path, capsys):
    path = write(tmp_path, '{\n  "profile": "desk",\n  "seed": ,\n}')
    assert main(["train", "--config", path]) == 1
    assert ":3:11:" in capsys.readouterr().err


def test_overrides(tmp_path):
    cfg = validate_config(write(tmp_path, {}), ["train.steps=5", "paths.output=elsewhere", "seed=3"])
    assert cfg.train.steps == 5 and cfg.paths.output == "elsewhere" and cfg.seed == 3


def test_unknown_subcommand_usage(capsys):
    assert main(["fly", "--config", "x.json"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_missing_config_is_validation_error(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "none.json")]) == 1


def test_runtime_error_exit_two(tmp_path):
    path = write(tmp_path, {"paths": {"corpus": str(tmp_path / "nothing"), "output": str(tmp_path / "o")}})
    assert main(["scenes", "--config", path]) == 2


def _digest(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            out[os.path.relpath(p, root)] = hashlib.sha256(open(p, "rb").read()).hexdigest()
    return out


def test_stage_pipeline_and_json_logs(tmp_path, capsys):
    doc = {"profile": "desk", "seed": 3,
           "paths": {"corpus": str(tmp_path / "c"), "output": str(tmp_path / "o")},
           "corpus": {"n_videos": 4, "scenes_per_video": 3, "frames_per_scene": 24, "viewers_per_video": 4,
                      "test_fraction": 0.5},
           "train": {"steps": 1, "window": 4}, "metrics": {"n_splits": 3}, "diagnostics": {"plots": False}}
    path = write(tmp_path, doc)
    assert main(["synth", "--config", path, "--json-logs"]) == 0
    logged = [json.loads(line) for line in capsys.readouterr().err.splitlines()]
    assert logged and all({"level", "logger", "message"} <= set(r) for r in logged)
    corpus_before = _digest(tmp_path / "c")
    for stage in ("ingest", "scenes", "gtmaps", "caption", "train", "eval", "diagnose"):
        assert main([stage, "--config", path]) == 0, stage
    assert _digest(tmp_path / "c") == corpus_before
    o = tmp_path / "o"
    for f in ("manifest.json", "train/report.json", "eval/metrics.json", "diagnostics/index.json",
              "diagnostics/flags.json"):
        assert (o / f).exists(), f
    # re-derived fixations, scenes and maps equal the ones the generator wrote
    for kind, name in (("ingest", "fixations.csv"), ("scenes", "scenes.json"), ("gtmaps", "gt.vsal")):
        for vid in ("v000", "v001"):
            assert (o / kind / vid / name).read_bytes() == (tmp_path / "c" / "videos" / vid / name).read_bytes()
