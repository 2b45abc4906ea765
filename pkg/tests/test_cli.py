import json

import pytest

from app.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from app.models.argid import ArgumentModel

from tests.conftest import TINY


def _tiny_flags(**overrides):
    values = dict(TINY, epochs=1, use_scaffold=False)
    values.update(overrides)
    flags = []
    for key, value in values.items():
        flags += ["--set", f"{key}={value}"]
    return flags


@pytest.fixture(autouse=True)
def no_run_history(monkeypatch):
    monkeypatch.delenv("SEGRNN_DB_PATH", raising=False)


@pytest.fixture
def trained(data_files):
    directory = data_files["dir"]
    checkpoint = str(directory / "arg.ckpt")
    code = main(
        ["train-arg", "--train", data_files["corpus"], "--dev", data_files["corpus"],
         "--ontology", data_files["ontology"], "--output", checkpoint, "--seed", "0"] + _tiny_flags()
    )
    assert code == EXIT_OK
    return checkpoint


class TestCommands:
    def test_train_predict_evaluate(self, data_files, trained, capsys):
        predictions = str(data_files["dir"] / "pred.jsonl")
        assert main(["predict", "--arg-checkpoint", trained, "--corpus", data_files["corpus"],
                     "--ontology", data_files["ontology"], "--output", predictions]) == EXIT_OK
        with open(predictions, encoding="utf-8") as handle:
            assert len(handle.readlines()) == 5
        capsys.readouterr()
        assert main(["evaluate", "--predictions", predictions, "--gold", data_files["corpus"], "--format", "json"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["instances"] == 5
        assert 0.0 <= report["f1"] <= 1.0

    def test_ensemble_prediction_repeats_flag(self, data_files, trained):
        predictions = str(data_files["dir"] / "pred.jsonl")
        code = main(["predict", "--arg-checkpoint", trained, "--arg-checkpoint", trained,
                     "--corpus", data_files["corpus"], "--output", predictions, "--workers", "1"])
        assert code == EXIT_OK

    def test_train_with_trees(self, data_files):
        checkpoint = str(data_files["dir"] / "scaffold.ckpt")
        code = main(
            ["train-arg", "--train", data_files["corpus"], "--ontology", data_files["ontology"],
             "--trees", data_files["trees"], "--output", checkpoint, "--seed", "1"] + _tiny_flags(use_scaffold=True)
        )
        assert code == EXIT_OK

    def test_train_frame_and_predict_frames(self, data_files, capsys):
        checkpoint = str(data_files["dir"] / "frame.ckpt")
        code = main(
            ["train-frame", "--train", data_files["corpus"], "--dev", data_files["corpus"],
             "--ontology", data_files["ontology"], "--output", checkpoint, "--seed", "0"] + _tiny_flags()
        )
        assert code == EXIT_OK
        assert "best_accuracy" in capsys.readouterr().out
        predictions = str(data_files["dir"] / "frames.jsonl")
        assert main(["predict", "--frame-checkpoint", checkpoint, "--corpus", data_files["corpus"],
                     "--mode", "frames", "--output", predictions]) == EXIT_OK
        assert main(["evaluate", "--predictions", predictions, "--gold", data_files["corpus"], "--mode", "frames"]) == EXIT_OK

    def test_ensemble_training(self, data_files, capsys):
        output = str(data_files["dir"] / "members")
        code = main(
            ["train-arg", "--train", data_files["corpus"], "--ontology", data_files["ontology"],
             "--output", output, "--seed", "3", "--ensemble"] + _tiny_flags(ensemble_size=2)
        )
        assert code == EXIT_OK
        assert len(json.loads(capsys.readouterr().out)) == 2

    def test_inspect_checkpoint(self, trained, capsys):
        assert main(["inspect-checkpoint", trained]) == EXIT_OK
        info = json.loads(capsys.readouterr().out)
        assert info["kind"] == "arg"
        assert info["seed"] == 0


class TestExitCodes:
    def test_no_command(self):
        assert main([]) == EXIT_USAGE

    def test_missing_required_flag(self, data_files):
        assert main(["train-arg", "--train", data_files["corpus"]]) == EXIT_USAGE

    def test_unknown_hyperparameter(self, data_files, tmp_path):
        code = main(["train-arg", "--train", data_files["corpus"], "--ontology", data_files["ontology"],
                     "--output", str(tmp_path / "a.ckpt"), "--seed", "0", "--set", "hidden=3"])
        assert code == EXIT_USAGE

    def test_predict_needs_arg_checkpoint(self, data_files, tmp_path):
        code = main(["predict", "--corpus", data_files["corpus"], "--output", str(tmp_path / "p.jsonl")])
        assert code == EXIT_USAGE

    def test_end_to_end_needs_frame_checkpoint(self, data_files, trained, tmp_path):
        code = main(["predict", "--arg-checkpoint", trained, "--corpus", data_files["corpus"],
                     "--mode", "end-to-end", "--output", str(tmp_path / "p.jsonl")])
        assert code == EXIT_USAGE

    def test_malformed_corpus(self, data_files, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"tokens": ["a"]}\n', encoding="utf-8")
        code = main(["train-arg", "--train", str(bad), "--ontology", data_files["ontology"],
                     "--output", str(tmp_path / "a.ckpt"), "--seed", "0"] + _tiny_flags())
        assert code == EXIT_DATA

    def test_missing_checkpoint(self, tmp_path):
        assert main(["inspect-checkpoint", str(tmp_path / "absent.ckpt")]) == EXIT_DATA

    def test_corrupt_checkpoint(self, data_files, tmp_path):
        junk = tmp_path / "junk.ckpt"
        junk.write_bytes(b"\x00" * 32)
        code = main(["predict", "--arg-checkpoint", str(junk), "--corpus", data_files["corpus"],
                     "--output", str(tmp_path / "p.jsonl")])
        assert code == EXIT_DATA

    def test_non_finite_loss(self, data_files, tmp_path, monkeypatch):
        monkeypatch.setattr(ArgumentModel, "sentence_loss", lambda self, graph, *args, **kwargs: graph.scalar(float("inf")))
        code = main(["train-arg", "--train", data_files["corpus"], "--ontology", data_files["ontology"],
                     "--output", str(tmp_path / "a.ckpt"), "--seed", "0"] + _tiny_flags())
        assert code == EXIT_NUMERIC

    def test_predictions_for_unknown_instance(self, data_files, tmp_path):
        predictions = tmp_path / "p.jsonl"
        predictions.write_text('{"instance_id": "9:0", "frame": "Motion", "segments": []}\n', encoding="utf-8")
        assert main(["evaluate", "--predictions", str(predictions), "--gold", data_files["corpus"]]) == EXIT_DATA
