"""Tests for the command line: subcommands, exit codes and the files they leave behind."""

import logging
from pathlib import Path

import numpy as np
import pytest

from crvae.core.setup import create_application
from crvae.engine import layers
from crvae.engine.checkpoint import MAGIC
from crvae.main import main

from .helpers import TINY_CONFIG


@pytest.fixture(autouse=True)
def _restore_root_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def config_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    monkeypatch.chdir(tmp_path)
    path = tmp_path / "tiny.conf"
    path.write_text(TINY_CONFIG + "paths.corpus_dir = corpus\npaths.run_dir = run\n")
    return path


def test_parser_knows_every_subcommand():
    parser = create_application()
    for argv in (["gen-corpus"], ["train", "--resume"], ["enhance", "a", "b"], ["evaluate", "r", "e"], ["gradcheck"]):
        assert parser.parse_args(argv).command == argv[0]
    args = parser.parse_args(["--seed", "5", "--verbose", "gradcheck", "--ops", "kl"])
    assert (args.seed, args.verbose, args.ops) == (5, True, ["kl"])


def test_missing_subcommand_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_invalid_config_key_exits_2(config_file):
    config_file.write_text("model.not_a_key = 1\n")
    assert main(["--config", str(config_file), "gradcheck"]) == 2


def test_gen_corpus_is_reproducible(config_file, tmp_path):
    assert main(["--config", str(config_file), "gen-corpus"]) == 0
    first = (tmp_path / "corpus" / "manifest.tsv").read_bytes()
    mixtures = (tmp_path / "corpus" / "test" / "mixtures.tsv").read_bytes()
    assert main(["--config", str(config_file), "gen-corpus"]) == 0
    assert (tmp_path / "corpus" / "manifest.tsv").read_bytes() == first
    assert (tmp_path / "corpus" / "test" / "mixtures.tsv").read_bytes() == mixtures


def test_zero_utterances_exits_2(config_file):
    config_file.write_text(config_file.read_text() + "data.train_utts = 0\n")
    assert main(["--config", str(config_file), "gen-corpus"]) == 2


def test_corpus_dir_under_a_regular_file_exits_3(config_file, tmp_path):
    (tmp_path / "blocker").write_text("not a directory")
    config_file.write_text(config_file.read_text() + "paths.corpus_dir = blocker/corpus\n")
    assert main(["--config", str(config_file), "gen-corpus"]) == 3


def test_run_dir_under_a_regular_file_exits_3(config_file, tmp_path):
    assert main(["--config", str(config_file), "gen-corpus"]) == 0
    (tmp_path / "blocker").write_text("not a directory")
    config_file.write_text(config_file.read_text() + "paths.run_dir = blocker/run\n")
    assert main(["--config", str(config_file), "train"]) == 3


def test_train_without_corpus_exits_with_io_error(config_file):
    assert main(["--config", str(config_file), "train"]) == 3


def test_pipeline_train_enhance_evaluate(config_file, tmp_path, capsys):
    conf = ["--config", str(config_file)]
    assert main([*conf, "gen-corpus"]) == 0
    assert main([*conf, "train"]) == 0
    assert (tmp_path / "run" / "best.ckpt").read_bytes()[:8] == MAGIC
    assert len((tmp_path / "run" / "metrics.tsv").read_text().splitlines()) == 2
    assert (tmp_path / "run" / "config.conf").is_file()

    assert main([*conf, "train", "--resume"]) == 0
    assert len((tmp_path / "run" / "metrics.tsv").read_text().splitlines()) == 2

    noisy = tmp_path / "corpus" / "test" / "noisy"
    assert main([*conf, "enhance", str(noisy), str(tmp_path / "enhanced")]) == 0
    assert sorted(p.name for p in (tmp_path / "enhanced").iterdir()) == sorted(p.name for p in noisy.iterdir())

    clean = tmp_path / "corpus" / "test" / "clean"
    assert main([*conf, "evaluate", str(clean), str(tmp_path / "enhanced")]) == 0
    report = (tmp_path / "run" / "report.tsv").read_text().splitlines()
    assert report[0].startswith("group\tnoise\t")
    assert "AVE" in capsys.readouterr().out


def test_enhance_empty_directory_succeeds_with_no_output(config_file, tmp_path):
    assert main(["--config", str(config_file), "gen-corpus"]) == 0
    assert main(["--config", str(config_file), "train"]) == 0
    (tmp_path / "empty").mkdir()
    assert main(["--config", str(config_file), "enhance", str(tmp_path / "empty"), str(tmp_path / "out")]) == 0
    assert not (tmp_path / "out").exists()


def test_enhance_with_mismatched_checkpoint_exits_2(config_file, tmp_path):
    conf = ["--config", str(config_file)]
    assert main([*conf, "gen-corpus"]) == 0
    assert main([*conf, "train"]) == 0
    config_file.write_text(config_file.read_text() + "model.gru_units = 5\n")
    assert main([*conf, "enhance", str(tmp_path / "corpus" / "test" / "noisy"), str(tmp_path / "out")]) == 2


def test_evaluate_with_missing_estimates_exits_5(config_file, tmp_path):
    conf = ["--config", str(config_file)]
    assert main([*conf, "gen-corpus"]) == 0
    clean = tmp_path / "corpus" / "test" / "clean"
    partial = tmp_path / "partial"
    partial.mkdir()
    first = sorted(clean.iterdir())[0]
    (partial / first.name).write_bytes(first.read_bytes())
    assert main([*conf, "evaluate", str(clean), str(partial)]) == 5
    assert (tmp_path / "run" / "report.tsv").is_file()


def test_gradcheck_passes_and_reports_every_op(config_file, capsys):
    assert main(["--config", str(config_file), "gradcheck", "--ops", "dense", "kl"]) == 0
    out = capsys.readouterr().out
    assert "dense" in out and "kl" in out


def test_gradcheck_failure_exits_4(config_file, mocker):
    def dropped(p, x, g):
        return g @ p.W.conj(), {"W": np.zeros_like(p.W), "b": np.zeros_like(p.b)}

    mocker.patch.object(layers, "dense_backward", side_effect=dropped)
    assert main(["--config", str(config_file), "gradcheck", "--ops", "dense"]) == 4
