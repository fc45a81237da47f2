"""End-to-end tests for the pdmrec command line."""

import csv
from pathlib import Path

import pytest

from pdmrec.data.io import load_split
from pdmrec.evaluation.report import EvalReport
from pdmrec.main import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, run

TOY_SETTINGS = [
    "--set", "d=8",
    "--set", "max_len=8",
    "--set", "dropout=0.0",
    "--set", "batch_size=32",
    "--set", "max_epochs=2",
]  # fmt: skip


def _synth(tmp_path: Path, users: int = 30) -> tuple[Path, Path]:
    log = tmp_path / "log.tsv"
    split = tmp_path / "split.json"
    code = run(
        [
            "synth",
            "--out", str(log),
            "--split", str(split),
            "--users", str(users),
            "--items", "20",
            "--max-len", "10",
            "--seed", "1",
        ]
    )  # fmt: skip
    assert code == EXIT_OK
    return log, split


@pytest.fixture
def trained(tmp_path: Path) -> tuple[Path, Path]:
    """(split file, run directory) after a two-epoch training run."""
    _, split = _synth(tmp_path)
    run_dir = tmp_path / "run"
    assert run(["train", "--data", str(split), "--out", str(run_dir), *TOY_SETTINGS]) == EXIT_OK
    return split, run_dir


class TestSynthAndPreprocess:
    """Tests for dataset creation commands."""

    def test_synth_writes_log_and_split(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        log, split = _synth(tmp_path)
        assert log.read_text(encoding="utf-8").startswith("user_id\t")
        assert load_split(split).num_users == 30
        assert "records = " in capsys.readouterr().out

    def test_preprocess_with_preset(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        log, _ = _synth(tmp_path, users=60)
        out = tmp_path / "pre" / "split.json"
        index_map = tmp_path / "items.tsv"
        code = run(
            [
                "preprocess",
                "--input", str(log),
                "--rule", "wechat",
                "--k-core", "2",
                "--out", str(out),
                "--index-map", str(index_map),
            ]
        )  # fmt: skip
        assert code == EXIT_OK
        dataset = load_split(out)
        assert dataset.num_users > 0
        assert len(index_map.read_text(encoding="utf-8").splitlines()) == dataset.num_items
        assert f"users = {dataset.num_users}" in capsys.readouterr().out

    def test_preprocess_with_threshold_rule(self, tmp_path: Path) -> None:
        log, _ = _synth(tmp_path)
        out = tmp_path / "split.json"
        code = run(
            ["preprocess", "--input", str(log), "--loop-threshold", "1.0", "--k-core", "1", "--out", str(out)]
        )
        assert code == EXIT_OK
        assert load_split(out).num_users == 30


class TestTrainAndEvaluate:
    """Tests for train, evaluate and stats."""

    def test_train_outputs(self, trained: tuple[Path, Path]) -> None:
        _, run_dir = trained
        assert (run_dir / "best.ckpt").exists()
        assert (run_dir / "last.ckpt").exists()
        lines = (run_dir / "train_log.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("epoch,l_main,l_cl,l_total")
        assert len(lines) >= 2

    def test_evaluate_cutoffs_to_file(self, tmp_path: Path, trained: tuple[Path, Path]) -> None:
        split, run_dir = trained
        out = tmp_path / "report.txt"
        code = run(
            [
                "evaluate",
                "--data", str(split),
                "--checkpoint", str(run_dir / "best.ckpt"),
                "--k", "20,50,100",
                "--out", str(out),
            ]
        )  # fmt: skip
        assert code == EXIT_OK
        report = EvalReport.from_text(out.read_text(encoding="utf-8"))
        assert report.ks == [20, 50, 100]
        assert report.split == "test"
        assert report.wall_clock_seconds is None

    def test_evaluate_to_directory_with_timing(self, trained: tuple[Path, Path]) -> None:
        split, run_dir = trained
        code = run(
            [
                "evaluate",
                "--data", str(split),
                "--checkpoint", str(run_dir / "best.ckpt"),
                "--split", "valid",
                "--timing",
                "--out", str(run_dir),
            ]
        )  # fmt: skip
        assert code == EXIT_OK
        report = EvalReport.from_text((run_dir / "report.txt").read_text(encoding="utf-8"))
        assert report.split == "valid"
        assert report.wall_clock_seconds is not None

    def test_evaluate_is_deterministic_on_stdout(
        self, trained: tuple[Path, Path], capsys: pytest.CaptureFixture[str]
    ) -> None:
        split, run_dir = trained
        argv = ["evaluate", "--data", str(split), "--checkpoint", str(run_dir / "best.ckpt")]
        capsys.readouterr()
        assert run(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert run(argv) == EXIT_OK
        assert capsys.readouterr().out == first
        assert first.startswith("split = test\n")

    def test_evaluate_architecture_mismatch(self, trained: tuple[Path, Path]) -> None:
        split, run_dir = trained
        code = run(
            [
                "evaluate",
                "--data", str(split),
                "--checkpoint", str(run_dir / "best.ckpt"),
                "--set", "d=16",
            ]
        )  # fmt: skip
        assert code == EXIT_IO

    def test_stats(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        _, split = _synth(tmp_path)
        capsys.readouterr()
        assert run(["stats", "--data", str(split), "--set", "variant=PDMRec2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "users = 30" in out
        assert "parameters.positional_embeddings = 0" in out


class TestAblate:
    """Tests for the ablation driver."""

    def test_four_variants(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        out = tmp_path / "ablation"
        code = run(
            [
                "ablate",
                "--data", str(split),
                "--out", str(out),
                "--variants", "full,PDMRec1,PDMRec2,PDMRec3",
                *TOY_SETTINGS,
                "--set", "max_epochs=1",
            ]
        )  # fmt: skip
        assert code == EXIT_OK
        with (out / "ablation.csv").open(encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        assert [r["variant"] for r in rows] == ["full", "PDMRec1", "PDMRec2", "PDMRec3"]
        assert len({r["data_sha256"] for r in rows}) == 1
        assert {"recall@20", "ndcg@100"} <= set(rows[0])
        for variant in ("full", "PDMRec3"):
            assert (out / variant / "best.ckpt").exists()
            assert (out / variant / "report.txt").exists()
        assert (out / "ablation.txt").exists()

    def test_unknown_variant(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        code = run(["ablate", "--data", str(split), "--out", str(tmp_path / "a"), "--variants", "PDMRec9"])
        assert code == EXIT_USAGE


class TestExitCodes:
    """Tests for error-to-exit-code mapping."""

    def test_missing_data_file(self, tmp_path: Path) -> None:
        code = run(["train", "--data", str(tmp_path / "missing.json"), "--out", str(tmp_path / "run")])
        assert code == EXIT_IO

    def test_unknown_option(self) -> None:
        assert run(["train", "--bogus"]) == EXIT_USAGE

    def test_missing_subcommand(self) -> None:
        assert run([]) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        code = run(["train", "--data", str(split), "--out", str(tmp_path / "run"), "--set", "depth=3"])
        assert code == EXIT_USAGE

    def test_malformed_override(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        code = run(["stats", "--data", str(split), "--set", "d"])
        assert code == EXIT_USAGE

    def test_required_flag(self) -> None:
        assert run(["stats"]) == EXIT_USAGE

    def test_corrupt_split_file(self, tmp_path: Path) -> None:
        bad = tmp_path / "split.json"
        bad.write_text('{"num_items": "many"}', encoding="utf-8")
        assert run(["stats", "--data", str(bad)]) == EXIT_VALIDATION

    def test_corrupt_checkpoint(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        ckpt = tmp_path / "model.ckpt"
        ckpt.write_bytes(b"not a checkpoint at all")
        code = run(["evaluate", "--data", str(split), "--checkpoint", str(ckpt)])
        assert code == EXIT_IO

    def test_log_with_invalid_utf8(self, tmp_path: Path) -> None:
        log = tmp_path / "log.tsv"
        log.write_bytes(b"user_id\titem_id\ttimestamp\nu1\ti\xff\t10\n")
        code = run(["preprocess", "--input", str(log), "--rule", "wechat", "--out", str(tmp_path / "split.json")])
        assert code == EXIT_VALIDATION

    def test_split_with_invalid_utf8(self, tmp_path: Path) -> None:
        bad = tmp_path / "split.json"
        bad.write_bytes(b'{"num_items": 3, "name": "\xff"}')
        assert run(["stats", "--data", str(bad)]) == EXIT_VALIDATION

    def test_config_with_invalid_utf8(self, tmp_path: Path) -> None:
        _, split = _synth(tmp_path)
        cfg = tmp_path / "run.cfg"
        cfg.write_bytes(b"d = 8\n# \xff\n")
        assert run(["stats", "--data", str(split), "--config", str(cfg)]) == EXIT_USAGE
