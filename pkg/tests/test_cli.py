import json

import pytest

from capml.cli import main


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    code = main(
        [
            "generate",
            "--n", "300", "--q", "5", "--d", "8",
            "--imbalance", "5", "--seed", "1",
            "--p", "0.1", "--test-fraction", "0.2",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


class TestGenerate:
    def test_writes_dataset_and_split(self, data_dir):
        assert (data_dir / "dataset.csv").is_file()
        assert (data_dir / "split.json").is_file()
        assert (data_dir / "manifest.json").is_file()
        manifest = json.loads((data_dir / "manifest.json").read_text())
        assert manifest["command"] == "generate"

    def test_missing_out_is_usage_error(self):
        assert main(["generate", "--n", "10", "--q", "3", "--d", "4"]) == 2

    def test_repeat_identical_bytes(self, data_dir, tmp_path):
        again = tmp_path / "again"
        main(
            [
                "generate",
                "--n", "300", "--q", "5", "--d", "8",
                "--imbalance", "5", "--seed", "1",
                "--p", "0.1", "--test-fraction", "0.2",
                "--out", str(again),
            ]
        )
        assert (again / "dataset.csv").read_bytes() == (
            data_dir / "dataset.csv"
        ).read_bytes()
        assert (again / "split.json").read_bytes() == (
            data_dir / "split.json"
        ).read_bytes()

    def test_invalid_config_field(self, tmp_path):
        code = main(
            ["generate", "--n", "10", "--q", "1", "--d", "4", "--out", str(tmp_path / "x")]
        )
        assert code == 2


class TestTrain:
    def test_history_rows(self, data_dir, tmp_path):
        run = tmp_path / "run"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {"strategy": "cap", "warmup_epochs": 2, "total_epochs": 4, "seed": 1}
            )
        )
        code = main(
            ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(run)]
        )
        assert code == 0
        lines = (run / "history.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4
        assert (run / "checkpoint.json").is_file()
        assert (run / "manifest.json").is_file()

    def test_corrupt_config(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"strategy": "bogus"}))
        code = main(
            ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(tmp_path / "r")]
        )
        assert code == 2

    def test_flags_override_config(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {"strategy": "top1", "eta_pos": 1.0, "warmup_epochs": 1, "total_epochs": 2, "seed": 1}
            )
        )
        run = tmp_path / "run"
        code = main(
            [
                "train", "--config", str(cfg), "--data", str(data_dir),
                "--out", str(run), "--strategy", "cap", "--eta-pos", "0.9",
            ]
        )
        assert code == 0
        saved = json.loads((run / "config.json").read_text())
        assert saved["strategy"] == "cap"
        assert saved["eta_pos"] == 0.9

    def test_determinism_byte_identical_history(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps({"strategy": "cap", "warmup_epochs": 1, "total_epochs": 3, "seed": 5})
        )
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(
                ["train", "--config", str(cfg), "--data", str(data_dir), "--out", str(out)]
            ) == 0
            runs.append((out / "history.csv").read_bytes())
        assert runs[0] == runs[1]


class TestCompare:
    def test_default_four_rows(self, data_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps({"warmup_epochs": 1, "total_epochs": 2, "seed": 1})
        )
        out = tmp_path / "cmp"
        code = main(
            ["compare", "--config", str(cfg), "--data", str(data_dir), "--out", str(out)]
        )
        assert code == 0
        lines = (out / "comparison.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 4
        assert "checkpoint_hash" in lines[0]
        report = json.loads((out / "comparison.json").read_text())
        hashes = {r["checkpoint_hash"] for r in report["results"]}
        assert hashes == {report["checkpoint_hash"]}

    def test_single_strategy(self, data_dir, tmp_path):
        out = tmp_path / "cmp1"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"warmup_epochs": 1, "total_epochs": 2, "seed": 1}))
        code = main(
            [
                "compare", "--config", str(cfg), "--data", str(data_dir),
                "--out", str(out), "--strategies", "top1",
            ]
        )
        assert code == 0
        lines = (out / "comparison.csv").read_text().strip().splitlines()
        assert len(lines) == 2

    def test_unknown_strategy(self, data_dir, tmp_path):
        code = main(
            [
                "compare", "--data", str(data_dir), "--out", str(tmp_path / "x"),
                "--strategies", "alchemy",
            ]
        )
        assert code == 2


class TestVerifyBound:
    def test_report_and_exit_zero(self, tmp_path):
        out = tmp_path / "vb"
        code = main(
            [
                "verify-bound", "--n", "100", "--m", "1000", "--q", "5",
                "--trials", "500", "--seed", "1", "--out", str(out),
            ]
        )
        assert code == 0
        report = json.loads((out / "coverage.json").read_text())
        assert report["trials"] == 500
        assert report["violation_rate"] <= report["theoretical_rate"] + report["slack"]

    def test_too_few_trials(self):
        code = main(
            ["verify-bound", "--n", "100", "--m", "1000", "--q", "5", "--trials", "10"]
        )
        assert code == 2

    def test_degenerate_prior(self):
        code = main(
            ["verify-bound", "--n", "100", "--m", "1000", "--q", "5", "--prior", "1.0"]
        )
        assert code == 2
