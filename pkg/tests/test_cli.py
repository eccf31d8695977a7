"""End-to-end command tests driven through main(argv)."""

import json

import numpy as np
import pytest
import yaml

from mgdcf.cli import main
from mgdcf.config import DEFAULT_CONFIG
from mgdcf.data import build_dataset, save_interactions
from mgdcf.training import load_checkpoint, save_checkpoint


def write_corpus(tmp_path, users_per_block=8, items_per_block=10, seed=0):
    """Two-block toy corpus on disk, one held-out item per user."""
    rng = np.random.default_rng(seed)
    num_users = 2 * users_per_block
    num_items = 2 * items_per_block
    train, test = [], []
    for user in range(num_users):
        base = 0 if user < users_per_block else items_per_block
        liked = base + rng.permutation(items_per_block)[:5]
        train.extend((user, int(i)) for i in liked[:-1])
        test.append((user, int(liked[-1])))
    dataset = build_dataset(num_users, num_items, sorted(train), sorted(test))
    train_path = tmp_path / "train.txt"
    test_path = tmp_path / "test.txt"
    save_interactions(train_path, dataset.train_edges, num_users)
    save_interactions(test_path, dataset.test_edges, num_users)
    return train_path, test_path


def write_config(tmp_path, train_path, test_path, name="run.yaml", **overrides):
    body = {
        "dataset": {"train_path": str(train_path), "test_path": str(test_path)},
        "diffusion": {"k_layers": 2},
        "loss": {"n_neg": 4},
        "train": {
            "epochs": 2,
            "batch_size": 256,
            "embedding_dim": 8,
            "lr": 0.01,
        },
        "eval": {"cutoff": 5},
    }
    for section, keys in overrides.items():
        body.setdefault(section, {}).update(keys)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(body), encoding="ascii")
    return path


@pytest.fixture()
def workspace(tmp_path):
    train_path, test_path = write_corpus(tmp_path)
    config = write_config(tmp_path, train_path, test_path)
    return tmp_path, config


class TestPrintConfig:
    def test_output_is_the_default_document(self, capsys):
        assert main(["print-config"]) == 0
        out = capsys.readouterr().out
        assert yaml.safe_load(out) == DEFAULT_CONFIG


class TestTrain:
    def test_writes_run_artifacts(self, workspace, capsys):
        tmp_path, config = workspace
        out_dir = tmp_path / "run"
        assert main(["train", "-c", str(config), "-o", str(out_dir)]) == 0
        for name in (
            "history.jsonl",
            "checkpoint_best.bin",
            "checkpoint_final.bin",
            "history.png",
        ):
            assert (out_dir / name).exists(), name
        lines = capsys.readouterr().out.strip().splitlines()
        summary = json.loads(lines[-1])
        history = [
            json.loads(line)
            for line in (out_dir / "history.jsonl").read_text().splitlines()
        ]
        assert summary["evaluations"] == len(history) == 2
        assert summary["best_epoch"] in (1, 2)
        # stdout mirrors the history file line for line
        assert [json.loads(line) for line in lines[:-1]] == history

    def test_reruns_are_byte_identical(self, workspace):
        tmp_path, config = workspace
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["train", "-c", str(config), "-o", str(first)]) == 0
        assert main(["train", "-c", str(config), "-o", str(second)]) == 0
        assert (first / "history.jsonl").read_bytes() == (
            second / "history.jsonl"
        ).read_bytes()
        assert (first / "checkpoint_final.bin").read_bytes() == (
            second / "checkpoint_final.bin"
        ).read_bytes()

    def test_homo_mode_via_config(self, tmp_path, capsys):
        train_path, test_path = write_corpus(tmp_path)
        config = write_config(
            tmp_path,
            train_path,
            test_path,
            train={"mode": "homo", "epochs": 1},
            homo={"enabled": True, "s_percent": 50.0},
        )
        out_dir = tmp_path / "homo_run"
        assert main(["train", "-c", str(config), "-o", str(out_dir)]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["evaluations"] == 1

    def test_checkpoint_meta_echoes_config(self, workspace):
        tmp_path, config = workspace
        out_dir = tmp_path / "run"
        main(["train", "-c", str(config), "-o", str(out_dir)])
        _, meta = load_checkpoint(out_dir / "checkpoint_best.bin")
        assert meta["seed"] == 42
        assert meta["config"]["train"]["epochs"] == 2


class TestEval:
    def test_reports_metrics(self, workspace, capsys):
        tmp_path, config = workspace
        out_dir = tmp_path / "run"
        main(["train", "-c", str(config), "-o", str(out_dir)])
        capsys.readouterr()
        code = main(
            [
                "eval",
                "-c",
                str(config),
                "--checkpoint",
                str(out_dir / "checkpoint_best.bin"),
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["cutoff"] == 5
        assert report["num_users"] == 16
        assert 0.0 <= report["recall"] <= 1.0
        assert 0.0 <= report["ndcg"] <= 1.0

    def test_cutoff_flag_overrides_config(self, workspace, capsys):
        tmp_path, config = workspace
        out_dir = tmp_path / "run"
        main(["train", "-c", str(config), "-o", str(out_dir)])
        capsys.readouterr()
        main(
            [
                "eval",
                "-c",
                str(config),
                "--checkpoint",
                str(out_dir / "checkpoint_best.bin"),
                "--cutoff",
                "3",
            ]
        )
        assert json.loads(capsys.readouterr().out)["cutoff"] == 3

    def test_per_user_outputs(self, workspace, capsys):
        tmp_path, config = workspace
        run_dir = tmp_path / "run"
        main(["train", "-c", str(config), "-o", str(run_dir)])
        capsys.readouterr()
        eval_dir = tmp_path / "eval_out"
        main(
            [
                "eval",
                "-c",
                str(config),
                "--checkpoint",
                str(run_dir / "checkpoint_best.bin"),
                "-o",
                str(eval_dir),
            ]
        )
        stdout_report = json.loads(capsys.readouterr().out)
        file_report = json.loads((eval_dir / "report.json").read_text())
        assert file_report == stdout_report
        rows = (eval_dir / "per_user.tsv").read_text().splitlines()
        assert rows[0] == "user\trecall\tndcg"
        assert len(rows) - 1 == stdout_report["num_users"]
        recalls = [float(r.split("\t")[1]) for r in rows[1:]]
        assert np.mean(recalls) == pytest.approx(stdout_report["recall"])

    def test_row_count_mismatch_exits_two(self, workspace, capsys):
        tmp_path, config = workspace
        bad = tmp_path / "bad.bin"
        save_checkpoint(bad, np.zeros((3, 4)))
        code = main(["eval", "-c", str(config), "--checkpoint", str(bad)])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestBuildHomo:
    def test_writes_graph_reports(self, workspace, capsys):
        tmp_path, config = workspace
        out_dir = tmp_path / "homo"
        code = main(
            ["build-homo", "-c", str(config), "-o", str(out_dir), "--bins", "12"]
        )
        assert code == 0
        for name in ("edges.tsv", "histogram.tsv", "histogram.png"):
            assert (out_dir / name).exists(), name
        summary = json.loads(capsys.readouterr().out)
        assert summary["num_items"] == 20
        assert 0 <= summary["kept_pairs"] <= summary["candidate_pairs"]
        histogram = (out_dir / "histogram.tsv").read_text().splitlines()
        assert len(histogram) == 12  # one row per bin
        total = sum(int(row.split("\t")[2]) for row in histogram)
        assert total == summary["candidate_pairs"]

    def test_idempotent_outputs(self, workspace):
        tmp_path, config = workspace
        first, second = tmp_path / "h1", tmp_path / "h2"
        main(["build-homo", "-c", str(config), "-o", str(first)])
        main(["build-homo", "-c", str(config), "-o", str(second)])
        assert (first / "edges.tsv").read_bytes() == (
            second / "edges.tsv"
        ).read_bytes()

    def test_kept_pairs_shrink_with_s(self, tmp_path, capsys):
        train_path, test_path = write_corpus(tmp_path)
        kept = []
        for s_percent, name in ((0.0, "l.yaml"), (80.0, "h.yaml")):
            config = write_config(
                tmp_path,
                train_path,
                test_path,
                name=name,
                homo={"s_percent": s_percent},
            )
            main(["build-homo", "-c", str(config), "-o", str(tmp_path / name[0])])
            kept.append(json.loads(capsys.readouterr().out)["kept_pairs"])
        assert kept[1] < kept[0]


class TestVerify:
    def test_battery_passes(self, capsys):
        assert main(["verify", "--instances", "2"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 5
        assert all(line.endswith("status=pass") for line in out)

    def test_single_check_flag(self, capsys):
        code = main(
            ["verify", "--instances", "2", "--check", "inverse_roundtrip"]
        )
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1
        assert out[0].startswith("inverse_roundtrip:")

    def test_zero_tolerance_exits_one(self, capsys):
        code = main(["verify", "--instances", "2", "--tolerance-scale", "0"])
        assert code == 1
        captured = capsys.readouterr()
        assert "FAILED" in captured.err


class TestErrorPaths:
    def test_unknown_config_key_exits_two(self, tmp_path, capsys):
        config = tmp_path / "bad.yaml"
        config.write_text("train:\n  vroom: 1\n", encoding="ascii")
        code = main(["train", "-c", str(config), "-o", str(tmp_path / "o")])
        assert code == 2
        assert "train.vroom" in capsys.readouterr().err

    def test_missing_dataset_exits_two(self, tmp_path, capsys):
        config = write_config(
            tmp_path, tmp_path / "absent.txt", tmp_path / "absent2.txt"
        )
        code = main(["train", "-c", str(config), "-o", str(tmp_path / "o")])
        assert code == 2
        assert "error:" in capsys.readouterr().err
