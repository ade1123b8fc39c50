"""End-to-end CLI behavior: outputs, determinism, exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from xmodal.cli import derive_sample_seed, main
from xmodal.codecsim import ChainSpec, JpegSimStep, MotionBlurStep
from xmodal.core import load_image, parse_manifest

from conftest import textured_image, write_manifest_file
from xmodal.core import save_image


def run_cli(*argv):
    return main([str(a) for a in argv])


def dir_snapshot(path: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(path)): p.read_bytes()
        for p in sorted(path.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def corpus(tmp_path):
    entries = []
    for i in range(8):
        img = textured_image(seed=200 + i, h=32, w=32)
        p = tmp_path / f"img_{i}.pgm"
        save_image(img, p)
        entries.append(
            {
                "id": f"s{i}",
                "path": str(p),
                "label": "real" if i % 2 == 0 else "fake",
                "modality": "image",
                "subset": "alpha" if i < 4 else "beta",
            }
        )
    manifest = write_manifest_file(tmp_path / "manifest.jsonl", entries)
    return tmp_path, manifest


class TestVersion:
    def test_version_runs(self, capsys):
        assert run_cli("version") == 0
        assert capsys.readouterr().out.strip()


class TestAnalyze:
    @pytest.mark.parametrize("kind", ["dct", "rapsd", "luma", "spectrum"])
    def test_kinds_produce_outputs(self, corpus, tmp_path, kind):
        root, manifest = corpus
        out = tmp_path / f"out_{kind}"
        code = run_cli(
            "analyze", kind, "--manifest", manifest, "--out", out,
            "--size", 32,
        )
        assert code == 0
        assert (out / f"{kind}.csv").is_file()
        summary = json.loads((out / f"{kind}.summary.json").read_text())
        assert summary["n_failed"] == 0
        assert (out / "run.json").is_file()

    def test_limit_respected(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "limited"
        assert run_cli("analyze", "dct", "--manifest", manifest, "--out", out,
                       "--limit", 3) == 0
        summary = json.loads((out / "dct.summary.json").read_text())
        assert summary["n_images"] == 3

    def test_constant_image_zero_fraction(self, tmp_path):
        img_path = tmp_path / "c.pgm"
        save_image(textured_image(0, h=16, w=16, noise_sigma=0.0), img_path)
        flat = tmp_path / "flat.pgm"
        from conftest import gray_image

        save_image(gray_image(np.full((16, 16), 0.5)), flat)
        manifest = write_manifest_file(
            tmp_path / "m.jsonl",
            [{"id": "c", "path": str(flat), "label": "real", "modality": "image",
              "subset": "s"}],
        )
        out = tmp_path / "out"
        assert run_cli("analyze", "dct", "--manifest", manifest, "--out", out) == 0
        summary = json.loads((out / "dct.summary.json").read_text())
        assert summary["zero_fraction"] == 1.0

    def test_unreadable_manifest_exits_2(self, tmp_path, capsys):
        code = run_cli("analyze", "dct", "--manifest", tmp_path / "nope.jsonl",
                       "--out", tmp_path / "o")
        assert code == 2
        assert "nope.jsonl" in capsys.readouterr().err

    def test_rerun_byte_identical(self, corpus, tmp_path):
        root, manifest = corpus
        out = tmp_path / "a"
        assert run_cli("analyze", "rapsd", "--manifest", manifest, "--out", out,
                       "--seed", 7) == 0
        first = dir_snapshot(out)
        assert run_cli("analyze", "rapsd", "--manifest", manifest, "--out", out,
                       "--seed", 7) == 0
        assert dir_snapshot(out) == first


class TestDegrade:
    def chain_file(self, tmp_path, steps=None) -> Path:
        chain = ChainSpec(steps or (JpegSimStep(100),))
        path = tmp_path / "chain.json"
        path.write_text(chain.to_json())
        return path

    def test_identityish_chain_outputs_close(self, corpus, tmp_path):
        root, manifest = corpus
        chain = self.chain_file(tmp_path)
        out = tmp_path / "degraded"
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain,
                       "--out", out, "--seed", 1) == 0
        new_manifest = parse_manifest(out / "manifest.jsonl")
        assert len(new_manifest) == 8
        originals = parse_manifest(manifest)
        for old, new in zip(originals, new_manifest):
            assert old.id == new.id
            before = load_image(old.path)
            after = load_image(new.path)
            assert np.abs(before.data - after.data).max() <= 1 / 255 + 1e-12

    def test_rerun_byte_identical(self, corpus, tmp_path):
        root, manifest = corpus
        chain = self.chain_file(
            tmp_path, (MotionBlurStep(3, 15.0), JpegSimStep(80))
        )
        out = tmp_path / "degraded"
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain,
                       "--out", out, "--seed", 42) == 0
        first = dir_snapshot(out)
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain,
                       "--out", out, "--seed", 42) == 0
        assert dir_snapshot(out) == first

    def test_threads_do_not_change_outputs(self, corpus, tmp_path):
        root, manifest = corpus
        chain = self.chain_file(tmp_path, (MotionBlurStep(3, 0.0),))
        serial, threaded = tmp_path / "ser", tmp_path / "thr"
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain,
                       "--out", serial, "--seed", 3) == 0
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain,
                       "--out", threaded, "--seed", 3, "--threads", 4) == 0
        a = {k: v for k, v in dir_snapshot(serial).items() if k.endswith(".pgm")}
        b = {k: v for k, v in dir_snapshot(threaded).items() if k.endswith(".pgm")}
        assert a == b

    def test_unknown_step_exits_2_naming_step(self, corpus, tmp_path, capsys):
        root, manifest = corpus
        bad = tmp_path / "bad.json"
        bad.write_text('{"steps": [{"step": "h265"}]}')
        code = run_cli("degrade", "--manifest", manifest, "--chain", bad,
                       "--out", tmp_path / "x")
        assert code == 2
        assert "h265" in capsys.readouterr().err

    def test_sample_seed_derivation_stable(self):
        assert derive_sample_seed(1, "a") == derive_sample_seed(1, "a")
        assert derive_sample_seed(1, "a") != derive_sample_seed(2, "a")
        assert derive_sample_seed(1, "a") != derive_sample_seed(1, "b")


@pytest.fixture
def train_setup(tmp_path):
    config = {
        "data": {
            "synthetic": {
                "train_counts": [60, 60, 30, 30],
                "val_counts": [20, 20, 10, 10],
                "test_counts": [50, 50, 50, 50],
                "seed": 0,
            }
        },
        "train": {"epochs": 12, "batch_size": 16, "lambda": 0.05, "seed": 0,
                  "patience": 30},
    }
    path = tmp_path / "train.json"
    path.write_text(json.dumps(config))
    return path


class TestTrainCommand:
    def test_outputs_and_early_stop_contract(self, train_setup, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", "--config", train_setup, "--out", out) == 0
        assert (out / "checkpoint.json").is_file()
        history = (out / "history.csv").read_text().strip().splitlines()
        assert history[0] == "epoch,train_bce,train_cm,train_total,val_total,train_acc,val_acc"
        run_doc = json.loads((out / "run.json").read_text())
        best_epoch = run_doc["config"]["best_epoch"]
        vals = [float(line.split(",")[4]) for line in history[1:]]
        assert min(vals) == vals[best_epoch]

    def test_lambda_zero_cm_column_zero(self, tmp_path):
        config = {
            "data": {"synthetic": {"train_counts": [40, 40, 20, 20],
                                    "val_counts": [10, 10, 10, 10],
                                    "test_counts": [10, 10, 10, 10], "seed": 1}},
            "train": {"epochs": 5, "batch_size": 16, "lambda": 0.0, "seed": 1},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        out = tmp_path / "run"
        assert run_cli("train", "--config", path, "--out", out) == 0
        history = (out / "history.csv").read_text().strip().splitlines()[1:]
        assert all(float(line.split(",")[2]) == 0.0 for line in history)

    def test_rerun_byte_identical(self, train_setup, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        for out in (out1, out2):
            assert run_cli("train", "--config", train_setup, "--out", out) == 0
        assert (out1 / "checkpoint.json").read_bytes() == (out2 / "checkpoint.json").read_bytes()
        assert (out1 / "history.csv").read_bytes() == (out2 / "history.csv").read_bytes()

    def test_bad_config_exits_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"train": {"epochs": -3}}')
        assert run_cli("train", "--config", path, "--out", tmp_path / "o") == 2
        assert run_cli("train", "--config", tmp_path / "missing.json",
                       "--out", tmp_path / "o") == 2


def feature_file(tmp_path, records):
    path = tmp_path / "features.json"
    path.write_text(json.dumps({"records": records}))
    return path


class TestEvaluateCommand:
    def make_checkpoint(self, train_setup, tmp_path) -> Path:
        out = tmp_path / "trained"
        assert run_cli("train", "--config", train_setup, "--out", out) == 0
        return out / "checkpoint.json"

    def test_feature_evaluation_report(self, train_setup, tmp_path):
        checkpoint = self.make_checkpoint(train_setup, tmp_path)
        rng = np.random.default_rng(0)
        records = []
        for i in range(40):
            label = "fake" if i % 2 else "real"
            records.append(
                {
                    "id": f"e{i}",
                    "x": rng.normal(size=6).tolist(),
                    "label": label,
                    "modality": "image" if i % 4 < 2 else "video",
                    "subset": "a" if i < 20 else "b",
                }
            )
        features = feature_file(tmp_path, records)
        out = tmp_path / "eval"
        assert run_cli("evaluate", "--checkpoint", checkpoint, "--features",
                       features, "--out", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert {r["subset"] for r in report["subsets"]} == {"a", "b"}
        assert (out / "report.csv").is_file()

    def test_video_grouping_and_frames(self, train_setup, tmp_path):
        checkpoint = self.make_checkpoint(train_setup, tmp_path)
        rng = np.random.default_rng(1)
        records = []
        for frame in range(5):
            records.append(
                {
                    "id": f"v0#{frame}",
                    "video_id": "v0",
                    "frame_index": frame,
                    "x": rng.normal(size=6).tolist(),
                    "label": "fake",
                    "modality": "video",
                    "subset": "vids",
                }
            )
        features = feature_file(tmp_path, records)
        out = tmp_path / "eval_video"
        assert run_cli("evaluate", "--checkpoint", checkpoint, "--features",
                       features, "--out", out, "--frames", 3) == 0
        report = json.loads((out / "report.json").read_text())
        row = report["subsets"][0]
        assert row["n_fake"] == 1  # five frames, one video

    def test_aggregation_flag(self, train_setup, tmp_path):
        checkpoint = self.make_checkpoint(train_setup, tmp_path)
        rng = np.random.default_rng(2)
        records = [
            {"id": f"r{i}", "x": rng.normal(size=6).tolist(),
             "label": "fake" if i % 2 else "real",
             "modality": "image", "subset": "only"}
            for i in range(10)
        ]
        features = feature_file(tmp_path, records)
        out = tmp_path / "agg"
        assert run_cli("evaluate", "--checkpoint", checkpoint, "--features",
                       features, "--out", out, "--aggregation", "overall") == 0
        report = json.loads((out / "report.json").read_text())
        assert report["headline"] == "overall"

    def test_unloadable_checkpoint_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert run_cli("evaluate", "--checkpoint", bad,
                       "--features", tmp_path / "f.json",
                       "--out", tmp_path / "o") == 2

    def test_rerun_byte_identical(self, train_setup, tmp_path):
        checkpoint = self.make_checkpoint(train_setup, tmp_path)
        rng = np.random.default_rng(3)
        records = [
            {"id": f"r{i}", "x": rng.normal(size=6).tolist(),
             "label": "fake" if i % 2 else "real",
             "modality": "image", "subset": "s"}
            for i in range(12)
        ]
        features = feature_file(tmp_path, records)
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        for out in (out1, out2):
            assert run_cli("evaluate", "--checkpoint", checkpoint, "--features",
                           features, "--out", out) == 0
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


class TestFeatureFileTraining:
    def separable_records(self, n, seed, subset="train"):
        rng = np.random.default_rng(seed)
        records = []
        for i in range(n):
            label = i % 2
            x = [3.0 if label else -3.0, float(rng.normal())]
            records.append(
                {
                    "id": f"{subset}{i}",
                    "x": x,
                    "label": "fake" if label else "real",
                    "modality": "image" if i % 4 < 2 else "video",
                    "subset": subset,
                }
            )
        return records

    def test_train_from_features_then_evaluate_reaches_full_accuracy(self, tmp_path):
        train_records = self.separable_records(64, 0)
        val_records = self.separable_records(16, 1, subset="val")
        train_f = feature_file(tmp_path, train_records)
        val_f = tmp_path / "val.json"
        val_f.write_text(json.dumps({"records": val_records}))
        config = {
            "data": {"train_features": str(train_f), "val_features": str(val_f)},
            "train": {"epochs": 120, "batch_size": 16, "lambda": 0.0, "seed": 0,
                      "patience": 200},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / "run"
        assert run_cli("train", "--config", cfg_path, "--out", out) == 0
        eval_out = tmp_path / "eval"
        assert run_cli(
            "evaluate", "--checkpoint", out / "checkpoint.json",
            "--features", train_f, "--out", eval_out,
        ) == 0
        report = json.loads((eval_out / "report.json").read_text())
        assert report["overall_pooled"]["acc"] == 1.0

    def test_diverging_training_exits_3(self, tmp_path):
        train_records = self.separable_records(32, 2)
        train_f = feature_file(tmp_path, train_records)
        config = {
            "data": {"train_features": str(train_f), "val_features": str(train_f)},
            "train": {"epochs": 50, "batch_size": 16, "lambda": 0.0, "seed": 0,
                      "lr": 1e12, "patience": 100},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            assert run_cli("train", "--config", cfg_path, "--out", tmp_path / "o") == 3


class TestAnalyzeWithChain:
    def test_rapsd_chain_preprocessing(self, corpus, tmp_path):
        root, manifest = corpus
        from xmodal.codecsim import ChainSpec, GaussianBlurStep

        chain_path = tmp_path / "chain.json"
        chain_path.write_text(ChainSpec((GaussianBlurStep(2.0),)).to_json())
        plain_out = tmp_path / "plain"
        chain_out = tmp_path / "chained"
        assert run_cli("analyze", "rapsd", "--manifest", manifest,
                       "--out", plain_out, "--bins", 12) == 0
        assert run_cli("analyze", "rapsd", "--manifest", manifest,
                       "--out", chain_out, "--bins", 12, "--chain", chain_path,
                       "--seed", 5) == 0
        plain = json.loads((plain_out / "rapsd.summary.json").read_text())
        chained = json.loads((chain_out / "rapsd.summary.json").read_text())
        assert chained["high_band_power"] < plain["high_band_power"]


class TestPartialFailures:
    def broken_corpus(self, tmp_path):
        entries = []
        for i in range(4):
            img = textured_image(seed=300 + i, h=32, w=32)
            p = tmp_path / f"ok_{i}.pgm"
            save_image(img, p)
            entries.append(
                {"id": f"ok{i}", "path": str(p), "label": "real",
                 "modality": "image", "subset": "s"}
            )
        entries.append(
            {"id": "gone", "path": str(tmp_path / "missing.pgm"), "label": "fake",
             "modality": "image", "subset": "s"}
        )
        return write_manifest_file(tmp_path / "m.jsonl", entries)

    def test_analyze_reports_failures_and_exits_zero(self, tmp_path):
        manifest = self.broken_corpus(tmp_path)
        out = tmp_path / "out"
        assert run_cli("analyze", "dct", "--manifest", manifest, "--out", out) == 0
        summary = json.loads((out / "dct.summary.json").read_text())
        assert summary["n_failed"] == 1
        assert summary["failed_ids"] == ["gone"]
        assert summary["n_images"] == 4

    def test_degrade_lists_failures_and_exits_zero(self, tmp_path):
        manifest = self.broken_corpus(tmp_path)
        chain_path = tmp_path / "chain.json"
        from xmodal.codecsim import ChainSpec, JpegSimStep

        chain_path.write_text(ChainSpec((JpegSimStep(90),)).to_json())
        out = tmp_path / "deg"
        assert run_cli("degrade", "--manifest", manifest, "--chain", chain_path,
                       "--out", out, "--seed", 0) == 0
        summary = json.loads((out / "degrade.summary.json").read_text())
        assert summary["n_ok"] == 4
        assert summary["n_failed"] == 1
        assert summary["failures"][0]["id"] == "gone"
        assert len(parse_manifest(out / "manifest.jsonl")) == 4


class TestAnalyzeThreads:
    def test_threaded_load_matches_serial(self, corpus, tmp_path):
        root, manifest = corpus
        serial, threaded = tmp_path / "ser", tmp_path / "thr"
        for out, threads in ((serial, 1), (threaded, 4)):
            assert run_cli("analyze", "luma", "--manifest", manifest, "--out", out,
                           "--threads", threads) == 0
        assert (serial / "luma.csv").read_bytes() == (threaded / "luma.csv").read_bytes()
        a = json.loads((serial / "luma.summary.json").read_text())
        b = json.loads((threaded / "luma.summary.json").read_text())
        assert a == b
