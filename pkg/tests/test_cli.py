import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from particul_ood.cli import main
from particul_ood.classifier import forward, init_model
from particul_ood.farc import write_farc
from particul_ood.synth import gen_synth, gen_synth_ood


def tiny_config(tmp_path, **overrides):
    cfg = {
        "out": str(tmp_path / "run"),
        "seed": 0,
        "seeds": 2,
        "dataset": {
            "source": "synthetic",
            "classes": 3,
            "train_per_class": 4,
            "test_per_class": 3,
            "ood_count": 6,
        },
        "classifier": {"epochs": 4, "batch_size": 8},
        "detectors": {"p": 4, "epochs": 5},
        "explain": {"top_k": 2, "samples": 2},
    }
    for key, val in overrides.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def run_cli(*argv):
    return main(list(argv))


class TestConfig:
    def test_print_config_defaults(self, capsys):
        assert run_cli("print-config") == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["detectors"]["p"] == 4
        assert cfg["seeds"] == 3

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        assert run_cli("print-config", "--config", str(path)) == 2

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"not_a_key": 1}))
        assert run_cli("print-config", "--config", str(path)) == 2

    def test_bad_detector_count(self, tmp_path):
        path, _ = tiny_config(tmp_path, detectors={"p": 5})
        assert run_cli("print-config", "--config", str(path)) == 2

    def test_bad_grid(self, tmp_path):
        path, _ = tiny_config(
            tmp_path, perturbations={"grids": {"gaussian_blur": [0.0, 9.0, 10.0]}}
        )
        assert run_cli("print-config", "--config", str(path)) == 2

    def test_identity_only_grid_rejected(self, tmp_path):
        path, _ = tiny_config(
            tmp_path, perturbations={"grids": {"gaussian_noise": [0.0, 0.1]}}
        )
        assert run_cli("print-config", "--config", str(path)) == 2

    def test_missing_config_file(self):
        assert run_cli("print-config", "--config", "/no/such/file.json") == 2

    def test_console_script_installed(self):
        out = subprocess.run(
            [sys.executable, "-m", "particul_ood.cli", "print-config"],
            capture_output=True, text=True,
        )
        assert out.returncode == 0
        assert json.loads(out.stdout)["seeds"] == 3


class TestArtifacts:
    def test_eval_without_artifacts_exits_3(self, tmp_path, capsys):
        path, _ = tiny_config(tmp_path)
        assert run_cli("eval-cross", "--config", str(path)) == 3

    def test_train_detectors_without_classifier_exits_3(self, tmp_path):
        path, _ = tiny_config(tmp_path)
        assert run_cli("gen-data", "--config", str(path)) == 0
        assert run_cli("train-detectors", "--config", str(path)) == 3


class TestGenData:
    def test_writes_images_and_manifests(self, tmp_path):
        path, cfg = tiny_config(tmp_path)
        assert run_cli("gen-data", "--config", str(path)) == 0
        out = cfg["out"]
        for part, count in (("train", 12), ("test", 9), ("ood", 6)):
            manifest = json.loads(open(os.path.join(out, "data", f"{part}.json")).read())
            assert len(manifest["ids"]) == count
            for image_id in manifest["ids"]:
                assert os.path.exists(os.path.join(out, "data", part,
                                                   f"{image_id}.ppm"))

    def test_byte_reproducible(self, tmp_path):
        path, cfg = tiny_config(tmp_path)
        assert run_cli("gen-data", "--config", str(path)) == 0
        target = os.path.join(cfg["out"], "data", "train")
        first = {f: open(os.path.join(target, f), "rb").read()
                 for f in sorted(os.listdir(target))}
        assert run_cli("gen-data", "--config", str(path)) == 0
        second = {f: open(os.path.join(target, f), "rb").read()
                  for f in sorted(os.listdir(target))}
        assert first == second


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("pipeline")
    path, cfg = tiny_config(tmp_path)
    code = run_cli("all", "--config", str(path))
    assert code == 0
    return path, cfg


class TestPipeline:
    def test_reports_exist(self, pipeline_run):
        _, cfg = pipeline_run
        out = cfg["out"]
        for rel in ("reports/cross.csv", "reports/cross.json",
                    "reports/perturb.csv", "reports/perturb.json",
                    "plots/perturb_gaussian_blur.svg",
                    "explain/references.json",
                    "models/classifier.tcnn", "models/ranges.json"):
            assert os.path.exists(os.path.join(out, rel)), rel

    def test_csv_json_agree_field_for_field(self, pipeline_run):
        _, cfg = pipeline_run
        out = cfg["out"]
        for name in ("cross", "perturb"):
            with open(os.path.join(out, "reports", f"{name}.csv")) as f:
                csv_rows = list(csv.DictReader(f))
            with open(os.path.join(out, "reports", f"{name}.json")) as f:
                json_rows = json.load(f)["rows"]
            assert len(csv_rows) == len(json_rows)
            for crow, jrow in zip(csv_rows, json_rows):
                for key, jval in jrow.items():
                    cval = crow[key]
                    if jval is None:
                        assert cval == ""
                    elif isinstance(jval, float):
                        assert float(cval) == jval
                    else:
                        assert cval == str(jval)

    def test_cross_has_all_measures_and_metrics(self, pipeline_run):
        _, cfg = pipeline_run
        with open(os.path.join(cfg["out"], "reports", "cross.csv")) as f:
            rows = list(csv.DictReader(f))
        measures = {r["measure"] for r in rows}
        assert measures == {"vP", "cP", "MCP", "EB", "FNRD"}
        metrics_seen = {r["metric"] for r in rows}
        assert metrics_seen == {"auroc", "aupr", "fpr80"}
        for r in rows:
            assert r["std"] != ""  # two seeds -> a std column

    def test_explain_files_follow_naming(self, pipeline_run):
        _, cfg = pipeline_run
        refs = json.loads(
            open(os.path.join(cfg["out"], "explain", "references.json")).read()
        )["references"]
        assert refs, "no rendered references"
        for ref in refs:
            assert ref["file"] == (
                f"detector_{ref['class']}_{ref['detector']}_{ref['rank']}.ppm"
            )
            assert os.path.exists(os.path.join(cfg["out"], "explain", ref["file"]))

    def test_eval_rerun_byte_identical(self, pipeline_run):
        path, cfg = pipeline_run
        out = cfg["out"]
        files = ["reports/cross.csv", "reports/cross.json",
                 "reports/perturb.csv", "reports/perturb.json",
                 "plots/perturb_gaussian_noise.svg"]
        before = {f: open(os.path.join(out, f), "rb").read() for f in files}
        assert run_cli("eval-cross", "--config", str(path)) == 0
        assert run_cli("eval-perturb", "--config", str(path)) == 0
        after = {f: open(os.path.join(out, f), "rb").read() for f in files}
        assert before == after

    def test_single_seed_has_empty_std(self, tmp_path):
        path, cfg = tiny_config(tmp_path, seeds=1)
        assert run_cli("all", "--config", str(path)) == 0
        with open(os.path.join(cfg["out"], "reports", "cross.csv")) as f:
            rows = list(csv.DictReader(f))
        assert all(r["std"] == "" for r in rows)

    def test_reported_std_is_unbiased(self):
        from particul_ood.pipeline import _mean_std

        mean, std = _mean_std([0.8, 0.9])
        assert mean == pytest.approx(0.85)
        assert std == pytest.approx(np.std([0.8, 0.9], ddof=1))
        assert std != pytest.approx(np.std([0.8, 0.9]))


@pytest.fixture(scope="module")
def archives(tmp_path_factory):
    """Feature archives exported from a seeded toy classifier."""
    tmp_path = tmp_path_factory.mktemp("farc")
    model = init_model(3, seed=0)

    def archive_for(images, labels, name):
        records = []
        for x, label in zip(images, labels):
            fmap, logits = forward(model, x)
            records.append((label, logits.astype(np.float32),
                            fmap.astype(np.float32)))
        path = tmp_path / name
        write_farc(path, records)
        return str(path)

    train_images, train_man = gen_synth(3, 4, seed=0, split="train")
    test_images, test_man = gen_synth(3, 3, seed=0, split="test")
    ood_images, _ = gen_synth_ood(6, seed=0)
    return tmp_path, {
        "train": archive_for(train_images, train_man.labels, "train.farc"),
        "test": archive_for(test_images, test_man.labels, "test.farc"),
        "ood": archive_for(ood_images, [0] * 6, "ood.farc"),
    }


class TestFarcSource:
    def _farc_config(self, tmp_path, archives, **extra):
        cfg = {
            "out": str(tmp_path / "farc-run"),
            "seeds": 1,
            "dataset": {"source": "feature-archive", "archives": archives},
            "detectors": {"p": 4, "epochs": 5},
        }
        cfg.update(extra)
        path = tmp_path / "farc-config.json"
        path.write_text(json.dumps(cfg))
        return path, cfg

    def test_cross_eval_from_archives(self, archives):
        tmp_path, paths = archives
        cfg_path, cfg = self._farc_config(tmp_path, paths)
        assert run_cli("train-detectors", "--config", str(cfg_path)) == 0
        assert run_cli("calibrate", "--config", str(cfg_path)) == 0
        assert run_cli("eval-cross", "--config", str(cfg_path)) == 0
        with open(os.path.join(cfg["out"], "reports", "cross.csv")) as f:
            rows = list(csv.DictReader(f))
        assert {r["measure"] for r in rows} == {"vP", "cP", "MCP", "EB", "FNRD"}

    def test_image_stages_rejected(self, archives):
        tmp_path, paths = archives
        cfg_path, _ = self._farc_config(tmp_path, paths)
        assert run_cli("gen-data", "--config", str(cfg_path)) == 2
        assert run_cli("eval-perturb", "--config", str(cfg_path)) == 2
        assert run_cli("explain", "--config", str(cfg_path)) == 2

    def test_missing_archive_path(self, archives):
        tmp_path, paths = archives
        cfg_path, _ = self._farc_config(
            tmp_path, {"train": paths["train"], "test": "", "ood": paths["ood"]}
        )
        assert run_cli("train-detectors", "--config", str(cfg_path)) == 0
        assert run_cli("calibrate", "--config", str(cfg_path)) == 0
        assert run_cli("eval-cross", "--config", str(cfg_path)) == 2
