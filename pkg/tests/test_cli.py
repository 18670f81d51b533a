import json
import os

import numpy as np
import pytest

from sonocad import image, phantom, roi
from sonocad.cli import main
from sonocad.config import PipelineConfig


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    """A tiny labeled phantom dataset shared across CLI tests."""
    d = tmp_path_factory.mktemp("cases")
    cases = phantom.generate_dataset(4, 4, seed=0, speckle_sigma=0.02)
    phantom.write_dataset(cases, str(d))
    return d


def _first_case(dataset_dir):
    rows = roi.read_annotations((dataset_dir / "annotations.csv").read_text())
    return rows[0]


class TestUsage:
    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self, dataset_dir):
        rec = _first_case(dataset_dir)
        assert main(["segment", str(dataset_dir / rec["image"])]) == 1

    def test_bad_seed_format(self, dataset_dir, tmp_path):
        rec = _first_case(dataset_dir)
        rc = main([
            "segment", str(dataset_dir / rec["image"]), "--seed", "oops",
            "--out-mask", str(tmp_path / "m.pgm"),
            "--out-contour", str(tmp_path / "c.txt"),
        ])
        assert rc == 1

    def test_missing_file_is_parse_error(self, tmp_path):
        rc = main(["preprocess", str(tmp_path / "nope.pgm"), str(tmp_path / "out.pgm")])
        assert rc == 2

    def test_corrupt_pgm_is_parse_error(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P6 not a pgm")
        rc = main(["preprocess", str(bad), str(tmp_path / "out.pgm")])
        assert rc == 2


class TestPreprocess:
    def test_writes_equalized_image(self, dataset_dir, tmp_path):
        rec = _first_case(dataset_dir)
        out = tmp_path / "pre.pgm"
        rc = main(["preprocess", str(dataset_dir / rec["image"]), str(out)])
        assert rc == 0
        img = image.read_pgm(out.read_bytes())
        assert img.shape == (160, 160)


class TestSegment:
    def test_mask_and_contour(self, dataset_dir, tmp_path):
        rec = _first_case(dataset_dir)
        mask_path = tmp_path / "mask.pgm"
        contour_path = tmp_path / "contour.txt"
        rc = main([
            "segment", str(dataset_dir / rec["image"]),
            "--seed", f"{rec['seed_x']},{rec['seed_y']}",
            "--out-mask", str(mask_path), "--out-contour", str(contour_path),
        ])
        assert rc == 0
        mask = roi.pgm_to_mask(image.read_pgm(mask_path.read_bytes()))
        assert mask[rec["seed_y"], rec["seed_x"]]
        lines = contour_path.read_text().strip().split("\n")
        assert len(lines) >= 4
        x, y = lines[0].split()
        assert mask[int(y), int(x)]


class TestFeaturesTrainEvaluate:
    def _features_csv(self, dataset_dir, tmp_path):
        cfg = PipelineConfig().override(
            c_exponents=(0.0, 1.0, 1.0), g_exponents=(0.0, 1.0, 1.0), folds=2
        )
        cfg_path = tmp_path / "feat_cfg.json"
        cfg_path.write_text(cfg.to_json())
        out_dir = tmp_path / "run"
        rc = main([
            "pipeline", "--annotations", str(dataset_dir / "annotations.csv"),
            "--config", str(cfg_path), "--out-dir", str(out_dir),
        ])
        assert rc == 0
        return out_dir / "features.csv"

    def test_features_subcommand(self, dataset_dir, tmp_path):
        rec = _first_case(dataset_dir)
        mask_path = tmp_path / "m.pgm"
        main([
            "segment", str(dataset_dir / rec["image"]),
            "--seed", f"{rec['seed_x']},{rec['seed_y']}",
            "--out-mask", str(mask_path), "--out-contour", str(tmp_path / "c.txt"),
        ])
        out = tmp_path / "fv.csv"
        rc = main([
            "features", str(dataset_dir / rec["image"]), str(mask_path),
            "--out", str(out), "--label", rec["label"],
        ])
        assert rc == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 2
        assert lines[0].startswith("image,ar,rd,cp,")

    def test_train_then_evaluate(self, dataset_dir, tmp_path):
        feats = self._features_csv(dataset_dir, tmp_path)
        model = tmp_path / "model.json"
        rc = main(["train", str(feats), "--c", "4", "--gamma", "0.5",
                   "--out", str(model)])
        assert rc == 0
        assert json.loads(model.read_text())["version"] == 1
        report = tmp_path / "report.csv"
        roc_out = tmp_path / "roc.csv"
        rc = main(["evaluate", str(model), str(feats), "--folds", "2",
                   "--out", str(report), "--roc", str(roc_out)])
        assert rc == 0
        assert report.read_text().startswith("fold,tp,tn,fp,fn")
        assert roc_out.read_text().startswith("fpr,tpr")

    def test_gridsearch(self, dataset_dir, tmp_path):
        feats = self._features_csv(dataset_dir, tmp_path)
        cfg = PipelineConfig().override(
            c_exponents=(0.0, 2.0, 1.0), g_exponents=(-1.0, 1.0, 1.0)
        )
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        surface = tmp_path / "surface.csv"
        rc = main(["gridsearch", str(feats), "--folds", "2",
                   "--config", str(cfg_path), "--out", str(surface)])
        assert rc == 0
        lines = surface.read_text().strip().split("\n")
        assert lines[0] == "log2c,log2g,cv_accuracy"
        assert len(lines) == 1 + 3 * 3


class TestPhantomCommand:
    def test_generates_dataset(self, tmp_path):
        out = tmp_path / "data"
        rc = main(["phantom", "--benign", "2", "--malignant", "3",
                   "--seed", "1", "--out-dir", str(out)])
        assert rc == 0
        rows = roi.read_annotations((out / "annotations.csv").read_text())
        assert len(rows) == 5


class TestPipelineCommand:
    def _run(self, dataset_dir, out_dir, config=None):
        argv = ["pipeline", "--annotations", str(dataset_dir / "annotations.csv"),
                "--out-dir", str(out_dir)]
        if config:
            argv += ["--config", str(config)]
        return main(argv)

    def test_artifacts_written(self, dataset_dir, tmp_path, capsys):
        # shrink the lattice so the run stays fast
        cfg = PipelineConfig().override(
            c_exponents=(0.0, 2.0, 1.0), g_exponents=(-1.0, 1.0, 1.0), folds=2
        )
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        out = tmp_path / "run"
        rc = self._run(dataset_dir, out, cfg_path)
        assert rc == 0
        for name in ("features.csv", "surface.csv", "model.json", "report.csv", "roc.csv"):
            assert (out / name).exists()
        assert not (out / "errors.csv").exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["cases"] == 8
        assert summary["errors"] == 0

    def test_rerun_is_byte_identical(self, dataset_dir, tmp_path):
        cfg = PipelineConfig().override(
            c_exponents=(0.0, 1.0, 1.0), g_exponents=(0.0, 1.0, 1.0), folds=2
        )
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert self._run(dataset_dir, out_a, cfg_path) == 0
        assert self._run(dataset_dir, out_b, cfg_path) == 0
        for name in sorted(os.listdir(out_a)):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_missing_image_reported_and_exit_3(self, dataset_dir, tmp_path):
        broken = tmp_path / "broken"
        broken.mkdir()
        ann = (dataset_dir / "annotations.csv").read_text()
        for name in os.listdir(dataset_dir):
            if name.endswith(".pgm"):
                (broken / name).write_bytes((dataset_dir / name).read_bytes())
        os.remove(broken / _first_case(dataset_dir)["image"])
        (broken / "annotations.csv").write_text(ann)
        cfg = PipelineConfig().override(
            c_exponents=(0.0, 1.0, 1.0), g_exponents=(0.0, 1.0, 1.0), folds=2
        )
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(cfg.to_json())
        out = tmp_path / "run3"
        rc = main(["pipeline", "--annotations", str(broken / "annotations.csv"),
                   "--config", str(cfg_path), "--out-dir", str(out)])
        assert rc == 3
        err_lines = (out / "errors.csv").read_text().strip().split("\n")
        assert err_lines[0] == "case,stage,message"
        assert len(err_lines) == 2
        assert ",read," in err_lines[1]


class TestConfig:
    def test_round_trip(self):
        cfg = PipelineConfig().override(svm_c=3.5, n_segments=40)
        assert PipelineConfig.from_json(cfg.to_json()) == cfg

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_json('{"version": 1, "wat": 2}')

    def test_wrong_version_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_json('{"version": 7}')
