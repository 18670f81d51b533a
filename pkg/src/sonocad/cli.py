"""Command-line front end.

Exit codes: 0 ok, 1 usage error, 2 input parse error, 3 run finished with
case-level failures (recorded in errors.csv).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import features as feat
from . import image, metrics, phantom, pipeline, roi, slic, svm
from .config import PipelineConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_CASE_FAILURES = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_image(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return image.read_pgm(fh.read())


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            return PipelineConfig.from_json(fh.read())
    return PipelineConfig()


def cmd_preprocess(args) -> int:
    img = _read_image(args.input)
    out = image.preprocess(
        img,
        denoise_radius=None if args.no_denoise else args.denoise_radius,
        unsharp_amount=args.unsharp,
    )
    with open(args.output, "wb") as fh:
        fh.write(image.write_pgm(out))
    return EXIT_OK


def cmd_segment(args) -> int:
    img = _read_image(args.input)
    try:
        sx, sy = (int(v) for v in args.seed.split(","))
    except ValueError:
        print(f"error: bad --seed {args.seed!r}, expected X,Y", file=sys.stderr)
        return EXIT_USAGE
    pre = image.preprocess(img)
    labeling = slic.slic(pre, slic.SlicParams(n_segments=args.k))
    threshold = args.threshold if args.threshold is not None else roi.default_threshold(pre)
    mask = roi.grow(pre, labeling, roi.SeedSpec(sx, sy), roi.GrowParams(threshold))
    with open(args.out_mask, "wb") as fh:
        fh.write(roi.mask_to_pgm(mask.mask))
    with open(args.out_contour, "w") as fh:
        fh.write(roi.boundary_to_text(mask.boundary))
    return EXIT_OK


def cmd_features(args) -> int:
    img = _read_image(args.input)
    mask = roi.pgm_to_mask(_read_image(args.mask))
    boundary, perimeter = roi.trace_boundary(mask)
    roi_mask = roi.RoiMask(mask=mask, boundary=boundary, area_px=int(mask.sum()),
                           perimeter=perimeter)
    fv = feat.extract_all(img, roi_mask)
    with open(args.out, "w") as fh:
        fh.write(feat.write_feature_csv([(args.input, fv, args.label)]))
    return EXIT_OK


def _load_features(path: str):
    with open(path) as fh:
        rows = feat.read_feature_csv(fh.read())
    return pipeline.rows_to_matrix(rows)


def cmd_train(args) -> int:
    x, y, _ = _load_features(args.features)
    clf = svm.SmoSVC(c=args.c, kernel=args.kernel, gamma=args.gamma).fit(x, y)
    with open(args.out, "w") as fh:
        fh.write(svm.model_to_json(clf))
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    x, y, ids = _load_features(args.features)
    cfg = _load_config(args)
    result = svm.grid_search(
        x, y, ids, k=args.folds, seed=cfg.seed,
        c_exponents=cfg.c_exponents, g_exponents=cfg.g_exponents, kernel=cfg.kernel,
    )
    with open(args.out, "w") as fh:
        fh.write(result.surface_csv())
    print(f"best c={result.best_c:.6g} gamma={result.best_gamma:.6g} "
          f"cv_accuracy={result.best_accuracy:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with open(args.model) as fh:
        clf = svm.model_from_json(fh.read())
    x, y, ids = _load_features(args.features)
    cfg = PipelineConfig().override(
        folds=args.folds, svm_c=clf.c, kernel=clf.kernel,
        svm_gamma=clf.gamma, svm_coef0=clf.coef0,
    )
    per_fold, curve = pipeline.evaluate_cv(x, y, ids, cfg)
    with open(args.out, "w") as fh:
        fh.write(metrics.report_csv(per_fold))
    if args.roc:
        with open(args.roc, "w") as fh:
            fh.write(metrics.roc_csv(curve))
    print(f"auc={curve.auc:.4f}")
    return EXIT_OK


def cmd_phantom(args) -> int:
    cases = phantom.generate_dataset(
        n_benign=args.benign, n_malignant=args.malignant,
        seed=args.seed, speckle_sigma=args.speckle,
    )
    ann = phantom.write_dataset(cases, args.out_dir)
    print(f"wrote {len(cases)} cases, annotations at {ann}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    summary = pipeline.run_pipeline(args.annotations, cfg, args.out_dir)
    print(json.dumps(summary, indent=2))
    return EXIT_CASE_FAILURES if summary["errors"] else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sonocad",
                     description="Ultrasound tumor segmentation, features and classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="equalize + denoise an image")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--no-denoise", action="store_true")
    p.add_argument("--denoise-radius", type=int, default=1)
    p.add_argument("--unsharp", type=float, default=0.0, metavar="AMT")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("segment", help="extract the ROI from a seed point")
    p.add_argument("input")
    p.add_argument("--seed", required=True, metavar="X,Y")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-contour", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("features", help="feature vector of an image + mask")
    p.add_argument("input"); p.add_argument("mask")
    p.add_argument("--out", required=True)
    p.add_argument("--label", default="unknown")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train an SVM on a feature CSV")
    p.add_argument("features")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kernel", default="rbf", choices=["rbf", "sigmoid", "linear"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gridsearch", help="CV accuracy over the (C, gamma) lattice")
    p.add_argument("features")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("evaluate", help="k-fold evaluation of a trained model's settings")
    p.add_argument("model"); p.add_argument("features")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--roc", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", help="generate a synthetic labeled dataset")
    p.add_argument("--benign", type=int, default=62)
    p.add_argument("--malignant", type=int, default=88)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speckle", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("pipeline", help="run the whole chain from an annotation CSV")
    p.add_argument("--annotations", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except image.PgmParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
