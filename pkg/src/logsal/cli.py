"""Command-line interface: bank export, explainable runs, synthetic
manifests, and metric reports.

Exit codes: 0 ok, 2 usage/input error, 3 data/schema error, 4 internal.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cmrnet, grids, loggabor, metrics
from .pipeline import (ManifestError, PipelineConfig, load_manifest,
                       run_pipeline)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="logsal",
        description="Explainable saliency via log-Gabor reconstruction of "
                    "activation maps.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file of default flag values; explicit "
                             "flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = []

    p = sub.add_parser("bank", help="build and export the filter bank")
    parser.subcommands.append(p)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--orientations", type=int, default=5)
    p.add_argument("--wavelengths", type=int, default=4)
    p.add_argument("--sigmas", type=int, default=4)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("explain", help="run the explainable pipeline")
    parser.subcommands.append(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trace", type=Path, default=None,
                   help="directory for the trace JSON and per-layer PNGs")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--keep", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-12)
    p.add_argument("--blur", type=float, default=0.0)

    p = sub.add_parser("synth", help="generate a synthetic activation "
                                     "manifest with the reference network")
    parser.subcommands.append(p)
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="score prediction maps against ground truth")
    parser.subcommands.append(p)
    p.add_argument("--pred-dir", type=Path, required=True)
    p.add_argument("--gt-map-dir", type=Path, required=True)
    p.add_argument("--fix-dir", type=Path, required=True)
    p.add_argument("--neg-fix", type=Path, default=None,
                   help="fixation file supplying shuffled-AUC negatives")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads (0 = hardware count)")
    return parser


def _cmd_bank(args):
    if args.height < 8 or args.width < 8:
        print(f"error: bank dims must be >= 8, got "
              f"{args.height}x{args.width}", file=sys.stderr)
        return EXIT_USAGE
    params = loggabor.default_bank_params(
        args.orientations, args.wavelengths, args.sigmas)
    bank = loggabor.build_bank(params, args.height, args.width)
    loggabor.save_bank(bank, args.out)
    print(f"wrote {len(bank)} filters to {args.out}")
    return EXIT_OK


def _load_map(path):
    if path.suffix == ".npy":
        t = grids.load_array(path)
        if t.shape[0] != 1:
            raise ValueError(f"{path} holds {t.shape[0]} channels, expected 1")
        return t[0]
    return np.asarray(grids.load_image(path), dtype=np.float64)


def _cmd_explain(args):
    for f in (args.image, args.manifest):
        if not f.exists():
            print(f"error: missing file {f}", file=sys.stderr)
            return EXIT_USAGE
    image = grids.load_image(args.image)
    manifest = load_manifest(args.manifest)
    cfg = PipelineConfig(k_filters=args.k, k_keep=args.keep,
                         epsilon=args.eps, blur_sigma=args.blur)
    lum_shape = image.shape[:2]
    bank = loggabor.build_bank(loggabor.default_bank_params(),
                               lum_shape[0], lum_shape[1])
    trace_images = args.trace / "maps" if args.trace else None
    sal, trace = run_pipeline(image, manifest, bank, cfg,
                              base_dir=args.manifest.parent,
                              trace_images=trace_images)
    grids.save_image(sal, args.out)
    if args.trace:
        args.trace.mkdir(parents=True, exist_ok=True)
        with open(args.trace / "trace.json", "w") as f:
            json.dump(trace, f, indent=2)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_synth(args):
    if not args.image.exists():
        print(f"error: missing file {args.image}", file=sys.stderr)
        return EXIT_USAGE
    image = grids.load_image(args.image)
    weights = cmrnet.synth_weights(args.seed)
    sal, manifest = cmrnet.cmrnet_forward(image, weights, dump_dir=args.out,
                                          image_path=str(args.image))
    grids.save_image(sal, args.out / "reference_saliency.png")
    print(f"wrote {len(manifest.layers)}-layer manifest to "
          f"{args.out / 'manifest.json'}")
    return EXIT_OK


def _eval_one(stem, pred_path, gt_path, fix_path, neg):
    pred = _load_map(pred_path)
    gt = _load_map(gt_path)
    fix = metrics.load_fixations(fix_path)
    if gt.shape != pred.shape:
        pred = grids.resize(pred, gt.shape[0], gt.shape[1], "bilinear")

    def safe(fn, *a):
        # Degenerate inputs (e.g. a constant prediction has no defined CC)
        # must not kill the batch; the row keeps a NaN for that metric.
        try:
            return fn(*a)
        except ValueError:
            return float("nan")

    row = {
        "image": stem,
        "SIM": safe(metrics.sim, pred, gt),
        "CC": safe(metrics.cc, pred, gt),
        "AUC_Judd": safe(metrics.auc_judd, pred, fix),
    }
    if neg is not None:
        row["sAUC"] = safe(metrics.sauc, pred, fix, neg)
    return row


def _cmd_eval(args):
    for d in (args.pred_dir, args.gt_map_dir, args.fix_dir):
        if not d.is_dir():
            print(f"error: missing directory {d}", file=sys.stderr)
            return EXIT_USAGE
    preds = {p.stem: p for p in sorted(args.pred_dir.iterdir())
             if p.suffix in (".png", ".npy")}
    gts = {p.stem: p for p in sorted(args.gt_map_dir.iterdir())
           if p.suffix in (".png", ".npy")}
    fixes = {p.stem: p for p in sorted(args.fix_dir.iterdir())
             if p.suffix == ".json"}
    stems = sorted(set(preds) & set(gts) & set(fixes))
    skipped = sorted((set(preds) | set(gts) | set(fixes)) - set(stems))
    for s in skipped:
        print(f"warning: skipping unmatched stem {s!r}", file=sys.stderr)
    if not stems:
        print("error: no matched prediction/ground-truth/fixation stems",
              file=sys.stderr)
        return EXIT_USAGE
    neg = metrics.load_fixations(args.neg_fix) if args.neg_fix else None
    workers = args.threads if args.threads > 0 else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(
            lambda s: _eval_one(s, preds[s], gts[s], fixes[s], neg), stems))
    fields = ["image", "SIM", "CC", "AUC_Judd"] + (
        ["sAUC"] if neg is not None else [])
    with open(args.out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    summary = {}
    for m in fields[1:]:
        vals = [r[m] for r in rows if not np.isnan(r[m])]
        summary[m] = float(np.mean(vals)) if vals else float("nan")
    summary["images"] = len(rows)
    with open(args.out.with_suffix(".json"), "w") as f:
        json.dump(summary, f, indent=2)
    print(f"wrote {args.out} ({len(rows)} images)")
    return EXIT_OK


_COMMANDS = {
    "bank": _cmd_bank,
    "explain": _cmd_explain,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            with open(args.config) as f:
                defaults = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}",
                  file=sys.stderr)
            return EXIT_USAGE
        parser.set_defaults(**defaults)
        for sub in parser.subcommands:
            known = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in defaults.items()
                                if k in known})
        args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ManifestError as exc:
        layer = f" (layer {exc.layer})" if exc.layer is not None else ""
        print(f"error: {exc}{layer}", file=sys.stderr)
        return EXIT_DATA
    except grids.NpyParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
