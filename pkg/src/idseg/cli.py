"""Command-line front end: ``idseg {synth,train,detect,eval,bench,inspect}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

from . import nn
from .data import (
    TEST_PART,
    TRAIN_PART,
    SynthParams,
    draw_polygon,
    generate_synthetic,
    load_image,
    load_samples,
    read_manifest,
    save_image,
    stack_samples,
)
from .estimator import DocumentDetector
from .evaluation import bench_inference, detect_single, evaluate, iou_thresholds

logger = logging.getLogger("idseg")


class CliError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _bench_iters(text):
    value = int(text)
    if value < 10:
        raise argparse.ArgumentTypeError("--iters must be at least 10")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def _open_fraction(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _max_tolerance(text):
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1), got {text}")
    return value or None  # 0 switches the retry off


def _detect_kwargs(args):
    return {"epsilon_frac": args.epsilon_frac, "max_epsilon_frac": args.max_epsilon_frac}


def _add_detect_flags(p):
    p.add_argument(
        "--epsilon-frac", type=_open_fraction, default=0.02,
        help="contour simplification tolerance as a fraction of its perimeter",
    )
    p.add_argument(
        "--max-epsilon-frac", type=_max_tolerance, default=0.05,
        help="loosen the tolerance up to this fraction for contours with more "
        "than four corners (0 disables)",
    )


def _split(records, part, what):
    chosen = [r for r in records if r.part == part]
    if not chosen:
        raise CliError(f"manifest has no {what} records (part == {part})")
    return chosen


def _load_model(path):
    try:
        return nn.load_model(path)
    except FileNotFoundError:
        raise CliError(f"model file not found: {path}") from None
    except nn.ModelFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_synth(args):
    params = SynthParams(args.train, args.test, args.size, args.seed, args.clutter)
    manifest = generate_synthetic(params, args.out)
    print(manifest)


def cmd_train(args):
    records = read_manifest(args.manifest)
    train_recs = _split(records, TRAIN_PART, "training")
    val_recs = _split(records, TEST_PART, "validation")
    X, y = stack_samples(load_samples(train_recs, args.data_root))
    X_val, y_val = stack_samples(load_samples(val_recs, args.data_root))

    def report(row):
        print(
            f"epoch {row.epoch}/{args.epochs} loss {row.loss:.4f} acc {row.accuracy:.4f} "
            f"val_loss {row.val_loss:.4f} val_acc {row.val_accuracy:.4f} "
            f"val_precision {row.val_precision:.4f} val_recall {row.val_recall:.4f}",
            flush=True,
        )

    est = DocumentDetector(
        epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr, random_state=args.seed
    )
    est.fit(X, y, validation_data=(X_val, y_val), callback=report)
    size = est.save(args.out)
    est.train_log_.write_csv(args.log)
    print(f"wrote {args.out} ({size} bytes) and {args.log}")


def cmd_detect(args):
    model = _load_model(args.model)
    image = load_image(args.image)
    start = time.perf_counter()
    quad, _ = detect_single(model, image, **_detect_kwargs(args))
    latency = (time.perf_counter() - start) * 1e3
    result = {
        "found": quad is not None,
        "quad": None if quad is None else [[float(x), float(y)] for x, y in quad],
        "latency_ms": latency,
    }
    text = json.dumps(result)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if args.overlay:
        overlay = image if quad is None else draw_polygon(image, quad)
        save_image(overlay, args.overlay)


def cmd_eval(args):
    model = _load_model(args.model)
    records = read_manifest(args.manifest)
    test_recs = _split(records, TEST_PART, "test")
    report = evaluate(
        model, test_recs, args.data_root, iou_thresholds(args.iou_step), _detect_kwargs(args)
    )
    with open(args.curve, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "accuracy"])
        for t, acc in report.curve:
            writer.writerow([f"{t:.4f}", repr(acc)])
    acc, prec, rec = report.pixel
    mean, p50, p95 = report.timing
    print(f"images {len(report.detections)} failures {len(report.failures)}")
    print(f"accuracy@IoU0.5 {report.accuracy_at(0.5):.4f} accuracy@IoU0.8 {report.accuracy_at(0.8):.4f}")
    print(f"pixel accuracy {acc:.4f} precision {prec:.4f} recall {rec:.4f}")
    print(f"latency ms mean {mean:.2f} p50 {p50:.2f} p95 {p95:.2f}")
    for rec_, msg in report.failures:
        print(f"failed: {msg}", file=sys.stderr)


def cmd_bench(args):
    model = _load_model(args.model)
    mean, p50, p95 = bench_inference(model, args.size, args.iters)
    print(f"mean_ms {mean:.3f} p50_ms {p50:.3f} p95_ms {p95:.3f}")


def cmd_inspect(args):
    model = _load_model(args.model)
    kinds = {s.name: s.kind for s in model.config.layers}
    print(f"{'layer':<10} {'kind':<12} {'weight shape':<20} {'params':>8}")
    for name, (w, b) in model.params.items():
        shape = "x".join(map(str, w.shape))
        print(f"{name:<10} {kinds[name]:<12} {shape:<20} {w.size + b.size:>8,}")
    size = os.path.getsize(args.model)
    print(f"total parameters {model.param_count:,}")
    print(f"file size {size / 1024:.1f} KiB ({size} bytes)")


def build_parser():
    parser = argparse.ArgumentParser(prog="idseg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--train", type=_non_negative_int, default=512)
    p.add_argument("--test", type=_non_negative_int, default=128)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=_non_negative_int, default=42)
    p.add_argument("--clutter", type=_unit_interval, default=0.5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", required=True)
    p.add_argument("--epochs", type=_positive_int, default=60)
    p.add_argument("--batch", type=_positive_int, default=32)
    p.add_argument("--lr", type=_positive_float, default=0.001)
    p.add_argument("--seed", type=_non_negative_int, default=42)
    p.add_argument("--out", default="model.bin")
    p.add_argument("--log", default="metrics.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect the document in one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--json")
    p.add_argument("--overlay")
    _add_detect_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="accuracy versus IoU threshold on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data-root", required=True)
    p.add_argument("--curve", required=True)
    p.add_argument("--iou-step", type=_positive_float, default=0.05)
    _add_detect_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time single-image inference")
    p.add_argument("--model", required=True)
    p.add_argument("--iters", type=_bench_iters, default=100)
    p.add_argument("--size", type=_positive_int, default=128)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="print the layer table and model size")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (CliError, OSError, ValueError) as exc:
        print(f"idseg {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
