"""Acceptance suite: one PASS/FAIL line per criterion.

Criterion 10 needs an externally converted MIDV-500 tree (PNG frames plus
a manifest with part 1 = train, 2 = test); point ``IDSEG_MIDV500`` at the
directory holding ``manifest.csv`` to run it.

Criteria 6-8 share one end-to-end synthetic run (synth, 30 epochs of
training, eval, bench) that takes roughly a quarter of an hour on one CPU
core; they carry the ``slow`` marker so ``-m "not slow"`` skips them.
"""

import csv
import os
import re

import numpy as np
import pytest

from conftest import document_quad, numeric_grad, random_convex_quad, raster_oracle, rel_error
from idseg import nn
from idseg import tensor as T
from idseg.cli import main
from idseg.data import rasterize_quad
from idseg.geometry import as_quad, exact_iou, extract_contours, quad_iou, raster_iou, select_document_quad
from test_nn import whole_model_check

PUBLISHED_PARAMS = 198_273  # trainable parameters reported for the published model


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}")

    return emit


def _kernel_errors():
    rng = np.random.default_rng(99)
    errors = {}

    def check(name, inputs, forward, backward):
        out = forward()
        g = rng.normal(size=out.shape)
        analytic = backward(g)
        worst = 0.0
        for arr, grad in zip(inputs, analytic):
            num = numeric_grad(lambda: float((forward() * g).sum()), arr)
            worst = max(worst, rel_error(grad, num))
        errors[name] = worst

    for stride in (1, 2):
        x = rng.normal(size=(2, 5, 6, 3))
        w = rng.normal(size=(3, 3, 3, 4))
        b = rng.normal(size=4)
        check(
            f"conv2d s{stride}", (x, w, b),
            lambda: T.conv2d_forward(x, w, b, stride),
            lambda g: T.conv2d_backward(x, w, stride, g),
        )
    x = rng.normal(size=(2, 3, 4, 3))
    w = rng.normal(size=(3, 3, 3, 2))
    b = rng.normal(size=2)
    check("tconv2d", (x, w, b), lambda: T.tconv2d_forward(x, w, b), lambda g: T.tconv2d_backward(x, w, g))
    x = rng.normal(size=(3, 7))
    w = rng.normal(size=(7, 5))
    b = rng.normal(size=5)
    check("dense", (x, w, b), lambda: T.dense_forward(x, w, b), lambda g: T.dense_backward(x, w, g))
    # keep relu probes away from the kink
    x = rng.uniform(0.05, 2, size=(2, 3, 3, 4)) * rng.choice([-1, 1], size=(2, 3, 3, 4))
    check("relu", (x,), lambda: T.relu(x), lambda g: (T.relu_grad(x, g),))
    z = rng.normal(size=(2, 3, 3, 1)) * 3
    check("sigmoid", (z,), lambda: T.sigmoid(z), lambda g: (T.sigmoid_grad(T.sigmoid(z), g),))
    a = rng.normal(size=(1, 2, 2, 3))
    c = rng.normal(size=(1, 2, 2, 2))
    check("concat", (a, c), lambda: T.concat_channels(a, c), lambda g: T.concat_split_grad(g, 3, 2))
    v = rng.normal(size=(2, 5))
    check("broadcast", (v,), lambda: T.broadcast_spatial(v, 3, 4), lambda g: (T.broadcast_spatial_grad(g),))
    p = rng.uniform(0.05, 0.95, size=(2, 4, 4, 1))
    y = (rng.random(p.shape) > 0.5).astype(float)
    num = numeric_grad(lambda: nn.bce_loss(p, y)[0], p, h=1e-5)
    errors["bce"] = rel_error(nn.bce_loss(p, y)[1], num)
    return errors


def test_c1_gradient_correctness(report):
    kernels = _kernel_errors()
    worst_kernel = max(kernels.values())
    model_errors = [whole_model_check(seed)[0] for seed in (0, 3, 7)]
    ok = worst_kernel < 1e-4 and max(model_errors) < 1e-3
    report(
        1, ok,
        f"worst per-kernel rel. error {worst_kernel:.2e} (< 1e-4) over {len(kernels)} kernels, "
        f"whole 16x16 model {max(model_errors):.2e} (< 1e-3)",
    )
    assert ok, kernels


def test_c2_parameter_budget(report, tmp_path, capsys):
    path = tmp_path / "ref.bin"
    nn.save_model(nn.init_model(nn.reference_config(), seed=0), path)
    assert main(["inspect", "--model", str(path)]) == 0
    out = capsys.readouterr().out
    total = int(re.search(r"total parameters ([\d,]+)", out).group(1).replace(",", ""))
    size = path.stat().st_size
    deviation = total / PUBLISHED_PARAMS - 1
    ok = total == 214_593 and abs(deviation) <= 0.20 and size <= 1_048_576
    report(2, ok, f"{total:,} parameters ({deviation:+.1%} vs {PUBLISHED_PARAMS:,}), file {size:,} bytes (<= 1,048,576)")
    assert ok


def test_c3_iou_oracle_equivalence(report):
    rng = np.random.default_rng(2024)
    diffs = []
    for _ in range(200):
        a = random_convex_quad(rng, 0, 100)
        b = random_convex_quad(rng, 0, 100)
        diffs.append(abs(exact_iou(a, b) - raster_iou(a, b)))
    sq = np.array([(0, 0), (10, 0), (10, 10), (0, 10)], float)
    ident, disjoint = quad_iou(sq, sq), quad_iou(sq, sq + 20)
    ok = max(diffs) <= 0.005 and ident == 1.0 and disjoint == 0.0
    report(3, ok, f"max |exact - raster| {max(diffs):.4f} over 200 pairs (<= 0.005), identical {ident}, disjoint {disjoint}")
    assert ok


def test_c4_rasterizer_equivalence(report):
    rng = np.random.default_rng(404)
    mismatched = 0
    for _ in range(100):
        q = random_convex_quad(rng, -4, 68)
        got = rasterize_quad(q, 64, 64)[..., 0] > 0
        mismatched += int(not np.array_equal(got, raster_oracle(q, 64, 64)))
    ok = mismatched == 0
    report(4, ok, f"{100 - mismatched}/100 quads match the point-in-polygon oracle exactly at 64x64")
    assert ok


def test_c5_geometry_recovery(report):
    rng = np.random.default_rng(505)
    worst_err, worst_iou, missing = 0.0, 1.0, 0
    for _ in range(50):
        q = document_quad(rng, 0, 128)
        found = select_document_quad(extract_contours(rasterize_quad(q, 128, 128)[..., 0] > 0), 128, 128)
        if found is None or found.shape != (4, 2):
            missing += 1
            continue
        truth = as_quad(q)
        err = min(np.max(np.hypot(*(np.roll(found, k, axis=0) - truth).T)) for k in range(4))
        worst_err = max(worst_err, err)
        worst_iou = min(worst_iou, quad_iou(found, q))
    ok = missing == 0 and worst_err <= 2 and worst_iou >= 0.95
    report(5, ok, f"{50 - missing}/50 recovered, worst vertex error {worst_err:.2f} px (<= 2), worst IoU {worst_iou:.4f} (>= 0.95)")
    assert ok


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    """synth 512/128 at 128 px, train 30 epochs, eval on the test split."""
    root = tmp_path_factory.mktemp("acceptance")
    data = root / "data"
    assert main(["synth", "--out", str(data), "--train", "512", "--test", "128", "--size", "128", "--seed", "42"]) == 0
    assert main([
        "train", "--manifest", str(data / "manifest.csv"), "--data-root", str(data),
        "--epochs", "30", "--batch", "32", "--lr", "0.001", "--seed", "42",
        "--out", str(root / "model.bin"), "--log", str(root / "metrics.csv"),
    ]) == 0
    return root


def _eval_run(root, capsys):
    capsys.readouterr()
    assert main([
        "eval", "--model", str(root / "model.bin"), "--manifest", str(root / "data" / "manifest.csv"),
        "--data-root", str(root / "data"), "--curve", str(root / "curve.csv"),
    ]) == 0
    out = capsys.readouterr().out
    with open(root / "curve.csv", newline="") as fh:
        curve = [(float(t), float(a)) for t, a in list(csv.reader(fh))[1:]]
    return out, curve


@pytest.mark.slow
def test_c6_end_to_end_synthetic(report, synthetic_run, capsys):
    out, curve = _eval_run(synthetic_run, capsys)
    acc05 = dict(curve)[0.5]
    recall = float(re.search(r"pixel accuracy \S+ precision \S+ recall (\S+)", out).group(1))
    with open(synthetic_run / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    loss1, loss10 = float(rows[0]["loss"]), float(rows[9]["loss"])
    ok = acc05 >= 0.70 and recall >= 0.80 and loss10 < loss1 and len(rows) == 30
    report(
        6, ok,
        f"accuracy@IoU0.5 {acc05:.3f} (>= 0.70), pixel recall {recall:.3f} (>= 0.80), "
        f"loss epoch 1 {loss1:.4f} -> epoch 10 {loss10:.4f}",
    )
    assert ok


@pytest.mark.slow
def test_c7_curve_shape(report, synthetic_run, capsys):
    _, curve = _eval_run(synthetic_run, capsys)
    accs = [a for _, a in curve]
    monotone = all(b <= a for a, b in zip(accs, accs[1:]))
    ok = monotone and curve[0] == (0.0, 1.0) and len(curve) == 20
    shape = " ".join(f"{a:.2f}" for a in accs[::4])
    report(7, ok, f"{len(curve)} thresholds, non-increasing {monotone}, accuracy at 0 = {accs[0]}, samples {shape}")
    assert ok


@pytest.mark.slow
def test_c8_latency(report, synthetic_run, capsys):
    capsys.readouterr()
    assert main(["bench", "--model", str(synthetic_run / "model.bin"), "--iters", "100"]) == 0
    mean, p50, p95 = (float(v) for v in re.findall(r"_ms (\S+)", capsys.readouterr().out))
    ok = mean <= 100
    report(8, ok, f"mean {mean:.2f} ms, p50 {p50:.2f}, p95 {p95:.2f} single-threaded (<= 100 ms; published 8 ms)")
    assert ok


def test_c9_determinism(report, tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data), "--train", "64", "--test", "16", "--seed", "42"]) == 0
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        out.mkdir()
        assert main([
            "train", "--manifest", str(data / "manifest.csv"), "--data-root", str(data),
            "--epochs", "2", "--out", str(out / "model.bin"), "--log", str(out / "metrics.csv"),
        ]) == 0
        outputs.append(((out / "model.bin").read_bytes(), (out / "metrics.csv").read_bytes()))
    same = outputs[0] == outputs[1]
    model = nn.load_model(tmp_path / "a" / "model.bin")
    roundtrip = nn.serialize.dumps(model) == outputs[0][0]
    corrupt = bytearray(outputs[0][0])
    corrupt[len(corrupt) // 2] ^= 1
    try:
        nn.serialize.loads(bytes(corrupt))
        caught = False
    except nn.ChecksumError:
        caught = True
    ok = same and roundtrip and caught
    report(9, ok, f"retrain byte-identical {same}, save/load bit-exact {roundtrip}, corrupted byte rejected {caught}")
    assert ok


@pytest.mark.slow
def test_c10_midv500_optional(report, tmp_path, capsys):
    root = os.environ.get("IDSEG_MIDV500")
    if not root:
        with capsys.disabled():
            print("\nACCEPTANCE 10: SKIP - optional; set IDSEG_MIDV500 to a converted dataset directory")
        pytest.skip("IDSEG_MIDV500 not set")
    manifest = os.path.join(root, "manifest.csv")
    assert main([
        "train", "--manifest", manifest, "--data-root", root, "--epochs", "60",
        "--out", str(tmp_path / "model.bin"), "--log", str(tmp_path / "metrics.csv"),
    ]) == 0
    assert main([
        "eval", "--model", str(tmp_path / "model.bin"), "--manifest", manifest,
        "--data-root", root, "--curve", str(tmp_path / "curve.csv"),
    ]) == 0
    with open(tmp_path / "curve.csv", newline="") as fh:
        acc08 = dict((float(t), float(a)) for t, a in list(csv.reader(fh))[1:])[0.8]
    ok = acc08 >= 0.70
    report(10, ok, f"accuracy@IoU0.8 {acc08:.3f} (>= 0.70; published 0.77)")
    assert ok
