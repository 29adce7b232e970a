"""Acceptance gate: one test per release criterion, tolerances pinned.

Each test prints a `[acceptance] <criterion>: PASS` line when it holds;
a pytest failure marks the criterion red.
"""

import csv
import math
import time

import numpy as np
import pytest

from crowdcount.cli import main
from crowdcount.counter import FrameStream, PipelineConfig, count_accuracy, count_video
from crowdcount.detection.pyramid import PyramidConfig, detect_multiscale
from crowdcount.detection.storage import write_detections
from crowdcount.detection.widerface import parse_widerface, serialize_widerface
from crowdcount.errors import ParseError
from crowdcount.geometry import Box2D, ScoredBox, iou, nms
from crowdcount.matchkit import (
    SvmConfig,
    calibrate_threshold,
    hinge_loss,
    hinge_loss_gradient,
    normalize_embedding,
    svm_score,
    train_svm,
)
from crowdcount.metrics import (
    average_precision,
    evaluate_dataset,
    f_beta,
    pr_curve,
)
from crowdcount.synthetic import SyntheticClipSpec, make_synthetic_clip

from conftest import DATA_DIR, ramp_image


def ok(name):
    print(f"[acceptance] {name}: PASS")


# ---------------------------------------------------------------------------
# criterion: IoU vs pixel-rasterization oracle

def raster_iou(a, b):
    x0, y0 = int(min(a.x, b.x)), int(min(a.y, b.y))
    x1, y1 = int(max(a.x2, b.x2)), int(max(a.y2, b.y2))
    ga = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    gb = np.zeros_like(ga)
    ga[int(a.y) - y0:int(a.y2) - y0, int(a.x) - x0:int(a.x2) - x0] = True
    gb[int(b.y) - y0:int(b.y2) - y0, int(b.x) - x0:int(b.x2) - x0] = True
    return np.logical_and(ga, gb).sum() / np.logical_or(ga, gb).sum()


def test_iou_oracle_equivalence_1000_pairs():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(1000):
        a = Box2D(*(float(v) for v in rng.integers(0, 60, 2)),
                  *(float(v) for v in rng.integers(1, 40, 2)))
        b = Box2D(*(float(v) for v in rng.integers(0, 60, 2)),
                  *(float(v) for v in rng.integers(1, 40, 2)))
        expected = raster_iou(a, b)
        got = iou(a, b)
        if expected == 0.0:
            assert got == 0.0
        else:
            assert abs(got - expected) / expected <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"IoU oracle check took {elapsed:.2f}s"
    ok("iou-rasterization-oracle-1000-pairs")


# ---------------------------------------------------------------------------
# criterion: NMS vs O(n^2) reference

def reference_nms(boxes, threshold):
    def ref_iou(a, b):
        if a == b:
            return 1.0
        iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
        ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return min(inter / (a.w * a.h + b.w * b.h - inter), 1.0)

    remaining = list(enumerate(boxes))
    kept = []
    while remaining:
        best = max(remaining, key=lambda pair: (pair[1].score, -pair[0]))
        kept.append(best[1])
        remaining = [(i, sb) for i, sb in remaining
                     if i != best[0] and ref_iou(sb.box, best[1].box) <= threshold]
    return kept


def test_nms_reference_equivalence_500_sets():
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    for _ in range(500):
        n = int(rng.integers(0, 13))
        boxes = [
            ScoredBox(Box2D(float(rng.uniform(0, 80)), float(rng.uniform(0, 80)),
                            float(rng.uniform(1, 40)), float(rng.uniform(1, 40))),
                      float(np.round(rng.uniform(0, 1), 3)))
            for _ in range(n)
        ]
        threshold = float(rng.uniform(0, 1))
        got = nms(boxes, threshold)
        expected = reference_nms(boxes, threshold)
        key = lambda sb: (sb.score, sb.box.x, sb.box.y, sb.box.w, sb.box.h)
        assert sorted(got, key=key) == sorted(expected, key=key)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"NMS reference check took {elapsed:.2f}s"
    ok("nms-reference-equivalence-500-sets")


# ---------------------------------------------------------------------------
# criterion: AP on the fixed fixtures

def sweep_oracle_ap(per_image, iou_threshold=0.5):
    def oracle_iou(a, b):
        iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
        ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        return inter / (a.w * a.h + b.w * b.h - inter)

    def greedy(preds, gts, threshold):
        taken = [False] * len(gts)
        matched = 0
        for pi in sorted(range(len(preds)), key=lambda i: (-preds[i].score, i)):
            ious = [(-1.0 if taken[g] else oracle_iou(preds[pi].box, gts[g]))
                    for g in range(len(gts))]
            if ious and max(ious) > threshold:
                taken[ious.index(max(ious))] = True
                matched += 1
        return matched

    total_gt = sum(len(g) for _, g in per_image)
    points = []
    for thr in sorted({p.score for preds, _ in per_image for p in preds}, reverse=True):
        tp = kept = 0
        for preds, gts in per_image:
            surviving = [p for p in preds if p.score >= thr]
            kept += len(surviving)
            tp += greedy(surviving, gts, iou_threshold)
        points.append((tp / total_gt, tp / kept if kept else 0.0))
    points.sort(key=lambda rp: -rp[0])
    area, best = 0.0, 0.0
    for i, (recall, precision) in enumerate(points):
        best = max(best, precision)
        lower = points[i + 1][0] if i + 1 < len(points) else 0.0
        area += (recall - lower) * best
    return area


def test_ap_fixture_values():
    three_score = [(
        [ScoredBox(Box2D(0, 0, 10, 10), 0.9),
         ScoredBox(Box2D(200, 200, 10, 10), 0.8),
         ScoredBox(Box2D(50, 50, 10, 10), 0.7)],
        [Box2D(0, 0, 10, 10), Box2D(50, 50, 10, 10)],
    )]
    ap = average_precision(pr_curve(three_score))
    assert abs(ap - (0.5 * 1.0 + 0.5 * (2 / 3))) <= 1e-9
    assert abs(ap - sweep_oracle_ap(three_score)) <= 1e-9

    perfect = [([ScoredBox(Box2D(0, 0, 10, 10), 1.0)], [Box2D(0, 0, 10, 10)]),
               ([ScoredBox(Box2D(5, 5, 8, 8), 1.0)], [Box2D(5, 5, 8, 8)])]
    report = evaluate_dataset(perfect)
    assert report.average_precision == 1.0
    assert report.tp_gt_ratio == 1.0
    assert report.mean_jaccard == 1.0
    ok("ap-fixture-values")


# ---------------------------------------------------------------------------
# criterion: F-beta arithmetic

def test_f_beta_values_and_harmonic_identity():
    expected = (1.25 * 0.8 * 0.4) / (0.25 * 0.8 + 0.4)  # = 0.4/0.6 = 0.6667 (4 d.p.)
    assert abs(f_beta(0.8, 0.4, 0.5) - expected) <= 1e-12
    assert abs(f_beta(0.8, 0.4, 0.5) - 2 / 3) <= 1e-12
    rng = np.random.default_rng(11)
    for _ in range(100):
        p, r = rng.uniform(0.001, 1.0, 2)
        assert abs(f_beta(p, r, 1.0) - 2 * p * r / (p + r)) <= 1e-12
    ok("f-beta-arithmetic")


# ---------------------------------------------------------------------------
# criterion: SVM gradient, separability, determinism

def test_svm_gradient_separability_determinism():
    rng = np.random.default_rng(12)
    lam = 0.01
    checked = 0
    while checked < 100:
        X = rng.normal(size=(10, 128))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        y = np.where(rng.uniform(size=10) < 0.5, 1.0, -1.0)
        w = rng.normal(scale=0.5, size=128)
        b = float(rng.normal(scale=0.5))
        if np.min(np.abs(1.0 - y * (X @ w + b))) < 1e-3:
            continue  # too close to a hinge kink for finite differences
        # relative error where the gradient has size; the 1e-3 floor turns
        # the check absolute (1e-7) for exact-zero gradients, where central
        # differences only return rounding noise (~1e-10)
        h = 1e-6
        grad_w, grad_b = hinge_loss_gradient(w, b, X, y, lam)
        for j in rng.choice(128, size=4, replace=False):
            step = np.zeros(128)
            step[j] = h
            fd = (hinge_loss(w + step, b, X, y, lam)
                  - hinge_loss(w - step, b, X, y, lam)) / (2 * h)
            denom = max(abs(fd), abs(grad_w[j]), 1e-3)
            assert abs(grad_w[j] - fd) / denom <= 1e-4
        fd_b = (hinge_loss(w, b + h, X, y, lam)
                - hinge_loss(w, b - h, X, y, lam)) / (2 * h)
        assert abs(grad_b - fd_b) / max(abs(fd_b), abs(grad_b), 1e-3) <= 1e-4
        checked += 1

    center = normalize_embedding(rng.normal(size=128))
    positives = [normalize_embedding(center + rng.normal(0, 0.05, 128))
                 for _ in range(10)]
    negatives = [normalize_embedding(-center + rng.normal(0, 0.05, 128))
                 for _ in range(10)]
    model = train_svm(positives, negatives, SvmConfig(epochs=200, seed=0))
    assert all(svm_score(model, p) > 0 for p in positives)
    assert all(svm_score(model, n) < 0 for n in negatives)

    again = train_svm(positives, negatives, SvmConfig(epochs=200, seed=0))
    assert np.array_equal(model.weights, again.weights)
    assert model.bias == again.bias
    ok("svm-gradient-separability-determinism")


# ---------------------------------------------------------------------------
# criterion: threshold calibration vs dense grid scan

def grid_scan_best_f(labeled, n_grid=10_000):
    scores = [s for s, _ in labeled]
    n_true = sum(1 for _, t in labeled if t)
    best = 0.0
    grid = list(np.linspace(min(scores) - 1.0, max(scores) + 1.0, n_grid))
    for thr in grid + [-math.inf, math.inf]:
        tp = sum(1 for s, t in labeled if s > thr and t)
        fp = sum(1 for s, t in labeled if s > thr and not t)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / n_true
        f = 1.25 * p * r / (0.25 * p + r) if p + r > 0 else 0.0
        best = max(best, f)
    return best


def test_calibration_matches_grid_scan_100_sets():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        scores = np.round(rng.uniform(-3, 3, n), 2)
        labels = rng.uniform(size=n) < 0.5
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        labeled = [(float(s), bool(t)) for s, t in zip(scores, labels)]
        result = calibrate_threshold(labeled)
        assert abs(result.f_half - grid_scan_best_f(labeled)) <= 1e-12
    ok("calibration-grid-scan-100-sets")


# ---------------------------------------------------------------------------
# criterion: end-to-end synthetic counting, 100 seeded runs

def test_synthetic_counting_100_runs():
    start = time.perf_counter()
    exact = 0
    for seed in range(100):
        clip = make_synthetic_clip(SyntheticClipSpec(seed=seed))
        stream = FrameStream(tuple(range(clip.spec.n_frames)))
        report = count_video(clip.faces_by_frame, stream, PipelineConfig(seed=seed))
        detected = clip.detected_in_analyzed()
        assert clip.n_identities <= report.total <= detected, (
            f"seed {seed}: count {report.total} outside [{clip.n_identities}, {detected}]")
        if report.total == clip.n_identities:
            exact += 1
    elapsed = time.perf_counter() - start
    assert exact >= 95, f"only {exact}/100 runs counted exactly"
    assert elapsed < 60.0, f"100 counting runs took {elapsed:.1f}s"
    ok(f"synthetic-counting-100-runs ({exact}/100 exact, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion: count accuracy arithmetic

def test_count_accuracy_table_values():
    assert count_accuracy(141, 139) == 98.6
    assert count_accuracy(156, 148) == 94.6
    assert round(count_accuracy(156, 148)) == 95
    assert int(count_accuracy(141, 139)) == 98
    ok("count-accuracy-table-arithmetic")


# ---------------------------------------------------------------------------
# criterion: resolution study monotone tp_gt

def test_resolution_study_monotonicity(tmp_path):
    boxes = [(i * 50, 30, 24, 24) for i in range(8)]
    lines = ["study.jpg", "8"] + [f"{x} {y} {w} {h} 0 0 0 0 0 0" for x, y, w, h in boxes]
    ann = tmp_path / "gt.txt"
    ann.write_text("\n".join(lines) + "\n", encoding="utf-8")

    args = ["study-resolution", "--annotations", str(ann),
            "--study-scales", "1,0.5,0.25", "--out", str(tmp_path / "out")]
    for scale, keep in ((1.0, 8), (0.5, 4), (0.25, 2)):  # recall halves per step
        dets = [ScoredBox(Box2D(x * scale, y * scale, w * scale, h * scale), 1.0)
                for x, y, w, h in boxes[:keep]]
        path = tmp_path / f"dets_{scale}.jsonl"
        write_detections(path, {"study.jpg": dets})
        args += ["--detections-at", f"{scale}={path}"]
    assert main(args) == 0

    with open(tmp_path / "out" / "resolution_study.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["1.0", "0.5", "0.25"]
    tp_gt = [float(r[1]) for r in rows[1:]]
    assert all(a > b for a, b in zip(tp_gt, tp_gt[1:])), tp_gt
    ok("resolution-study-monotone-tp-gt")


# ---------------------------------------------------------------------------
# criterion: single-scale pyramid is a pass-through

def test_pyramid_identity_50_cases():
    rng = np.random.default_rng(14)
    config = PyramidConfig(k_min=0, k_max=0, nms_threshold=1.0)

    class Stub:
        name = "stub"
        version = "test"

        def __init__(self, boxes):
            self.boxes = boxes

        def detect(self, image, scale=1.0):
            return list(self.boxes)

    for _ in range(50):
        width = int(rng.integers(40, 200))
        height = int(rng.integers(40, 200))
        boxes = []
        n = int(rng.integers(0, 8))
        scores = -np.sort(-rng.uniform(0, 1, n))  # distinct descending scores
        for score in scores:
            w = float(rng.uniform(1, width / 2))
            h = float(rng.uniform(1, height / 2))
            x = float(rng.uniform(0, width - w))
            y = float(rng.uniform(0, height - h))
            boxes.append(ScoredBox(Box2D(x, y, w, h), float(score)))
        result = detect_multiscale(ramp_image(width, height), Stub(boxes), config)
        assert result == boxes
    ok("pyramid-identity-50-cases")


# ---------------------------------------------------------------------------
# criterion: WIDERFACE parser golden round trip and error reporting

def test_widerface_golden_round_trip_and_errors():
    text = (DATA_DIR / "widerface_gt.txt").read_text(encoding="utf-8")
    parsed = parse_widerface(text.splitlines(keepends=True))
    assert len(parsed.records) == 10
    assert serialize_widerface(parsed.records) == text

    with pytest.raises(ParseError) as short:
        parse_widerface(["a.jpg\n", "2\n", "1 1 5 5 0 0 0 0 0 0\n"])
    assert short.value.line_number == 4

    with pytest.raises(ParseError) as badcount:
        parse_widerface(["a.jpg\n", "x\n"])
    assert badcount.value.line_number == 2

    with pytest.raises(ParseError) as badfields:
        parse_widerface(["a.jpg\n", "1\n", "1 2 3\n"])
    assert badfields.value.line_number == 3
    ok("widerface-golden-round-trip")
