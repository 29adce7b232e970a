"""Command-line driver for the evaluation and counting experiments.

Every subcommand ends by writing machine-readable reports (JSON/CSV)
under --out; a nonzero exit is always accompanied by one JSON error line
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from .counter import (
    CountConfig,
    FrameStream,
    PipelineConfig,
    count_video,
)
from .detection import (
    PyramidConfig,
    SubprocessDetector,
    SubprocessEmbedder,
    detect_multiscale,
    load_detections,
    load_embeddings,
    load_image,
    parse_widerface,
    resize,
)
from .detection.widerface import Blur
from .errors import ConfigError, ParseError
from .geometry import rescale_box
from .matchkit import (
    AugmentationSpec,
    SvmConfig,
    build_positives_from_embeddings,
    calibrate_threshold,
    sample_negatives,
    svm_score,
    train_svm,
    normalize_embedding,
)
from .metrics import EvalReport, evaluate_dataset, match_detections, mean_jaccard

IMAGE_SUFFIXES = (".ppm", ".pnm", ".png", ".jpg", ".jpeg")


# ---------------------------------------------------------------------------
# report output helpers

def _jsonable(value):
    """Keep reports strict JSON: non-finite floats become strings."""
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)  # 'inf', '-inf', 'nan'
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_pr_csv(path: Path, report: EvalReport) -> None:
    _write_csv(path, ["threshold", "precision", "recall"],
               [[p.score_threshold, p.precision, p.recall] for p in report.pr_curve])


def _report_payload(report: EvalReport, warnings: list[str]) -> dict:
    payload = report.to_dict()
    payload["warnings"] = warnings
    return payload


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _map_images(fn, items, workers: int):
    """Order-preserving map, on a thread pool when workers > 1."""
    if workers > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _load_annotations(path: str) -> list[tuple[str, list]]:
    with open(path, encoding="utf-8") as fh:
        return parse_widerface(fh).records


def _pair_images(annotations, detections):
    """Per-image (predictions, ground truth) plus unmatched-id warnings."""
    ann_ids = [image_id for image_id, _ in annotations]
    warnings = []
    overlap = set(ann_ids) & set(detections)
    if not overlap:
        raise ConfigError("annotations and detections share no image ids")
    for image_id in sorted(set(detections) - set(ann_ids)):
        warnings.append(f"detections for unknown image id {image_id!r} ignored")
    for image_id, _ in annotations:
        if image_id not in detections:
            warnings.append(f"no detections for annotated image {image_id!r}")
    per_image = [(detections.get(image_id, []), [a.box for a in anns])
                 for image_id, anns in annotations]
    return per_image, warnings


# ---------------------------------------------------------------------------
# subcommands

def cmd_eval(args) -> int:
    annotations = _load_annotations(args.annotations)
    detections = load_detections(args.detections)
    per_image, warnings = _pair_images(annotations, detections)
    report = evaluate_dataset(per_image, args.iou_threshold, args.ap_mode)

    out = _out_dir(args)
    _write_json(out / "report.json", _report_payload(report, warnings))
    _write_pr_csv(out / "pr_curve.csv", report)

    results = _map_images(lambda pg: match_detections(pg[0], pg[1], args.iou_threshold),
                          per_image, args.workers)
    rows = []
    for (image_id, anns), (preds, gt), result in zip(annotations, per_image, results):
        tp = result.n_true_positives
        rows.append([
            image_id, len(gt), len(preds), tp, len(preds) - tp, len(gt) - tp,
            tp / len(gt) if gt else 0.0, mean_jaccard([result]),
        ])
    _write_csv(out / "per_image.csv",
               ["image", "n_gt", "n_predictions", "tp", "fp", "missed_gt",
                "tp_gt_ratio", "mean_jaccard"], rows)
    return 0


def cmd_study_blur(args) -> int:
    annotations = _load_annotations(args.annotations)
    detections = load_detections(args.detections)
    per_image, warnings = _pair_images(annotations, detections)
    overall = evaluate_dataset(per_image, args.iou_threshold, args.ap_mode)

    heavy_per_image = [
        (detections.get(image_id, []), [a.box for a in anns if a.blur == Blur.HEAVY])
        for image_id, anns in annotations
    ]
    n_heavy = sum(len(gt) for _, gt in heavy_per_image)
    heavy = evaluate_dataset(heavy_per_image, args.iou_threshold, args.ap_mode)

    payload = {
        "all": _report_payload(overall, warnings),
        "heavy_blur": dict(_report_payload(heavy, []), empty_stratum=(n_heavy == 0)),
    }
    out = _out_dir(args)
    _write_json(out / "blur_report.json", payload)
    _write_pr_csv(out / "pr_curve_all.csv", overall)
    _write_pr_csv(out / "pr_curve_heavy.csv", heavy)
    return 0


def _parse_study_scales(text: str) -> list[float]:
    scales = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        value = float(token)
        if value <= 0:
            raise ConfigError(f"study scale must be positive, got {token!r}")
        scales.append(value)
    if not scales:
        raise ConfigError("the study scale list is empty")
    return scales


def _scaled_gt(annotations, scale: float):
    return [(image_id, [rescale_box(a.box, 1.0 / scale) for a in anns])
            for image_id, anns in annotations]


def cmd_study_resolution(args) -> int:
    annotations = _load_annotations(args.annotations)
    scales = _parse_study_scales(args.study_scales)

    stored: dict[float, str] = {}
    for item in args.detections_at or []:
        spec, _, path = item.partition("=")
        if not path:
            raise ConfigError(f"--detections-at expects SCALE=PATH, got {item!r}")
        stored[float(spec)] = path
    live = args.backend_cmd is not None and args.images_dir is not None
    if not stored and not live:
        raise ConfigError("need --detections-at entries or --backend-cmd with --images-dir")

    detector = SubprocessDetector(args.backend_cmd) if live else None
    rows = []
    try:
        for scale in scales:
            if scale in stored:
                detections = load_detections(stored[scale])
            elif live:
                detections = {}
                for image_id, _ in annotations:
                    image = load_image(Path(args.images_dir) / image_id)
                    level = resize(image, scale, args.interpolation)
                    detections[image_id] = detector.detect(level, scale=scale)
            else:
                raise ConfigError(f"no stored detections for scale {scale} "
                                  f"and no live backend")
            per_image = [(detections.get(image_id, []), gt)
                         for image_id, gt in _scaled_gt(annotations, scale)]
            results = [match_detections(p, g, args.iou_threshold) for p, g in per_image]
            n_gt = sum(len(g) for _, g in per_image)
            n_tp = sum(r.n_true_positives for r in results)
            rows.append([
                scale,
                n_tp / n_gt if n_gt else 0.0,
                mean_jaccard(results),
                sum(len(p) for p, _ in per_image),
            ])
    finally:
        if detector is not None:
            detector.close()

    out = _out_dir(args)
    _write_csv(out / "resolution_study.csv",
               ["scale", "tp_gt", "mean_iou", "n_detected"], rows)
    return 0


def cmd_benchmark(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if not isinstance(manifest, list):
        raise ParseError("benchmark manifest must be a JSON list")

    rows = []
    for entry in manifest:
        algorithm = entry.get("algorithm", "?")
        category = entry.get("category", "?")
        try:
            annotations = _load_annotations(entry.get("annotations") or args.annotations)
            if "detections" in entry:
                detections = load_detections(entry["detections"])
                wall_time = entry.get("wall_time_s")
            else:
                with SubprocessDetector(entry["backend_cmd"]) as detector:
                    config = _pyramid_config(args)
                    start = time.perf_counter()
                    detections = {}
                    for image_id, _ in annotations:
                        image = load_image(Path(entry["images_dir"]) / image_id)
                        detections[image_id] = detect_multiscale(image, detector, config)
                    wall_time = time.perf_counter() - start
            per_image, _ = _pair_images(annotations, detections)
            results = [match_detections(p, g, args.iou_threshold) for p, g in per_image]
            n_gt = sum(len(g) for _, g in per_image)
            n_tp = sum(r.n_true_positives for r in results)
            rows.append([algorithm, category, n_tp / n_gt if n_gt else 0.0,
                         "" if wall_time is None else wall_time])
        except (OSError, ParseError, ConfigError, KeyError) as exc:
            print(f"warning: skipping {algorithm}/{category}: {exc}", file=sys.stderr)

    out = _out_dir(args)
    _write_csv(out / "benchmark.csv",
               ["algorithm", "category", "tp_gt", "wall_time_s"], rows)
    return 0


def _pyramid_config(args) -> PyramidConfig:
    k_min, k_max = -2, 1
    if args.scales:
        lo, _, hi = args.scales.partition(":")
        try:
            k_min, k_max = int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"--scales expects K_MIN:K_MAX, got {args.scales!r}") from None
    return PyramidConfig(k_min=k_min, k_max=k_max, max_pixels=args.max_pixels,
                         interpolation=args.interpolation,
                         nms_threshold=args.nms_threshold)


def _list_frames(frames_dir: str) -> list[Path]:
    frames = sorted(p for p in Path(frames_dir).iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not frames:
        raise ConfigError(f"no frame images found in {frames_dir}")
    return frames


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        stride=args.stride,
        threshold=args.threshold,
        seed=args.seed,
        count=CountConfig(neighborhood_px=args.neighborhood,
                          gallery_depth=args.gallery_depth),
        augmentation=AugmentationSpec(seed=args.seed),
        svm=SvmConfig(seed=args.seed),
        workers=args.workers,
    )


def cmd_count(args) -> int:
    config = _pipeline_config(args)
    if args.embeddings:
        faces = load_embeddings(args.embeddings)
        faces_by_frame: dict[int, list] = {}
        for face in faces:
            faces_by_frame.setdefault(face.frame_index, []).append(face)
        if args.frames_dir:
            n_frames = len(_list_frames(args.frames_dir))
        else:
            n_frames = max(faces_by_frame) + 1 if faces_by_frame else 0
        if args.detections:
            _check_embedding_coverage(args, faces_by_frame, n_frames, config.stride)
    elif args.frames_dir and args.backend_cmd and args.embedder_cmd:
        faces_by_frame, n_frames = _live_faces(args)
    else:
        raise ConfigError("count needs --embeddings, or --frames-dir with "
                          "--backend-cmd and --embedder-cmd")
    if n_frames == 0:
        raise ConfigError("no frames to analyze")

    stream = FrameStream(tuple(range(n_frames)))
    report = count_video(faces_by_frame, stream, config)

    out = _out_dir(args)
    _write_json(out / "count_report.json", report.to_dict())
    _write_csv(out / "count_log.csv", ["frame", "detected", "new", "matched"],
               [[f.frame, f.detected, f.new, f.matched] for f in report.frames])
    return 0


def _check_embedding_coverage(args, faces_by_frame, n_frames: int, stride: int) -> None:
    """Every detected box in an analyzed frame must have an embedding record."""
    detections = load_detections(args.detections)
    if args.frames_dir:
        frame_ids = {i: p.name for i, p in enumerate(_list_frames(args.frames_dir))}
    else:
        frame_ids = {i: f"frame_{i:06d}" for i in range(n_frames)}
    for frame in range(0, n_frames, stride):
        boxes = detections.get(frame_ids.get(frame, ""), [])
        have = {(f.box.x, f.box.y, f.box.w, f.box.h)
                for f in faces_by_frame.get(frame, [])}
        for i, det in enumerate(boxes):
            key = (det.box.x, det.box.y, det.box.w, det.box.h)
            if key not in have:
                raise ConfigError(f"no embedding for detected face {i} "
                                  f"in frame {frame}")


def _live_faces(args):
    """Detect and embed faces with live backends over a frame directory."""
    frames = _list_frames(args.frames_dir)
    pyramid = _pyramid_config(args)
    faces_by_frame: dict[int, list] = {}
    needed = set()
    for frame in range(0, len(frames), args.stride):
        needed.update(range(frame, min(frame + 3, len(frames))))  # t, t+1, t+2
    from .detection.raster import crop_box
    from .matchkit import FaceInstance

    with SubprocessDetector(args.backend_cmd) as detector, \
            SubprocessEmbedder(args.embedder_cmd) as embedder:
        for frame in sorted(needed):
            image = load_image(frames[frame])
            detections = detect_multiscale(image, detector, pyramid)
            entries = []
            for i, det in enumerate(detections):
                crop = crop_box(image, det.box)
                vec = embedder.embed(crop)
                entries.append(FaceInstance(
                    frame_index=frame, face_id=f"{frame}:{i}", box=det.box,
                    embedding=vec))
            faces_by_frame[frame] = entries
    return faces_by_frame, len(frames)


def cmd_calibrate(args) -> int:
    faces = load_embeddings(args.embeddings)
    by_key = {(f.frame_index, f.face_id): f for f in faces}
    by_frame: dict[int, list] = {}
    for face in faces:
        by_frame.setdefault(face.frame_index, []).append(face)

    pairs = []
    with open(args.pairs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            for key in ("query_frame", "query_face", "candidate_frame",
                        "candidate_face", "same_person"):
                if key not in obj:
                    raise ParseError(f"pair missing field {key!r}", lineno)
            pairs.append(obj)
    if not pairs:
        raise ConfigError("the labeled pair file is empty")

    config = _pipeline_config(args)
    models = {}
    scored: list[tuple[float, bool]] = []
    for pair in pairs:
        qkey = (pair["query_frame"], pair["query_face"])
        ckey = (pair["candidate_frame"], pair["candidate_face"])
        if qkey not in by_key or ckey not in by_key:
            raise ConfigError(f"pair references unknown face {qkey} or {ckey}")
        query, candidate = by_key[qkey], by_key[ckey]
        if qkey not in models:
            seed = args.seed + 1009 * len(models)
            aug = replace(config.augmentation, seed=seed)
            positives = build_positives_from_embeddings(query, by_frame, aug)
            pool = [f for f in by_frame[query.frame_index]
                    if f.face_id != query.face_id]
            if not pool:
                raise ConfigError(f"no negative pool for face {qkey}")
            draw = sample_negatives(query, pool, n=config.n_negatives, seed=seed)
            models[qkey] = train_svm(positives, draw.embeddings,
                                     replace(config.svm, seed=seed))
        score = svm_score(models[qkey], normalize_embedding(candidate.embedding))
        scored.append((score, bool(pair["same_person"])))

    result = calibrate_threshold(scored)
    warnings = []
    if result.f_half <= 0.5:
        warnings.append(f"weak calibration: best F0.5 is {result.f_half:.4f}")
    if result.threshold in (float("inf"), float("-inf")):
        warnings.append("calibrated threshold is a sentinel; scores do not "
                        "separate the labeled pairs")

    payload = dict(result.to_dict(), warnings=warnings)
    if args.folds > 1:
        payload["cv_f_half"] = _cross_validated_f(scored, args.folds)
    out = _out_dir(args)
    _write_json(out / "calibration.json", payload)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cross_validated_f(scored: list[tuple[float, bool]], folds: int) -> float:
    """Mean held-out F0.5 when the threshold is picked on the other folds."""
    from .metrics import f_beta

    values = []
    for k in range(folds):
        train = [p for i, p in enumerate(scored) if i % folds != k]
        held = [p for i, p in enumerate(scored) if i % folds == k]
        if not held or len({t for _, t in train}) < 2:
            continue
        threshold = calibrate_threshold(train).threshold
        tp = sum(1 for s, t in held if s > threshold and t)
        fp = sum(1 for s, t in held if s > threshold and not t)
        n_true = sum(1 for _, t in held if t)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / n_true if n_true else 0.0
        values.append(f_beta(precision, recall, 0.5))
    return sum(values) / len(values) if values else 0.0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdcount",
        description="Face-detector evaluation and unique-people counting")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, out=True):
        p.add_argument("--iou-threshold", type=float, default=0.5)
        p.add_argument("--ap-mode", choices=["pooled", "per-image-mean"],
                       default="pooled")
        p.add_argument("--nms-threshold", type=float, default=0.3)
        p.add_argument("--scales", help="pyramid exponents as K_MIN:K_MAX")
        p.add_argument("--max-pixels", type=int, default=25_000_000)
        p.add_argument("--interpolation", choices=["nearest", "bilinear"],
                       default="bilinear")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        if out:
            p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate stored detections against ground truth")
    p.add_argument("--annotations", required=True)
    p.add_argument("--detections", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("study-blur", help="all-faces vs heavy-blur-only evaluation")
    p.add_argument("--annotations", required=True)
    p.add_argument("--detections", required=True)
    common(p)
    p.set_defaults(func=cmd_study_blur)

    p = sub.add_parser("study-resolution", help="detection quality per downscale step")
    p.add_argument("--annotations", required=True)
    p.add_argument("--study-scales", default="1,0.5,0.25")
    p.add_argument("--detections-at", action="append", metavar="SCALE=PATH")
    p.add_argument("--images-dir")
    p.add_argument("--backend-cmd")
    common(p)
    p.set_defaults(func=cmd_study_resolution)

    p = sub.add_parser("benchmark", help="compare stored detector outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotations")
    common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("count", help="count unique people across video frames")
    p.add_argument("--embeddings")
    p.add_argument("--detections")
    p.add_argument("--frames-dir")
    p.add_argument("--backend-cmd")
    p.add_argument("--embedder-cmd")
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--neighborhood", type=float, default=600.0)
    p.add_argument("--gallery-depth", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("calibrate", help="pick the match threshold maximizing F0.5")
    p.add_argument("--pairs", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--folds", type=int, default=1)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--neighborhood", type=float, default=600.0)
    p.add_argument("--gallery-depth", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI error contract
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
