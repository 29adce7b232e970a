"""Frame sampling and incremental unique-person counting.

Each analyzed frame's faces get their own one-vs-all SVMs and query the
gallery (the faces of the previous analyzed frame); faces whose best
gallery candidate clears the threshold are "already seen", the rest are
new, and the unique-person total is the running sum of new faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .matchkit import (
    AugmentationSpec,
    FaceInstance,
    LinearSVM,
    SvmConfig,
    build_positives_from_embeddings,
    match_face,
    normalize_embedding,
    sample_negatives,
    train_svm,
)


@dataclass(frozen=True)
class FrameStream:
    frame_indices: tuple[int, ...]
    fps: float = 25.0
    loader: Optional[Callable[[int], object]] = None

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.frame_indices, self.frame_indices[1:])):
            raise ValueError("frame indices must be strictly increasing")


@dataclass(frozen=True)
class FrameLog:
    frame: int
    detected: int
    new: int
    matched: int


@dataclass(frozen=True, eq=False)
class TrackedFace:
    face: FaceInstance
    model: LinearSVM


@dataclass(frozen=True, eq=False)
class CountState:
    gallery: tuple[tuple[TrackedFace, ...], ...] = ()  # most recent frame last
    running_total: int = 0
    log: tuple[FrameLog, ...] = ()


@dataclass(frozen=True)
class CountConfig:
    neighborhood_px: float = 600.0
    gallery_depth: int = 1  # how many analyzed frames the gallery retains

    def __post_init__(self):
        if self.gallery_depth < 1:
            raise ValueError("gallery_depth must be >= 1")
        if self.neighborhood_px <= 0:
            raise ValueError("neighborhood_px must be positive")


def sample_frames(stream: FrameStream, stride: int) -> list[int]:
    """Every stride-th frame of the stream, starting at the first."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return [idx for pos, idx in enumerate(stream.frame_indices) if pos % stride == 0]


def update_count(state: CountState, frame_index: int,
                 frame_faces: Sequence[TrackedFace], threshold: float,
                 config: CountConfig = CountConfig()) -> CountState:
    """Fold one analyzed frame's faces into the count.

    Every face queries the pooled gallery with its own model; accepted
    matches are applied greedily by descending score with each gallery
    face claimable at most once, and whatever stays unmatched counts as
    a new person. The gallery then advances to this frame's faces.
    """
    candidates = [entry.face for frame in state.gallery for entry in frame]
    decisions = []
    for tracked in frame_faces:
        decision = match_face(tracked.face, tracked.model, candidates,
                              neighborhood_px=config.neighborhood_px,
                              threshold=threshold)
        decisions.append(decision)

    claimed: set[int] = set()
    matched = 0
    order = sorted(range(len(decisions)), key=lambda i: -decisions[i].score)
    for i in order:
        decision = decisions[i]
        if not decision.accepted:
            continue
        key = id(decision.best_candidate)
        gallery_index = next((gi for gi, face in enumerate(candidates)
                              if id(face) == key), None)
        if gallery_index is None or gallery_index in claimed:
            continue
        claimed.add(gallery_index)
        matched += 1

    new = len(frame_faces) - matched
    entry = FrameLog(frame=frame_index, detected=len(frame_faces), new=new, matched=matched)
    gallery = (state.gallery + (tuple(frame_faces),))[-config.gallery_depth:]
    return CountState(
        gallery=gallery,
        running_total=state.running_total + new,
        log=state.log + (entry,),
    )


def final_count(state: CountState) -> tuple[int, tuple[FrameLog, ...]]:
    if not state.log:
        raise ValueError("no frames were processed")
    return state.running_total, state.log


def count_accuracy(predicted: int, ground_truth: int) -> float:
    """100*(1 - |predicted - truth|/truth), floored at 0, one decimal."""
    if ground_truth < 1:
        raise ValueError("ground_truth must be >= 1")
    value = 100.0 * (1.0 - abs(predicted - ground_truth) / ground_truth)
    return round(max(value, 0.0), 1)


# ---------------------------------------------------------------------------
# end-to-end pipeline over stored embeddings

@dataclass(frozen=True)
class PipelineConfig:
    stride: int = 10
    threshold: float = 0.0
    seed: int = 0
    n_negatives: int = 10
    count: CountConfig = field(default_factory=CountConfig)
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    svm: SvmConfig = field(default_factory=SvmConfig)
    jitter_sigma: float = 0.01
    propagation_radius_px: float = 60.0
    workers: int = 1  # per-face training threads within one frame


@dataclass
class CountReport:
    total: int
    frames: list[FrameLog]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "frames": [{"frame": f.frame, "detected": f.detected,
                        "new": f.new, "matched": f.matched} for f in self.frames],
        }


def _face_seed(base_seed: int, frame_index: int, position: int) -> int:
    # stable per-face seed stream so runs are reproducible end to end
    return int(np.random.SeedSequence([base_seed, frame_index, position]).generate_state(1)[0])


def _negative_pool(face: FaceInstance, same_frame: Sequence[FaceInstance],
                   previous_frame: Sequence[FaceInstance], n: int,
                   neighborhood_px: float) -> list[FaceInstance]:
    """Same-frame faces first; top up from the previous analyzed frame with
    faces outside the matching neighborhood (those cannot be this person
    as far as matching is concerned)."""
    pool = [f for f in same_frame
            if not (f.frame_index == face.frame_index and f.face_id == face.face_id)]
    if len(pool) < n:
        half = neighborhood_px / 2.0
        qx, qy = face.box.center
        for other in previous_frame:
            ox, oy = other.box.center
            if abs(ox - qx) > half or abs(oy - qy) > half:
                pool.append(other)
    return pool


def train_frame_models(faces: Sequence[FaceInstance],
                       faces_by_frame: Mapping[int, Sequence[FaceInstance]],
                       previous_frame: Sequence[FaceInstance],
                       config: PipelineConfig) -> list[TrackedFace]:
    """One-vs-all SVM per face of one analyzed frame, from stored embeddings.

    Models are independent given the (read-only) frame records, so with
    config.workers > 1 they train on a thread pool; the per-face seeds
    make the result identical either way.
    """
    def train_one(position: int, face: FaceInstance) -> TrackedFace:
        seed = _face_seed(config.seed, face.frame_index, position)
        aug = replace(config.augmentation, seed=seed)
        positives = build_positives_from_embeddings(
            face, faces_by_frame, aug,
            jitter_sigma=config.jitter_sigma,
            propagation_radius_px=config.propagation_radius_px)
        pool = _negative_pool(face, faces, previous_frame, config.n_negatives,
                              config.count.neighborhood_px)
        if not pool:
            # nothing to contrast against: a unit model scores cosine-like
            model = LinearSVM(weights=normalize_embedding(face.embedding), bias=-0.5,
                              config=config.svm, loss_history=np.zeros(1))
        else:
            draw = sample_negatives(face, pool, n=config.n_negatives, seed=seed)
            model = train_svm(positives, draw.embeddings, replace(config.svm, seed=seed))
        return TrackedFace(face=face, model=model)

    if config.workers > 1 and len(faces) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool_exec:
            return list(pool_exec.map(train_one, range(len(faces)), faces))
    return [train_one(i, face) for i, face in enumerate(faces)]


def count_video(faces_by_frame: Mapping[int, Sequence[FaceInstance]],
                stream: FrameStream,
                config: PipelineConfig = PipelineConfig()) -> CountReport:
    """Count unique people over the analyzed frames of a clip."""
    analyzed = sample_frames(stream, config.stride)
    state = CountState()
    previous: list[FaceInstance] = []
    for frame_index in analyzed:
        faces = list(faces_by_frame.get(frame_index, ()))
        tracked = train_frame_models(faces, faces_by_frame, previous, config)
        state = update_count(state, frame_index, tracked, config.threshold, config.count)
        previous = faces
    total, log = final_count(state)
    return CountReport(total=total, frames=list(log))
