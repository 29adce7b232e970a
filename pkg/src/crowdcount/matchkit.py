"""Face identity matching across frames.

Per query face, a linear SVM is trained one-vs-all: positives are
augmented views of the face (the same box cropped from the next frames,
plus photometric noise), negatives are other faces. Candidates from
another frame are scored with the signed decision value and the best one
is accepted when it clears a calibrated threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Protocol, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError
from .geometry import Box2D, center_distance
from .metrics import f_beta

EMBED_DIM = 128


def normalize_embedding(vec: np.ndarray) -> np.ndarray:
    """Return the unit-L2 copy of a 128-d embedding."""
    values = np.asarray(vec, dtype=np.float64)
    if values.shape != (EMBED_DIM,):
        raise ValueError(f"embedding must have shape ({EMBED_DIM},), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("embedding must be finite")
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero embedding")
    return values / norm


@dataclass(frozen=True, eq=False)
class FaceInstance:
    frame_index: int
    face_id: str
    box: Box2D
    embedding: Optional[np.ndarray] = None
    identity_label: Optional[str] = None


class EmbedderBackend(Protocol):
    name: str
    version: str

    def embed(self, image) -> np.ndarray: ...


FrameAccessor = Callable[[int], "object | None"]  # frame index -> ImageRaster or None


# ---------------------------------------------------------------------------
# training-set construction

@dataclass(frozen=True)
class AugmentationSpec:
    propagate_frames: int = 2
    gaussian_sigma: float = 5.0        # pixel-value units on the 0..255 range
    channel_shift_max: int = 10
    target_positives: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.propagate_frames < 0:
            raise ConfigError("propagate_frames must be >= 0")
        if self.target_positives < 1 + self.propagate_frames:
            raise ConfigError("target_positives must be >= 1 + propagate_frames")
        if self.gaussian_sigma < 0 or self.channel_shift_max < 0:
            raise ConfigError("augmentation magnitudes must be non-negative")


def augment_crop(image, rng: np.random.Generator, spec: AugmentationSpec):
    """Photometric augmentation: Gaussian pixel noise plus a per-channel shift."""
    from .detection.raster import ImageRaster  # local import, package cycle

    pixels = image.pixels.astype(np.float64)
    pixels += rng.normal(0.0, spec.gaussian_sigma, size=pixels.shape)
    pixels += rng.integers(-spec.channel_shift_max, spec.channel_shift_max + 1, size=3)
    return ImageRaster(np.clip(np.floor(pixels + 0.5), 0, 255).astype(np.uint8))


def build_positives(face: FaceInstance, frames: FrameAccessor, spec: AugmentationSpec,
                    embedder: EmbedderBackend) -> list[np.ndarray]:
    """Positive training embeddings for one face (unit-normalized).

    Base crops use the face's box in its own frame and the next
    `propagate_frames` frames; missing frames near the clip end are made up
    for with extra augmented copies so exactly `target_positives`
    embeddings come back. Deterministic under a fixed spec seed.
    """
    from .detection.raster import crop_box  # local import, package cycle

    base_crops = []
    for offset in range(spec.propagate_frames + 1):
        frame = frames(face.frame_index + offset)
        if frame is None:
            if offset == 0:
                raise ValueError(f"frame {face.frame_index} is not available")
            continue
        base_crops.append(crop_box(frame, face.box))

    rng = np.random.default_rng(spec.seed)
    embeddings = [normalize_embedding(embedder.embed(crop)) for crop in base_crops]
    k = 0
    while len(embeddings) < spec.target_positives:
        augmented = augment_crop(base_crops[k % len(base_crops)], rng, spec)
        embeddings.append(normalize_embedding(embedder.embed(augmented)))
        k += 1
    return embeddings


def build_positives_from_embeddings(
        face: FaceInstance,
        faces_by_frame: Mapping[int, Sequence[FaceInstance]],
        spec: AugmentationSpec,
        jitter_sigma: float = 0.01,
        propagation_radius_px: float = 60.0) -> list[np.ndarray]:
    """Positive set when only stored embeddings are available (no pixels).

    Box propagation picks, in each of the next `propagate_frames` frames,
    the stored face whose box center is nearest to the query's (within
    `propagation_radius_px`); the remaining slots are filled with
    unit-renormalized Gaussian jitter around the base embeddings.
    """
    if face.embedding is None:
        raise ValueError(f"face {face.face_id!r} carries no embedding")
    bases = [normalize_embedding(face.embedding)]
    for offset in range(1, spec.propagate_frames + 1):
        candidates = [c for c in faces_by_frame.get(face.frame_index + offset, ())
                      if c.embedding is not None]
        if not candidates:
            continue
        nearest = min(candidates, key=lambda c: center_distance(c.box, face.box))
        if center_distance(nearest.box, face.box) <= propagation_radius_px:
            bases.append(normalize_embedding(nearest.embedding))

    rng = np.random.default_rng(spec.seed)
    embeddings = list(bases)
    k = 0
    while len(embeddings) < spec.target_positives:
        jittered = bases[k % len(bases)] + rng.normal(0.0, jitter_sigma, EMBED_DIM)
        embeddings.append(normalize_embedding(jittered))
        k += 1
    return embeddings[:spec.target_positives]


@dataclass(frozen=True)
class NegativeDraw:
    embeddings: list[np.ndarray]
    with_replacement: bool


def sample_negatives(face: FaceInstance, pool: Sequence[FaceInstance],
                     n: int = 10, seed: int = 0) -> NegativeDraw:
    """Draw `n` negative embeddings from other faces, without replacement
    when the pool is large enough (the fallback is flagged)."""
    if not pool:
        raise ValueError("negative pool is empty")
    for other in pool:
        if other.frame_index == face.frame_index and other.face_id == face.face_id:
            raise ValueError("negative pool must exclude the query face")
    rng = np.random.default_rng(seed)
    with_replacement = len(pool) < n
    indices = rng.choice(len(pool), size=n, replace=with_replacement)
    embeddings = []
    for i in indices:
        emb = pool[int(i)].embedding
        if emb is None:
            raise ValueError(f"pool face {pool[int(i)].face_id!r} carries no embedding")
        embeddings.append(normalize_embedding(emb))
    return NegativeDraw(embeddings, with_replacement)


# ---------------------------------------------------------------------------
# linear SVM on the hinge loss

@dataclass(frozen=True)
class SvmConfig:
    lam: float = 0.01      # L2 regularization strength
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError("lam must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


@dataclass(frozen=True, eq=False)
class LinearSVM:
    weights: np.ndarray
    bias: float
    config: SvmConfig
    loss_history: np.ndarray  # best objective reached up to each epoch


def hinge_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Objective: 0.5*lam*||w||^2 + mean_i max(0, 1 - y_i (w.x_i + b))."""
    margins = 1.0 - y * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(margins, 0.0)))


def hinge_loss_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                        lam: float) -> tuple[np.ndarray, float]:
    """Subgradient of the objective (uses margin < 1 at the hinge kink)."""
    violated = (y * (X @ w + b)) < 1.0
    n = len(y)
    grad_w = lam * w - (violated * y) @ X / n
    grad_b = -float(np.sum(y[violated])) / n
    return grad_w, grad_b


@njit(cache=True, nogil=True)
def _sgd_best_iterate(X, y, orders, lam, epochs):  # pragma: no cover - jitted
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    best_w = np.zeros(d)
    best_b = 0.0
    best_loss = np.inf
    history = np.empty(epochs)
    t = 0
    for e in range(epochs):
        for k in range(n):
            i = orders[e, k]
            eta = 1.0 / (lam * (t + 1))
            yi = y[i]
            acc = 0.0
            for j in range(d):
                acc += w[j] * X[i, j]
            decay = 1.0 - eta * lam
            if yi * (acc + b) < 1.0:
                c = eta * yi
                for j in range(d):
                    w[j] = w[j] * decay + c * X[i, j]
                b += c
            else:
                for j in range(d):
                    w[j] *= decay
            t += 1
        # full objective at the epoch boundary
        reg = 0.0
        for j in range(d):
            reg += w[j] * w[j]
        hinge_sum = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += w[j] * X[i, j]
            m = 1.0 - y[i] * (acc + b)
            if m > 0.0:
                hinge_sum += m
        loss = 0.5 * lam * reg + hinge_sum / n
        if loss < best_loss:
            best_loss = loss
            best_w[:] = w
            best_b = b
        history[e] = best_loss
    return best_w, best_b, history


def train_svm(positives: Sequence[np.ndarray], negatives: Sequence[np.ndarray],
              config: SvmConfig = SvmConfig()) -> LinearSVM:
    """Minimize the L2-regularized hinge loss by per-sample subgradient steps.

    Learning rate at global step t is 1/(lam*(t+1)); samples are reshuffled
    once per epoch with the model seed. Subgradient steps do not decrease
    the objective monotonically, so the full objective is evaluated at
    every epoch boundary and the best iterate seen is returned;
    `loss_history` records that best value per epoch (non-increasing).
    Identical inputs and seed give bit-identical parameters.
    """
    if len(positives) < 1 or len(negatives) < 1:
        raise ValueError("training needs at least one positive and one negative")
    X = np.ascontiguousarray(np.vstack([positives, negatives]), dtype=np.float64)
    if X.shape[1] != EMBED_DIM:
        raise ValueError(f"embeddings must be {EMBED_DIM}-dimensional")
    if not np.all(np.isfinite(X)):
        raise ValueError("training embeddings must be finite")
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    rng = np.random.default_rng(config.seed)
    orders = np.empty((config.epochs, len(y)), dtype=np.int64)
    for e in range(config.epochs):
        orders[e] = rng.permutation(len(y))
    w, b, history = _sgd_best_iterate(X, y, orders, config.lam, config.epochs)
    return LinearSVM(weights=w, bias=float(b), config=config, loss_history=history)


def svm_score(model: LinearSVM, embedding: np.ndarray) -> float:
    """Signed decision value w.e + b."""
    return float(model.weights @ np.asarray(embedding, dtype=np.float64) + model.bias)


# ---------------------------------------------------------------------------
# matching and threshold calibration

@dataclass(frozen=True, eq=False)
class MatchDecision:
    query: FaceInstance
    best_candidate: Optional[FaceInstance]
    score: float
    accepted: bool


def match_face(query: FaceInstance, model: LinearSVM,
               candidates: Sequence[FaceInstance],
               neighborhood_px: float = 600.0,
               threshold: float = 0.0) -> MatchDecision:
    """Score candidates inside the square neighborhood, accept the best.

    A candidate qualifies when its box center lies inside the axis-aligned
    square of side `neighborhood_px` centered on the query's box center.
    The best candidate maximizes the SVM score (ties broken by smaller
    center distance) and is accepted iff its score is strictly above the
    threshold.
    """
    half = neighborhood_px / 2.0
    qx, qy = query.box.center
    best: Optional[FaceInstance] = None
    best_score = -math.inf
    best_dist = math.inf
    for cand in candidates:
        cx, cy = cand.box.center
        if abs(cx - qx) > half or abs(cy - qy) > half:
            continue
        if cand.embedding is None:
            raise ValueError(f"candidate {cand.face_id!r} carries no embedding")
        score = svm_score(model, normalize_embedding(cand.embedding))
        dist = center_distance(cand.box, query.box)
        if score > best_score or (score == best_score and dist < best_dist):
            best, best_score, best_dist = cand, score, dist
    if best is None:
        return MatchDecision(query, None, -math.inf, False)
    return MatchDecision(query, best, best_score, best_score > threshold)


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    precision: float
    recall: float
    f_half: float
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f_half": self.f_half,
            "n_pairs": self.n_pairs,
        }


def calibrate_threshold(labeled: Sequence[tuple[float, bool]]) -> CalibrationResult:
    """Pick the score threshold maximizing the F0.5 of `score > threshold`.

    Candidate thresholds are the midpoints between consecutive distinct
    scores plus -inf/+inf sentinels; ties on F0.5 resolve to the larger
    threshold (favoring precision).
    """
    if not labeled:
        raise ValueError("no labeled pairs")
    n_true = sum(1 for _, is_true in labeled if is_true)
    n_false = len(labeled) - n_true
    if n_true == 0 or n_false == 0:
        raise ValueError("calibration needs both true and false labeled pairs")

    distinct = sorted({score for score, _ in labeled})
    candidates = [-math.inf]
    candidates += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    candidates.append(math.inf)

    best = None
    for threshold in candidates:
        tp = sum(1 for score, is_true in labeled if score > threshold and is_true)
        fp = sum(1 for score, is_true in labeled if score > threshold and not is_true)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / n_true
        f_half = f_beta(precision, recall, 0.5)
        if best is None or f_half >= best.f_half:  # >= keeps the larger threshold on ties
            best = CalibrationResult(threshold, precision, recall, f_half, len(labeled))
    return best
