"""Synthetic clip generator with known identity ground truth.

Identities are Gaussian clusters around random unit-norm centers in the
128-d embedding space; the noise scale is tied to the minimum inter-center
distance so cluster separation is controlled exactly. Faces sit on a
spatial grid with bounded jitter and drift, which keeps distinct people
farther apart than one person moves between frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Box2D, ScoredBox
from .matchkit import EMBED_DIM, FaceInstance

FRAME_ID_FORMAT = "frame_{:06d}"


def frame_image_id(frame_index: int) -> str:
    return FRAME_ID_FORMAT.format(frame_index)


@dataclass(frozen=True)
class SyntheticClipSpec:
    n_identities: int = 20
    n_frames: int = 50
    stride: int = 10
    frame_width: float = 1920.0
    frame_height: float = 1080.0
    box_size: float = 70.0
    max_step_px: float = 12.0      # per-frame drift bound, per axis
    anchor_jitter_px: float = 40.0
    drift_clamp_px: float = 60.0   # max excursion from the anchor
    separation_factor: float = 4.0  # min inter-center distance / noise scale
    min_span: int = 1              # presence length in analyzed frames
    max_span: int = 3
    seed: int = 0


@dataclass
class SyntheticClip:
    spec: SyntheticClipSpec
    centers: np.ndarray                      # (n_identities, 128) unit rows
    noise_scale: float                       # total (vector-norm) noise scale
    faces_by_frame: dict[int, list[FaceInstance]]
    identity_of: dict[tuple[int, str], int]  # (frame, face_id) -> identity
    analyzed_frames: list[int]

    @property
    def n_identities(self) -> int:
        return self.spec.n_identities

    def detections(self) -> dict[str, list[ScoredBox]]:
        return {
            frame_image_id(f): [ScoredBox(face.box, 1.0) for face in faces]
            for f, faces in sorted(self.faces_by_frame.items())
        }

    def all_faces(self) -> list[FaceInstance]:
        return [face for _, faces in sorted(self.faces_by_frame.items()) for face in faces]

    def detected_in_analyzed(self) -> int:
        return sum(len(self.faces_by_frame.get(f, [])) for f in self.analyzed_frames)


def _grid_anchors(spec: SyntheticClipSpec, rng: np.random.Generator) -> np.ndarray:
    cols = int(np.ceil(np.sqrt(spec.n_identities * spec.frame_width / spec.frame_height)))
    rows = int(np.ceil(spec.n_identities / cols))
    cell_w = spec.frame_width / cols
    cell_h = spec.frame_height / rows
    cells = [(c, r) for r in range(rows) for c in range(cols)]
    chosen = rng.permutation(len(cells))[:spec.n_identities]
    anchors = np.empty((spec.n_identities, 2))
    for i, cell_index in enumerate(chosen):
        c, r = cells[cell_index]
        anchors[i] = ((c + 0.5) * cell_w, (r + 0.5) * cell_h)
    jitter = rng.uniform(-spec.anchor_jitter_px, spec.anchor_jitter_px,
                         size=(spec.n_identities, 2))
    return anchors + jitter


def make_synthetic_clip(spec: SyntheticClipSpec = SyntheticClipSpec()) -> SyntheticClip:
    rng = np.random.default_rng(spec.seed)

    centers = rng.normal(size=(spec.n_identities, EMBED_DIM))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.linalg.norm(diffs, axis=2)
    min_dist = float(np.min(dists[np.triu_indices(spec.n_identities, k=1)]))
    noise_scale = min_dist / spec.separation_factor
    per_coord_sigma = noise_scale / np.sqrt(EMBED_DIM)

    analyzed = list(range(0, spec.n_frames, spec.stride))
    n_analyzed = len(analyzed)
    anchors = _grid_anchors(spec, rng)

    # presence interval per identity: a contiguous run of analyzed frames,
    # extended by partial raw-frame margins on both sides
    intervals = []
    for i in range(spec.n_identities):
        span = int(rng.integers(spec.min_span, spec.max_span + 1))
        span = min(span, n_analyzed)
        first = int(rng.integers(0, n_analyzed - span + 1))
        last = first + span - 1
        a = analyzed[first] - int(rng.integers(0, spec.stride))
        b = analyzed[last] + int(rng.integers(0, spec.stride))
        intervals.append((max(a, 0), min(b, spec.n_frames - 1)))

    # bounded random walk around each identity's anchor
    positions = np.empty((spec.n_identities, spec.n_frames, 2))
    for i in range(spec.n_identities):
        pos = anchors[i].copy()
        for f in range(spec.n_frames):
            step = rng.uniform(-spec.max_step_px, spec.max_step_px, size=2)
            pos = np.clip(pos + step,
                          anchors[i] - spec.drift_clamp_px,
                          anchors[i] + spec.drift_clamp_px)
            positions[i, f] = pos

    faces_by_frame: dict[int, list[FaceInstance]] = {f: [] for f in range(spec.n_frames)}
    identity_of: dict[tuple[int, str], int] = {}
    half = spec.box_size / 2.0
    for f in range(spec.n_frames):
        for i in range(spec.n_identities):
            a, b = intervals[i]
            if not a <= f <= b:
                continue
            cx, cy = positions[i, f]
            box = Box2D(cx - half, cy - half, spec.box_size, spec.box_size)
            vec = centers[i] + rng.normal(0.0, per_coord_sigma, EMBED_DIM)
            vec /= np.linalg.norm(vec)
            face_id = f"{f}:{len(faces_by_frame[f])}"
            faces_by_frame[f].append(FaceInstance(
                frame_index=f, face_id=face_id, box=box, embedding=vec,
                identity_label=str(i)))
            identity_of[(f, face_id)] = i

    return SyntheticClip(
        spec=spec,
        centers=centers,
        noise_scale=noise_scale,
        faces_by_frame=faces_by_frame,
        identity_of=identity_of,
        analyzed_frames=analyzed,
    )
