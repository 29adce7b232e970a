"""Line-delimited JSON subprocess protocol for detector/embedder backends.

One request line on the child's stdin, one response line from its stdout:

    {"id": 1, "op": "detect", "image_path": "...", "scale": 1.0}
    {"id": 1, "boxes": [{"x":..,"y":..,"w":..,"h":..,"score":..}]}

    {"id": 2, "op": "embed", "image_path": "...", "box": {...}}
    {"id": 2, "vec": [... 128 floats ...]}

Errors come back as {"id": .., "error": "..."}. One request is in flight
per process; parallelism means launching more processes.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import tempfile
import threading
from pathlib import Path

import numpy as np

from ..errors import BackendError
from ..geometry import Box2D, ScoredBox
from ..matchkit import EMBED_DIM
from .raster import ImageRaster, write_ppm

PROTOCOL_VERSION = "1"
TIMEOUT_ENV_VAR = "CROWDCOUNT_BACKEND_TIMEOUT_S"
DEFAULT_TIMEOUT_S = 120.0


def default_timeout_s() -> float:
    value = os.environ.get(TIMEOUT_ENV_VAR)
    if value is None:
        return DEFAULT_TIMEOUT_S
    try:
        timeout = float(value)
    except ValueError:
        raise BackendError(f"{TIMEOUT_ENV_VAR} must be a number, got {value!r}") from None
    if timeout <= 0:
        raise BackendError(f"{TIMEOUT_ENV_VAR} must be positive, got {value!r}")
    return timeout


class SubprocessBackend:
    """Owns one backend child process and the request/response exchange."""

    def __init__(self, command: str | list[str], timeout_s: float | None = None,
                 name: str | None = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.name = name or Path(self.command[0]).name
        self.version = PROTOCOL_VERSION
        self.timeout_s = default_timeout_s() if timeout_s is None else timeout_s
        self._next_id = 1
        try:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise BackendError(f"cannot launch backend {self.command}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump_stdout, daemon=True)
        self._reader.start()

    def _pump_stdout(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def invoke(self, request: dict) -> dict:
        """Send one request, block for its response, correlate by id."""
        request = dict(request)
        request["id"] = self._next_id
        self._next_id += 1
        if self._proc.poll() is not None:
            raise BackendError(f"backend {self.name} exited with code {self._proc.returncode}")
        try:
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend {self.name} pipe closed: {exc}") from exc
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            self.close()
            raise BackendError(f"backend {self.name} timed out after "
                               f"{self.timeout_s}s on request {request['id']}") from None
        if line is None:
            raise BackendError(f"backend {self.name} exited before responding "
                               f"(code {self._proc.poll()})")
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            raise BackendError(f"backend {self.name} sent a malformed response line",
                               raw_line=line) from None
        if not isinstance(response, dict) or response.get("id") != request["id"]:
            raise BackendError(f"backend {self.name} response id does not match "
                               f"request {request['id']}", raw_line=line)
        if "error" in response:
            raise BackendError(f"backend {self.name} reported: {response['error']}")
        return response

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def invoke_backend(backend: SubprocessBackend, request: dict) -> dict:
    return backend.invoke(request)


def _parse_boxes(entries, backend_name: str) -> list[ScoredBox]:
    boxes = []
    if not isinstance(entries, list):
        raise BackendError(f"backend {backend_name} returned a non-list 'boxes' field")
    for entry in entries:
        try:
            box = Box2D(float(entry["x"]), float(entry["y"]),
                        float(entry["w"]), float(entry["h"]))
            boxes.append(ScoredBox(box, float(entry["score"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"backend {backend_name} returned a bad box "
                               f"{entry!r}: {exc}") from exc
    return boxes


class _TempImageMixin:
    """Shared scratch directory for shipping in-memory rasters to a child."""

    def _init_scratch(self):
        self._scratch = tempfile.TemporaryDirectory(prefix="crowdcount-backend-")
        self._scratch_count = 0

    def _stage_image(self, image: ImageRaster) -> str:
        self._scratch_count += 1
        path = Path(self._scratch.name) / f"req{self._scratch_count:06d}.ppm"
        write_ppm(path, image)
        return str(path)

    def _cleanup_scratch(self):
        self._scratch.cleanup()


class SubprocessDetector(_TempImageMixin):
    """DetectorBackend adapter over the line protocol."""

    def __init__(self, command: str | list[str], timeout_s: float | None = None):
        self._backend = SubprocessBackend(command, timeout_s=timeout_s)
        self.name = self._backend.name
        self.version = self._backend.version
        self._init_scratch()

    def detect(self, image: ImageRaster, scale: float = 1.0) -> list[ScoredBox]:
        path = self._stage_image(image)
        try:
            response = self._backend.invoke(
                {"op": "detect", "image_path": path, "scale": scale})
        finally:
            os.unlink(path)
        return _parse_boxes(response.get("boxes"), self.name)

    def detect_path(self, image_path: str, scale: float = 1.0) -> list[ScoredBox]:
        response = self._backend.invoke(
            {"op": "detect", "image_path": image_path, "scale": scale})
        return _parse_boxes(response.get("boxes"), self.name)

    def close(self):
        self._backend.close()
        self._cleanup_scratch()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class SubprocessEmbedder(_TempImageMixin):
    """EmbedderBackend adapter over the line protocol."""

    def __init__(self, command: str | list[str], timeout_s: float | None = None):
        self._backend = SubprocessBackend(command, timeout_s=timeout_s)
        self.name = self._backend.name
        self.version = self._backend.version
        self._init_scratch()

    def embed(self, image: ImageRaster) -> np.ndarray:
        path = self._stage_image(image)
        box = {"x": 0.0, "y": 0.0, "w": float(image.width), "h": float(image.height)}
        try:
            response = self._backend.invoke(
                {"op": "embed", "image_path": path, "box": box})
        finally:
            os.unlink(path)
        vec = response.get("vec")
        if not isinstance(vec, list) or len(vec) != EMBED_DIM:
            raise BackendError(f"backend {self.name} returned a bad 'vec' "
                               f"(need {EMBED_DIM} floats)")
        values = np.asarray(vec, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise BackendError(f"backend {self.name} returned non-finite embedding values")
        return values

    def close(self):
        self._backend.close()
        self._cleanup_scratch()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
