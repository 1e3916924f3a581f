"""Black-box detector handles: a deterministic synthetic detector and the
external-process JSONL protocol client.

The synthetic detector is a contrast-threshold component detector over flat
disk scenes.  It is intentionally fragile to bounded intensity shifts so
that feasible perturbations can produce every failure type, while staying a
pure, byte-deterministic function of the pixels (the test oracle).

External detectors speak newline-delimited JSON over the bridge process's
standard streams:

    request:  {"id": "<string>", "image_png_b64": "<base64 PNG>"}
    response: {"id": "<same>", "detections": [
                  {"class_id": int, "conf": float,
                   "bbox": [x_min, y_min, x_max, y_max]}]}

with pixel-coordinate boxes.  One request is in flight per process;
parallelism comes from a pool of bridge processes.
"""

from __future__ import annotations

import abc
import base64
import io
import json
import math
import selectors
import shlex
import subprocess
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image
from scipy import ndimage

from .detection import Annotation, Detection
from .geometry import BoundingBox


class DetectorError(RuntimeError):
    """The detector could not produce predictions."""


class ProtocolError(DetectorError):
    """The external bridge violated the JSONL wire protocol."""


def canonical_sort(detections: list[Detection]) -> list[Detection]:
    """Fixed detection order (class_id, -confidence, x_min) for order-independence."""
    return sorted(detections, key=lambda d: (d.class_id, -d.confidence, d.box.x_min))


class Detector(abc.ABC):
    """Black-box detector handle."""

    tag: str = "abstract"
    deterministic: bool = False
    concurrency_safe: bool = False

    def detect(self, image: np.ndarray) -> list[Detection]:
        """Run the detector and return canonically sorted detections.

        Confidence filtering is the caller's responsibility.
        """
        return canonical_sort(self._run(image))

    @abc.abstractmethod
    def _run(self, image: np.ndarray) -> list[Detection]:
        ...


def detect(handle: Detector, image: np.ndarray) -> list[Detection]:
    return handle.detect(image)


# --- synthetic scenes and the oracle detector -------------------------------

DEFAULT_CLASS_NAMES = ("screw", "noscrew")


@dataclass(frozen=True)
class SyntheticDetectorParams:
    background: int = 128
    contrast_threshold: int = 40
    min_component_area: int = 16


@dataclass(frozen=True)
class DiskSpec:
    """One flat-filled disk object: class, center, radius, fill intensity."""

    class_id: int
    center: tuple[float, float]
    radius: float
    fill: int


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """A flat background plus non-overlapping filled disks."""

    width: int
    height: int
    objects: tuple[DiskSpec, ...]
    background: int = 128
    detector: SyntheticDetectorParams = field(default_factory=SyntheticDetectorParams)
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self):
        for obj in self.objects:
            if abs(obj.fill - self.background) <= self.detector.contrast_threshold:
                raise ValueError(
                    f"disk fill {obj.fill} within the contrast threshold of "
                    f"background {self.background}; the clean scene would not "
                    "be fully detected")


def _gray_levels(image: np.ndarray) -> np.ndarray:
    """Per-pixel gray = round(mean of channels).

    Channel sums are integers, so mean fractional parts are 0, 1/3 or 2/3
    and the rounding mode at .5 never matters; integer arithmetic keeps the
    result byte-deterministic.
    """
    s = image.astype(np.int32).sum(axis=2)
    return (2 * s + 3) // 6


def synthetic_detect(image: np.ndarray,
                     params: SyntheticDetectorParams) -> list[Detection]:
    """Contrast-threshold component detector (the pixel-level oracle).

    Foreground is |gray - background| > contrast_threshold, labeled into
    4-connected components separately per contrast polarity (darker vs
    brighter than background), so a dark halo hugging a bright object is a
    second, conflicting detection rather than part of the object's
    component.  Components with area >= min_component_area become
    detections; class is 0 when the component's mean gray is below
    background (always true for dark-polarity components) else 1; the box
    is the component's pixel-coordinate bounding box; confidence is
    min(1, mean |contrast| / 128).
    """
    gray = _gray_levels(image)
    contrast = gray - params.background
    abs_contrast = np.abs(contrast)
    detections = []
    for class_id, mask in (
        (0, (contrast < 0) & (abs_contrast > params.contrast_threshold)),
        (1, (contrast > 0) & (abs_contrast > params.contrast_threshold)),
    ):
        labels, n = ndimage.label(mask)  # default structure = 4-connectivity
        if n == 0:
            continue
        flat = labels.ravel()
        sizes = np.bincount(flat)
        abs_contrast_sums = np.bincount(flat, weights=abs_contrast.ravel())
        for comp, slc in enumerate(ndimage.find_objects(labels), start=1):
            area = int(sizes[comp])
            if area < params.min_component_area:
                continue
            confidence = min(1.0, (abs_contrast_sums[comp] / area) / 128.0)
            ys, xs = slc
            box = BoundingBox(float(xs.start), float(ys.start),
                              float(xs.stop - 1), float(ys.stop - 1))
            detections.append(Detection(class_id=class_id, confidence=confidence,
                                        box=box))
    return detections


class SyntheticDetector(Detector):
    """Deterministic, concurrency-safe contrast detector."""

    tag = "synthetic"
    deterministic = True
    concurrency_safe = True

    def __init__(self, params: SyntheticDetectorParams | None = None):
        self.params = params or SyntheticDetectorParams()

    def _run(self, image: np.ndarray) -> list[Detection]:
        return synthetic_detect(image, self.params)


def render_synthetic_scene(
    spec: SyntheticSceneSpec,
) -> tuple[np.ndarray, tuple[Annotation, ...]]:
    """Rasterize a scene spec into an RGB image and its exact annotations.

    A pixel belongs to a disk when its integer-coordinate center is within
    the disk radius.  Overlapping disks raise, which keeps the detector
    oracle analyzable.  Annotations are the exact disk bounding boxes.
    """
    w, h = spec.width, spec.height
    image = np.full((h, w, 3), spec.background, dtype=np.uint8)
    occupied = np.zeros((h, w), dtype=bool)
    annotations = []
    for obj in spec.objects:
        cx, cy = obj.center
        r = obj.radius
        if cx - r < 0 or cy - r < 0 or cx + r > w - 1 or cy + r > h - 1:
            raise ValueError(f"disk {obj} extends outside the {w}x{h} image")
        ys, xs = np.ogrid[0:h, 0:w]
        disk = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        if (occupied & disk).any():
            raise ValueError(f"disk {obj} overlaps a previous object")
        occupied |= disk
        image[disk] = obj.fill
        annotations.append(Annotation(
            class_id=obj.class_id,
            class_name=spec.class_names[obj.class_id],
            box=BoundingBox(cx - r, cy - r, cx + r, cy + r),
        ))
    return image, tuple(annotations)


# --- external JSONL bridge ---------------------------------------------------

def encode_image_png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def parse_detections_payload(payload) -> list[Detection]:
    """Map a response's `detections` array onto Detection objects."""
    if not isinstance(payload, list):
        raise ProtocolError(f"detections payload must be a list, got {payload!r}")
    out = []
    for entry in payload:
        try:
            class_id = int(entry["class_id"])
            conf = float(entry["conf"])
            bbox = entry["bbox"]
            if len(bbox) != 4:
                raise ValueError(f"bbox must have 4 coordinates, got {len(bbox)}")
            coords = [float(v) for v in bbox]
            if not all(math.isfinite(c) for c in coords):
                raise ValueError(f"bbox coordinates must be finite: {coords}")
            box = BoundingBox(*coords)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detection entry {entry!r}: {exc}") from None
        out.append(Detection(class_id=class_id, confidence=min(max(conf, 0.0), 1.0),
                             box=box))
    return out


class ExternalDetector(Detector):
    """Client for a detector served by a bridge subprocess.

    One request is in flight at a time; each instance owns its own bridge
    process and must not be shared across workers.
    """

    tag = "external"
    deterministic = True  # the bridge is expected to be deterministic
    concurrency_safe = False

    def __init__(self, command: str, timeout: float = 30.0):
        self.command = command
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._request_counter = 0
        self._buffer = b""

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
            self._buffer = b""
        return self._proc

    def _read_line(self, proc: subprocess.Popen) -> bytes:
        sel = selectors.DefaultSelector()
        sel.register(proc.stdout, selectors.EVENT_READ)
        try:
            while b"\n" not in self._buffer:
                if not sel.select(timeout=self.timeout):
                    raise DetectorError(
                        f"bridge did not respond within {self.timeout}s: "
                        f"{self.command!r}")
                chunk = proc.stdout.read1(65536)
                if not chunk:
                    raise DetectorError(
                        f"bridge closed its output stream: {self.command!r}")
                self._buffer += chunk
        finally:
            sel.close()
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def _run(self, image: np.ndarray) -> list[Detection]:
        proc = self._ensure_process()
        self._request_counter += 1
        request_id = f"req-{self._request_counter}"
        request = {"id": request_id, "image_png_b64": encode_image_png_b64(image)}
        try:
            proc.stdin.write((json.dumps(request) + "\n").encode("utf-8"))
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise DetectorError(f"bridge pipe failed: {exc}") from exc
        line = self._read_line(proc)
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"bridge sent unparseable line: {line!r}") from None
        if not isinstance(response, dict):
            raise ProtocolError(f"bridge response is not an object: {response!r}")
        if response.get("id") != request_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request id "
                f"{request_id!r}")
        if "error" in response:
            raise DetectorError(f"bridge reported an error: {response['error']}")
        if "detections" not in response:
            raise ProtocolError(f"response missing 'detections': {response!r}")
        return parse_detections_payload(response["detections"])

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_detect(endpoint: str | ExternalDetector, image: np.ndarray) -> list[Detection]:
    """One-shot detection through a bridge command or an existing client."""
    if isinstance(endpoint, ExternalDetector):
        return endpoint.detect(image)
    with ExternalDetector(endpoint) as det:
        return det.detect(image)


# --- detector spec strings ---------------------------------------------------

def build_detector(spec: str, timeout: float = 30.0) -> Detector:
    """Build a detector from a config string.

    Accepted forms: "synthetic", "synthetic:tdet=30,min_area=16,background=128",
    and "external:<bridge command>".
    """
    if spec == "synthetic":
        return SyntheticDetector()
    if spec.startswith("synthetic:"):
        params = SyntheticDetectorParams()
        for part in spec[len("synthetic:"):].split(","):
            if not part:
                continue
            key, _, value = part.partition("=")
            key = key.strip()
            if key == "tdet":
                params = replace(params, contrast_threshold=int(value))
            elif key == "min_area":
                params = replace(params, min_component_area=int(value))
            elif key == "background":
                params = replace(params, background=int(value))
            else:
                raise ValueError(f"unknown synthetic detector parameter {key!r}")
        return SyntheticDetector(params)
    if spec.startswith("external:"):
        command = spec[len("external:"):]
        if not command:
            raise ValueError("external detector spec needs a bridge command")
        return ExternalDetector(command, timeout=timeout)
    raise ValueError(f"unknown detector spec {spec!r}")
