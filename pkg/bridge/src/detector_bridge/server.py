"""The request loop: one JSON line in, one JSON line out, same id."""

from __future__ import annotations

import base64
import binascii
import io
import json
import sys

import numpy as np
from PIL import Image

from .backends import apply_class_map, load_backend
from .config import BridgeConfig


def decode_image(payload: str) -> np.ndarray:
    data = base64.b64decode(payload, validate=True)
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def handle_request(line: str, backend, class_map) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as exc:
        return {"id": None, "error": f"unparseable request line: {exc}"}
    if not isinstance(request, dict):
        return {"id": None, "error": "request must be a JSON object"}
    request_id = request.get("id")
    if request_id is None:
        return {"id": None, "error": "request missing 'id'"}
    try:
        image = decode_image(request["image_png_b64"])
    except (KeyError, binascii.Error, ValueError, OSError) as exc:
        return {"id": request_id, "error": f"undecodable image: {exc}"}
    try:
        detections = apply_class_map(backend(image), class_map)
    except Exception as exc:  # inference failure stays request-scoped
        return {"id": request_id, "error": f"inference failed: {exc}"}
    return {"id": request_id, "detections": [
        {"class_id": cid, "conf": conf,
         "bbox": [x0, y0, x1, y1]}
        for cid, conf, (x0, y0, x1, y1) in detections]}


def serve(config: BridgeConfig,
          stdin=None, stdout=None) -> int:
    """Serve requests until end of input; one response line per request."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    try:
        backend = load_backend(config)
    except Exception as exc:
        print(f"detector-bridge: failed to load model from "
              f"{config.weights!r}: {exc}", file=sys.stderr)
        return 1
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = handle_request(line, backend, config.class_map)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
    return 0
