"""Command-line entry: `python -m detector_bridge --weights model.pth`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import BridgeConfig, parse_class_map
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="detector_bridge",
        description="Serve a detection model over the JSONL protocol")
    parser.add_argument("--weights", required=True,
                        help="model weights (.pt/.pth state dict, or a .json "
                             "contrast-detector parameter file)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--conf", type=float, default=0.0,
                        help="confidence threshold forwarded to the model")
    parser.add_argument("--arch", default="ssdlite320_mobilenet_v3_large",
                        help="torchvision detection architecture")
    parser.add_argument("--class-map", default="",
                        help="model-to-campaign class ids, e.g. '1:0,2:1', "
                             "or a JSON file path; empty = identity")
    args = parser.parse_args(argv)

    class_map = {}
    if args.class_map:
        path = Path(args.class_map)
        if path.exists():
            import json
            class_map = {int(k): int(v)
                         for k, v in json.loads(path.read_text()).items()}
        else:
            class_map = parse_class_map(args.class_map)
    try:
        config = BridgeConfig(weights=args.weights, device=args.device,
                              confidence_threshold=args.conf, arch=args.arch,
                              class_map=class_map)
    except (FileNotFoundError, ValueError) as exc:
        print(f"detector-bridge: {exc}", file=sys.stderr)
        return 1
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
