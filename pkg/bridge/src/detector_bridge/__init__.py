"""Reference detector server for the JSONL robustness-testing protocol.

Wraps an object-detection model behind newline-delimited JSON on
stdin/stdout: one request line in, one response line out, matching ids,
pixel-coordinate boxes, flush after every line, clean exit at end of
input.
"""

from .config import BridgeConfig
from .server import serve

__version__ = "0.1.0"
