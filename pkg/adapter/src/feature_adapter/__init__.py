"""Per-frame feature extraction behind the Features JSONL artifact boundary.

Runs a scene classifier, object detector, face analyzer and image
embedder over sampled video frames and writes the JSONL records the
primary toolkit ingests. All pretrained-model dependencies live behind
the backend registry; the builtin backends are deterministic stand-ins
with the exact output contract of the real networks.
"""

__version__ = "0.1.0"

from .config import AdapterConfig
from .extract import extract_video, write_jsonl
from .registry import get_backend, register_backend
from .validate import validate_output

__all__ = ["AdapterConfig", "extract_video", "write_jsonl",
           "get_backend", "register_backend", "validate_output"]
