"""Deterministic builtin backends.

Stand-ins for the pretrained networks: outputs are functions of the
frame content only (seeded from a content hash), so extraction is
reproducible and the full JSONL contract is exercised without any
model weights. Swap in real models via register_backend.
"""

import hashlib

import numpy as np

from .config import FACE_DIM, OBJECTS_DIM, PLACES_DIM, RESNET_DIM
from .registry import register_backend


def _rng_for(frame, salt):
    digest = hashlib.sha256(salt + frame.tobytes()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


class BuiltinScene:
    def predict(self, frame):
        rng = _rng_for(frame, b"scene")
        logits = rng.normal(size=PLACES_DIM)
        e = np.exp(logits - logits.max())
        return e / e.sum()


class BuiltinObjects:
    def detect(self, frame):
        rng = _rng_for(frame, b"object")
        n = int(rng.integers(0, 6))
        return [(int(rng.integers(0, OBJECTS_DIM)), float(rng.uniform(0.05, 1.0)))
                for _ in range(n)]


class BuiltinFaces:
    def detect(self, frame):
        rng = _rng_for(frame, b"face")
        n = int(rng.integers(0, 3))
        faces = []
        for _ in range(n):
            probs = rng.dirichlet(np.ones(8))
            va = rng.uniform(-1, 1, size=2)
            faces.append(np.concatenate([probs, va]))
        return faces


class BuiltinEmbedder:
    def embed(self, frame):
        rng = _rng_for(frame, b"embed")
        return rng.normal(0, 1, size=RESNET_DIM)


register_backend("scene", "builtin", lambda name, device: BuiltinScene())
register_backend("object", "builtin", lambda name, device: BuiltinObjects())
register_backend("face", "builtin", lambda name, device: BuiltinFaces())
register_backend("embed", "builtin", lambda name, device: BuiltinEmbedder())

assert FACE_DIM == 10
