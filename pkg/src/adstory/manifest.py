"""Run manifests: every CLI command records what it did alongside its outputs."""

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, command, config=None, seed=None):
        self.command = command
        self.config = config or {}
        self.seed = seed
        self.inputs = {}
        self.outputs = []
        self._t0 = time.monotonic()

    def add_input(self, path):
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path):
        self.outputs.append(str(path))

    def write(self, path):
        payload = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "input_hashes": self.inputs,
            "output_paths": self.outputs,
            "tool_version": __version__,
            "wall_sec": round(time.monotonic() - self._t0, 3),
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
