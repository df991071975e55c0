"""Standalone re-validation of emitted Features JSONL files."""

import json

import numpy as np

from .config import FACE_DIM, OBJECTS_DIM, PLACES_DIM, RESNET_DIM

_DIMS = {"resnet": RESNET_DIM, "places": PLACES_DIM,
         "objects": OBJECTS_DIM, "faces": FACE_DIM}
PLACES_SUM_TOL = 1e-3


def validate_output(path):
    """Check every record; returns {"violations": [...], "frame_counts": {...}}.

    Violations carry the 1-based line number. frame_counts maps
    video_id -> number of records.
    """
    violations = []
    frame_counts = {}
    last_idx = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                violations.append(f"line {lineno}: invalid JSON ({e})")
                continue
            vid = obj.get("video_id")
            if not isinstance(vid, str) or not vid:
                violations.append(f"line {lineno}: missing video_id")
                continue
            frame_counts[vid] = frame_counts.get(vid, 0) + 1
            for key, dim in _DIMS.items():
                vec = obj.get(key)
                if not isinstance(vec, list) or len(vec) != dim:
                    violations.append(
                        f"line {lineno}: {key} must be a list of {dim} values")
                    continue
                arr = np.asarray(vec, dtype=np.float64)
                if not np.isfinite(arr).all():
                    violations.append(f"line {lineno}: {key} has non-finite values")
                elif key == "places":
                    if (arr < 0).any() or abs(arr.sum() - 1) > PLACES_SUM_TOL:
                        violations.append(
                            f"line {lineno}: places sums to {arr.sum():.6f}, "
                            f"expected 1 within {PLACES_SUM_TOL}")
                elif key == "objects":
                    if (arr < 0).any() or (arr > 1).any():
                        violations.append(
                            f"line {lineno}: objects confidences outside [0, 1]")
                elif key == "faces":
                    probs, va = arr[:8], arr[8:]
                    if (probs < 0).any() or (np.abs(va) > 1).any():
                        violations.append(
                            f"line {lineno}: faces outside contract ranges")
            idx = obj.get("frame_idx")
            if not isinstance(idx, int) or idx < 0:
                violations.append(f"line {lineno}: bad frame_idx {idx!r}")
            else:
                prev = last_idx.get(vid)
                if prev is not None and idx <= prev:
                    violations.append(
                        f"line {lineno}: non-monotone frame_idx for {vid}")
                last_idx[vid] = idx
    return {"violations": violations, "frame_counts": frame_counts}
