"""Frame sampling, model application and JSONL emission."""

import json
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import AdapterConfig, FACE_DIM, OBJECTS_DIM
from .registry import get_backend


class DecodeError(Exception):
    pass


def _read_y4m_luma(path):
    """Minimal Y4M reader: yields (fps, iterator of (H, W) uint8 luma frames).

    Frames that fail to decode raise DecodeError from the iterator so the
    caller can skip and report them.
    """
    data = Path(path).read_bytes()
    end = data.find(b"\n")
    if end < 0 or not data.startswith(b"YUV4MPEG2"):
        raise DecodeError(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    fps = None
    chroma = "420"
    for token in data[:end].split()[1:]:
        tag, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if tag == "W":
            width = int(value)
        elif tag == "H":
            height = int(value)
        elif tag == "F":
            num, den = value.split(":")
            fps = Fraction(int(num), int(den))
        elif tag == "C":
            chroma = value
    if not width or not height or fps is None:
        raise DecodeError(f"{path}: missing geometry or frame rate")
    luma = width * height
    if chroma.startswith("420"):
        frame_bytes = luma + luma // 2
    elif chroma == "444":
        frame_bytes = luma * 3
    elif chroma == "mono":
        frame_bytes = luma
    else:
        raise DecodeError(f"{path}: unsupported chroma mode C{chroma}")

    def frames():
        pos = end + 1
        while pos < len(data):
            nl = data.find(b"\n", pos)
            if nl < 0 or not data[pos:nl].startswith(b"FRAME"):
                raise DecodeError(f"{path}: bad frame header at byte {pos}")
            start = nl + 1
            payload = data[start:start + frame_bytes]
            pos = start + frame_bytes
            if len(payload) < frame_bytes:
                raise DecodeError(f"{path}: truncated frame at byte {start}")
            yield np.frombuffer(payload[:luma], dtype=np.uint8).reshape(height, width)

    return fps, frames()


def _aggregate_objects(detections):
    """Max confidence per class; zero for classes with no detection."""
    out = np.zeros(OBJECTS_DIM)
    for class_id, conf in detections:
        if not 0 <= class_id < OBJECTS_DIM:
            raise ValueError(f"object class {class_id} out of range")
        out[class_id] = max(out[class_id], float(conf))
    return out


def _aggregate_faces(faces):
    """Mean of the per-face 10-vectors; all-zero when no face is detected."""
    faces = [np.asarray(f, dtype=np.float64) for f in faces]
    if not faces:
        return np.zeros(FACE_DIM)
    if any(f.shape != (FACE_DIM,) for f in faces):
        raise ValueError("face vectors must have 10 values")
    return np.mean(faces, axis=0)


def extract_video(video_path, config=None, video_id=None):
    """Run all models over 1 Hz-sampled frames; returns (records, gaps).

    ``records`` is a list of JSON-serializable dicts conforming to the
    Features JSONL contract; ``gaps`` lists seconds whose frame could not
    be decoded (skipped with a warning).
    """
    config = config or AdapterConfig()
    video_id = video_id or Path(video_path).stem
    scene = get_backend("scene", config.scene_model, config.device)
    objects = get_backend("object", config.object_model, config.device)
    faces = get_backend("face", config.face_model, config.device)
    embed = get_backend("embed", config.embed_model, config.device)

    fps, frame_iter = _read_y4m_luma(video_path)
    records = []
    gaps = []
    sample_every = max(1, round(float(fps) / config.sample_rate_hz))
    idx = 0
    sampled = 0
    while True:
        try:
            frame = next(frame_iter)
        except StopIteration:
            break
        except DecodeError as e:
            warnings.warn(f"skipping undecodable frame {idx} of {video_id}: {e}")
            gaps.append(idx)
            break  # byte stream is unrecoverable past a truncated frame
        if idx % sample_every == 0:
            records.append({
                "video_id": video_id,
                "frame_idx": idx,
                "t_sec": round(idx / float(fps), 6),
                "resnet": np.round(embed.embed(frame), 6).tolist(),
                "places": _normalized(scene.predict(frame)),
                "objects": np.round(_aggregate_objects(objects.detect(frame)), 6).tolist(),
                "faces": np.round(_aggregate_faces(faces.detect(frame)), 6).tolist(),
            })
            sampled += 1
        idx += 1
    return records, gaps


def _normalized(places):
    """Round for JSON, then renormalize so the sum survives rounding exactly."""
    places = np.asarray(places, dtype=np.float64)
    places = places / places.sum()
    rounded = np.round(places, 8)
    rounded = rounded / rounded.sum()
    return rounded.tolist()


def write_jsonl(records, path, append=False):
    with open(path, "a" if append else "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
