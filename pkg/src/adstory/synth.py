"""Synthetic corpus generator with known ground truth.

Each generated video gets a climax second drawn uniformly at random; the
audio track carries a single spike inside that second that is the unique
global amplitude maximum by construction, and the video cuts to an
inverted frame at the same second. Sentiment corpora additionally plant
feature dimensions: a video is positive for a planted sentiment class
iff its planted places dimension is active in some frames.
"""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ingest import (FACES_DIM, OBJECTS_DIM, PLACES_DIM, RESNET_DIM, FrameSeq,
                     write_wav, write_y4m)
from .vocab import SENTIMENTS, TOPICS

DURATION_SEC = 30
FPS = 4
FRAME_SIZE = 16
SAMPLE_RATE = 4000
CLIMAX_LOW = 2
CLIMAX_HIGH = 27  # inclusive
SPIKE_AMP = 0.9
NOISE_AMP = 0.2

# planted sentiment class -> places dimension that marks it
PLANTED_CLASSES = {7: 3, 20: 50}
PLANTED_TOPICS = (4, 11)  # positive videos get the first topic, negatives the second


def generate(kind, n, seed, out_dir):
    """Write a corpus of n videos under out_dir; returns the manifest dict."""
    if kind not in ("climax", "sentiment"):
        raise ValidationError(f"unknown corpus kind {kind!r}")
    if n < 5:
        raise ValidationError("need n >= 5 videos")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    manifest = {"kind": kind, "n": n, "seed": seed,
                "duration_sec": DURATION_SEC, "fps": FPS,
                "climax_range": [CLIMAX_LOW, CLIMAX_HIGH],
                "planted_classes": {str(k): v for k, v in PLANTED_CLASSES.items()},
                "videos": {}}
    ann_lines = []
    feat_lines = []
    for i in range(n):
        vid = f"synth{i:03d}"
        climax_sec = int(rng.integers(CLIMAX_LOW, CLIMAX_HIGH + 1))
        positive = bool(rng.random() < 0.5) if kind == "sentiment" else False

        _write_video(out / f"{vid}.y4m", climax_sec, rng)
        _write_audio(out / f"{vid}.wav", climax_sec, rng)
        ann_lines.append(_annotation(vid, climax_sec, positive, kind))
        feat_lines.extend(_features(vid, positive, rng))
        manifest["videos"][vid] = {"climax_sec": climax_sec, "positive": positive}

    with open(out / "annotations.jsonl", "w") as fh:
        fh.writelines(json.dumps(line) + "\n" for line in ann_lines)
    with open(out / "features.jsonl", "w") as fh:
        fh.writelines(json.dumps(line) + "\n" for line in feat_lines)
    with open(out / "synth_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _write_video(path, climax_sec, rng):
    """Slow luma drift with a hard cut at the climax second."""
    n_frames = DURATION_SEC * FPS
    ramp = np.linspace(40, 120, FRAME_SIZE)
    base = (ramp[None, :] + ramp[:, None]) / 2
    frames = []
    for k in range(n_frames):
        level = base + 20 * np.sin(2 * np.pi * k / n_frames)
        if k >= climax_sec * FPS:
            level = 255 - level
        frames.append(np.clip(level, 0, 255).astype(np.uint8))
    write_y4m(FrameSeq(width=FRAME_SIZE, height=FRAME_SIZE,
                       fps=Fraction(FPS), frames=tuple(frames)), path)


def _write_audio(path, climax_sec, rng):
    n = DURATION_SEC * SAMPLE_RATE
    samples = rng.uniform(-NOISE_AMP, NOISE_AMP, size=n)
    spike_at = climax_sec * SAMPLE_RATE + SAMPLE_RATE // 2
    samples[spike_at] = SPIKE_AMP
    write_wav(samples, SAMPLE_RATE, path)


def _annotation(vid, climax_sec, positive, kind):
    workers = [
        {"has_climax": True, "t_sec": climax_sec + 0.5, "rejected": False},
        {"has_climax": True, "t_sec": climax_sec + 0.2, "rejected": False},
        {"has_climax": True, "t_sec": float(climax_sec), "rejected": False},
        {"has_climax": False, "t_sec": None, "rejected": True},
    ]
    votes = {}
    topic = None
    if kind == "sentiment":
        for cls in PLANTED_CLASSES:
            votes[SENTIMENTS[cls]] = 4 if positive else 0
        topic = TOPICS[PLANTED_TOPICS[0] if positive else PLANTED_TOPICS[1]]
    return {"video_id": vid, "duration_sec": float(DURATION_SEC), "fps": float(FPS),
            "workers": workers, "sentiment_votes": votes, "topic": topic}


def _features(vid, positive, rng):
    lines = []
    active_seconds = set(rng.choice(DURATION_SEC, size=DURATION_SEC // 3,
                                    replace=False)) if positive else set()
    for s in range(DURATION_SEC):
        places = rng.uniform(0.0, 0.01, size=PLACES_DIM)
        if s in active_seconds:
            for dim in PLANTED_CLASSES.values():
                places[dim] = 2.0
        places = places / places.sum()
        faces = np.zeros(FACES_DIM)
        lines.append({
            "video_id": vid, "frame_idx": s * FPS, "t_sec": float(s),
            "resnet": np.round(rng.normal(0, 0.5, size=RESNET_DIM), 4).tolist(),
            "places": np.round(places, 6).tolist(),
            "objects": np.round(rng.uniform(0, 0.3, size=OBJECTS_DIM), 4).tolist(),
            "faces": faces.tolist(),
        })
    return lines
