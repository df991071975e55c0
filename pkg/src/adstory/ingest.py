"""Readers for all external inputs.

Uncompressed video (YUV4MPEG2), PCM audio (RIFF/WAVE), annotation JSONL
and per-frame feature JSONL are parsed into validated in-memory
structures. All readers are pure functions of their input bytes; the
returned structures are treated as immutable.
"""

import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import FormatError, ValidationError
from .vocab import SENTIMENT_INDEX, TOPIC_INDEX

RESNET_DIM = 2048
PLACES_DIM = 365
OBJECTS_DIM = 80
FACES_DIM = 10

PLACES_SUM_TOL = 1e-3


@dataclass(frozen=True)
class FrameSeq:
    """Decoded video: ordered luma planes plus timing metadata.

    Frame index k maps to time t = k / fps seconds. Chroma is never
    retained; the dynamics signals only need intensity.
    """

    width: int
    height: int
    fps: Fraction
    frames: tuple  # of (height, width) uint8 arrays

    def __post_init__(self):
        if self.fps <= 0:
            raise ValidationError("fps must be positive")
        for i, f in enumerate(self.frames):
            if f.shape != (self.height, self.width):
                raise ValidationError(
                    f"frame {i}: shape {f.shape} != ({self.height}, {self.width})"
                )

    @property
    def n_frames(self):
        return len(self.frames)

    @property
    def duration_sec(self):
        return float(self.n_frames / self.fps)


@dataclass(frozen=True)
class AudioTrack:
    """Mono PCM samples normalized to [-1, +1]."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if self.samples.size and (np.abs(self.samples) > 1.0).any():
            raise ValidationError("samples must lie in [-1, +1]")


@dataclass(frozen=True)
class WorkerMark:
    """One crowdworker's climax response for one video."""

    has_climax: bool
    t_sec: float | None
    rejected: bool


@dataclass(frozen=True)
class VideoRecord:
    """Per-video annotations: climax marks, sentiment votes, topic."""

    video_id: str
    duration_sec: float
    fps: float
    workers: tuple
    sentiment_votes: dict = field(default_factory=dict)
    topic: str | None = None

    def accepted_marks(self):
        """Climax timestamps from non-rejected workers that marked a climax."""
        return [
            w.t_sec for w in self.workers
            if w.has_climax and not w.rejected and w.t_sec is not None
        ]


@dataclass(frozen=True)
class FeatureRecord:
    """Pretrained-network features for one frame of one video."""

    video_id: str
    frame_idx: int
    t_sec: float
    resnet: np.ndarray
    places: np.ndarray
    objects: np.ndarray
    faces: np.ndarray


# ---------------------------------------------------------------------------
# YUV4MPEG2

_Y4M_MAGIC = b"YUV4MPEG2"
# luma bytes per frame are width*height for every supported mode; only the
# chroma payload size differs
_CHROMA_FACTOR = {"420": 0.5, "420jpeg": 0.5, "420mpeg2": 0.5, "420paldv": 0.5,
                  "444": 2.0, "mono": 0.0}


def read_y4m(path):
    """Parse a YUV4MPEG2 file, keeping only the luma plane of each frame."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_Y4M_MAGIC):
        raise FormatError("not a YUV4MPEG2 stream (bad magic)", path=path, offset=0)
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("unterminated stream header", path=path, offset=len(data))
    header = data[len(_Y4M_MAGIC):nl].decode("ascii", errors="replace")

    width = height = None
    fps = None
    chroma = "420"
    for tok in header.split():
        tag, val = tok[0], tok[1:]
        try:
            if tag == "W":
                width = int(val)
            elif tag == "H":
                height = int(val)
            elif tag == "F":
                num, den = val.split(":")
                fps = Fraction(int(num), int(den))
            elif tag == "C":
                chroma = val
        except (ValueError, ZeroDivisionError):
            raise FormatError(f"malformed header token {tok!r}", path=path, offset=len(_Y4M_MAGIC))
    if width is None or height is None or not width > 0 or not height > 0:
        raise FormatError("header missing valid W/H", path=path, offset=len(_Y4M_MAGIC))
    if fps is None or fps <= 0:
        raise FormatError("header missing valid frame rate", path=path, offset=len(_Y4M_MAGIC))
    if chroma not in _CHROMA_FACTOR:
        raise FormatError(f"unsupported chroma subsampling C{chroma}", path=path,
                          offset=len(_Y4M_MAGIC))

    luma_size = width * height
    chroma_size = int(luma_size * _CHROMA_FACTOR[chroma])

    frames = []
    pos = nl + 1
    while pos < len(data):
        fnl = data.find(b"\n", pos)
        if fnl < 0 or not data[pos:pos + 5] == b"FRAME":
            raise FormatError("expected FRAME marker", path=path, offset=pos)
        payload_start = fnl + 1
        payload_end = payload_start + luma_size + chroma_size
        if payload_end > len(data):
            raise FormatError(
                f"truncated frame payload: expected {luma_size + chroma_size} bytes, "
                f"got {len(data) - payload_start}",
                path=path, offset=payload_start)
        luma = np.frombuffer(data[payload_start:payload_start + luma_size],
                             dtype=np.uint8).reshape(height, width)
        frames.append(luma)
        pos = payload_end

    return FrameSeq(width=width, height=height, fps=fps, frames=tuple(frames))


def write_y4m(seq, path):
    """Write a FrameSeq as monochrome YUV4MPEG2 (round-trips with read_y4m)."""
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W%d H%d F%d:%d Ip A1:1 Cmono\n"
                 % (seq.width, seq.height, seq.fps.numerator, seq.fps.denominator))
        for frame in seq.frames:
            fh.write(b"FRAME\n")
            fh.write(np.ascontiguousarray(frame, dtype=np.uint8).tobytes())


# ---------------------------------------------------------------------------
# RIFF/WAVE

def read_wav(path):
    """Parse a PCM-16 RIFF/WAVE file into a mono AudioTrack.

    Stereo is downmixed by per-sample mean; samples are scaled by 1/32768.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE file", path=path, offset=0)

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise FormatError("short fmt chunk", path=path, offset=pos)
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            pcm = body
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise FormatError("missing fmt chunk", path=path)
    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise FormatError(f"non-PCM codec (format tag {audio_format})", path=path)
    if bits != 16:
        raise FormatError(f"unsupported bit depth {bits} (PCM-16 only)", path=path)
    if n_channels not in (1, 2):
        raise FormatError(f"unsupported channel count {n_channels}", path=path)
    if sample_rate == 0:
        raise FormatError("zero sample rate", path=path)
    if pcm is None:
        raise FormatError("missing data chunk", path=path)

    raw = np.frombuffer(pcm[:len(pcm) - len(pcm) % (2 * n_channels)], dtype="<i2")
    scaled = raw.astype(np.float64) / 32768.0
    if n_channels == 2:
        scaled = scaled.reshape(-1, 2).mean(axis=1)
    return AudioTrack(sample_rate=sample_rate, samples=scaled)


def write_wav(samples, sample_rate, path):
    """Write mono float samples in [-1, 1] as PCM-16 (fixture generation)."""
    pcm = np.clip(np.asarray(samples) * 32768.0, -32768, 32767).astype("<i2").tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate,
                                       sample_rate * 2, 2, 16))
        fh.write(b"data" + struct.pack("<I", len(pcm)) + pcm)


# ---------------------------------------------------------------------------
# Annotations JSONL

def read_annotations(path):
    """Parse the annotations JSONL file (one object per video)."""
    records = []
    seen = set()
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e}", path=path, line=lineno)
            try:
                rec = _parse_record(obj)
            except (KeyError, TypeError) as e:
                raise FormatError(f"missing or malformed field: {e}", path=path, line=lineno)
            except ValidationError as e:
                raise FormatError(str(e), path=path, line=lineno)
            if rec.video_id in seen:
                raise FormatError(f"duplicate video_id {rec.video_id!r}", path=path, line=lineno)
            seen.add(rec.video_id)
            records.append(rec)
    return records


def _parse_record(obj):
    video_id = obj["video_id"]
    duration = float(obj["duration_sec"])
    fps = float(obj["fps"])
    workers = []
    for w in obj["workers"]:
        t = w.get("t_sec")
        if t is not None:
            t = float(t)
            if not 0 <= t <= duration:
                raise ValidationError(
                    f"worker t_sec {t} outside [0, {duration}] for {video_id!r}")
        workers.append(WorkerMark(has_climax=bool(w["has_climax"]), t_sec=t,
                                  rejected=bool(w.get("rejected", False))))
    votes = {}
    for name, count in obj.get("sentiment_votes", {}).items():
        if name not in SENTIMENT_INDEX:
            raise ValidationError(f"unknown sentiment {name!r}")
        count = int(count)
        if not 0 <= count <= 5:
            raise ValidationError(f"sentiment vote count {count} outside [0, 5]")
        votes[name] = count
    topic = obj.get("topic")
    if topic is not None and topic not in TOPIC_INDEX:
        raise ValidationError(f"unknown topic {topic!r}")
    return VideoRecord(video_id=video_id, duration_sec=duration, fps=fps,
                       workers=tuple(workers), sentiment_votes=votes, topic=topic)


# ---------------------------------------------------------------------------
# Features JSONL

_FEATURE_DIMS = {"resnet": RESNET_DIM, "places": PLACES_DIM,
                 "objects": OBJECTS_DIM, "faces": FACES_DIM}


def read_features(path):
    """Parse the per-frame features JSONL file.

    Records come back sorted by (video_id, frame_idx); every dimension
    and range invariant of FeatureRecord is enforced.
    """
    records = []
    last_idx = {}
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e}", path=path, line=lineno)
            try:
                rec = _parse_feature(obj)
            except (KeyError, TypeError) as e:
                raise FormatError(f"missing or malformed field: {e}", path=path, line=lineno)
            except ValidationError as e:
                raise FormatError(str(e), path=path, line=lineno)
            prev = last_idx.get(rec.video_id)
            if prev is not None and rec.frame_idx <= prev:
                raise FormatError(
                    f"non-monotone frame_idx {rec.frame_idx} after {prev} "
                    f"for {rec.video_id!r}", path=path, line=lineno)
            last_idx[rec.video_id] = rec.frame_idx
            records.append(rec)
    records.sort(key=lambda r: (r.video_id, r.frame_idx))
    return records


def _parse_feature(obj):
    vecs = {}
    for name, dim in _FEATURE_DIMS.items():
        v = np.asarray(obj[name], dtype=np.float64)
        if v.shape != (dim,):
            raise ValidationError(f"{name}: expected {dim} values, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError(f"{name}: non-finite values")
        vecs[name] = v
    validate_feature_ranges(vecs["places"], vecs["objects"], vecs["faces"])
    return FeatureRecord(video_id=obj["video_id"], frame_idx=int(obj["frame_idx"]),
                         t_sec=float(obj["t_sec"]), **vecs)


def validate_feature_ranges(places, objects, faces):
    """Range checks shared by the reader and the adapter contract."""
    if (places < 0).any() or (places > 1).any():
        raise ValidationError("places: entries outside [0, 1]")
    total = float(places.sum())
    if abs(total - 1.0) > PLACES_SUM_TOL:
        raise ValidationError(f"places: distribution sums to {total:.6f}, not 1")
    if (objects < 0).any() or (objects > 1).any():
        raise ValidationError("objects: confidences outside [0, 1]")
    expr, va = faces[:8], faces[8:]
    if (expr < 0).any() or (expr > 1).any():
        raise ValidationError("faces: expression block outside [0, 1]")
    if (np.abs(va) > 1).any():
        raise ValidationError("faces: valence/arousal outside [-1, +1]")
