"""Fused per-frame feature vectors for the supervised models.

The layout concatenates, in fixed order: resnet (2048), flow (1),
shot (5), audio (1), places (365), objects (80), faces (10) = 2510
values per second, with an optional trailing climax probability (2511)
for the sentiment task. The layout descriptor is versioned and hashed;
caches and checkpoints refuse to load under a different layout.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .peaks import aggregate_per_second

LAYOUT_VERSION = 1
# block name -> (offset, length); order is load-bearing
LAYOUT = {
    "resnet": (0, 2048),
    "flow": (2048, 1),
    "shot": (2049, 5),
    "audio": (2054, 1),
    "places": (2055, 365),
    "objects": (2420, 80),
    "faces": (2500, 10),
}
BASE_DIM = 2510
CLIMAX_SLOT = BASE_DIM  # optional trailing value, giving dim 2511

MAX_SEQ_LEN = 60
SCALE_FLOOR = 1e-6


def layout_hash():
    blob = json.dumps({"version": LAYOUT_VERSION, "blocks": LAYOUT}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def block_slice(name):
    off, length = LAYOUT[name]
    return slice(off, off + length)


def block_columns(blocks, dim):
    """Column indices for a subset of layout blocks (ablation-style runs).

    ``"climax"`` names the optional trailing slot, present when dim is
    2511. Only defined for full-layout matrices.
    """
    if dim not in (BASE_DIM, BASE_DIM + 1):
        raise ValidationError(f"block selection needs a full-layout matrix, got dim {dim}")
    cols = []
    for name in blocks:
        if name == "climax":
            if dim != BASE_DIM + 1:
                raise ValidationError("climax slot not present in this dataset")
            cols.append(CLIMAX_SLOT)
        elif name in LAYOUT:
            cols.extend(range(*block_slice(name).indices(dim)))
        else:
            raise ValidationError(f"unknown feature block {name!r}")
    return sorted(set(cols))


@dataclass(frozen=True)
class FrameFeatures:
    """One second's fused feature vector."""

    vector: np.ndarray
    t_sec: float

    def __post_init__(self):
        if self.vector.shape not in ((BASE_DIM,), (BASE_DIM + 1,)):
            raise ValidationError(f"vector length {self.vector.shape} not in "
                                  f"{{{BASE_DIM}, {BASE_DIM + 1}}}")
        if not np.isfinite(self.vector).all():
            raise ValidationError("feature vector has non-finite values")


@dataclass
class VideoTensor:
    """One video's model input: 1 Hz feature rows plus training targets."""

    video_id: str
    frames: np.ndarray            # (n, dim) float64, n <= MAX_SEQ_LEN
    sentiment_targets: np.ndarray  # (30,) soft scores in [0, 1]
    topic_idx: int                 # -1 when absent
    climax_targets: np.ndarray     # (n,) 0/1 per second
    weights: np.ndarray = field(default=None)  # (30,) per-class loss weights

    def __post_init__(self):
        if len(self.climax_targets) != len(self.frames):
            raise ValidationError("climax targets must match frame count")
        if self.weights is None:
            self.weights = np.ones(30)


def assemble(features, signals):
    """Fuse one video's feature records and signal track at 1 Hz.

    ``features`` holds the video's FeatureRecords (1 Hz sampling); each
    second must have at least one record. Signal scalars are aggregated
    per second as in the unsupervised path; the shot block is the
    element-wise max over the second's frames.
    """
    series = aggregate_per_second(signals)
    n_seconds = series["audio"].duration_sec

    by_second = {}
    for rec in features:
        s = int(rec.t_sec)
        by_second.setdefault(s, rec)

    fps = signals.fps
    frame_seconds = np.minimum((np.arange(signals.n_frames) / fps).astype(int),
                               max(n_seconds - 1, 0))
    out = []
    for s in range(n_seconds):
        rec = by_second.get(s)
        if rec is None:
            raise ValidationError(f"no feature record covers second {s}")
        vec = np.empty(BASE_DIM)
        vec[block_slice("resnet")] = rec.resnet
        vec[block_slice("flow")] = series["flow"].values[s]
        in_second = frame_seconds == s
        vec[block_slice("shot")] = signals.shot[in_second].max(axis=0) if in_second.any() else 0
        vec[block_slice("audio")] = series["audio"].values[s]
        vec[block_slice("places")] = rec.places
        vec[block_slice("objects")] = rec.objects
        vec[block_slice("faces")] = rec.faces
        out.append(FrameFeatures(vector=vec, t_sec=float(s)))
    return out


def inject_climax(frames, climax_probs):
    """Append one per-second climax probability to each feature vector."""
    if len(climax_probs) != len(frames):
        raise ValidationError(f"climax probs length {len(climax_probs)} != "
                              f"frame count {len(frames)}")
    out = []
    for f, p in zip(frames, climax_probs):
        if f.vector.shape != (BASE_DIM,):
            raise ValidationError("climax slot already present")
        out.append(FrameFeatures(vector=np.concatenate([f.vector, [float(p)]]),
                                 t_sec=f.t_sec))
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-scoring parameters, fit on the training split only."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, matrix):
        return (matrix - self.mean) / self.scale


def fit_standardizer(matrices):
    """Fit per-dimension mean/scale over the rows of the given matrices."""
    rows = np.concatenate([m for m in matrices if len(m)], axis=0)
    if rows.size == 0:
        raise ValidationError("cannot standardize an empty dataset")
    mean = rows.mean(axis=0)
    scale = np.maximum(rows.std(axis=0), SCALE_FLOOR)
    return Standardizer(mean=mean, scale=scale)


def standardize(train_tensors, *other_splits):
    """Z-score every split with statistics fit on the training split.

    Returns the standardized splits (same structure) and the parameters.
    """
    std = fit_standardizer([t.frames for t in train_tensors])

    def apply_split(tensors):
        return [VideoTensor(video_id=t.video_id, frames=std.apply(t.frames),
                            sentiment_targets=t.sentiment_targets,
                            topic_idx=t.topic_idx, climax_targets=t.climax_targets,
                            weights=t.weights)
                for t in tensors]

    result = [apply_split(train_tensors)] + [apply_split(s) for s in other_splits]
    return result, std


def truncate(frames_matrix, climax_targets, max_len=MAX_SEQ_LEN):
    return frames_matrix[:max_len], climax_targets[:max_len]


# ---------------------------------------------------------------------------
# Binary tensor cache

_MAGIC = b"ADSTENS\x01"
_VERSION = 1


def save_tensors(tensors, path):
    """Write assembled tensors to the binary cache (bit-exact round-trip)."""
    lh = bytes.fromhex(layout_hash())
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(lh)
        fh.write(struct.pack("<I", len(tensors)))
        for t in tensors:
            vid = t.video_id.encode()
            fh.write(struct.pack("<H", len(vid)) + vid)
            n, dim = t.frames.shape
            fh.write(struct.pack("<IIi", n, dim, t.topic_idx))
            fh.write(np.ascontiguousarray(t.frames, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(t.sentiment_targets, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(t.climax_targets, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(t.weights, dtype="<f8").tobytes())


def load_tensors(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _MAGIC:
        raise FormatError("bad tensor cache magic", path=path, offset=0)
    (version,) = struct.unpack_from("<I", data, 8)
    if version != _VERSION:
        raise FormatError(f"tensor cache version {version} != {_VERSION}", path=path)
    if data[12:44].hex() != layout_hash():
        raise FormatError("tensor cache layout hash mismatch", path=path)
    (n_videos,) = struct.unpack_from("<I", data, 44)
    pos = 48
    out = []
    try:
        for _ in range(n_videos):
            (id_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            vid = data[pos:pos + id_len].decode()
            pos += id_len
            n, dim, topic_idx = struct.unpack_from("<IIi", data, pos)
            pos += 12

            def take(count):
                nonlocal pos
                arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).copy()
                pos += count * 8
                return arr

            frames = take(n * dim).reshape(n, dim)
            sent = take(30)
            climax = take(n)
            weights = take(30)
            out.append(VideoTensor(video_id=vid, frames=frames,
                                   sentiment_targets=sent, topic_idx=topic_idx,
                                   climax_targets=climax, weights=weights))
    except (struct.error, ValueError) as e:
        raise FormatError(f"truncated tensor cache: {e}", path=path, offset=pos)
    return out
