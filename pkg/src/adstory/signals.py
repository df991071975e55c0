"""Per-frame climax indicators: audio amplitude, shot boundaries, optical flow.

The three tracks are:
  * audio   -- max |sample| over the frame's time window, in [0, 1]
  * shot    -- 5 binary boundary detections per frame at rising thresholds
  * flow    -- mean Euclidean magnitude of the dense inter-frame motion field
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .errors import ValidationError
from .ingest import AudioTrack, FrameSeq

HS_ALPHA = 1.0
HS_ITERATIONS = 100

SHOT_THRESHOLDS = (0.15, 0.25, 0.35, 0.50, 0.65)
SHOT_HIST_BINS = 64

# Horn-Schunck stencils: forward-difference derivatives averaged over the
# 2x2x2 cube, and the 8-neighbour weighted average for the Jacobi step.
_KX = np.array([[-1.0, 1.0], [-1.0, 1.0]]) * 0.25
_KY = np.array([[-1.0, -1.0], [1.0, 1.0]]) * 0.25
_KT = np.ones((2, 2)) * 0.25
_KAVG = np.array([[1 / 12, 1 / 6, 1 / 12],
                  [1 / 6, 0.0, 1 / 6],
                  [1 / 12, 1 / 6, 1 / 12]])


@dataclass(frozen=True)
class FlowField:
    """Dense motion field between two frames, in pixels/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ValidationError("u and v must have identical dimensions")


@dataclass(frozen=True)
class SignalTrack:
    """The three indicator tracks, length-aligned to the frame count."""

    audio: np.ndarray  # (n,) floats in [0, 1]
    shot: np.ndarray   # (n, 5) 0/1
    flow: np.ndarray   # (n,) floats >= 0
    fps: float

    def __post_init__(self):
        n = len(self.audio)
        if len(self.flow) != n or self.shot.shape != (n, 5):
            raise ValidationError("signal tracks must share the frame count")

    @property
    def n_frames(self):
        return len(self.audio)


def audio_amplitude(audio: AudioTrack, fps, n_frames):
    """Max |sample| within each frame window [k/fps, (k+1)/fps).

    Frames past the end of the audio get 0.
    """
    if fps <= 0:
        raise ValidationError("fps must be positive")
    out = np.zeros(n_frames)
    mags = np.abs(audio.samples)
    n_samples = len(mags)
    for k in range(n_frames):
        lo = int(np.ceil(k / fps * audio.sample_rate))
        hi = int(np.ceil((k + 1) / fps * audio.sample_rate))
        lo, hi = min(lo, n_samples), min(hi, n_samples)
        if hi > lo:
            out[k] = mags[lo:hi].max()
    return out


def _flow_stack(prev, nxt):
    """Jacobi Horn-Schunck on a stack of frame pairs (batched over axis 0)."""
    i0 = prev.astype(np.float64)
    i1 = nxt.astype(np.float64)
    kx = _KX[None]
    ky = _KY[None]
    kt = _KT[None]
    kavg = _KAVG[None]
    # derivatives estimated symmetrically across both frames
    ix = correlate(i0, kx, mode="nearest") + correlate(i1, kx, mode="nearest")
    iy = correlate(i0, ky, mode="nearest") + correlate(i1, ky, mode="nearest")
    it = correlate(i1, kt, mode="nearest") - correlate(i0, kt, mode="nearest")

    denom = HS_ALPHA ** 2 + ix ** 2 + iy ** 2
    u = np.zeros_like(i0)
    v = np.zeros_like(i0)
    for _ in range(HS_ITERATIONS):
        u_avg = correlate(u, kavg, mode="nearest")
        v_avg = correlate(v, kavg, mode="nearest")
        common = (ix * u_avg + iy * v_avg + it) / denom
        u = u_avg - ix * common
        v = v_avg - iy * common
    return u, v


def dense_flow(prev, nxt):
    """Dense optical flow between two luma planes (Horn-Schunck).

    Minimizes the squared data term plus alpha^2-weighted smoothness via
    fixed-count Jacobi iterations from a zero initial field.
    """
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    if prev.shape != nxt.shape:
        raise ValidationError(f"frame dimensions differ: {prev.shape} vs {nxt.shape}")
    if prev.ndim != 2 or min(prev.shape) < 2:
        raise ValidationError("frames must be at least 2x2")
    u, v = _flow_stack(prev[None], nxt[None])
    return FlowField(u=u[0], v=v[0])


def flow_magnitude(field: FlowField):
    """Mean per-pixel Euclidean length of the motion field."""
    return float(np.sqrt(field.u ** 2 + field.v ** 2).mean())


def _luma_histogram(frame):
    hist = np.bincount((frame.reshape(-1) >> 2).astype(np.intp), minlength=SHOT_HIST_BINS)
    return hist / frame.size


def shot_boundaries(frames: FrameSeq):
    """5 binary boundary detections per frame.

    For consecutive frames, d = half the L1 distance between 64-bin
    normalized luma histograms (so d is in [0, 1]); detector m fires when
    d exceeds its threshold. Frame 0 has no predecessor and gets zeros.
    """
    n = frames.n_frames
    out = np.zeros((n, len(SHOT_THRESHOLDS)), dtype=np.int8)
    if n == 0:
        return out
    prev_hist = _luma_histogram(np.asarray(frames.frames[0], dtype=np.uint8))
    taus = np.array(SHOT_THRESHOLDS)
    for k in range(1, n):
        hist = _luma_histogram(np.asarray(frames.frames[k], dtype=np.uint8))
        d = 0.5 * np.abs(hist - prev_hist).sum()
        out[k] = d > taus
        prev_hist = hist
    return out


def extract_signals(frames: FrameSeq, audio: AudioTrack):
    """Compute all three indicator tracks for one video.

    Flow for frame k is the field from frame k-1 to k; frame 0 gets 0.
    """
    n = frames.n_frames
    a = audio_amplitude(audio, float(frames.fps), n)
    b = shot_boundaries(frames)
    o = np.zeros(n)
    if n > 1:
        stack_prev = np.stack([np.asarray(f) for f in frames.frames[:-1]])
        stack_next = np.stack([np.asarray(f) for f in frames.frames[1:]])
        u, v = _flow_stack(stack_prev, stack_next)
        o[1:] = np.sqrt(u ** 2 + v ** 2).mean(axis=(1, 2))
    return SignalTrack(audio=a, shot=b, flow=o, fps=float(frames.fps))
