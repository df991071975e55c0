"""Unsupervised climax prediction from per-second signal series.

Signals are aggregated to one value per second; climax candidates are the
top-k maxima of a series, or run centers for the shot-boundary series.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .signals import SignalTrack

METHODS = ("audio", "flow", "shots", "baseline", "lstm")

BASELINE_TOP1 = (5,)
BASELINE_TOP3 = (5, 15, 25)


@dataclass(frozen=True)
class PerSecondSeries:
    """One scalar per whole second of video."""

    values: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise ValidationError("per-second values must be finite")

    @property
    def duration_sec(self):
        return len(self.values)


@dataclass(frozen=True)
class ClimaxPrediction:
    """Ranked climax timestamps (best first)."""

    timestamps_sec: tuple
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")


def aggregate_per_second(track: SignalTrack):
    """Collapse per-frame signals to per-second series.

    audio: max amplitude; flow: mean magnitude; shots: count of frames
    with any boundary detection.
    """
    n_seconds = int(np.ceil(track.n_frames / track.fps))
    audio = np.zeros(n_seconds)
    flow = np.zeros(n_seconds)
    shots = np.zeros(n_seconds)
    seconds = np.minimum((np.arange(track.n_frames) / track.fps).astype(int),
                         max(n_seconds - 1, 0))
    any_shot = track.shot.any(axis=1)
    for s in range(n_seconds):
        idx = seconds == s
        if idx.any():
            audio[s] = track.audio[idx].max()
            flow[s] = track.flow[idx].mean()
            shots[s] = int(any_shot[idx].sum())
    return {"audio": PerSecondSeries(audio), "flow": PerSecondSeries(flow),
            "shots": PerSecondSeries(shots)}


def _ranked_seconds(values):
    """All seconds sorted by value descending, earlier second on ties."""
    order = np.lexsort((np.arange(len(values)), -np.asarray(values, dtype=np.float64)))
    return [int(s) for s in order]


def top_k_peaks(series: PerSecondSeries, k, method="audio"):
    """The k seconds with highest value, ranked descending (ties: earlier).

    A series shorter than k is padded by cycling through the ranking
    again, so timestamps never leave [0, duration).
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if series.duration_sec == 0:
        raise ValidationError("series is empty")
    ranked = _ranked_seconds(series.values)
    out = [ranked[i % len(ranked)] for i in range(k)]
    return ClimaxPrediction(timestamps_sec=tuple(out), method=method)


def _runs(values):
    """Maximal runs of consecutive seconds with value > 0, as (start, end)."""
    runs = []
    start = None
    for s, v in enumerate(values):
        if v > 0 and start is None:
            start = s
        elif v <= 0 and start is not None:
            runs.append((start, s - 1))
            start = None
    if start is not None:
        runs.append((start, len(values) - 1))
    return runs


def longest_run_centers(shots: PerSecondSeries, k):
    """Centers of the k longest runs of shot-boundary activity.

    Runs are ranked by length descending (ties: earlier start) and each
    contributes its floor-midpoint. If there are fewer runs than k the
    remaining slots fall back to top-k peaks of the series, skipping
    seconds already chosen.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    runs = sorted(_runs(shots.values), key=lambda r: (-(r[1] - r[0] + 1), r[0]))
    out = [(start + end) // 2 for start, end in runs[:k]]
    if len(out) < k:
        chosen = set(out)
        for s in top_k_peaks(shots, shots.duration_sec, method="shots").timestamps_sec:
            if len(out) == k:
                break
            if s not in chosen:
                out.append(s)
                chosen.add(s)
        while len(out) < k:  # fewer distinct seconds than k
            out.append(out[-1])
    return ClimaxPrediction(timestamps_sec=tuple(out), method="shots")


def heuristic_baseline(duration_sec, k):
    """Fixed-guess baseline: 5 s for top-1; 5, 15, 25 s for top-3.

    Guesses past the end of a short video are clamped to its last second.
    """
    if k not in (1, 3):
        raise ValidationError("baseline defined for k in {1, 3}")
    guesses = BASELINE_TOP1 if k == 1 else BASELINE_TOP3
    last = max(int(duration_sec) - 1, 0)
    return ClimaxPrediction(timestamps_sec=tuple(min(g, last) for g in guesses),
                            method="baseline")
