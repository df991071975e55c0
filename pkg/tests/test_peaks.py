import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adstory.peaks import (PerSecondSeries, aggregate_per_second,
                           heuristic_baseline, longest_run_centers,
                           top_k_peaks)
from adstory.signals import SignalTrack


def _track(audio, shot, flow, fps):
    return SignalTrack(audio=np.asarray(audio, dtype=float),
                       shot=np.asarray(shot, dtype=np.int8),
                       flow=np.asarray(flow, dtype=float), fps=fps)


def brute_force_top_k(values, k):
    """Full sort with (value desc, second asc) ordering, cycled to length k."""
    ranked = sorted(range(len(values)), key=lambda s: (-values[s], s))
    return [ranked[i % len(ranked)] for i in range(k)]


def brute_force_run_centers(values, k):
    """Exhaustive run enumeration, then the library's fallback rule."""
    runs = []
    s = 0
    while s < len(values):
        if values[s] > 0:
            e = s
            while e + 1 < len(values) and values[e + 1] > 0:
                e += 1
            runs.append((s, e))
            s = e + 1
        else:
            s += 1
    runs.sort(key=lambda r: (-(r[1] - r[0] + 1), r[0]))
    out = [(a + b) // 2 for a, b in runs[:k]]
    if len(out) < k:
        chosen = set(out)
        for sec in brute_force_top_k(values, len(values)):
            if len(out) == k:
                break
            if sec not in chosen:
                out.append(sec)
                chosen.add(sec)
        while len(out) < k:
            out.append(out[-1])
    return out


class TestAggregatePerSecond:
    def test_audio_max_per_second(self):
        audio = np.zeros(20)
        audio[15] = 0.9
        t = _track(audio, np.zeros((20, 5)), np.zeros(20), fps=10)
        series = aggregate_per_second(t)
        assert list(series["audio"].values) == [0.0, 0.9]

    def test_flow_mean_of_constant(self):
        t = _track(np.zeros(20), np.zeros((20, 5)), np.full(20, 2.0), fps=10)
        assert (aggregate_per_second(t)["flow"].values == 2.0).all()

    def test_shot_count(self):
        shot = np.zeros((20, 5))
        shot[3, 0] = 1
        shot[5, 2] = 1
        t = _track(np.zeros(20), shot, np.zeros(20), fps=10)
        assert list(aggregate_per_second(t)["shots"].values) == [2.0, 0.0]


class TestTopKPeaks:
    def test_argmax(self):
        p = top_k_peaks(PerSecondSeries(np.array([0, 3, 1, 5, 2.0])), 1)
        assert p.timestamps_sec == (3,)

    def test_tie_earlier_first(self):
        p = top_k_peaks(PerSecondSeries(np.array([2, 2, 1.0])), 2)
        assert p.timestamps_sec == (0, 1)

    def test_short_series_padded_in_range(self):
        p = top_k_peaks(PerSecondSeries(np.array([1.0, 5.0])), 3)
        assert len(p.timestamps_sec) == 3
        assert all(0 <= t < 2 for t in p.timestamps_sec)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_matches_sort_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 120))
        values = np.round(rng.uniform(0, 1, size=n), 2)  # force ties
        k = int(rng.integers(1, 5))
        got = top_k_peaks(PerSecondSeries(values), k).timestamps_sec
        assert list(got) == brute_force_top_k(list(values), k)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_positive_scaling_invariance(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.uniform(0, 1, size=30)
        a = top_k_peaks(PerSecondSeries(values), 3).timestamps_sec
        b = top_k_peaks(PerSecondSeries(values * 7.3), 3).timestamps_sec
        assert a == b

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_rank_values_non_increasing(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.uniform(0, 1, size=40)
        p = top_k_peaks(PerSecondSeries(values), 5)
        ranked = [values[t] for t in p.timestamps_sec]
        assert all(a >= b for a, b in zip(ranked, ranked[1:]))


class TestLongestRunCenters:
    def test_single_run_center(self):
        values = np.zeros(12)
        values[[3, 4, 5, 9]] = 1
        p = longest_run_centers(PerSecondSeries(values), 1)
        assert p.timestamps_sec == (4,)

    def test_equal_runs_earlier_wins(self):
        values = np.zeros(8)
        values[[0, 1, 5, 6]] = 1
        p = longest_run_centers(PerSecondSeries(values), 1)
        assert p.timestamps_sec == (0,)

    def test_single_run_floor_midpoint(self):
        for start, end in [(2, 2), (2, 5), (0, 6)]:
            values = np.zeros(10)
            values[start:end + 1] = 1
            p = longest_run_centers(PerSecondSeries(values), 1)
            assert p.timestamps_sec == ((start + end) // 2,)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_matches_run_scan_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 120))
        values = (rng.uniform(0, 1, size=n) < 0.3).astype(float)
        k = int(rng.integers(1, 5))
        got = longest_run_centers(PerSecondSeries(values), k).timestamps_sec
        assert list(got) == brute_force_run_centers(list(values), k)


class TestHeuristicBaseline:
    def test_top3_long_video(self):
        assert heuristic_baseline(40, 3).timestamps_sec == (5, 15, 25)

    def test_top1_long_video(self):
        assert heuristic_baseline(40, 1).timestamps_sec == (5,)

    def test_clamped_short_video(self):
        assert heuristic_baseline(10, 3).timestamps_sec == (5, 9, 9)
