from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adstory.errors import ValidationError
from adstory.ingest import AudioTrack, FrameSeq
from adstory.signals import (SHOT_THRESHOLDS, FlowField, audio_amplitude,
                             dense_flow, extract_signals, flow_magnitude,
                             shot_boundaries)


def _seq(frames, fps=10):
    frames = tuple(np.asarray(f, dtype=np.uint8) for f in frames)
    h, w = frames[0].shape
    return FrameSeq(width=w, height=h, fps=Fraction(fps), frames=frames)


def _gradient_image(n=64):
    x = np.arange(n)
    return 100 + 60 * np.sin(2 * np.pi * x[None, :] / 32) \
               + 60 * np.sin(2 * np.pi * x[:, None] / 32)


class TestAudioAmplitude:
    def test_silent(self):
        track = AudioTrack(sample_rate=100, samples=np.zeros(1000))
        assert (audio_amplitude(track, 10, 100) == 0).all()

    def test_max_of_absolute_values(self):
        samples = np.zeros(100)
        samples[3], samples[4] = 0.5, -0.8
        track = AudioTrack(sample_rate=100, samples=samples)
        a = audio_amplitude(track, 10, 10)
        assert a[0] == pytest.approx(0.8)

    def test_past_audio_end_is_zero(self):
        track = AudioTrack(sample_rate=100, samples=np.full(50, 0.5))
        a = audio_amplitude(track, 10, 10)
        assert (a[:5] == 0.5).all() and (a[5:] == 0).all()

    @given(seed=st.integers(0, 2 ** 32 - 1), fps=st.sampled_from([5, 10, 24]))
    @settings(max_examples=30, deadline=None)
    def test_matches_bruteforce_window_scan(self, seed, fps):
        rng = np.random.default_rng(seed)
        sr = 97
        samples = rng.uniform(-1, 1, size=rng.integers(10, 400))
        track = AudioTrack(sample_rate=sr, samples=samples)
        n_frames = 7
        got = audio_amplitude(track, fps, n_frames)
        for k in range(n_frames):
            window = [abs(s) for i, s in enumerate(samples)
                      if k / fps <= i / sr < (k + 1) / fps]
            assert got[k] == pytest.approx(max(window) if window else 0.0)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_sign_flip_invariance(self, seed):
        rng = np.random.default_rng(seed)
        samples = rng.uniform(-1, 1, size=200)
        a1 = audio_amplitude(AudioTrack(sample_rate=100, samples=samples), 10, 5)
        a2 = audio_amplitude(AudioTrack(sample_rate=100, samples=-samples), 10, 5)
        assert (a1 == a2).all()


class TestDenseFlow:
    def test_identical_frames_zero_field(self):
        img = _gradient_image()
        f = dense_flow(img, img)
        assert (f.u == 0).all() and (f.v == 0).all()

    def test_constant_frames_zero_field(self):
        img = np.full((8, 8), 55.0)
        f = dense_flow(img, img + 0)
        assert (f.u == 0).all() and (f.v == 0).all()

    def test_translation_fixture(self):
        img = _gradient_image()
        f = dense_flow(img, np.roll(img, 1, axis=1))
        assert 0.8 <= f.u.mean() <= 1.2
        assert np.abs(f.v).mean() < 0.2
        # mean endpoint error against the true (1, 0) displacement
        epe = np.sqrt((f.u - 1) ** 2 + f.v ** 2).mean()
        assert epe <= 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="differ"):
            dense_flow(np.zeros((4, 4)), np.zeros((4, 5)))


class TestFlowMagnitude:
    def test_zero_field(self):
        f = FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4)))
        assert flow_magnitude(f) == 0.0

    def test_three_four_five(self):
        f = FlowField(u=np.full((6, 7), 3.0), v=np.full((6, 7), 4.0))
        assert flow_magnitude(f) == pytest.approx(5.0, abs=1e-12)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_matches_double_loop_sum(self, seed):
        rng = np.random.default_rng(seed)
        h, w = rng.integers(2, 9, size=2)
        u = rng.normal(size=(h, w))
        v = rng.normal(size=(h, w))
        total = 0.0
        for i in range(h):
            for j in range(w):
                total += np.sqrt(u[i, j] ** 2 + v[i, j] ** 2)
        expected = total / (w * h)
        got = flow_magnitude(FlowField(u=u, v=v))
        assert got == pytest.approx(expected, rel=1e-12)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_negation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(5, 5))
        v = rng.normal(size=(5, 5))
        assert flow_magnitude(FlowField(u=u, v=v)) == \
            flow_magnitude(FlowField(u=-u, v=-v))


class TestShotBoundaries:
    def test_constant_video(self):
        seq = _seq([np.full((8, 8), 100)] * 5)
        assert (shot_boundaries(seq) == 0).all()

    def test_hard_cut_black_to_white(self):
        seq = _seq([np.zeros((8, 8)), np.full((8, 8), 255)])
        b = shot_boundaries(seq)
        # disjoint histograms: d = 1 > every threshold
        assert (b[0] == 0).all()
        assert (b[1] == 1).all()

    def test_partial_drift_fires_lowest_only(self):
        # move 20% of pixels across a bin boundary: d = 0.2
        f0 = np.zeros((10, 10))
        f1 = np.zeros((10, 10))
        f1[:2, :] = 255  # 20 of 100 pixels leave bin 0
        b = shot_boundaries(_seq([f0, f1]))
        # hand histogram: |h1 - h0| = 0.2 + 0.2 -> d = 0.2
        assert list(b[1]) == [1, 0, 0, 0, 0]

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_threshold_monotonicity(self, seed):
        rng = np.random.default_rng(seed)
        frames = [rng.integers(0, 256, size=(8, 8)) for _ in range(6)]
        b = shot_boundaries(_seq(frames))
        for row in b:
            # indicator at a higher threshold implies all lower ones
            for m in range(1, len(SHOT_THRESHOLDS)):
                if row[m]:
                    assert row[:m].all()


class TestExtractSignals:
    def test_single_frame_degenerate(self):
        seq = _seq([np.zeros((4, 4))], fps=1)
        audio = AudioTrack(sample_rate=100, samples=np.zeros(100))
        track = extract_signals(seq, audio)
        assert track.n_frames == 1
        assert track.audio[0] == 0 and track.flow[0] == 0
        assert (track.shot[0] == 0).all()

    def test_cut_and_burst_align(self):
        fps = 10
        frames = [np.full((8, 8), 20)] * 10 + [np.full((8, 8), 230)] * 10
        seq = _seq(frames, fps=fps)
        samples = np.zeros(2 * 100)
        samples[100] = 0.9  # burst at t = 1.0 s = frame 10
        audio = AudioTrack(sample_rate=100, samples=samples)
        track = extract_signals(seq, audio)
        assert track.audio.argmax() == 10
        assert track.shot[10].any()

    def test_length_contract(self):
        rng = np.random.default_rng(0)
        frames = [rng.integers(0, 256, size=(6, 6)) for _ in range(7)]
        audio = AudioTrack(sample_rate=50, samples=rng.uniform(-1, 1, 40))
        track = extract_signals(_seq(frames, fps=10), audio)
        assert len(track.audio) == len(track.flow) == len(track.shot) == 7

    def test_batched_flow_matches_pairwise(self):
        rng = np.random.default_rng(1)
        frames = [rng.integers(0, 256, size=(8, 8)) for _ in range(4)]
        audio = AudioTrack(sample_rate=100, samples=np.zeros(100))
        track = extract_signals(_seq(frames, fps=4), audio)
        for k in range(1, 4):
            f = dense_flow(frames[k - 1], frames[k])
            assert track.flow[k] == pytest.approx(flow_magnitude(f), rel=1e-12)
