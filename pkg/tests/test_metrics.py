import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adstory.errors import ValidationError
from adstory.ingest import VideoRecord, WorkerMark
from adstory.metrics import (agreement_labels, average_precision,
                             climax_recall, climax_report, emit_plot_csv,
                             emit_report, render_text, sentiment_metrics)
from adstory.peaks import PerSecondSeries
from adstory.vocab import SENTIMENTS


def _record(vid, marks=(10.0,), votes=None):
    workers = [WorkerMark(has_climax=True, t_sec=t, rejected=False)
               for t in marks]
    return VideoRecord(video_id=vid, duration_sec=40.0, fps=25.0,
                       workers=workers, sentiment_votes=votes or {},
                       topic=None)


def brute_force_recall(predictions, records, k, window):
    n_eval = n_correct = 0
    for rec in records:
        marks = rec.accepted_marks()
        if not marks:
            continue
        n_eval += 1
        hit = False
        for p in list(predictions.get(rec.video_id, ()))[:k]:
            for g in marks:
                if abs(int(p) - int(g)) <= window:
                    hit = True
        n_correct += hit
    return n_correct / n_eval if n_eval else 0.0


class TestClimaxRecall:
    def test_window_two_boundary_inside(self):
        records = [_record("v", marks=(7.4,))]
        assert climax_recall({"v": [5]}, records, k=1, window=2) == 1.0

    def test_window_two_boundary_outside(self):
        records = [_record("v", marks=(8.0,))]
        assert climax_recall({"v": [5]}, records, k=1, window=2) == 0.0

    def test_floor_matching(self):
        # pred 5 vs mark 6.9: |5 - 6| = 1
        records = [_record("v", marks=(6.9,))]
        assert climax_recall({"v": [5]}, records, k=1, window=1) == 1.0
        assert climax_recall({"v": [5]}, records, k=1, window=0) == 0.0

    def test_top3_uses_later_predictions(self):
        records = [_record("v", marks=(20.0,))]
        preds = {"v": [3, 9, 20]}
        assert climax_recall(preds, records, k=1, window=2) == 0.0
        assert climax_recall(preds, records, k=3, window=0) == 1.0

    def test_no_marks_excluded_from_denominator(self):
        records = [_record("v1", marks=(10.0,)),
                   VideoRecord(video_id="v2", duration_sec=40.0, fps=25.0,
                               workers=[], sentiment_votes={}, topic=None)]
        assert climax_recall({"v1": [10], "v2": [1]}, records, 1, 0) == 1.0

    def test_unknown_video_rejected(self):
        with pytest.raises(ValidationError, match="unknown video"):
            climax_recall({"ghost": [1]}, [_record("v")], 1, 0)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_matches_bruteforce_oracle(self, seed):
        rng = np.random.default_rng(seed)
        records = [_record(f"v{i}",
                           marks=tuple(rng.uniform(0, 39, rng.integers(0, 4))))
                   for i in range(6)]
        preds = {f"v{i}": [int(t) for t in rng.integers(0, 40, 3)]
                 for i in range(6)}
        k = int(rng.choice([1, 3]))
        w = int(rng.choice([0, 1, 2]))
        assert climax_recall(preds, records, k, w) == \
            brute_force_recall(preds, records, k, w)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_k_and_window(self, seed):
        rng = np.random.default_rng(seed)
        records = [_record(f"v{i}", marks=(float(rng.uniform(0, 39)),))
                   for i in range(8)]
        preds = {f"v{i}": [int(t) for t in rng.integers(0, 40, 3)]
                 for i in range(8)}
        grid = {(k, w): climax_recall(preds, records, k, w)
                for k in (1, 3) for w in (0, 1, 2)}
        for w in (0, 1, 2):
            assert grid[(1, w)] <= grid[(3, w)]
        for k in (1, 3):
            assert grid[(k, 0)] <= grid[(k, 1)] <= grid[(k, 2)]


class TestAgreementLabels:
    def test_vote_thresholds(self):
        rec = _record("v", votes={SENTIMENTS[0]: 1, SENTIMENTS[1]: 2,
                                  SENTIMENTS[2]: 3})
        assert agreement_labels([rec], 1)["v"] == {0, 1, 2}
        assert agreement_labels([rec], 2)["v"] == {1, 2}
        assert agreement_labels([rec], 3)["v"] == {2}

    def test_levels_nest(self):
        rng = np.random.default_rng(0)
        recs = [_record(f"v{i}",
                        votes={s: int(rng.integers(0, 5)) for s in SENTIMENTS})
                for i in range(5)]
        for rec in recs:
            l1 = agreement_labels(recs, 1)[rec.video_id]
            l2 = agreement_labels(recs, 2)[rec.video_id]
            l3 = agreement_labels(recs, 3)[rec.video_id]
            assert l3 <= l2 <= l1

    def test_bad_level(self):
        with pytest.raises(ValidationError, match="agreement level"):
            agreement_labels([_record("v")], 5)


def enumerate_ap(scores, positives):
    """Direct 11-level enumeration over the explicit ranking."""
    ranking = sorted(scores, key=lambda v: (-scores[v], v))
    n_pos = len(positives)
    total = 0.0
    for level in [i / 10 for i in range(11)]:
        best = 0.0
        hits = 0
        for rank, vid in enumerate(ranking, start=1):
            if vid in positives:
                hits += 1
                if hits / n_pos >= level - 1e-12:
                    best = max(best, hits / rank)
        total += best
    return total / 11


class TestAveragePrecision:
    def test_pos_neg_pos_hand_value(self):
        scores = {"a": 3.0, "b": 2.0, "c": 1.0}
        # ranking pos, neg, pos: levels <= 0.5 interpolate to precision 1,
        # the rest to 2/3 -> (6*1 + 5*2/3) / 11 = 28/33
        assert average_precision(scores, {"a", "c"}) == \
            pytest.approx(28 / 33, abs=1e-12)

    def test_perfect_ranking(self):
        scores = {"a": 5.0, "b": 4.0, "c": 1.0, "d": 0.0}
        assert average_precision(scores, {"a", "b"}) == pytest.approx(1.0)

    def test_tie_break_lexicographic(self):
        # equal scores: "a" ranks before "b"
        scores = {"a": 1.0, "b": 1.0}
        assert average_precision(scores, {"a"}) == pytest.approx(1.0)
        assert average_precision(scores, {"b"}) == pytest.approx(0.5)

    def test_no_positives_rejected(self):
        with pytest.raises(ValidationError, match="positive"):
            average_precision({"a": 1.0}, set())

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_matches_enumeration_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 25))
        scores = {f"v{i}": float(np.round(rng.uniform(0, 1), 1))
                  for i in range(n)}
        positives = {f"v{i}" for i in range(n) if rng.random() < 0.4}
        if not positives:
            positives = {"v0"}
        got = average_precision(scores, positives)
        assert got == pytest.approx(enumerate_ap(scores, positives), abs=1e-12)

    @given(seed=st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_invariant_under_increasing_transform(self, seed):
        rng = np.random.default_rng(seed)
        scores = {f"v{i}": float(rng.normal()) for i in range(12)}
        positives = {f"v{i}" for i in range(12) if rng.random() < 0.5} or {"v0"}
        a = average_precision(scores, positives)
        warped = {v: 3 * s + 7 for v, s in scores.items()}
        assert average_precision(warped, positives) == pytest.approx(a, abs=1e-12)


class TestSentimentMetrics:
    def _fixture(self):
        votes = [
            {SENTIMENTS[0]: 3, SENTIMENTS[1]: 2},
            {SENTIMENTS[0]: 2},
            {SENTIMENTS[1]: 1},
            {SENTIMENTS[0]: 1, SENTIMENTS[1]: 3},
            {},
        ]
        records = [_record(f"v{i}", votes=v) for i, v in enumerate(votes)]
        rng = np.random.default_rng(3)
        scores = rng.normal(size=(5, 30))
        ids = [f"v{i}" for i in range(5)]
        return scores, ids, records

    def test_grid_matches_independent_oracle(self):
        scores, ids, records = self._fixture()
        report = sentiment_metrics(scores, ids, records)
        col = {v: i for i, v in enumerate(ids)}
        for k in (1, 2, 3):
            labels = agreement_labels(records, k)
            aps = []
            for cls in range(30):
                pos = {v for v, lab in labels.items() if cls in lab}
                if not pos:
                    continue
                aps.append(enumerate_ap(
                    {v: scores[col[v], cls] for v in ids}, pos))
            assert report.grid[f"agree{k}/mAP"] == \
                pytest.approx(np.mean(aps), abs=1e-12)
            labeled = [v for v in ids if labels[v]]
            correct = sum(scores[col[v]].argmax() in labels[v] for v in labeled)
            assert report.grid[f"agree{k}/acc@1"] == \
                pytest.approx(correct / len(labeled))
            assert report.n_eval[str(k)] == len(labeled)

    def test_skipped_classes_listed_not_zeroed(self):
        scores, ids, records = self._fixture()
        report = sentiment_metrics(scores, ids, records)
        # only classes 0 and 1 ever receive votes
        assert set(report.skipped_classes["1"]) == set(SENTIMENTS[2:])
        assert report.per_class_ap["1"][2] is None
        assert report.per_class_ap["1"][0] is not None

    def test_empty_label_videos_excluded_from_acc(self):
        records = [_record("a", votes={SENTIMENTS[5]: 3}),
                   _record("b", votes={})]
        scores = np.zeros((2, 30))
        scores[0, 5] = 1.0
        report = sentiment_metrics(scores, ["a", "b"], records)
        assert report.grid["agree3/acc@1"] == 1.0
        assert report.n_eval["3"] == 1

    def test_nonfinite_scores_rejected(self):
        scores, ids, records = self._fixture()
        scores[0, 0] = np.nan
        with pytest.raises(ValidationError, match="finite"):
            sentiment_metrics(scores, ids, records)


class TestReports:
    def test_climax_report_round_trip(self, tmp_path):
        records = [_record(f"v{i}", marks=(float(5 + i),)) for i in range(4)]
        preds = {"audio": {f"v{i}": [5 + i, 0, 1] for i in range(4)},
                 "baseline": {f"v{i}": [5, 15, 25] for i in range(4)}}
        report = climax_report(preds, records)
        assert report.grid["audio/top1/win0"] == 1.0
        json_path = tmp_path / "r.json"
        txt_path = tmp_path / "r.txt"
        emit_report(report, json_path, txt_path)
        back = json.loads(json_path.read_text())
        assert back["schema_version"] == 1
        assert back["grid"] == report.grid
        text = txt_path.read_text()
        assert "audio" in text and "top1/win0" in text

    def test_sentiment_text_rendering(self):
        records = [_record("v", votes={SENTIMENTS[0]: 3})]
        report = sentiment_metrics(np.zeros((1, 30)), ["v"], records)
        text = render_text(report)
        assert "agree-with-1" in text and "mAP" in text

    def test_plot_csv_rows(self, tmp_path):
        n = 7
        path = tmp_path / "p.csv"
        emit_plot_csv(path, PerSecondSeries(np.arange(n, dtype=float)),
                      PerSecondSeries(np.zeros(n)),
                      PerSecondSeries(np.ones(n)),
                      climax_prob=np.linspace(0, 1, n))
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["second", "audio", "shots", "flow", "climax_prob"]
        assert len(rows) == n + 1
        # values survive a float round-trip exactly
        assert float(rows[3][1]) == 2.0
