"""Shared plumbing between the CLI and the test suite.

Reads/writes the JSONL interchange files and glues the stage modules
together (signals -> assembled tensors -> model predictions), so CLI
results are, by construction, the corresponding library-call results.
"""

import json
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .features import BASE_DIM, assemble, inject_climax
from .ingest import read_annotations, read_features, read_wav, read_y4m
from .model import forward_climax, load_checkpoint
from .peaks import (PerSecondSeries, aggregate_per_second, heuristic_baseline,
                    longest_run_centers, top_k_peaks)
from .signals import SignalTrack, extract_signals
from .trainer import climax_targets, sentiment_soft_targets
from .vocab import TOPIC_INDEX


def extract_from_files(video_path, audio_path):
    frames = read_y4m(video_path)
    audio = read_wav(audio_path)
    if abs(frames.duration_sec - len(audio.samples) / audio.sample_rate) >= 1.0:
        raise ValidationError(
            f"video/audio durations differ by >= 1 s for {video_path}")
    return extract_signals(frames, audio)


def write_signals_jsonl(tracks, path, append=False):
    """Write per-frame signal lines for a {video_id: SignalTrack} map."""
    with open(path, "a" if append else "w") as fh:
        for vid in sorted(tracks):
            t = tracks[vid]
            for k in range(t.n_frames):
                fh.write(json.dumps({
                    "video_id": vid, "frame_idx": k,
                    "a": round(float(t.audio[k]), 9),
                    "b": [int(x) for x in t.shot[k]],
                    "o": round(float(t.flow[k]), 9),
                }) + "\n")


def read_signals_jsonl(path, fps_by_vid):
    """Rebuild SignalTracks from the signals cache; fps comes from annotations."""
    rows = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows.setdefault(obj["video_id"], []).append(
                    (int(obj["frame_idx"]), float(obj["a"]),
                     [int(x) for x in obj["b"]], float(obj["o"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FormatError(f"malformed signals line: {e}", path=path, line=lineno)
    tracks = {}
    for vid, items in rows.items():
        if vid not in fps_by_vid:
            raise ValidationError(f"signals for unknown video {vid!r}")
        items.sort()
        tracks[vid] = SignalTrack(
            audio=np.array([a for _, a, _, _ in items]),
            shot=np.array([b for _, _, b, _ in items], dtype=np.int8),
            flow=np.array([o for _, _, _, o in items]),
            fps=fps_by_vid[vid])
    return tracks


def write_predictions_jsonl(predictions, k, path, append=False):
    """predictions: {video_id: ClimaxPrediction}."""
    with open(path, "a" if append else "w") as fh:
        for vid in sorted(predictions):
            p = predictions[vid]
            fh.write(json.dumps({"video_id": vid, "method": p.method, "k": k,
                                 "timestamps_sec": list(p.timestamps_sec)}) + "\n")


def read_predictions_jsonl(path):
    """Returns {method: {video_id: [timestamps]}}."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.setdefault(obj["method"], {})[obj["video_id"]] = [
                    int(t) for t in obj["timestamps_sec"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FormatError(f"malformed predictions line: {e}",
                                  path=path, line=lineno)
    return out


def predict_unsupervised(method, tracks, records, k):
    """Top-k unsupervised climax predictions per video."""
    by_id = {r.video_id: r for r in records}
    out = {}
    for vid, track in tracks.items():
        series = aggregate_per_second(track)
        if method == "audio":
            out[vid] = top_k_peaks(series["audio"], k, method="audio")
        elif method == "flow":
            out[vid] = top_k_peaks(series["flow"], k, method="flow")
        elif method == "shots":
            out[vid] = longest_run_centers(series["shots"], k)
        elif method == "baseline":
            out[vid] = heuristic_baseline(by_id[vid].duration_sec, k)
        else:
            raise ValidationError(f"unknown unsupervised method {method!r}")
    return out


def load_corpus(data_dir):
    """Read annotations, features and cached signals from a corpus directory."""
    data_dir = Path(data_dir)
    records = read_annotations(data_dir / "annotations.jsonl")
    if not records:
        raise ValidationError(f"no videos in {data_dir / 'annotations.jsonl'}")
    features = read_features(data_dir / "features.jsonl")
    fps = {r.video_id: r.fps for r in records}
    tracks = read_signals_jsonl(data_dir / "signals.jsonl", fps)
    return records, features, tracks


def climax_probabilities(model, frames_list):
    """Per-second climax probabilities from a trained climax model."""
    from .trainer import _pad_batch
    from .features import VideoTensor
    mat = np.stack([f.vector for f in frames_list])
    tensor = VideoTensor(video_id="_", frames=mat, sentiment_targets=np.zeros(30),
                         topic_idx=-1, climax_targets=np.zeros(len(mat)))
    x, mask, _ = _pad_batch([tensor], len(mat))
    x = apply_checkpoint_preproc(model, x)
    probs = forward_climax(model, x, mask)[0]
    return probs[:len(mat)]


def apply_checkpoint_preproc(model, x, blocks=None):
    """Column-select (if the model was trained on a block subset) and z-score."""
    from .features import block_columns
    if blocks:
        cols = block_columns(blocks, x.shape[-1])
        x = x[..., cols]
    if x.shape[-1] != model.input_dim:
        raise ValidationError(f"feature dim {x.shape[-1]} != model input dim "
                              f"{model.input_dim}")
    if model.standardizer is not None:
        x = model.standardizer.apply(x)
    return x


def build_dataset(data_dir, climax_from="none", climax_checkpoint=None):
    """Assemble VideoTensors for a corpus directory.

    climax_from selects the source of the injected climax slot:
    "none" (2510-dim vectors), "unsup" (audio series scaled to [0, 1]) or
    "model" (probabilities from a trained climax checkpoint).
    """
    records, features, tracks = load_corpus(data_dir)
    feats_by_vid = {}
    for rec in features:
        feats_by_vid.setdefault(rec.video_id, []).append(rec)

    climax_model = None
    if climax_from == "model":
        if climax_checkpoint is None:
            raise ValidationError("climax_from='model' needs a climax checkpoint")
        climax_model, _, meta = load_checkpoint(climax_checkpoint,
                                                expect_task="climax")
        climax_model._blocks = meta.get("blocks")
    elif climax_from not in ("none", "unsup"):
        raise ValidationError(f"unknown climax source {climax_from!r}")

    from .features import MAX_SEQ_LEN, VideoTensor
    tensors = {}
    for rec in records:
        vid = rec.video_id
        if vid not in tracks or vid not in feats_by_vid:
            raise ValidationError(f"missing signals or features for {vid!r}")
        frames = assemble(feats_by_vid[vid], tracks[vid])
        n = len(frames)
        if climax_from == "unsup":
            series = aggregate_per_second(tracks[vid])["audio"].values
            top = series.max()
            probs = series / top if top > 0 else series
            frames = inject_climax(frames, probs)
        elif climax_from == "model":
            mat = np.stack([f.vector for f in frames])
            from .trainer import _pad_batch
            tensor = VideoTensor(video_id=vid, frames=mat,
                                 sentiment_targets=np.zeros(30), topic_idx=-1,
                                 climax_targets=np.zeros(n))
            x, mask, _ = _pad_batch([tensor], n)
            x = apply_checkpoint_preproc(climax_model, x, climax_model._blocks)
            probs = forward_climax(climax_model, x, mask)[0][:n]
            frames = inject_climax(frames, probs)
        mat = np.stack([f.vector for f in frames])[:MAX_SEQ_LEN]
        tensors[vid] = VideoTensor(
            video_id=vid, frames=mat,
            sentiment_targets=sentiment_soft_targets(rec.sentiment_votes),
            topic_idx=TOPIC_INDEX[rec.topic] if rec.topic else -1,
            climax_targets=climax_targets(rec, n)[:MAX_SEQ_LEN])
    return tensors, records, tracks


def predict_climax_with_model(ckpt_path, tensors, k, blocks=None):
    """Top-k per-second climax predictions from a trained checkpoint."""
    from .peaks import ClimaxPrediction
    from .trainer import _pad_batch
    model, _, meta = load_checkpoint(ckpt_path, expect_task="climax")
    blocks = blocks or meta.get("blocks")
    out = {}
    for vid in sorted(tensors):
        t = tensors[vid]
        x, mask, _ = _pad_batch([t], len(t.frames))
        x = apply_checkpoint_preproc(model, x, blocks)
        probs = forward_climax(model, x, mask)[0][:len(t.frames)]
        pred = top_k_peaks(PerSecondSeries(probs), k, method="lstm")
        out[vid] = ClimaxPrediction(timestamps_sec=pred.timestamps_sec,
                                    method="lstm")
    return out


def predict_sentiment_with_model(ckpt_path, tensors, blocks=None):
    """(scores, video_ids) for all videos in the dataset."""
    from .model import forward_sentiment
    from .trainer import _pad_batch
    model, _, meta = load_checkpoint(ckpt_path, expect_task="sentiment")
    blocks = blocks or meta.get("blocks")
    ids = sorted(tensors)
    rows = []
    for vid in ids:
        t = tensors[vid]
        x, mask, _ = _pad_batch([t], len(t.frames))
        x = apply_checkpoint_preproc(model, x, blocks)
        _, sent_logits = forward_sentiment(model, x, mask)
        rows.append(sent_logits[0])
    return np.stack(rows), ids
