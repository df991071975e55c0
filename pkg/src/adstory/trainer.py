"""Training procedure: targets, negative sampling, splits, the step loop.

Defaults follow the recipe used throughout: sigmoid cross entropy with
soft targets, dropout keep probability 0.5, RMSprop (decay 0.95,
momentum 1e-8, lr 2e-4), 20,000 steps at batch 32, five rotated
60/20/20 folds, and best-checkpoint selection on the validation metric
(climax: top-1 recall within 2 s; sentiment: mAP at agree-with-2).
"""

import copy
import csv
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import NumericError, ValidationError
from .features import MAX_SEQ_LEN, VideoTensor, block_columns, standardize
from .metrics import sentiment_metrics
from .model import (climax_loss_and_grads, forward_climax, init_params,
                    rmsprop_init, rmsprop_update, sample_dropout_masks,
                    sentiment_loss_and_grads)
from .vocab import N_SENTIMENTS, SENTIMENTS

N_FOLDS = 5


@dataclass
class TrainConfig:
    task: str = "climax"
    steps: int = 20000
    batch: int = 32
    lr: float = 2e-4
    decay: float = 0.95
    momentum: float = 1e-8
    keep_prob: float = 0.5
    neg_ratio: int = 5
    seed: int = 0
    eval_every: int = 200
    hidden: int = 64
    max_len: int = MAX_SEQ_LEN
    concat_probs: bool = False
    resample_negatives_per_step: bool = False
    # optional feature-block subset (layout block names, e.g. ["audio"]);
    # None means the full fused vector
    blocks: list = field(default=None)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path):
    """Read a TOML key/value config file into a TrainConfig."""
    with open(path, "rb") as fh:
        return TrainConfig.from_dict(tomllib.load(fh))


@dataclass(frozen=True)
class SplitPlan:
    fold_id: int
    assignment: dict  # video_id -> "train" | "val" | "test"

    def ids(self, role):
        return sorted(v for v, r in self.assignment.items() if r == role)


def make_splits(video_ids, seed):
    """Five rotated 60/20/20 folds whose test sets partition the dataset.

    Ids are sorted then shuffled once with the seed, so the plan depends
    only on the id set, never on file order.
    """
    ids = sorted(set(video_ids))
    if len(ids) < N_FOLDS:
        raise ValidationError(f"need at least {N_FOLDS} videos, got {len(ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    chunks = [list(c) for c in np.array_split(np.array(shuffled, dtype=object), N_FOLDS)]
    plans = []
    for f in range(N_FOLDS):
        assignment = {}
        for c, chunk in enumerate(chunks):
            if c == f:
                role = "test"
            elif c == (f + 1) % N_FOLDS:
                role = "val"
            else:
                role = "train"
            for vid in chunk:
                assignment[vid] = role
        plans.append(SplitPlan(fold_id=f, assignment=assignment))
    return plans


def climax_targets(record, n_seconds):
    """Per-second 0/1 targets: union of accepted worker marks."""
    if n_seconds < 1:
        raise ValidationError("n_seconds must be >= 1")
    targets = np.zeros(n_seconds)
    for t in record.accepted_marks():
        s = int(t)
        if s < n_seconds:
            targets[s] = 1.0
    return targets


def sentiment_soft_targets(votes):
    """Soft scores min(votes / 3, 1) per sentiment class."""
    out = np.zeros(N_SENTIMENTS)
    for i, name in enumerate(SENTIMENTS):
        v = votes.get(name, 0)
        if not 0 <= v <= 5:
            raise ValidationError(f"vote count {v} outside [0, 5]")
        out[i] = min(v / 3.0, 1.0)
    return out


def negative_sampling_weights(targets, seed, ratio=5):
    """Per-class loss weights over a (videos, 30) soft-target matrix.

    Positives (target > 0) keep weight 1; per class, a seeded uniform
    sample of at most ratio*n negatives keeps weight 1 and the rest drop
    to 0. Classes without positives are zeroed entirely.
    """
    targets = np.asarray(targets)
    rng = np.random.default_rng(seed)
    weights = np.zeros_like(targets, dtype=np.float64)
    empty_classes = []
    for cls in range(targets.shape[1]):
        pos = np.flatnonzero(targets[:, cls] > 0)
        neg = np.flatnonzero(targets[:, cls] <= 0)
        if len(pos) == 0:
            empty_classes.append(cls)
            continue
        weights[pos, cls] = 1.0
        n_keep = min(ratio * len(pos), len(neg))
        if n_keep:
            keep = rng.choice(neg, size=n_keep, replace=False)
            weights[keep, cls] = 1.0
    return weights, empty_classes


def _pad_batch(tensors, max_len):
    dim = tensors[0].frames.shape[1]
    T = min(max(len(t.frames) for t in tensors), max_len)
    x = np.zeros((len(tensors), T, dim))
    mask = np.zeros((len(tensors), T))
    climax = np.zeros((len(tensors), T))
    for b, t in enumerate(tensors):
        n = min(len(t.frames), T)
        x[b, :n] = t.frames[:n]
        mask[b, :n] = 1.0
        climax[b, :n] = t.climax_targets[:n]
    return x, mask, climax


def _val_climax_recall(model, tensors, max_len, window=2):
    """Top-1 recall within the window, computed from per-second targets."""
    if not tensors:
        return 0.0
    x, mask, targets = _pad_batch(tensors, max_len)
    probs = forward_climax(model, x, mask)
    n_eval = 0
    n_correct = 0
    for b in range(len(tensors)):
        positive = np.flatnonzero(targets[b] * mask[b])
        if len(positive) == 0:
            continue
        n_eval += 1
        masked = np.where(mask[b] > 0, probs[b], -np.inf)
        pred = int(masked.argmax())
        if (np.abs(positive - pred) <= window).any():
            n_correct += 1
    return n_correct / n_eval if n_eval else 0.0


def predict_sentiment_scores(model, tensors, max_len):
    from .model import forward_sentiment
    x, mask, _ = _pad_batch(tensors, max_len)
    _, sent_logits = forward_sentiment(model, x, mask)
    return sent_logits


def _val_sentiment_map(model, tensors, records, max_len):
    if not tensors:
        return 0.0
    scores = predict_sentiment_scores(model, tensors, max_len)
    ids = [t.video_id for t in tensors]
    report = sentiment_metrics(scores, ids, records)
    return report.grid["agree2/mAP"]


def train(config, tensors, split, records=None):
    """Run the training loop; returns (best_model, best_opt_state, log).

    ``tensors`` maps video_id -> assembled VideoTensor (unstandardized).
    The validation metric decides the returned checkpoint; the log holds
    one (step, train_loss, val_metric, wall_ms) row per evaluation.
    """
    train_ids = [v for v in split.ids("train") if v in tensors]
    val_ids = [v for v in split.ids("val") if v in tensors]
    if not train_ids:
        raise ValidationError("empty train split")
    if config.task not in ("climax", "sentiment"):
        raise ValidationError(f"unknown task {config.task!r}")
    if config.task == "sentiment" and records is None:
        raise ValidationError("sentiment training needs annotation records")

    train_t = [tensors[v] for v in train_ids]
    val_t = [tensors[v] for v in val_ids]
    if config.blocks:
        cols = block_columns(config.blocks, train_t[0].frames.shape[1])

        def select(ts):
            return [VideoTensor(video_id=t.video_id, frames=t.frames[:, cols],
                                sentiment_targets=t.sentiment_targets,
                                topic_idx=t.topic_idx,
                                climax_targets=t.climax_targets,
                                weights=t.weights) for t in ts]

        train_t, val_t = select(train_t), select(val_t)
    (train_t, val_t), std = standardize(train_t, val_t)

    if config.task == "sentiment":
        targets = np.stack([t.sentiment_targets for t in train_t])
        weights, empty = negative_sampling_weights(targets, config.seed,
                                                   config.neg_ratio)
        for t, w in zip(train_t, weights):
            t.weights = w

    input_dim = train_t[0].frames.shape[1]
    model = init_params(config.task, input_dim, hidden=config.hidden,
                        seed=config.seed, concat_probs=config.concat_probs)
    model.standardizer = std
    model.seed = config.seed
    opt_state = rmsprop_init(model.params)
    rng = np.random.default_rng(config.seed)

    def evaluate(m):
        if config.task == "climax":
            return _val_climax_recall(m, val_t, config.max_len)
        return _val_sentiment_map(m, val_t, records, config.max_len)

    log = []
    best = (-np.inf, copy.deepcopy(model), copy.deepcopy(opt_state))
    order = []
    last_finite = None
    t0 = time.monotonic()
    for step in range(1, config.steps + 1):
        while len(order) < config.batch:
            order.extend(int(i) for i in rng.permutation(len(train_t)))
        batch_idx = [order.pop(0) for _ in range(config.batch)]
        batch = [train_t[i] for i in batch_idx]
        x, mask, climax = _pad_batch(batch, config.max_len)
        masks = None
        if config.keep_prob < 1.0:
            masks = sample_dropout_masks(rng, len(batch), input_dim,
                                         config.hidden, config.keep_prob)
        if config.task == "climax":
            loss, grads, _ = climax_loss_and_grads(model, x, mask, climax, masks)
        else:
            if config.resample_negatives_per_step:
                t_mat = np.stack([b.sentiment_targets for b in batch])
                w, _ = negative_sampling_weights(t_mat, config.seed + step,
                                                 config.neg_ratio)
            else:
                w = np.stack([b.weights for b in batch])
            t_mat = np.stack([b.sentiment_targets for b in batch])
            topics = [b.topic_idx for b in batch]
            loss, grads, _ = sentiment_loss_and_grads(model, x, mask, t_mat,
                                                      w, topics, masks)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss at step {step} "
                               f"(last finite loss: {last_finite})")
        last_finite = loss
        rmsprop_update(model.params, grads, opt_state, config.lr,
                       config.decay, config.momentum)
        model.step = step

        if step % config.eval_every == 0 or step == config.steps:
            metric = evaluate(model)
            wall_ms = int((time.monotonic() - t0) * 1000)
            log.append({"step": step, "train_loss": float(loss),
                        "val_metric": float(metric), "wall_ms": wall_ms})
            if metric > best[0]:
                best = (metric, copy.deepcopy(model), copy.deepcopy(opt_state))

    if config.steps == 0 or best[0] == -np.inf:
        return model, opt_state, log
    return best[1], best[2], log


def write_log(log, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "train_loss",
                                                "val_metric", "wall_ms"])
        writer.writeheader()
        writer.writerows(log)
