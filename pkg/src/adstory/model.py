"""From-scratch recurrent sequence model with exact BPTT.

One LSTM layer (64 hidden units by default) feeds either a per-frame
climax head (sigmoid) or the multi-task topic -> sentiment head stack:
the last unpadded hidden state produces 38 topic logits, and the
concatenation of that state with the topic block produces 30 sentiment
logits. All gradients are exact, verified against finite differences.

Parameters live in a flat name -> array dict; gate order in the fused
LSTM weights is [input, forget, candidate, output].
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ValidationError
from .features import Standardizer, layout_hash

HIDDEN = 64
N_TOPICS = 38
N_SENTIMENTS = 30

RMSPROP_DECAY = 0.95
RMSPROP_MOMENTUM = 1e-8
RMSPROP_EPS = 1e-10

CKPT_MAGIC = b"ADSCKPT\x01"
CKPT_VERSION = 1

TASKS = ("climax", "sentiment")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_params(task, input_dim, hidden=HIDDEN, seed=0, concat_probs=False):
    """Seeded uniform(-s, s) init with s = 1/sqrt(fan_in); forget bias +1."""
    if task not in TASKS:
        raise ValidationError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)

    def uni(fan_in, shape):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    params = {
        "lstm/wx": uni(input_dim, (input_dim, 4 * hidden)),
        "lstm/wh": uni(hidden, (hidden, 4 * hidden)),
        "lstm/b": np.zeros(4 * hidden),
    }
    params["lstm/b"][hidden:2 * hidden] = 1.0  # forget gate bias
    if task == "climax":
        params["climax/w"] = uni(hidden, (hidden, 1))
        params["climax/b"] = np.zeros(1)
    else:
        params["topic/w"] = uni(hidden, (hidden, N_TOPICS))
        params["topic/b"] = np.zeros(N_TOPICS)
        params["sent/w"] = uni(hidden + N_TOPICS, (hidden + N_TOPICS, N_SENTIMENTS))
        params["sent/b"] = np.zeros(N_SENTIMENTS)
    return Model(task=task, input_dim=input_dim, hidden=hidden, params=params,
                 concat_probs=concat_probs)


@dataclass
class Model:
    task: str
    input_dim: int
    hidden: int
    params: dict
    concat_probs: bool = False  # feed softmax probs instead of raw topic logits
    standardizer: Standardizer = None
    step: int = 0
    seed: int = 0


def identity_masks(batch, input_dim, hidden):
    return np.ones((batch, input_dim)), np.ones((batch, hidden))


def sample_dropout_masks(rng, batch, input_dim, hidden, keep_prob):
    """Inverted-dropout masks, one per sequence, shared across timesteps."""
    if not 0 < keep_prob <= 1:
        raise ValidationError("keep_prob must be in (0, 1]")
    in_mask = (rng.random((batch, input_dim)) < keep_prob) / keep_prob
    out_mask = (rng.random((batch, hidden)) < keep_prob) / keep_prob
    return in_mask, out_mask


def lstm_step(params, x_t, h_prev, c_prev, dropout_masks=None):
    """One LSTM step; dropout masks apply to the input and to h_t."""
    h, c, _ = _lstm_step_cached(params, x_t, h_prev, c_prev, dropout_masks)
    return h, c


def _lstm_step_cached(params, x_t, h_prev, c_prev, dropout_masks):
    hid = h_prev.shape[-1]
    in_mask = out_mask = None
    if dropout_masks is not None:
        in_mask, out_mask = dropout_masks
        x_t = x_t * in_mask
    a = x_t @ params["lstm/wx"] + h_prev @ params["lstm/wh"] + params["lstm/b"]
    i = _sigmoid(a[..., :hid])
    f = _sigmoid(a[..., hid:2 * hid])
    g = np.tanh(a[..., 2 * hid:3 * hid])
    o = _sigmoid(a[..., 3 * hid:])
    c_t = f * c_prev + i * g
    tc = np.tanh(c_t)
    h_t = o * tc
    if out_mask is not None:
        h_t = h_t * out_mask
    cache = (x_t, h_prev, c_prev, i, f, g, o, c_t, tc, out_mask)
    return h_t, c_t, cache


def lstm_forward(model, x, dropout_masks=None):
    """Run the LSTM over a (batch, time, input_dim) tensor.

    Returns the (batch, time, hidden) outputs and the per-step caches
    needed for BPTT.
    """
    batch, T, dim = x.shape
    if dim != model.input_dim:
        raise ValidationError(f"input dim {dim} != model input dim {model.input_dim}")
    hid = model.hidden
    in_mask = out_mask = None
    if dropout_masks is not None:
        in_mask, out_mask = dropout_masks
        x = x * in_mask[:, None, :]
    # one big input projection; the recurrent part stays a cheap loop
    pre = x.reshape(batch * T, dim) @ model.params["lstm/wx"]
    pre = pre.reshape(batch, T, 4 * hid) + model.params["lstm/b"]

    h = np.zeros((batch, hid))
    c = np.zeros((batch, hid))
    hs = np.empty((batch, T, hid))
    caches = []
    wh = model.params["lstm/wh"]
    for t in range(T):
        a = pre[:, t] + h @ wh
        i = _sigmoid(a[:, :hid])
        f = _sigmoid(a[:, hid:2 * hid])
        g = np.tanh(a[:, 2 * hid:3 * hid])
        o = _sigmoid(a[:, 3 * hid:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_raw = o * tc
        h_out = h_raw * out_mask if out_mask is not None else h_raw
        caches.append((h, c, i, f, g, o, c_new, tc))
        h, c = h_out, c_new
        hs[:, t] = h_out
    return hs, {"caches": caches, "x_masked": x, "in_mask": in_mask,
                "out_mask": out_mask}


def lstm_backward(model, fwd, dhs):
    """Exact BPTT given upstream gradients w.r.t. every h_t output.

    Returns parameter gradients plus the gradient w.r.t. the (unmasked)
    input tensor.
    """
    caches = fwd["caches"]
    x = fwd["x_masked"]
    out_mask = fwd["out_mask"]
    in_mask = fwd["in_mask"]
    batch, T, dim = x.shape
    hid = model.hidden
    wx, wh = model.params["lstm/wx"], model.params["lstm/wh"]

    d_wx = np.zeros_like(wx)
    d_wh = np.zeros_like(wh)
    d_b = np.zeros(4 * hid)
    dx = np.empty_like(x)
    dh_carry = np.zeros((batch, hid))
    dc_carry = np.zeros((batch, hid))
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, c_new, tc = caches[t]
        dh_out = dhs[:, t] + dh_carry
        dh_raw = dh_out * out_mask if out_mask is not None else dh_out
        do = dh_raw * tc
        dc = dh_raw * o * (1 - tc ** 2) + dc_carry
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        da = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1 - g ** 2), do * o * (1 - o)], axis=1)
        d_wx += x[:, t].T @ da
        d_wh += h_prev.T @ da
        d_b += da.sum(axis=0)
        dx[:, t] = da @ wx.T
        dh_carry = da @ wh.T
        dc_carry = dc * f
    if in_mask is not None:
        dx = dx * in_mask[:, None, :]
    return {"lstm/wx": d_wx, "lstm/wh": d_wh, "lstm/b": d_b}, dx


def forward_climax(model, x, mask, dropout_masks=None, return_cache=False):
    """Per-frame climax probabilities, (batch, time); padding masked to 0."""
    hs, fwd = lstm_forward(model, x, dropout_masks)
    logits = (hs @ model.params["climax/w"])[..., 0] + model.params["climax/b"][0]
    probs = _sigmoid(logits) * mask
    if return_cache:
        return probs, {"fwd": fwd, "hs": hs, "logits": logits}
    return probs


def _last_indices(mask):
    lengths = mask.sum(axis=1).astype(int)
    if (lengths == 0).any():
        raise ValidationError("sequence with no unpadded frames")
    return lengths - 1


def forward_sentiment(model, x, mask, dropout_masks=None, return_cache=False):
    """Topic and sentiment logits from the last unpadded hidden state."""
    hs, fwd = lstm_forward(model, x, dropout_masks)
    last = _last_indices(mask)
    h_last = hs[np.arange(len(hs)), last]
    topic_logits = h_last @ model.params["topic/w"] + model.params["topic/b"]
    topic_block = _softmax(topic_logits) if model.concat_probs else topic_logits
    concat = np.concatenate([h_last, topic_block], axis=1)
    sent_logits = concat @ model.params["sent/w"] + model.params["sent/b"]
    if return_cache:
        return topic_logits, sent_logits, {
            "fwd": fwd, "hs": hs, "last": last, "h_last": h_last,
            "topic_logits": topic_logits, "topic_block": topic_block,
            "concat": concat}
    return topic_logits, sent_logits


def _softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Losses (numerically stable forms)

def sigmoid_ce(logits, targets, weights=None, reduce=True):
    """Stable sigmoid cross entropy; weighted mean over elements.

    Elementwise loss is max(z, 0) - z*t + log(1 + exp(-|z|)). A weight of
    0 removes an element from both the numerator and the denominator.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    elem = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    if weights is None:
        weights = np.ones_like(elem)
    total_w = weights.sum()
    if not reduce:
        return elem
    if total_w == 0:
        return 0.0
    return float((elem * weights).sum() / total_w)


def sigmoid_ce_grad(logits, targets, weights=None):
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if weights is None:
        weights = np.ones_like(z)
    total_w = weights.sum()
    if total_w == 0:
        return np.zeros_like(z)
    return (_sigmoid(z) - t) * weights / total_w


def softmax_ce(logits, index):
    """Log-sum-exp stabilized cross entropy; index < 0 means no label."""
    if index is None or index < 0:
        return 0.0
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    return float(lse - z[index])


def softmax_ce_grad(logits, index):
    if index is None or index < 0:
        return np.zeros_like(logits)
    p = _softmax(np.asarray(logits, dtype=np.float64))
    p[index] -= 1.0
    return p


# ---------------------------------------------------------------------------
# Task losses with exact gradients

def climax_loss_and_grads(model, x, mask, targets, dropout_masks=None):
    """Mean per-frame sigmoid CE over unpadded frames, with exact grads."""
    probs, cache = forward_climax(model, x, mask, dropout_masks, return_cache=True)
    logits = cache["logits"]
    loss = sigmoid_ce(logits, targets, weights=mask)
    dlogits = sigmoid_ce_grad(logits, targets, weights=mask)

    hs = cache["hs"]
    w = model.params["climax/w"]
    grads = {
        "climax/w": np.einsum("bth,bt->h", hs, dlogits, optimize=True)[:, None],
        "climax/b": np.array([dlogits.sum()]),
    }
    dhs = dlogits[..., None] * w[:, 0]
    lstm_grads, dx = lstm_backward(model, cache["fwd"], dhs)
    grads.update(lstm_grads)
    return loss, grads, dx


def sentiment_loss_and_grads(model, x, mask, sent_targets, class_weights,
                             topic_idx, dropout_masks=None):
    """Weighted sentiment sigmoid CE plus topic softmax CE, exact grads.

    ``class_weights`` is (batch, 30): negative-sampling weights per video
    and class. Topic entries of -1 contribute no topic loss or gradient.
    """
    topic_logits, sent_logits, cache = forward_sentiment(
        model, x, mask, dropout_masks, return_cache=True)
    batch = len(x)

    sent_loss = sigmoid_ce(sent_logits, sent_targets, weights=class_weights)
    dsent = sigmoid_ce_grad(sent_logits, sent_targets, weights=class_weights)

    topic_loss = 0.0
    dtopic_direct = np.zeros_like(topic_logits)
    n_labeled = sum(1 for idx in topic_idx if idx >= 0)
    for b, idx in enumerate(topic_idx):
        if idx >= 0:
            topic_loss += softmax_ce(topic_logits[b], idx)
            dtopic_direct[b] = softmax_ce_grad(topic_logits[b], idx) / n_labeled
    topic_loss = topic_loss / n_labeled if n_labeled else 0.0

    concat = cache["concat"]
    grads = {
        "sent/w": concat.T @ dsent,
        "sent/b": dsent.sum(axis=0),
    }
    dconcat = dsent @ model.params["sent/w"].T
    dh_last = dconcat[:, :model.hidden]
    dtopic_block = dconcat[:, model.hidden:]
    if model.concat_probs:
        p = cache["topic_block"]
        dtopic_from_concat = p * (dtopic_block - (dtopic_block * p).sum(axis=1, keepdims=True))
    else:
        dtopic_from_concat = dtopic_block
    dtopic = dtopic_direct + dtopic_from_concat

    h_last = cache["h_last"]
    grads["topic/w"] = h_last.T @ dtopic
    grads["topic/b"] = dtopic.sum(axis=0)
    dh_last = dh_last + dtopic @ model.params["topic/w"].T

    dhs = np.zeros_like(cache["hs"])
    dhs[np.arange(batch), cache["last"]] = dh_last
    lstm_grads, dx = lstm_backward(model, cache["fwd"], dhs)
    grads.update(lstm_grads)
    return sent_loss + topic_loss, grads, dx


# ---------------------------------------------------------------------------
# Optimizer

def rmsprop_init(params):
    return {name: {"ms": np.zeros_like(p), "mom": np.zeros_like(p)}
            for name, p in params.items()}


def rmsprop_update(params, grads, state, lr, decay=RMSPROP_DECAY,
                   momentum=RMSPROP_MOMENTUM, eps=RMSPROP_EPS):
    """In-place RMSprop step with a (vestigially small) momentum term."""
    for name, p in params.items():
        g = grads[name]
        s = state[name]
        s["ms"] = decay * s["ms"] + (1.0 - decay) * g ** 2
        s["mom"] = momentum * s["mom"] + lr * g / np.sqrt(s["ms"] + eps)
        params[name] = p - s["mom"]


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(model, path, opt_state=None, meta=None):
    """Versioned container: JSON header then named float64 LE tensors."""
    tensors = dict(model.params)
    if model.standardizer is not None:
        tensors["std/mean"] = model.standardizer.mean
        tensors["std/scale"] = model.standardizer.scale
    if opt_state is not None:
        for name, slots in opt_state.items():
            tensors[f"opt/{name}/ms"] = slots["ms"]
            tensors[f"opt/{name}/mom"] = slots["mom"]
    header = {
        "format_version": CKPT_VERSION,
        "task": model.task,
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "concat_probs": model.concat_probs,
        "layout_hash": layout_hash(),
        "step": model.step,
        "seed": model.seed,
        "has_standardizer": model.standardizer is not None,
        "param_names": sorted(model.params),
        "tensor_names": sorted(tensors),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in header["tensor_names"]:
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)) + nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path, expect_task=None):
    """Load a checkpoint; returns (model, opt_state, meta)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CKPT_MAGIC:
        raise FormatError("bad checkpoint magic", path=path, offset=0)
    (hlen,) = struct.unpack_from("<I", data, 8)
    try:
        header = json.loads(data[12:12 + hlen])
    except json.JSONDecodeError:
        raise FormatError("corrupt checkpoint header", path=path, offset=12)
    if header["format_version"] != CKPT_VERSION:
        raise FormatError(f"checkpoint version {header['format_version']} != "
                          f"{CKPT_VERSION}", path=path)
    if header["layout_hash"] != layout_hash():
        raise FormatError("checkpoint layout hash mismatch", path=path)
    if expect_task is not None and header["task"] != expect_task:
        raise FormatError(f"checkpoint task {header['task']!r}, expected "
                          f"{expect_task!r}", path=path)

    pos = 12 + hlen
    tensors = {}
    try:
        for _ in header["tensor_names"]:
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
            if arr.size != count:
                raise FormatError("truncated tensor payload", path=path, offset=pos)
            tensors[name] = arr.reshape(shape).copy()
            pos += count * 8
    except struct.error:
        raise FormatError("truncated checkpoint", path=path, offset=pos)

    std = None
    if header["has_standardizer"]:
        std = Standardizer(mean=tensors["std/mean"], scale=tensors["std/scale"])
    params = {name: tensors[name] for name in header["param_names"]}
    opt_state = {}
    for name in header["param_names"]:
        if f"opt/{name}/ms" in tensors:
            opt_state[name] = {"ms": tensors[f"opt/{name}/ms"],
                               "mom": tensors[f"opt/{name}/mom"]}
    model = Model(task=header["task"], input_dim=header["input_dim"],
                  hidden=header["hidden"], params=params,
                  concat_probs=header["concat_probs"], standardizer=std,
                  step=header["step"], seed=header["seed"])
    return model, (opt_state or None), header.get("meta", {})
