"""Backend registry: pluggable model implementations per kind.

A backend factory takes (model_name, device) and returns an object with
the kind's single method:

- scene:  predict(frame) -> (365,) softmax probabilities
- object: detect(frame) -> iterable of (class_id, confidence)
- face:   detect(frame) -> iterable of (10,) vectors
          (8 expression probs summing to 1, valence, arousal in [-1, 1])
- embed:  embed(frame) -> (2048,) float vector

Frames are (H, W) uint8 luma arrays.
"""

_REGISTRY = {}

KINDS = ("scene", "object", "face", "embed")


class ModelLoadError(Exception):
    pass


def register_backend(kind, name, factory):
    if kind not in KINDS:
        raise ValueError(f"unknown backend kind {kind!r}")
    _REGISTRY[(kind, name)] = factory


def get_backend(kind, name, device="cpu"):
    try:
        factory = _REGISTRY[(kind, name)]
    except KeyError:
        raise ModelLoadError(f"no {kind} backend named {name!r}; "
                             f"registered: {sorted(n for k, n in _REGISTRY if k == kind)}")
    return factory(name, device)


from . import builtin  # noqa: E402,F401  (registers the builtin backends)
