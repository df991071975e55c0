"""Sentiment (30) and topic (38) vocabularies.

Shipped as versioned text files, one name per line; line order defines
the vector index used everywhere downstream.
"""

from importlib import resources

N_SENTIMENTS = 30
N_TOPICS = 38


def _load(name, expected):
    text = resources.files("adstory").joinpath(f"vocab/{name}").read_text()
    words = [w for w in text.splitlines() if w.strip()]
    if len(words) != expected:
        raise RuntimeError(f"vocab file {name}: expected {expected} entries, got {len(words)}")
    return tuple(words)


SENTIMENTS = _load("sentiments.txt", N_SENTIMENTS)
TOPICS = _load("topics.txt", N_TOPICS)

SENTIMENT_INDEX = {w: i for i, w in enumerate(SENTIMENTS)}
TOPIC_INDEX = {w: i for i, w in enumerate(TOPICS)}
