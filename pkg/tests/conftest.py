"""Shared fixtures: a generated corpus with extracted signals on disk."""

import pytest

from adstory import synth
from adstory.pipeline import extract_from_files, write_signals_jsonl

CORPUS_N = 50
CORPUS_SEED = 13


def _build(out, kind, n, seed):
    synth.generate(kind, n, seed, out)
    tracks = {}
    for video in sorted(out.glob("*.y4m")):
        vid = video.stem
        tracks[vid] = extract_from_files(str(video), str(out / f"{vid}.wav"))
    write_signals_jsonl(tracks, out / "signals.jsonl")
    return out


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    return _build(tmp_path_factory.mktemp("corpus"), "climax",
                  CORPUS_N, CORPUS_SEED)


@pytest.fixture(scope="session")
def sent_corpus_dir(tmp_path_factory):
    return _build(tmp_path_factory.mktemp("sent_corpus"), "sentiment", 30, 11)
