"""Deterministic synthetic QA corpus for demos, tests, and benchmarks.

The generator builds question/answer pairs with three properties that
make evaluation results easy to reason about:

- Answer token sets are pairwise disjoint, so a generated answer can
  match at most one reference and corpus BLEU against echoed contexts
  reduces exactly to retrieval accuracy.
- Questions share no tokens with any answer, so lexical retrieval gets
  no free signal and improvements must come from learned alignment.
- Every question has at least seven content words, so each synthetic
  query type produces a distinct rewrite.

Pair-unique vocabulary is drawn from a syllable pool, which gives all
texts a common character-3-gram background without leaking pair
identity.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Corpus, QAPair
from .querygen import STOPWORDS

DEFAULT_DEMO_PAIRS = 200
DEFAULT_DEMO_SEED = 20240501
_DATA_RESOURCE = "synthetic_qa.jsonl"

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]

# Frames contribute at least three content words on top of the four
# pair-unique topic words, so every question has >= 7 content words.
_QUESTION_FRAMES = (
    "how do i check the current filing status of {t}?",
    "what is the required renewal fee payment for {t}?",
    "where can i request an official review record covering {t}?",
    "is there a submission deadline for updating the registered entry on {t}?",
    "how do i correct a rejected amendment form filed under {t}?",
    "what supporting evidence documents must accompany {t}?",
)

_TOPIC_WORDS = 4
_ANSWER_WORDS = 10


def _make_word(rng: np.random.Generator, used: set[str]) -> str:
    while True:
        n_syllables = 3
        word = "".join(_SYLLABLES[int(i)] for i in rng.integers(len(_SYLLABLES), size=n_syllables))
        if word not in used and word not in STOPWORDS:
            used.add(word)
            return word


def make_synthetic_corpus(n_pairs: int = DEFAULT_DEMO_PAIRS, seed: int = DEFAULT_DEMO_SEED) -> Corpus:
    """Build the corpus; identical (n_pairs, seed) means identical pairs."""
    if n_pairs < 2:
        raise ValueError(f"n_pairs must be >= 2, got {n_pairs}")
    rng = np.random.default_rng(seed)
    used: set[str] = set()
    pairs: list[QAPair] = []
    for i in range(n_pairs):
        topic = [_make_word(rng, used) for _ in range(_TOPIC_WORDS)]
        answer_words = [_make_word(rng, used) for _ in range(_ANSWER_WORDS)]
        frame = _QUESTION_FRAMES[int(rng.integers(len(_QUESTION_FRAMES)))]
        question = frame.format(t=" ".join(topic))
        w = answer_words
        answer = f"{w[0]} {w[1]} {w[2]} {w[3]}, {w[4]} {w[5]} {w[6]}; {w[7]} {w[8]} {w[9]}."
        pairs.append(
            QAPair(
                id=f"pc{i:04d}",
                question=question,
                answer=answer,
                metadata={"family": f"f{i % 10}", "lang": "en"},
            )
        )
    return Corpus(name="synthetic-pc", pairs=tuple(pairs))


def demo_corpus_path() -> Path:
    """Filesystem path of the corpus file bundled with the package."""
    return Path(resources.files("ragtune").joinpath("data", _DATA_RESOURCE))


def load_demo_corpus() -> Corpus:
    from .corpus import load_corpus

    return load_corpus(demo_corpus_path(), name="synthetic-pc")
