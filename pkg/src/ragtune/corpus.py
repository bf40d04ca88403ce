"""QA corpus loading, validation, and splitting.

A corpus is an ordered collection of question/answer pairs with unique
string ids. The on-disk format is JSON Lines, one object per line with
keys "id", "question", "answer" and an optional "metadata" object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CorpusError(Exception):
    """Base class for corpus loading and validation failures."""


class MalformedRecordError(CorpusError):
    """A line is not valid JSON or is missing a required field."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}")


class DuplicateIdError(CorpusError):
    """Two records share the same id."""

    def __init__(self, qa_id: str, line_number: int):
        self.qa_id = qa_id
        self.line_number = line_number
        super().__init__(f"duplicate id {qa_id!r} at line {line_number}")


class EmptyCorpusError(CorpusError):
    """An operation required a non-empty corpus."""


@dataclass(frozen=True)
class QAPair:
    """One question/answer record.

    id and question must be non-empty; answer may be empty only when the
    record is used as a query-only placeholder, which the loader rejects.
    """

    id: str
    question: str
    answer: str
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.id:
            raise ValueError("QAPair.id must be non-empty")
        if not self.question.strip():
            raise ValueError(f"QAPair {self.id!r}: question must be non-empty")
        if not self.answer.strip():
            raise ValueError(f"QAPair {self.id!r}: answer must be non-empty")


@dataclass(frozen=True)
class Corpus:
    """Ordered QA pairs with an id lookup table."""

    name: str
    pairs: tuple[QAPair, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for pair in self.pairs:
            if pair.id in seen:
                raise DuplicateIdError(pair.id, line_number=-1)
            seen.add(pair.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, qa_id: str) -> QAPair:
        try:
            return self._by_id()[qa_id]
        except KeyError:
            raise KeyError(f"no QA pair with id {qa_id!r}") from None

    def __contains__(self, qa_id: str) -> bool:
        return qa_id in self._by_id()

    def _by_id(self) -> dict[str, QAPair]:
        # Lazily built; the dataclass is frozen so object.__setattr__ is used.
        cache = self.__dict__.get("_index")
        if cache is None:
            cache = {p.id: p for p in self.pairs}
            object.__setattr__(self, "_index", cache)
        return cache

    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]


_REQUIRED_FIELDS = ("id", "question", "answer")


def load_corpus(path: str | Path, fmt: str = "jsonl", name: str | None = None) -> Corpus:
    """Read a corpus file, validating every record.

    Raises FileNotFoundError, MalformedRecordError (with the offending
    line number), or DuplicateIdError. Record order is file order.
    """
    if fmt != "jsonl":
        raise ValueError(f"unsupported corpus format {fmt!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    pairs: list[QAPair] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_number, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise MalformedRecordError(line_number, "record is not an object")
            for fname in _REQUIRED_FIELDS:
                if fname not in record:
                    raise MalformedRecordError(line_number, f"missing field {fname!r}")
                if not isinstance(record[fname], str):
                    raise MalformedRecordError(line_number, f"field {fname!r} is not a string")
            metadata = record.get("metadata", {})
            if not isinstance(metadata, dict):
                raise MalformedRecordError(line_number, "field 'metadata' is not an object")
            pair = QAPair(
                id=record["id"],
                question=record["question"],
                answer=record["answer"],
                metadata=metadata,
            )
            try:
                pair.validate()
            except ValueError as exc:
                raise MalformedRecordError(line_number, str(exc)) from exc
            if pair.id in seen:
                raise DuplicateIdError(pair.id, line_number)
            seen.add(pair.id)
            pairs.append(pair)
    return Corpus(name=name or path.stem, pairs=tuple(pairs))


def save_corpus(corpus: Corpus, path: str | Path) -> Path:
    """Write a corpus back to JSON Lines. Inverse of load_corpus."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pair in corpus.pairs:
            record = {"id": pair.id, "question": pair.question, "answer": pair.answer}
            if pair.metadata:
                record["metadata"] = pair.metadata
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def split_corpus(corpus: Corpus, holdout_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Partition a corpus into (train, test) with a seeded shuffle.

    The test side receives round(holdout_fraction * len(corpus)) pairs,
    rounding halves up. Membership is chosen by a PCG64 permutation
    seeded with `seed`; both sides keep the original corpus order.
    Every pair lands in exactly one side.
    """
    if not 0.0 <= holdout_fraction <= 1.0:
        raise ValueError(f"holdout_fraction must be in [0, 1], got {holdout_fraction}")
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot split an empty corpus")
    n = len(corpus)
    n_test = int(np.floor(holdout_fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    test_positions = set(int(i) for i in order[:n_test])
    train_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i not in test_positions)
    test_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i in test_positions)
    train = Corpus(name=f"{corpus.name}-train", pairs=train_pairs)
    test = Corpus(name=f"{corpus.name}-test", pairs=test_pairs)
    return train, test
