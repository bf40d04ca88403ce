"""Training-triple mining and holdout partitioning.

Every generated query becomes one training triple: the query text, its
source pair's answer as the positive, and n_neg answers sampled from
other pairs as negatives. Negative sampling is keyed per query, so a
triple does not depend on where its query sits in the input sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .querygen import GeneratedQuery
from .util import read_jsonl, stable_rng, write_jsonl


class AugmentError(Exception):
    """Base class for mining and partitioning failures."""


class CorpusTooSmallError(AugmentError):
    """Not enough distinct other-pair answers to draw n_neg negatives."""


class DanglingQueryReferenceError(AugmentError):
    """A generated query points at a QA pair missing from the corpus."""

    def __init__(self, qa_id: str):
        self.qa_id = qa_id
        super().__init__(f"generated query references unknown QA pair {qa_id!r}")


class InsufficientQueriesError(AugmentError):
    """A pair has too few queries to withhold holdout_per_pair of them."""

    def __init__(self, qa_id: str, available: int, holdout: int):
        self.qa_id = qa_id
        super().__init__(
            f"pair {qa_id!r} has {available} queries; cannot hold out {holdout} "
            "and still train on it"
        )


@dataclass(frozen=True)
class TrainingTriple:
    query_text: str
    positive_answer_id: str
    negative_answer_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.query_text:
            raise ValueError("TrainingTriple.query_text must be non-empty")
        if self.positive_answer_id in self.negative_answer_ids:
            raise ValueError(
                f"positive id {self.positive_answer_id!r} also appears as a negative"
            )
        if len(set(self.negative_answer_ids)) != len(self.negative_answer_ids):
            raise ValueError("negative ids must be distinct")


@dataclass(frozen=True)
class EvalQuery:
    """A held-out query and the id of its single relevant answer."""

    query_text: str
    positive_answer_id: str


@dataclass(frozen=True)
class TripleSet:
    triples: tuple[TrainingTriple, ...]
    corpus_name: str
    seed: int

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)


def mine_triples(
    generated_queries: list[GeneratedQuery],
    corpus: Corpus,
    n_neg: int = 1,
    seed: int = 0,
) -> TripleSet:
    """Build one triple per generated query with sampled hard negatives.

    Negatives are drawn uniformly without replacement from the answers
    of other pairs, excluding any answer whose text equals the positive
    answer (duplicates would poison the contrastive signal). The draw
    for each query is seeded from (seed, source id, type, text), so the
    same query always receives the same negatives no matter how the
    input is ordered or sharded.
    """
    if n_neg < 1:
        raise ValueError(f"n_neg must be >= 1, got {n_neg}")
    if len(corpus) < n_neg + 1:
        raise CorpusTooSmallError(
            f"corpus has {len(corpus)} pairs; need at least {n_neg + 1} for n_neg={n_neg}"
        )
    triples: list[TrainingTriple] = []
    for query in generated_queries:
        if query.source_qa_id not in corpus:
            raise DanglingQueryReferenceError(query.source_qa_id)
        positive = corpus[query.source_qa_id]
        pool = [
            p.id
            for p in corpus
            if p.id != positive.id and p.answer != positive.answer
        ]
        if len(pool) < n_neg:
            raise CorpusTooSmallError(
                f"pair {positive.id!r}: only {len(pool)} usable negatives, need {n_neg}"
            )
        rng = stable_rng(seed, query.source_qa_id, query.query_type.value, query.text)
        picks = rng.choice(len(pool), size=n_neg, replace=False)
        negatives = tuple(pool[int(i)] for i in picks)
        triples.append(
            TrainingTriple(
                query_text=query.text,
                positive_answer_id=positive.id,
                negative_answer_ids=negatives,
            )
        )
    return TripleSet(triples=tuple(triples), corpus_name=corpus.name, seed=seed)


def partition_triples(
    tripleset: TripleSet,
    holdout_per_pair: int = 1,
    seed: int = 0,
) -> tuple[TripleSet, list[EvalQuery]]:
    """Withhold holdout_per_pair queries of every pair for evaluation.

    The choice is seeded per pair, so adding pairs to the corpus does
    not reshuffle existing holdouts. Held-out queries leave training
    entirely; their (text, positive id) pairs form the evaluation set.
    Training triples keep their original order.
    """
    if holdout_per_pair < 0:
        raise ValueError(f"holdout_per_pair must be >= 0, got {holdout_per_pair}")
    if holdout_per_pair == 0:
        return tripleset, []
    by_pair: dict[str, list[int]] = {}
    for pos, triple in enumerate(tripleset.triples):
        by_pair.setdefault(triple.positive_answer_id, []).append(pos)
    held_positions: set[int] = set()
    eval_queries: list[EvalQuery] = []
    for qa_id, positions in by_pair.items():
        if len(positions) <= holdout_per_pair:
            raise InsufficientQueriesError(qa_id, len(positions), holdout_per_pair)
        rng = stable_rng(seed, "holdout", qa_id)
        picks = rng.choice(len(positions), size=holdout_per_pair, replace=False)
        for i in sorted(int(p) for p in picks):
            pos = positions[i]
            held_positions.add(pos)
            triple = tripleset.triples[pos]
            eval_queries.append(EvalQuery(triple.query_text, triple.positive_answer_id))
    train = tuple(t for i, t in enumerate(tripleset.triples) if i not in held_positions)
    train_set = TripleSet(triples=train, corpus_name=tripleset.corpus_name, seed=tripleset.seed)
    return train_set, eval_queries


def save_triples(tripleset: TripleSet, path: str | Path) -> Path:
    """One JSON record per triple; corpus name and seed live in the manifest."""
    return write_jsonl(
        path,
        (
            {
                "query_text": t.query_text,
                "positive_answer_id": t.positive_answer_id,
                "negative_answer_ids": list(t.negative_answer_ids),
            }
            for t in tripleset.triples
        ),
    )


def load_triples(path: str | Path, corpus_name: str = "", seed: int = 0) -> TripleSet:
    triples = tuple(
        TrainingTriple(
            query_text=record["query_text"],
            positive_answer_id=record["positive_answer_id"],
            negative_answer_ids=tuple(record["negative_answer_ids"]),
        )
        for record in read_jsonl(path)
    )
    return TripleSet(triples=triples, corpus_name=corpus_name, seed=seed)


def save_eval_queries(eval_queries: list[EvalQuery], path: str | Path) -> Path:
    return write_jsonl(
        path,
        (
            {"query_text": q.query_text, "positive_answer_id": q.positive_answer_id}
            for q in eval_queries
        ),
    )


def load_eval_queries(path: str | Path) -> list[EvalQuery]:
    return [
        EvalQuery(record["query_text"], record["positive_answer_id"])
        for record in read_jsonl(path)
    ]
