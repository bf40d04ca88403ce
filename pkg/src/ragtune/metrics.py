"""Retrieval and generation metrics plus report assembly.

Ranking metrics (Hit@k, MRR, Precision@k, NDCG@k) consume ranked doc-id
lists and relevance judgments. Generation metrics (ROUGE-1, ROUGE-L,
BLEU, embedding-based P/R/F1) consume raw strings and tokenize them with
the embedder's tokenizer, so retrieval and generation scores are always
computed over the same token stream.

Formulas, written out once so every consumer agrees:

    DCG@k     = sum_{i=1..k} (2^rel_i - 1) / log2(i + 1)
    NDCG@k    = DCG@k / IDCG@k
    ROUGE-1   = clipped unigram matches / reference unigram count
    ROUGE-L   = (1 + beta^2) R P / (R + beta^2 P),  R = LCS/m, P = LCS/n
    BLEU-k    = BP * exp(sum_{n=1..N} ln p_n / N),  N = min(k, |cand|, |ref|)
    BP        = 1 if c > r else exp(1 - r/c)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .augment import EvalQuery
from .corpus import Corpus
from .embedder import EmbeddingModel, cosine, embed, is_degenerate, tokenize
from .querygen import GeneratedQuery
from .retriever import Bm25Index, RankedList, VectorIndex, bm25_search, search


class MetricsError(Exception):
    """Base class for metric computation failures."""


class MissingJudgmentError(MetricsError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no relevance judgment for query {query_id!r}")


class ZeroIdealGainError(MetricsError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"query {query_id!r} has no positive relevance grade")


class EmptyReferenceError(MetricsError):
    """The reference text tokenizes to nothing."""


class EmptyTextError(MetricsError):
    """A text required to be non-empty tokenizes to nothing."""


class IdSetMismatchError(MetricsError):
    """Prediction and reference ids differ."""


class EmptyEvalSetError(MetricsError):
    """An evaluation was requested over zero queries."""


# ---------------------------------------------------------------------------
# Relevance judgments and ranking metrics


@dataclass(frozen=True)
class RelevanceJudgments:
    """Graded relevance per query; binary judgments are grade-1 singletons."""

    grades: Mapping[str, Mapping[str, float]]

    @classmethod
    def binary(cls, relevant: Mapping[str, str]) -> "RelevanceJudgments":
        return cls(grades={qid: {doc: 1.0} for qid, doc in relevant.items()})

    def for_query(self, query_id: str) -> Mapping[str, float]:
        try:
            return self.grades[query_id]
        except KeyError:
            raise MissingJudgmentError(query_id) from None

    def gain(self, query_id: str, doc_id: str) -> float:
        return float(self.for_query(query_id).get(doc_id, 0.0))


Ranked = Mapping[str, "RankedList | Sequence[str]"]


def _doc_ids(ranked_entry) -> list[str]:
    if isinstance(ranked_entry, RankedList):
        return ranked_entry.doc_ids()
    return list(ranked_entry)


def _require_queries(ranked: Ranked) -> None:
    if not ranked:
        raise EmptyEvalSetError("no ranked lists to evaluate")


def hit_at_k(ranked: Ranked, judgments: RelevanceJudgments, k: int) -> float:
    """Fraction of queries with a positively judged doc in the top k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _require_queries(ranked)
    hits = 0
    for qid, entry in ranked.items():
        docs = _doc_ids(entry)[:k]
        if any(judgments.gain(qid, d) > 0.0 for d in docs):
            hits += 1
    return hits / len(ranked)


def mrr(ranked: Ranked, judgments: RelevanceJudgments) -> float:
    """Mean reciprocal rank of the first positively judged doc (0 if absent)."""
    _require_queries(ranked)
    total = 0.0
    for qid, entry in ranked.items():
        for rank, doc in enumerate(_doc_ids(entry), start=1):
            if judgments.gain(qid, doc) > 0.0:
                total += 1.0 / rank
                break
    return total / len(ranked)


def precision_at_k(ranked: Ranked, judgments: RelevanceJudgments, k: int) -> float:
    """Mean over queries of (positively judged docs in top k) / k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _require_queries(ranked)
    total = 0.0
    for qid, entry in ranked.items():
        docs = _doc_ids(entry)[:k]
        total += sum(1 for d in docs if judgments.gain(qid, d) > 0.0) / k
    return total / len(ranked)


def dcg_at_k(doc_ids: Sequence[str], gains: Mapping[str, float], k: int) -> float:
    total = 0.0
    for i, doc in enumerate(doc_ids[:k], start=1):
        rel = float(gains.get(doc, 0.0))
        total += (2.0**rel - 1.0) / np.log2(i + 1)
    return total


def ndcg_at_k(ranked: Ranked, judgments: RelevanceJudgments, k: int) -> float:
    """Mean NDCG@k with gain 2^rel - 1 and discount log2(rank + 1).

    The ideal DCG places the judged docs in descending grade order.
    Raises ZeroIdealGainError when a query has no positive grade.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _require_queries(ranked)
    total = 0.0
    for qid, entry in ranked.items():
        gains = judgments.for_query(qid)
        ideal = sorted((g for g in gains.values() if g > 0.0), reverse=True)
        idcg = 0.0
        for i, rel in enumerate(ideal[:k], start=1):
            idcg += (2.0**rel - 1.0) / np.log2(i + 1)
        if idcg == 0.0:
            raise ZeroIdealGainError(qid)
        total += dcg_at_k(_doc_ids(entry), gains, k) / idcg
    return total / len(ranked)


# ---------------------------------------------------------------------------
# Generation metrics


def _ngram_counts(tokens: Sequence[str], n: int) -> dict[tuple[str, ...], int]:
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i:i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def rouge1(candidate: str, reference: str, mode: str = "recall") -> float:
    """Clipped unigram overlap.

    mode "recall" divides by the reference length (the convention used
    for QA answer matching); mode "f1" combines with precision.
    """
    if mode not in ("recall", "f1"):
        raise ValueError(f"mode must be 'recall' or 'f1', got {mode!r}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not ref:
        raise EmptyReferenceError("reference tokenizes to nothing")
    if not cand:
        return 0.0
    cand_counts = _ngram_counts(cand, 1)
    ref_counts = _ngram_counts(ref, 1)
    clipped = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
    recall = clipped / len(ref)
    if mode == "recall":
        return recall
    precision = clipped / len(cand)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Classic O(len(a) * len(b)) longest-common-subsequence DP."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, reference: str, beta: float = 1.0) -> float:
    """LCS-based F-measure: (1 + beta^2) R P / (R + beta^2 P), 0 when LCS = 0."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyTextError("both candidate and reference must tokenize non-empty")
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(cand)
    return (1.0 + beta**2) * recall * precision / (recall + beta**2 * precision)


def bleu(candidate: str, reference: str, max_n: int = 4, strict_lengths: bool = False) -> tuple[float, ...]:
    """BLEU-1 .. BLEU-max_n with clipped n-gram precisions and no smoothing.

    For BLEU-k the included orders are 1..min(k, candidate length,
    reference length) with uniform weights, so short texts are scored on
    the orders they support; strict_lengths=True keeps all k orders, in
    which case any missing order zeroes the score. Any included p_n = 0
    zeroes the score. An empty candidate scores 0 at every order; an
    empty reference is an error.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not ref:
        raise EmptyReferenceError("reference tokenizes to nothing")
    if not cand:
        return tuple(0.0 for _ in range(max_n))
    c, r = len(cand), len(ref)
    bp = 1.0 if c > r else float(np.exp(1.0 - r / c))
    precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        if not cand_counts:
            precisions.append(0.0)
            continue
        ref_counts = _ngram_counts(ref, n)
        clipped = sum(min(cnt, ref_counts.get(g, 0)) for g, cnt in cand_counts.items())
        precisions.append(clipped / sum(cand_counts.values()))
    scores = []
    for k in range(1, max_n + 1):
        n_eff = k if strict_lengths else min(k, c, r)
        included = precisions[:n_eff]
        if any(p == 0.0 for p in included) or not included:
            scores.append(0.0)
            continue
        log_mean = sum(np.log(p) for p in included) / n_eff
        scores.append(float(bp * np.exp(log_mean)))
    return tuple(scores)


def bert_prf(candidate: str, reference: str, model: EmbeddingModel) -> tuple[float, float, float]:
    """Greedy token-alignment P/R/F1 in the embedder's space.

    Each token embeds on its own; a token's match score is its maximum
    cosine against the other side, clamped to [0, 1]. Precision averages
    over candidate tokens, recall over reference tokens, and F1 is their
    harmonic mean (0 when both are 0).
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        raise EmptyTextError("both candidate and reference must tokenize non-empty")
    cache: dict[str, np.ndarray] = {}

    def vec(token: str) -> np.ndarray:
        got = cache.get(token)
        if got is None:
            got = embed(model, token)
            cache[token] = got
        return got

    cand_vecs = np.stack([vec(t) for t in cand])
    ref_vecs = np.stack([vec(t) for t in ref])
    sims = np.clip(cand_vecs @ ref_vecs.T, 0.0, 1.0)
    # Zero embeddings (degenerate tokens) contribute similarity 0, which
    # the clip already guarantees because their dot products are 0.
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    if precision + recall == 0.0:
        return 0.0, 0.0, 0.0
    f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class RetrievalReport:
    engine: str
    n_queries: int
    depth: int
    k_set: tuple[int, ...]
    hit: dict[int, float]
    precision: dict[int, float]
    ndcg: dict[int, float]
    mrr: float

    def to_records(self) -> list[dict]:
        records: list[dict] = [
            {"metric": "mrr", "k": self.depth, "value": self.mrr},
        ]
        for k in self.k_set:
            records.append({"metric": "hit", "k": k, "value": self.hit[k]})
            records.append({"metric": "precision", "k": k, "value": self.precision[k]})
            records.append({"metric": "ndcg", "k": k, "value": self.ndcg[k]})
        for record in records:
            record.update({"engine": self.engine, "n_queries": self.n_queries})
        return records

    def to_table(self) -> str:
        lines = [
            f"retrieval evaluation ({self.engine}, {self.n_queries} queries, depth {self.depth})",
            f"{'metric':<14}{'value':>10}",
            f"{'mrr':<14}{self.mrr:>10.4f}",
        ]
        for k in self.k_set:
            lines.append(f"{f'hit@{k}':<14}{self.hit[k]:>10.4f}")
            lines.append(f"{f'precision@{k}':<14}{self.precision[k]:>10.4f}")
            lines.append(f"{f'ndcg@{k}':<14}{self.ndcg[k]:>10.4f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GenerationReport:
    n_items: int
    rouge1: float
    rouge_l: float
    bleu: dict[int, float]
    bert_p: float
    bert_r: float
    bert_f1: float

    def to_records(self) -> list[dict]:
        records = [
            {"metric": "rouge1", "value": self.rouge1},
            {"metric": "rouge_l", "value": self.rouge_l},
        ]
        records.extend({"metric": f"bleu{n}", "value": v} for n, v in sorted(self.bleu.items()))
        records.extend(
            [
                {"metric": "bert_p", "value": self.bert_p},
                {"metric": "bert_r", "value": self.bert_r},
                {"metric": "bert_f1", "value": self.bert_f1},
            ]
        )
        for record in records:
            record["n_items"] = self.n_items
        return records

    def to_table(self) -> str:
        lines = [
            f"generation evaluation ({self.n_items} items)",
            f"{'metric':<10}{'value':>10}",
            f"{'rouge1':<10}{self.rouge1:>10.4f}",
            f"{'rouge_l':<10}{self.rouge_l:>10.4f}",
        ]
        for n, v in sorted(self.bleu.items()):
            lines.append(f"{f'bleu{n}':<10}{v:>10.4f}")
        lines.append(f"{'bert_p':<10}{self.bert_p:>10.4f}")
        lines.append(f"{'bert_r':<10}{self.bert_r:>10.4f}")
        lines.append(f"{'bert_f1':<10}{self.bert_f1:>10.4f}")
        return "\n".join(lines) + "\n"


def evaluate_retrieval(
    index: "VectorIndex | Bm25Index",
    model: EmbeddingModel | None,
    eval_queries: Sequence[EvalQuery],
    k_set: Sequence[int] = (1, 3),
) -> RetrievalReport:
    """Search every eval query and score the rankings.

    Accepts a dense VectorIndex (model required) or a Bm25Index (model
    ignored). Lists are retrieved at depth max(k_set); MRR is computed
    at that depth. Judgments are binary: each query's single relevant
    doc is its source pair's answer.
    """
    if not eval_queries:
        raise EmptyEvalSetError("no evaluation queries")
    ks = tuple(sorted(set(int(k) for k in k_set)))
    if not ks or ks[0] < 1:
        raise ValueError(f"k_set must contain integers >= 1, got {k_set!r}")
    depth = ks[-1]
    dense = not isinstance(index, Bm25Index)
    if dense and model is None:
        raise ValueError("dense evaluation requires the embedding model")
    engine = "dense" if dense else "bm25"
    ranked: dict[str, RankedList] = {}
    relevant: dict[str, str] = {}
    for i, query in enumerate(eval_queries):
        qid = f"q{i:05d}"
        if dense:
            ranked[qid] = search(index, model, query.query_text, k=depth)
        else:
            ranked[qid] = bm25_search(index, query.query_text, k=depth)
        relevant[qid] = query.positive_answer_id
    judgments = RelevanceJudgments.binary(relevant)
    return RetrievalReport(
        engine=engine,
        n_queries=len(eval_queries),
        depth=depth,
        k_set=ks,
        hit={k: hit_at_k(ranked, judgments, k) for k in ks},
        precision={k: precision_at_k(ranked, judgments, k) for k in ks},
        ndcg={k: ndcg_at_k(ranked, judgments, k) for k in ks},
        mrr=mrr(ranked, judgments),
    )


def evaluate_generation(
    predictions: Mapping[str, str],
    references: Mapping[str, str],
    model: EmbeddingModel,
    max_n: int = 4,
    rouge1_mode: str = "recall",
) -> GenerationReport:
    """Macro-averaged generation metrics over aligned id -> text maps.

    Ids must match exactly. Items whose prediction tokenizes to nothing
    score 0 on every metric for that item (the low-level ops would raise,
    but a single empty generation should not abort a corpus evaluation).
    """
    if set(predictions) != set(references):
        missing = set(references) ^ set(predictions)
        raise IdSetMismatchError(f"prediction/reference ids differ, e.g. {sorted(missing)[:3]}")
    if not predictions:
        raise EmptyEvalSetError("no items to evaluate")
    r1 = []
    rl = []
    bleus: dict[int, list[float]] = {n: [] for n in range(1, max_n + 1)}
    bp, br, bf = [], [], []
    for item_id in sorted(predictions):
        cand = predictions[item_id]
        ref = references[item_id]
        if not tokenize(ref):
            raise EmptyReferenceError(f"reference for {item_id!r} tokenizes to nothing")
        if not tokenize(cand):
            r1.append(0.0)
            rl.append(0.0)
            for n in bleus:
                bleus[n].append(0.0)
            bp.append(0.0)
            br.append(0.0)
            bf.append(0.0)
            continue
        r1.append(rouge1(cand, ref, mode=rouge1_mode))
        rl.append(rouge_l(cand, ref))
        for n, value in enumerate(bleu(cand, ref, max_n=max_n), start=1):
            bleus[n].append(value)
        p, r, f = bert_prf(cand, ref, model)
        bp.append(p)
        br.append(r)
        bf.append(f)
    mean = lambda xs: float(np.mean(xs))
    return GenerationReport(
        n_items=len(predictions),
        rouge1=mean(r1),
        rouge_l=mean(rl),
        bleu={n: mean(vs) for n, vs in bleus.items()},
        bert_p=mean(bp),
        bert_r=mean(br),
        bert_f1=mean(bf),
    )


# ---------------------------------------------------------------------------
# Query diversity


@dataclass(frozen=True)
class DiversityReport:
    rows: tuple[tuple[str, str, float], ...]  # (qa_id, query_type, distance)
    per_type_mean: dict[str, float]


def diversity_report(
    generated: Sequence[GeneratedQuery],
    corpus: Corpus,
    model: EmbeddingModel,
    out_path: str | Path | None = None,
) -> DiversityReport:
    """Embedding distance of each generated query from its source question.

    distance = 1 - cosine(embed(query), embed(source question)). When
    out_path is given, writes a CSV of all rows followed by one summary
    row per type whose qa_id column is "(mean)".
    """
    if not generated:
        raise EmptyEvalSetError("no generated queries")
    rows: list[tuple[str, str, float]] = []
    by_type: dict[str, list[float]] = {}
    question_vecs: dict[str, np.ndarray] = {}
    for query in generated:
        if query.source_qa_id not in corpus:
            raise KeyError(f"generated query references unknown QA pair {query.source_qa_id!r}")
        src = question_vecs.get(query.source_qa_id)
        if src is None:
            src = embed(model, corpus[query.source_qa_id].question)
            question_vecs[query.source_qa_id] = src
        qvec = embed(model, query.text)
        if is_degenerate(qvec) or is_degenerate(src):
            distance = 1.0
        else:
            # cosine of near-identical unit vectors can exceed 1 by an ulp;
            # clamp so the distance respects its mathematical range [0, 2]
            distance = float(np.clip(1.0 - cosine(qvec, src), 0.0, 2.0))
        rows.append((query.source_qa_id, query.query_type.value, distance))
        by_type.setdefault(query.query_type.value, []).append(distance)
    per_type_mean = {t: float(np.mean(v)) for t, v in sorted(by_type.items())}
    report = DiversityReport(rows=tuple(rows), per_type_mean=per_type_mean)
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with out_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["qa_id", "query_type", "distance"])
            for qa_id, qtype, distance in rows:
                writer.writerow([qa_id, qtype, f"{distance:.10f}"])
            for qtype, mean_distance in per_type_mean.items():
                writer.writerow(["(mean)", qtype, f"{mean_distance:.10f}"])
    return report
