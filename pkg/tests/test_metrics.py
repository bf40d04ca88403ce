"""Retrieval and generation metrics against hand-derived values and
brute-force reference implementations.

The reference implementations here are deliberately naive (subsequence
enumeration for LCS, Counter-based n-grams, explicit DCG loops) so they
cannot share a bug with the dynamic-programming and vectorized versions
under test.
"""

import csv
import itertools
import math
from collections import Counter

import numpy as np
import pytest

from ragtune.augment import EvalQuery
from ragtune.corpus import Corpus
from ragtune.embedder import tokenize
from ragtune.metrics import (
    EmptyEvalSetError,
    EmptyReferenceError,
    EmptyTextError,
    IdSetMismatchError,
    MissingJudgmentError,
    RelevanceJudgments,
    ZeroIdealGainError,
    bert_prf,
    bleu,
    dcg_at_k,
    diversity_report,
    evaluate_generation,
    evaluate_retrieval,
    hit_at_k,
    lcs_length,
    mrr,
    ndcg_at_k,
    precision_at_k,
    rouge1,
    rouge_l,
)
from ragtune.querygen import GeneratedQuery, QueryType, synthesize_queries
from ragtune.retriever import bm25_build, build_index


def lcs_brute(a, b):
    """Longest common subsequence by enumerating every subsequence of a."""
    def is_subsequence(sub, seq):
        it = iter(seq)
        return all(any(x == y for y in it) for x in sub)

    best = 0
    for mask in range(1 << len(a)):
        sub = [a[i] for i in range(len(a)) if mask >> i & 1]
        if len(sub) > best and is_subsequence(sub, b):
            best = len(sub)
    return best


def bleu_brute(candidate, reference, order):
    """Counter-based BLEU-[order] with the same effective-order rule."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    n_eff = min(order, c, r)
    precisions = []
    for n in range(1, n_eff + 1):
        cand_grams = Counter(tuple(cand[i:i + n]) for i in range(c - n + 1))
        ref_grams = Counter(tuple(ref[i:i + n]) for i in range(r - n + 1))
        clipped = sum(min(cnt, ref_grams[g]) for g, cnt in cand_grams.items())
        precisions.append(clipped / sum(cand_grams.values()))
    if not precisions or any(p == 0.0 for p in precisions):
        return 0.0
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(sum(math.log(p) for p in precisions) / n_eff)


def dcg_brute(doc_ids, gains, k):
    total = 0.0
    for i, doc in enumerate(doc_ids[:k]):
        total += (2.0 ** gains.get(doc, 0.0) - 1.0) / math.log2(i + 2)
    return total


# Three queries whose single relevant docs sit at ranks 1, 2, and 4.
RANKED_134 = {
    "q1": ["rel1", "x1", "x2", "x3"],
    "q2": ["y1", "rel2", "y2", "y3"],
    "q3": ["z1", "z2", "z3", "rel3"],
}
JUDGED_134 = RelevanceJudgments.binary({"q1": "rel1", "q2": "rel2", "q3": "rel3"})


class TestRankingMetricFixtures:
    def test_mrr_ranks_one_two_four(self):
        """(1/1 + 1/2 + 1/4) / 3 = 7/12."""
        assert mrr(RANKED_134, JUDGED_134) == pytest.approx(7.0 / 12.0, abs=1e-12)

    def test_hit_at_three_is_two_thirds(self):
        assert hit_at_k(RANKED_134, JUDGED_134, k=3) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_hit_at_k_monotone_in_k(self):
        values = [hit_at_k(RANKED_134, JUDGED_134, k=k) for k in range(1, 5)]
        assert values == sorted(values)
        assert values[-1] == 1.0

    def test_ndcg_single_relevant_at_rank_two(self):
        """DCG = 1/log2(3), IDCG = 1, so NDCG = 0.6309297535714574."""
        ranked = {"q": ["other", "rel", "noise"]}
        judged = RelevanceJudgments.binary({"q": "rel"})
        assert ndcg_at_k(ranked, judged, k=3) == pytest.approx(0.6309297535714574, abs=1e-12)

    def test_ndcg_monotone_in_k_for_binary_judgments(self):
        values = [ndcg_at_k(RANKED_134, JUDGED_134, k=k) for k in range(1, 5)]
        assert values == sorted(values)

    def test_precision_at_three_single_relevant(self):
        """One relevant doc caps precision@3 at 1/3 per query."""
        ranked = {"q": ["rel", "a", "b"]}
        judged = RelevanceJudgments.binary({"q": "rel"})
        assert precision_at_k(ranked, judged, k=3) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_dcg_matches_brute_force(self):
        rng = np.random.default_rng(7)
        docs = [f"d{i}" for i in range(10)]
        for _ in range(50):
            order = [docs[i] for i in rng.permutation(10)]
            gains = {d: float(rng.integers(0, 4)) for d in rng.choice(docs, size=5, replace=False)}
            k = int(rng.integers(1, 12))
            assert dcg_at_k(order, gains, k) == pytest.approx(dcg_brute(order, gains, k), abs=1e-9)

    def test_random_rankings_stay_in_unit_interval(self):
        rng = np.random.default_rng(13)
        docs = [f"d{i}" for i in range(8)]
        for _ in range(30):
            ranked = {
                f"q{j}": [docs[i] for i in rng.permutation(8)[: int(rng.integers(1, 9))]]
                for j in range(4)
            }
            judged = RelevanceJudgments.binary({f"q{j}": docs[int(rng.integers(8))] for j in range(4)})
            for k in (1, 3, 8):
                assert 0.0 <= hit_at_k(ranked, judged, k) <= 1.0
                assert 0.0 <= precision_at_k(ranked, judged, k) <= 1.0
                assert 0.0 <= ndcg_at_k(ranked, judged, k) <= 1.0
            assert 0.0 <= mrr(ranked, judged) <= 1.0

    def test_missing_judgment_raises(self):
        ranked = {"q-unjudged": ["a", "b"]}
        with pytest.raises(MissingJudgmentError):
            hit_at_k(ranked, JUDGED_134, k=1)

    def test_zero_ideal_gain_raises(self):
        ranked = {"q": ["a", "b"]}
        judged = RelevanceJudgments(grades={"q": {"a": 0.0}})
        with pytest.raises(ZeroIdealGainError):
            ndcg_at_k(ranked, judged, k=2)

    def test_empty_eval_set_raises(self):
        with pytest.raises(EmptyEvalSetError):
            mrr({}, JUDGED_134)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            hit_at_k(RANKED_134, JUDGED_134, k=0)
        with pytest.raises(ValueError):
            ndcg_at_k(RANKED_134, JUDGED_134, k=0)


class TestRouge:
    def test_rouge1_recall_fixture(self):
        """Overlap {the, cat} over reference length 3."""
        assert rouge1("the cat", "the cat sat", mode="recall") == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_rouge1_clipping_and_f1(self):
        """'the the the' vs 'the cat': clipped overlap 1, R = 1/2, P = 1/3,
        F1 = 2 * (1/6) / (5/6) = 0.4."""
        assert rouge1("the the the", "the cat", mode="f1") == pytest.approx(0.4, abs=1e-12)

    def test_rouge1_empty_candidate_scores_zero(self):
        assert rouge1("", "the cat", mode="recall") == 0.0

    def test_rouge1_empty_reference_raises(self):
        with pytest.raises(EmptyReferenceError):
            rouge1("the cat", "  !?  ")

    def test_rouge1_bad_mode(self):
        with pytest.raises(ValueError):
            rouge1("a", "a", mode="precision")

    def test_rouge_l_fixture(self):
        """LCS('a c d b', 'a b c d') = [a, c, d], so R = P = F = 3/4."""
        assert rouge_l("a c d b", "a b c d") == pytest.approx(0.75, abs=1e-12)

    def test_rouge_l_identity_is_one(self):
        assert rouge_l("the quick brown fox", "the quick brown fox") == pytest.approx(1.0, abs=1e-12)

    def test_rouge_l_disjoint_is_zero(self):
        assert rouge_l("aa bb", "cc dd") == 0.0

    def test_rouge_l_empty_raises(self):
        with pytest.raises(EmptyTextError):
            rouge_l("", "a b")

    def test_lcs_exhaustive_small_alphabet(self):
        """Every pair of strings over {a, b} up to length 5 (3969 pairs)."""
        universe = [
            list(word)
            for n in range(6)
            for word in map("".join, itertools.product("ab", repeat=n))
        ]
        for a in universe:
            for b in universe:
                assert lcs_length(a, b) == lcs_brute(a, b), (a, b)

    def test_lcs_random_wider_alphabet(self):
        rng = np.random.default_rng(20240515)
        for _ in range(200):
            a = ["abc"[i] for i in rng.integers(3, size=int(rng.integers(0, 9)))]
            b = ["abc"[i] for i in rng.integers(3, size=int(rng.integers(0, 9)))]
            assert lcs_length(a, b) == lcs_brute(a, b), (a, b)


class TestBleu:
    def test_three_of_four_token_fixture(self):
        """'a b c' vs 'a b c d': every included precision is 1 and the
        brevity penalty is e^(1 - 4/3), so all orders score e^(-1/3)."""
        expected = math.exp(-1.0 / 3.0)
        scores = bleu("a b c", "a b c d", max_n=4)
        assert len(scores) == 4
        for value in scores:
            assert value == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.7165313105737893, abs=1e-15)

    def test_strict_lengths_zeroes_unsupported_orders(self):
        scores = bleu("a b c", "a b c d", max_n=4, strict_lengths=True)
        assert scores[2] == pytest.approx(math.exp(-1.0 / 3.0), abs=1e-12)
        assert scores[3] == 0.0

    def test_identity_scores_one_everywhere(self):
        for value in bleu("the quick brown fox", "the quick brown fox"):
            assert value == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_scores_zero(self):
        assert bleu("aa bb cc", "dd ee ff") == (0.0, 0.0, 0.0, 0.0)

    def test_empty_candidate_scores_zero(self):
        assert bleu("", "a b") == (0.0, 0.0, 0.0, 0.0)

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReferenceError):
            bleu("a b", "")

    def test_matches_counter_reimplementation(self):
        rng = np.random.default_rng(20240516)
        vocab = ["fee", "patent", "office", "filing", "renewal", "status"]
        for _ in range(60):
            cand = " ".join(vocab[i] for i in rng.integers(6, size=int(rng.integers(1, 10))))
            ref = " ".join(vocab[i] for i in rng.integers(6, size=int(rng.integers(1, 10))))
            scores = bleu(cand, ref, max_n=4)
            for order in range(1, 5):
                assert scores[order - 1] == pytest.approx(
                    bleu_brute(cand, ref, order), abs=1e-12
                ), (cand, ref, order)

    def test_longer_candidate_has_no_brevity_penalty(self):
        p1 = bleu("a b c d e", "a b c", max_n=1)[0]
        assert p1 == pytest.approx(3.0 / 5.0, abs=1e-12)


class TestBertPrf:
    def test_identity_is_perfect(self, small_model):
        p, r, f1 = bert_prf("renewal fee notice", "renewal fee notice", small_model)
        assert p == pytest.approx(1.0, abs=1e-9)
        assert r == pytest.approx(1.0, abs=1e-9)
        assert f1 == pytest.approx(1.0, abs=1e-9)

    def test_precision_and_recall_swap_under_argument_swap(self, small_model):
        p_ab, r_ab, _ = bert_prf("patent fee", "patent office fee schedule", small_model)
        p_ba, r_ba, _ = bert_prf("patent office fee schedule", "patent fee", small_model)
        assert p_ab == pytest.approx(r_ba, abs=1e-12)
        assert r_ab == pytest.approx(p_ba, abs=1e-12)

    def test_scores_clamped_to_unit_interval(self, small_model):
        p, r, f1 = bert_prf("utterly unrelated words", "patent renewal fee", small_model)
        for value in (p, r, f1):
            assert 0.0 <= value <= 1.0

    def test_empty_side_raises(self, small_model):
        with pytest.raises(EmptyTextError):
            bert_prf("", "patent", small_model)
        with pytest.raises(EmptyTextError):
            bert_prf("patent", " !? ", small_model)


class TestEvaluateRetrieval:
    def test_answer_self_retrieval_maxes_every_metric(self, small_model, tiny_corpus):
        """Querying with the exact answer text puts the right doc at rank 1
        for every query, so hit/ndcg/mrr are 1.0 and precision@3 is 1/3."""
        index = build_index(small_model, tiny_corpus)
        queries = [EvalQuery(query_text=p.answer, positive_answer_id=p.id) for p in tiny_corpus]
        report = evaluate_retrieval(index, small_model, queries, k_set=(1, 3))
        assert report.engine == "dense"
        assert report.n_queries == len(tiny_corpus)
        assert report.hit[1] == pytest.approx(1.0, abs=1e-12)
        assert report.hit[3] == pytest.approx(1.0, abs=1e-12)
        assert report.ndcg[1] == pytest.approx(1.0, abs=1e-12)
        assert report.mrr == pytest.approx(1.0, abs=1e-12)
        assert report.precision[3] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_k_set_is_deduped_and_sorted(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        queries = [EvalQuery(query_text=p.answer, positive_answer_id=p.id) for p in tiny_corpus]
        report = evaluate_retrieval(index, small_model, queries, k_set=(3, 1, 3))
        assert report.k_set == (1, 3)
        assert report.depth == 3

    def test_bm25_engine(self, tiny_corpus):
        index = bm25_build(tiny_corpus)
        queries = [EvalQuery(query_text=p.answer, positive_answer_id=p.id) for p in tiny_corpus]
        report = evaluate_retrieval(index, None, queries, k_set=(1,))
        assert report.engine == "bm25"
        assert report.hit[1] == pytest.approx(1.0, abs=1e-12)

    def test_dense_requires_model(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        queries = [EvalQuery(query_text="anything", positive_answer_id="d1")]
        with pytest.raises(ValueError):
            evaluate_retrieval(index, None, queries)

    def test_empty_query_set_raises(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        with pytest.raises(EmptyEvalSetError):
            evaluate_retrieval(index, small_model, [])

    def test_bad_k_set_raises(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        queries = [EvalQuery(query_text="anything", positive_answer_id="d1")]
        with pytest.raises(ValueError):
            evaluate_retrieval(index, small_model, queries, k_set=(0, 3))

    def test_report_records_and_table(self, small_model, tiny_corpus):
        index = build_index(small_model, tiny_corpus)
        queries = [EvalQuery(query_text=p.answer, positive_answer_id=p.id) for p in tiny_corpus]
        report = evaluate_retrieval(index, small_model, queries, k_set=(1, 3))
        records = report.to_records()
        assert {r["metric"] for r in records} == {"mrr", "hit", "precision", "ndcg"}
        assert all(r["engine"] == "dense" and r["n_queries"] == len(tiny_corpus) for r in records)
        table = report.to_table()
        assert "hit@1" in table and "ndcg@3" in table and table.endswith("\n")


class TestEvaluateGeneration:
    def test_identity_predictions_score_one(self, small_model):
        texts = {"a": "the renewal fee is due", "b": "file the request in writing"}
        report = evaluate_generation(texts, dict(texts), small_model)
        assert report.rouge1 == pytest.approx(1.0, abs=1e-9)
        assert report.rouge_l == pytest.approx(1.0, abs=1e-9)
        for n in range(1, 5):
            assert report.bleu[n] == pytest.approx(1.0, abs=1e-9)
        assert report.bert_f1 == pytest.approx(1.0, abs=1e-9)

    def test_one_perfect_one_empty_averages_half(self, small_model):
        references = {"a": "the renewal fee is due", "b": "file the request in writing"}
        predictions = {"a": "the renewal fee is due", "b": ""}
        report = evaluate_generation(predictions, references, small_model)
        assert report.rouge1 == pytest.approx(0.5, abs=1e-9)
        assert report.rouge_l == pytest.approx(0.5, abs=1e-9)
        assert report.bleu[1] == pytest.approx(0.5, abs=1e-9)
        assert report.bert_f1 == pytest.approx(0.5, abs=1e-6)

    def test_dict_insertion_order_is_irrelevant(self, small_model):
        references = {"a": "the fee is due", "b": "send the form", "c": "call the office"}
        predictions = {"a": "the fee is due now", "b": "send a form", "c": "call the office"}
        flipped_preds = dict(reversed(list(predictions.items())))
        flipped_refs = dict(reversed(list(references.items())))
        assert evaluate_generation(predictions, references, small_model) == evaluate_generation(
            flipped_preds, flipped_refs, small_model
        )

    def test_id_mismatch_raises(self, small_model):
        with pytest.raises(IdSetMismatchError):
            evaluate_generation({"a": "x"}, {"b": "x"}, small_model)

    def test_empty_reference_raises(self, small_model):
        with pytest.raises(EmptyReferenceError):
            evaluate_generation({"a": "text"}, {"a": "  "}, small_model)

    def test_empty_set_raises(self, small_model):
        with pytest.raises(EmptyEvalSetError):
            evaluate_generation({}, {}, small_model)

    def test_max_n_controls_bleu_orders(self, small_model):
        report = evaluate_generation({"a": "x y"}, {"a": "x y"}, small_model, max_n=2)
        assert sorted(report.bleu) == [1, 2]

    def test_records_and_table(self, small_model):
        report = evaluate_generation({"a": "x y"}, {"a": "x y z"}, small_model)
        metrics = [r["metric"] for r in report.to_records()]
        assert metrics == ["rouge1", "rouge_l", "bleu1", "bleu2", "bleu3", "bleu4",
                           "bert_p", "bert_r", "bert_f1"]
        assert "rouge_l" in report.to_table()


class TestDiversity:
    def test_identical_text_has_zero_distance(self, small_model, tiny_corpus):
        pair = tiny_corpus.pairs[0]
        queries = [
            GeneratedQuery(source_qa_id=pair.id, query_type=QueryType.FACT_SEEKING,
                           text=pair.question, origin="synthetic")
        ]
        report = diversity_report(queries, tiny_corpus, small_model)
        assert report.rows[0][2] == pytest.approx(0.0, abs=1e-6)

    def test_distances_stay_in_range(self, small_model, tiny_corpus):
        outcome = synthesize_queries(tiny_corpus, seed=5)
        report = diversity_report(outcome.queries, tiny_corpus, small_model)
        for _, _, distance in report.rows:
            assert 0.0 <= distance <= 2.0

    def test_misspellings_sit_closer_than_keyword_extracts(self, small_model, demo_corpus):
        """A two-character transposition keeps most features; stripping a
        question to keywords moves it further in embedding space."""
        corpus = Corpus(pairs=demo_corpus.pairs[:30], name="demo-slice")
        outcome = synthesize_queries(corpus, seed=9)
        report = diversity_report(outcome.queries, corpus, small_model)
        assert report.per_type_mean["misspelled"] < report.per_type_mean["keyword"]

    def test_csv_layout(self, tmp_path, small_model, tiny_corpus):
        outcome = synthesize_queries(tiny_corpus, seed=5)
        path = tmp_path / "diversity.csv"
        report = diversity_report(outcome.queries, tiny_corpus, small_model, out_path=path)
        with path.open(encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["qa_id", "query_type", "distance"]
        mean_rows = [r for r in rows[1:] if r[0] == "(mean)"]
        assert len(mean_rows) == len(report.per_type_mean)
        assert len(rows) == 1 + len(report.rows) + len(mean_rows)

    def test_unknown_source_id_raises(self, small_model, tiny_corpus):
        queries = [GeneratedQuery(source_qa_id="ghost", query_type=QueryType.KEYWORD,
                                  text="some text", origin="synthetic")]
        with pytest.raises(KeyError):
            diversity_report(queries, tiny_corpus, small_model)

    def test_empty_input_raises(self, small_model, tiny_corpus):
        with pytest.raises(EmptyEvalSetError):
            diversity_report([], tiny_corpus, small_model)
