"""Multi-angle query generation.

For every QA pair the toolkit produces query variants of five types
(concept-seeking, fact-seeking, keyword, misspelled, web-search), either
by prompting a chat-completions endpoint or by deterministic seeded
rewrite rules that need no network access. Both paths emit the same
GeneratedQuery records, so downstream mining does not care which one
produced them.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

from pathlib import Path

from .corpus import Corpus, QAPair
from .util import read_jsonl, stable_rng, write_jsonl


class QueryType(str, Enum):
    CONCEPT_SEEKING = "concept_seeking"
    FACT_SEEKING = "fact_seeking"
    KEYWORD = "keyword"
    MISSPELLED = "misspelled"
    WEB_SEARCH = "web_search"


ALL_QUERY_TYPES: tuple[QueryType, ...] = tuple(QueryType)


class QuerygenError(Exception):
    """Base class for query generation failures."""


class EmptyQuestionError(QuerygenError):
    """The source question has no tokens to rewrite."""


class NoQueriesFoundError(QuerygenError):
    """A generation response contained no usable queries."""


class AllFailedError(QuerygenError):
    """Every generation call failed; nothing was produced."""


class ClientError(QuerygenError):
    """A single generation call failed. Collected, not fatal."""

    def __init__(self, qa_id: str, query_type: QueryType, message: str):
        self.qa_id = qa_id
        self.query_type = query_type
        super().__init__(f"{qa_id}/{query_type.value}: {message}")


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.7
    max_tokens: int = 512


@dataclass(frozen=True)
class GeneratedQuery:
    """One query variant, traceable to its source QA pair."""

    source_qa_id: str
    query_type: QueryType
    text: str
    origin: str = "llm"  # "llm" or "synthetic"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("GeneratedQuery.text must be non-empty")
        if self.origin not in ("llm", "synthetic"):
            raise ValueError(f"unknown origin {self.origin!r}")


class GenerationClient(Protocol):
    """Anything that can answer a (system, user) prompt with text."""

    def complete(self, system_prompt: str, user_prompt: str, decoding: DecodingParams) -> str:
        ...


_PROMPT_LEAD = (
    "The following are frequent Q&A about Taiwan's patent service platform, which is "
    "used by the public for inquiries and reference in the preparation of various "
    "applications:\n\n[context_str]\n\n"
)

# One template per query type. [context_str] is replaced by the QA pair
# rendered as "Q: ...\nA: ..." and [K] by the number of queries wanted.
PROMPT_TEMPLATES: dict[QueryType, str] = {
    QueryType.CONCEPT_SEEKING: _PROMPT_LEAD
    + "Please generate [K] concept-seeking queries for the above Q&A. "
    "A concept-seeking query is an abstract question that requires multiple sentences to answer. "
    "Return them as a numbered list, one query per line.",
    QueryType.FACT_SEEKING: _PROMPT_LEAD
    + "Please generate [K] fact-seeking queries for the above Q&A. "
    "Queries that have a single, unambiguous answer. "
    "Return them as a numbered list, one query per line.",
    QueryType.KEYWORD: _PROMPT_LEAD
    + "Please generate [K] keyword queries for the above Q&A. "
    "Short queries containing only key identifier words. "
    "Return them as a numbered list, one query per line.",
    QueryType.MISSPELLED: _PROMPT_LEAD
    + "Please generate [K] misspelled queries for the above Q&A. "
    "Queries containing misspellings, transpositions, and common spelling errors. "
    "Return them as a numbered list, one query per line.",
    QueryType.WEB_SEARCH: _PROMPT_LEAD
    + "Please generate [K] web search queries for the above Q&A. "
    "Similar to short queries commonly entered into search engines. "
    "Return them as a numbered list, one query per line.",
}


def render_prompt(query_type: QueryType, qa: QAPair, k_per_type: int) -> str:
    """Fill the template for query_type with the QA pair and count.

    [context_str] becomes "Q: <question>\\nA: <answer>"; [K] becomes
    k_per_type. Rendering is pure string substitution, so output is
    byte-stable for identical inputs.
    """
    if k_per_type < 1:
        raise ValueError(f"k_per_type must be >= 1, got {k_per_type}")
    context = f"Q: {qa.question}\nA: {qa.answer}"
    template = PROMPT_TEMPLATES[query_type]
    return template.replace("[context_str]", context).replace("[K]", str(k_per_type))


_LIST_MARKER = re.compile(r"^\s*(?:\d+\s*[.):、]\s*|[-*•]\s+)")


def parse_generated(response_text: str, expected_k: int) -> list[str]:
    """Extract up to expected_k queries from a model response.

    Accepts numbered lists and bare line-separated lists; strips list
    markers and surrounding whitespace, drops empty lines and exact
    duplicates (keeping first occurrences), and truncates to expected_k.
    Never fabricates: fewer than expected_k lines yield fewer queries.
    Raises NoQueriesFoundError when nothing usable remains.
    """
    if expected_k < 1:
        raise ValueError(f"expected_k must be >= 1, got {expected_k}")
    queries: list[str] = []
    seen: set[str] = set()
    for line in response_text.splitlines():
        item = _LIST_MARKER.sub("", line).strip()
        if not item or item in seen:
            continue
        seen.add(item)
        queries.append(item)
        if len(queries) == expected_k:
            break
    if not queries:
        raise NoQueriesFoundError("response contained no usable queries")
    return queries


@dataclass
class GenerationOutcome:
    """Queries plus the per-cell errors collected along the way."""

    queries: list[GeneratedQuery]
    errors: list[ClientError]
    per_pair_counts: dict[str, int]


def generate_queries(
    corpus: Corpus,
    client: GenerationClient,
    types: tuple[QueryType, ...] = ALL_QUERY_TYPES,
    k_per_type: int = 3,
    decoding: DecodingParams = DecodingParams(),
    max_workers: int = 1,
    system_prompt: str = "",
) -> GenerationOutcome:
    """Prompt the client once per (QA pair, query type) cell.

    Calls may run concurrently up to max_workers, but results are
    ordered by (corpus position, type order, item index) regardless.
    Failures of single cells are recorded as ClientError entries;
    AllFailedError is raised only when no cell produced anything.
    """
    if len(corpus) == 0:
        raise AllFailedError("empty corpus: nothing to generate")
    cells = [(pair_pos, qa, type_pos, qtype)
             for pair_pos, qa in enumerate(corpus)
             for type_pos, qtype in enumerate(types)]

    def run_cell(cell):
        _, qa, _, qtype = cell
        prompt = render_prompt(qtype, qa, k_per_type)
        raw = client.complete(system_prompt, prompt, decoding)
        return parse_generated(raw, expected_k=k_per_type)

    results: dict[tuple[int, int], list[str] | ClientError] = {}
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {(c[0], c[2]): pool.submit(run_cell, c) for c in cells}
        for key, future in futures.items():
            exc = future.exception()
            if exc is None:
                results[key] = future.result()
            else:
                pair_pos, type_pos = key
                results[key] = ClientError(corpus.pairs[pair_pos].id, types[type_pos], str(exc))
    else:
        for cell in cells:
            pair_pos, qa, type_pos, qtype = cell
            try:
                results[(pair_pos, type_pos)] = run_cell(cell)
            except Exception as exc:
                results[(pair_pos, type_pos)] = ClientError(qa.id, qtype, str(exc))

    queries: list[GeneratedQuery] = []
    errors: list[ClientError] = []
    per_pair_counts: dict[str, int] = {qa.id: 0 for qa in corpus}
    for pair_pos, qa, type_pos, qtype in cells:
        outcome = results[(pair_pos, type_pos)]
        if isinstance(outcome, ClientError):
            errors.append(outcome)
            continue
        for text in outcome:
            queries.append(GeneratedQuery(source_qa_id=qa.id, query_type=qtype, text=text))
            per_pair_counts[qa.id] += 1
    if not queries:
        raise AllFailedError(f"all {len(cells)} generation cells failed")
    return GenerationOutcome(queries=queries, errors=errors, per_pair_counts=per_pair_counts)


# Function words dropped by the keyword rule and skipped when counting
# content tokens. Fixed list; changing it changes synthetic outputs.
STOPWORDS: frozenset[str] = frozenset(
    """
    a an the this that these those it its is are am was were be been being
    do does did done doing have has had having will would shall should can
    could may might must of for in on at by with from to into about over
    under between through during as if then than so such and or nor not no
    what which who whom whose when where why how i you he she we they me
    him her us them my your his our their mine yours theirs there here any
    some all each every please
    """.split()
)

_CONCEPT_FRAMES = (
    "In general terms, what should someone understand about the following: ",
    "Could you explain the broader context behind this question: ",
    "What is the overall picture regarding the following matter: ",
    "Why does the following question matter in practice: ",
)

_FACT_FRAMES = ("What is", "Which is", "When is")


def _content_words(question: str) -> list[str]:
    """Whitespace words of the question whose token form is not a stopword."""
    words = []
    for word in question.split():
        core = re.sub(r"[^0-9a-zA-Z一-鿿]+", "", word).lower()
        if core and core not in STOPWORDS:
            words.append(word)
    return words


def _strip_edge_punct(word: str) -> str:
    return word.strip(".,;:!?()[]{}\"'")


def synthesize_query(qa: QAPair, query_type: QueryType, seed: int, variant: int = 0) -> GeneratedQuery:
    """Rewrite a question into one variant of query_type without any LLM.

    Rules are deterministic in (qa, query_type, seed, variant):

    - CONCEPT_SEEKING: prepend an abstract interrogative frame.
    - FACT_SEEKING: ask about a short span of leading content words.
    - KEYWORD: keep only content words, in a seeded order.
    - MISSPELLED: transpose one adjacent pair of distinct characters at
      a seeded position (edit distance exactly 2 from the source).
    - WEB_SEARCH: cut the question after its first few content words.

    A rule that cannot change the question (no content words, nothing to
    transpose) falls back to the question itself.
    """
    question = qa.question.strip()
    if not question:
        raise EmptyQuestionError(f"QA pair {qa.id!r} has an empty question")
    rng = stable_rng(seed, qa.id, query_type.value, variant)
    if query_type is QueryType.CONCEPT_SEEKING:
        frame = _CONCEPT_FRAMES[rng.integers(len(_CONCEPT_FRAMES))]
        text = frame + question
    elif query_type is QueryType.FACT_SEEKING:
        content = [_strip_edge_punct(w) for w in _content_words(question)]
        content = [w for w in content if w]
        if not content:
            text = question
        else:
            frame = _FACT_FRAMES[rng.integers(len(_FACT_FRAMES))]
            span = max(1, min(len(content), 2 + int(rng.integers(2))))
            text = f"{frame} {' '.join(content[:span])}?"
    elif query_type is QueryType.KEYWORD:
        content = [_strip_edge_punct(w) for w in _content_words(question)]
        content = [w for w in content if w]
        if not content:
            text = question
        else:
            order = list(range(len(content)))
            if variant > 0 and len(order) > 1:
                order = [int(i) for i in rng.permutation(len(content))]
            text = " ".join(content[i] for i in order)
    elif query_type is QueryType.MISSPELLED:
        text = _transpose_once(question, rng)
    elif query_type is QueryType.WEB_SEARCH:
        cap = max(3, 6 - int(rng.integers(3))) if variant > 0 else 6
        text = _truncate_after_content(question, cap)
    else:  # pragma: no cover - exhaustive over QueryType
        raise ValueError(f"unknown query type {query_type!r}")
    return GeneratedQuery(source_qa_id=qa.id, query_type=query_type, text=text, origin="synthetic")


def _transpose_once(question: str, rng) -> str:
    """Swap one adjacent pair of distinct word characters, seeded.

    Candidate positions keep the swap inside a word (both characters
    alphanumeric) so the result reads as a typo. Questions with no such
    position are returned unchanged.
    """
    candidates = [
        i
        for i in range(len(question) - 1)
        if question[i] != question[i + 1]
        and question[i].isalnum()
        and question[i + 1].isalnum()
    ]
    if not candidates:
        return question
    pos = candidates[int(rng.integers(len(candidates)))]
    chars = list(question)
    chars[pos], chars[pos + 1] = chars[pos + 1], chars[pos]
    return "".join(chars)


def _truncate_after_content(question: str, max_content: int) -> str:
    """Cut the question right after its max_content-th content word."""
    words = question.split()
    kept = 0
    content_seen = 0
    for i, word in enumerate(words):
        core = re.sub(r"[^0-9a-zA-Z一-鿿]+", "", word).lower()
        if core and core not in STOPWORDS:
            content_seen += 1
        if content_seen == max_content:
            kept = i + 1
            break
    else:
        return question
    return " ".join(words[:kept])


def synthesize_queries(
    corpus: Corpus,
    types: tuple[QueryType, ...] = ALL_QUERY_TYPES,
    k_per_type: int = 3,
    seed: int = 0,
) -> GenerationOutcome:
    """Offline counterpart of generate_queries using the rewrite rules.

    Produces up to k_per_type variants per (pair, type) cell, deduplicating
    identical texts within a cell.
    """
    if len(corpus) == 0:
        raise AllFailedError("empty corpus: nothing to synthesize")
    queries: list[GeneratedQuery] = []
    per_pair_counts: dict[str, int] = {qa.id: 0 for qa in corpus}
    for qa in corpus:
        for qtype in types:
            seen: set[str] = set()
            for variant in range(k_per_type):
                query = synthesize_query(qa, qtype, seed=seed, variant=variant)
                if query.text in seen:
                    continue
                seen.add(query.text)
                queries.append(query)
                per_pair_counts[qa.id] += 1
    if not queries:
        raise AllFailedError("no queries synthesized")
    return GenerationOutcome(queries=queries, errors=[], per_pair_counts=per_pair_counts)


def save_queries(queries: list[GeneratedQuery], path: str | Path) -> Path:
    """Write generated queries as JSON Lines, one record per query."""
    return write_jsonl(
        path,
        (
            {
                "source_qa_id": q.source_qa_id,
                "query_type": q.query_type.value,
                "text": q.text,
                "origin": q.origin,
            }
            for q in queries
        ),
    )


def load_queries(path: str | Path) -> list[GeneratedQuery]:
    return [
        GeneratedQuery(
            source_qa_id=record["source_qa_id"],
            query_type=QueryType(record["query_type"]),
            text=record["text"],
            origin=record.get("origin", "llm"),
        )
        for record in read_jsonl(path)
    ]
