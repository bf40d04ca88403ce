"""Retrieval-augmented answering: prompt assembly, generation, evaluation.

The generator sees a fixed system prompt and a user prompt interpolating
the query and the retrieved contexts in rank order. The prompt budget is
enforced with the project tokenizer: whole documents are dropped from
the tail of the ranking until the total fits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, Sequence

from .augment import EvalQuery
from .corpus import Corpus
from .embedder import EmbeddingModel, tokenize
from .metrics import (
    GenerationReport,
    RetrievalReport,
    evaluate_generation,
    evaluate_retrieval,
)
from .querygen import DecodingParams
from .retriever import RankedList, VectorIndex, search

SYSTEM_PROMPT = (
    "You are an expert in the field of intellectual property who is good at "
    "answering questions based on given documents. Please answer the questions "
    "based on the given documents."
)

DEFAULT_MAX_INPUT_TOKENS = 4096


class RagError(Exception):
    """Base class for RAG pipeline failures."""


class QueryAloneExceedsCapError(RagError):
    """Even with zero contexts the prompt is over the token budget."""


class GeneratorFailureError(RagError):
    """The generator call failed; retrieval results are preserved."""

    def __init__(self, message: str, contexts: tuple["IncludedContext", ...] = ()):
        self.contexts = contexts
        super().__init__(message)


@dataclass(frozen=True)
class IncludedContext:
    doc_id: str
    score: float
    text: str


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    contexts: tuple[IncludedContext, ...]
    dropped_doc_ids: tuple[str, ...]
    total_tokens: int

    @property
    def included_doc_ids(self) -> tuple[str, ...]:
        return tuple(c.doc_id for c in self.contexts)

    @property
    def truncated(self) -> bool:
        return bool(self.dropped_doc_ids)


@dataclass(frozen=True)
class RagAnswer:
    query: str
    answer_text: str
    hits: RankedList
    prompt: PromptBundle
    latency_ms: int
    degenerate_query: bool = False

    @property
    def contexts(self) -> tuple[IncludedContext, ...]:
        return self.prompt.contexts


class GeneratorClient(Protocol):
    def complete(self, bundle: PromptBundle, decoding: DecodingParams) -> str:
        ...


class EchoGenerator:
    """Offline stub: echoes the first included context verbatim.

    With this generator an answer is correct exactly when retrieval put
    the right document first, which pins corpus BLEU-1 to Hit@1.
    """

    def complete(self, bundle: PromptBundle, decoding: DecodingParams) -> str:
        if bundle.contexts:
            return bundle.contexts[0].text
        return ""


class HttpGenerator:
    """Adapter from the chat-completions client to the generator protocol."""

    def __init__(self, chat_client):
        self._chat = chat_client

    def complete(self, bundle: PromptBundle, decoding: DecodingParams) -> str:
        return self._chat.complete(bundle.system_text, bundle.user_text, decoding)


def _user_text(query: str, context_texts: Sequence[str]) -> str:
    return f"Question: {query}\nContext: " + "\n\n".join(context_texts)


def assemble_prompt(
    query: str,
    contexts: Sequence[IncludedContext],
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS,
) -> PromptBundle:
    """Build the generator prompt under the token budget.

    Token counts use the project tokenizer over system plus user text.
    Contexts keep rank order and are dropped whole from the tail until
    the budget holds; included context texts appear byte-identically in
    the user text. Raises QueryAloneExceedsCapError when even zero
    contexts cannot fit.
    """
    if max_input_tokens < 1:
        raise ValueError(f"max_input_tokens must be >= 1, got {max_input_tokens}")
    system_tokens = len(tokenize(SYSTEM_PROMPT))
    kept = list(contexts)
    while True:
        user = _user_text(query, [c.text for c in kept])
        total = system_tokens + len(tokenize(user))
        if total <= max_input_tokens:
            break
        if not kept:
            raise QueryAloneExceedsCapError(
                f"query needs {total} tokens with zero contexts; cap is {max_input_tokens}"
            )
        kept.pop()
    dropped = tuple(c.doc_id for c in contexts[len(kept):])
    return PromptBundle(
        system_text=SYSTEM_PROMPT,
        user_text=user,
        contexts=tuple(kept),
        dropped_doc_ids=dropped,
        total_tokens=total,
    )


def answer(
    query: str,
    index: VectorIndex,
    model: EmbeddingModel,
    client: GeneratorClient,
    k: int = 3,
    decoding: DecodingParams = DecodingParams(),
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS,
) -> RagAnswer:
    """Retrieve top-k contexts, prompt the generator, and time the exchange.

    A degenerate query (embeds to zero) still reaches the generator with
    an empty context block; the RagAnswer carries the flag. Generator
    failures raise GeneratorFailureError with the retrieved contexts
    attached so callers can degrade gracefully.
    """
    started = time.perf_counter()
    hits = search(index, model, query, k=k)
    contexts = tuple(
        IncludedContext(doc_id=h.doc_id, score=h.score, text=index.text_of(h.doc_id))
        for h in hits.hits
    )
    bundle = assemble_prompt(query, contexts, max_input_tokens=max_input_tokens)
    try:
        text = client.complete(bundle, decoding)
    except Exception as exc:
        raise GeneratorFailureError(str(exc), contexts=bundle.contexts) from exc
    latency_ms = round((time.perf_counter() - started) * 1000.0)
    return RagAnswer(
        query=query,
        answer_text=text,
        hits=hits,
        prompt=bundle,
        latency_ms=latency_ms,
        degenerate_query=hits.degenerate,
    )


def evaluate_end2end(
    eval_queries: Sequence[EvalQuery],
    corpus: Corpus,
    index: VectorIndex,
    model: EmbeddingModel,
    client: GeneratorClient,
    k_set: Sequence[int] = (1, 3),
    gen_k: int = 3,
    decoding: DecodingParams = DecodingParams(),
    max_input_tokens: int = DEFAULT_MAX_INPUT_TOKENS,
) -> tuple[RetrievalReport, GenerationReport]:
    """Retrieval metrics plus generation metrics against gold answers.

    Every held-out query is answered with gen_k contexts; the reference
    for generation scoring is the source pair's answer.
    """
    retrieval = evaluate_retrieval(index, model, eval_queries, k_set=k_set)
    predictions: dict[str, str] = {}
    references: dict[str, str] = {}
    for i, query in enumerate(eval_queries):
        qid = f"q{i:05d}"
        result = answer(
            query.query_text,
            index,
            model,
            client,
            k=gen_k,
            decoding=decoding,
            max_input_tokens=max_input_tokens,
        )
        predictions[qid] = result.answer_text
        references[qid] = corpus[query.positive_answer_id].answer
    generation = evaluate_generation(predictions, references, model)
    return retrieval, generation
