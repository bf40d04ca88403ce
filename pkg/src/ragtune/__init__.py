"""Retrieval fine-tuning toolkit for Q&A document bases.

Synthesizes multi-angle query variants for each Q&A pair, mines
contrastive training triples from them, fine-tunes a hashed-feature
embedding retriever, and evaluates retrieval and end-to-end answer
quality. Ships as a library, a CLI (``ragtune``), and an HTTP service
(``ragtune.service.create_app``, imported lazily so the core package
does not depend on the web stack at import time).
"""

__version__ = "0.1.0"

from .augment import (
    EvalQuery,
    TrainingTriple,
    TripleSet,
    load_eval_queries,
    load_triples,
    mine_triples,
    partition_triples,
    save_eval_queries,
    save_triples,
)
from .clients import ChatCompletionsClient
from .corpus import Corpus, QAPair, load_corpus, save_corpus, split_corpus
from .embedder import (
    EmbeddingModel,
    FeatureVector,
    cosine,
    embed,
    embed_features,
    feature_keys,
    featurize,
    hash_feature,
    init_model,
    is_degenerate,
    model_fingerprint,
    persist_model,
    restore_model,
    tokenize,
)
from .metrics import (
    DiversityReport,
    GenerationReport,
    RelevanceJudgments,
    RetrievalReport,
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
from .pipeline import (
    ALL_STAGES,
    AblationReport,
    PipelineConfig,
    PipelineError,
    StageFailureError,
    run_ablation,
    run_diversity,
    run_pipeline,
    write_generation_report,
    write_retrieval_report,
)
from .querygen import (
    ALL_QUERY_TYPES,
    DecodingParams,
    GeneratedQuery,
    QueryType,
    generate_queries,
    load_queries,
    parse_generated,
    render_prompt,
    save_queries,
    synthesize_queries,
)
from .ragpipe import (
    EchoGenerator,
    HttpGenerator,
    IncludedContext,
    PromptBundle,
    RagAnswer,
    answer,
    assemble_prompt,
    evaluate_end2end,
)
from .retriever import (
    Bm25Index,
    RankedList,
    SearchHit,
    VectorIndex,
    bm25_build,
    bm25_idf,
    bm25_search,
    build_index,
    load_index,
    save_index,
    search,
)
from .synthdata import demo_corpus_path, load_demo_corpus, make_synthetic_corpus
from .trainer import (
    TrainConfig,
    TrainLog,
    batch_loss,
    finite_difference_grad,
    gradient_check,
    save_trainlog,
    train,
)

__all__ = [
    "__version__",
    "ALL_QUERY_TYPES",
    "ALL_STAGES",
    "AblationReport",
    "Bm25Index",
    "ChatCompletionsClient",
    "Corpus",
    "DecodingParams",
    "DiversityReport",
    "EchoGenerator",
    "EmbeddingModel",
    "EvalQuery",
    "FeatureVector",
    "GeneratedQuery",
    "GenerationReport",
    "HttpGenerator",
    "IncludedContext",
    "PipelineConfig",
    "PipelineError",
    "PromptBundle",
    "QAPair",
    "QueryType",
    "RagAnswer",
    "RankedList",
    "RelevanceJudgments",
    "RetrievalReport",
    "SearchHit",
    "StageFailureError",
    "TrainConfig",
    "TrainLog",
    "TrainingTriple",
    "TripleSet",
    "VectorIndex",
    "answer",
    "assemble_prompt",
    "batch_loss",
    "bert_prf",
    "bleu",
    "bm25_build",
    "bm25_idf",
    "bm25_search",
    "build_index",
    "cosine",
    "dcg_at_k",
    "demo_corpus_path",
    "diversity_report",
    "embed",
    "embed_features",
    "evaluate_end2end",
    "evaluate_generation",
    "evaluate_retrieval",
    "feature_keys",
    "featurize",
    "finite_difference_grad",
    "generate_queries",
    "gradient_check",
    "hash_feature",
    "hit_at_k",
    "init_model",
    "is_degenerate",
    "lcs_length",
    "load_corpus",
    "load_demo_corpus",
    "load_eval_queries",
    "load_index",
    "load_queries",
    "load_triples",
    "make_synthetic_corpus",
    "mine_triples",
    "model_fingerprint",
    "mrr",
    "ndcg_at_k",
    "parse_generated",
    "partition_triples",
    "persist_model",
    "precision_at_k",
    "render_prompt",
    "restore_model",
    "rouge1",
    "rouge_l",
    "run_ablation",
    "run_diversity",
    "run_pipeline",
    "save_corpus",
    "save_eval_queries",
    "save_index",
    "save_queries",
    "save_trainlog",
    "save_triples",
    "search",
    "split_corpus",
    "synthesize_queries",
    "tokenize",
    "train",
    "write_generation_report",
    "write_retrieval_report",
]
