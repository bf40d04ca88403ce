"""End-to-end pipeline orchestration and the retriever ablation harness.

run_pipeline executes six stages (generate, mine, partition, train,
index, evaluate) against a corpus and records every produced file with
its checksum in a run manifest. All stage seeds derive from the single
config seed, so a rerun with the same config writes byte-identical
artifacts; only wall-clock timings, which live in the manifest's timing
section and nowhere else, differ between reruns.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import augment, querygen
from .augment import EvalQuery, TripleSet, load_eval_queries, load_triples
from .clients import ChatCompletionsClient
from .corpus import Corpus, load_corpus
from .embedder import (
    EmbeddingModel,
    init_model,
    model_fingerprint,
    persist_model,
    restore_model,
)
from .metrics import (
    GenerationReport,
    RetrievalReport,
    diversity_report,
    evaluate_retrieval,
)
from .querygen import DecodingParams, GeneratedQuery, QueryType
from .ragpipe import EchoGenerator, HttpGenerator, evaluate_end2end
from .retriever import build_index, load_index, save_index
from .trainer import TrainConfig, train, save_trainlog
from .util import sha256_file, write_jsonl

ALL_STAGES = ("generate", "mine", "partition", "train", "index", "evaluate")


class PipelineError(Exception):
    """Base class for pipeline failures."""


class StageFailureError(PipelineError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full run needs; JSON-serializable and CLI-overridable."""

    corpus_path: str = ""
    workdir: str = "run"
    seed: int = 7
    # query generation
    query_client: str = "synthetic"  # "synthetic" or "llm"
    query_types: tuple[str, ...] = tuple(t.value for t in QueryType)
    k_per_type: int = 3
    temperature: float = 0.7
    max_gen_tokens: int = 512
    # mining and partitioning
    n_neg: int = 1
    holdout_per_pair: int = 1
    # embedder (demo-scale dims; the bare model constructor defaults are larger)
    feat_dim: int = 2**16
    emb_dim: int = 128
    hash_seed: int = 17
    model_in: str = ""
    # training
    train: TrainConfig = TrainConfig()
    # evaluation
    k_set: tuple[int, ...] = (1, 3)
    gen_k: int = 3
    max_input_tokens: int = 4096
    rouge1_mode: str = "recall"
    bleu_max_n: int = 4
    # ablation acceptance thresholds (configured, not hard-coded)
    ablation_hit1_delta: float = 0.20
    ablation_mrr_delta: float = 0.15
    # external services
    chat_base_url: str = ""
    chat_model: str = ""
    api_key_env: str = "RAGTUNE_API_KEY"
    generator: str = "echo"  # "echo" or "http"
    # serving
    host: str = "127.0.0.1"
    port: int = 8000
    # stage toggles and outputs
    stages: tuple[str, ...] = ALL_STAGES
    figures: bool = True

    def validate(self) -> None:
        if self.query_client not in ("synthetic", "llm"):
            raise ValueError(f"query_client must be 'synthetic' or 'llm', got {self.query_client!r}")
        if self.generator not in ("echo", "http"):
            raise ValueError(f"generator must be 'echo' or 'http', got {self.generator!r}")
        unknown = set(self.stages) - set(ALL_STAGES)
        if unknown:
            raise ValueError(f"unknown stages: {sorted(unknown)}")
        for name in self.query_types:
            QueryType(name)
        self.train.validate()

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["query_types"] = list(self.query_types)
        out["k_set"] = list(self.k_set)
        out["stages"] = list(self.stages)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        data = dict(raw)
        if "train" in data and isinstance(data["train"], dict):
            data["train"] = TrainConfig(**data["train"])
        for key in ("query_types", "k_set", "stages"):
            if key in data and isinstance(data[key], list):
                data[key] = tuple(data[key])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _chat_client(config: PipelineConfig) -> ChatCompletionsClient:
    if not config.chat_base_url or not config.chat_model:
        raise ValueError("chat_base_url and chat_model must be set for LLM-backed runs")
    return ChatCompletionsClient(
        base_url=config.chat_base_url,
        model=config.chat_model,
        api_key_env=config.api_key_env,
    )


def _decoding(config: PipelineConfig) -> DecodingParams:
    return DecodingParams(temperature=config.temperature, max_tokens=config.max_gen_tokens)


def _generator(config: PipelineConfig):
    if config.generator == "http":
        return HttpGenerator(_chat_client(config))
    return EchoGenerator()


def write_json(payload: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_retrieval_report(report: RetrievalReport, base: str | Path, figure: bool = True) -> list[Path]:
    """Records, table, and (optionally) a figure next to them."""
    base = Path(base)
    paths = [write_jsonl(base.with_suffix(".jsonl"), report.to_records())]
    table = base.with_suffix(".txt")
    table.write_text(report.to_table(), encoding="utf-8")
    paths.append(table)
    if figure:
        from .plots import retrieval_report_figure

        paths.append(retrieval_report_figure(report, base.with_suffix(".png")))
    return paths


def write_generation_report(report: GenerationReport, base: str | Path, figure: bool = True) -> list[Path]:
    base = Path(base)
    paths = [write_jsonl(base.with_suffix(".jsonl"), report.to_records())]
    table = base.with_suffix(".txt")
    table.write_text(report.to_table(), encoding="utf-8")
    paths.append(table)
    if figure:
        from .plots import generation_report_figure

        paths.append(generation_report_figure(report, base.with_suffix(".png")))
    return paths


@dataclass
class _RunState:
    corpus: Corpus
    queries: list[GeneratedQuery] = field(default_factory=list)
    triples: TripleSet | None = None
    train_triples: TripleSet | None = None
    eval_queries: list[EvalQuery] = field(default_factory=list)
    model: EmbeddingModel | None = None


def _generate(config: PipelineConfig, state: _RunState) -> list[GeneratedQuery]:
    types = tuple(QueryType(t) for t in config.query_types)
    if config.query_client == "llm":
        outcome = querygen.generate_queries(
            state.corpus,
            _chat_client(config),
            types=types,
            k_per_type=config.k_per_type,
            decoding=_decoding(config),
        )
    else:
        outcome = querygen.synthesize_queries(
            state.corpus, types=types, k_per_type=config.k_per_type, seed=config.seed
        )
    return outcome.queries


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the enabled stages and write the run manifest.

    Disabled stages load their artifacts from the workdir instead of
    recomputing them. Returns the manifest dict (also written to
    manifest.json in the workdir).
    """
    config.validate()
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    timing: dict[str, float] = {}
    stages_out: list[dict] = []

    def record(stage: str, paths: Sequence[Path], started: float) -> None:
        timing[stage] = time.perf_counter() - started
        stages_out.append(
            {
                "name": stage,
                "artifacts": [
                    {"path": str(p), "sha256": sha256_file(p)} for p in paths
                ],
            }
        )

    try:
        corpus = load_corpus(config.corpus_path)
    except Exception as exc:
        raise StageFailureError("ingest", exc) from exc
    state = _RunState(corpus=corpus)

    queries_path = workdir / "queries.jsonl"
    started = time.perf_counter()
    if "generate" in config.stages:
        try:
            state.queries = _generate(config, state)
            querygen.save_queries(state.queries, queries_path)
        except Exception as exc:
            raise StageFailureError("generate", exc) from exc
        record("generate", [queries_path], started)
    else:
        state.queries = querygen.load_queries(queries_path)

    triples_path = workdir / "triples.jsonl"
    started = time.perf_counter()
    if "mine" in config.stages:
        try:
            state.triples = augment.mine_triples(
                state.queries, state.corpus, n_neg=config.n_neg, seed=config.seed
            )
            augment.save_triples(state.triples, triples_path)
        except Exception as exc:
            raise StageFailureError("mine", exc) from exc
        record("mine", [triples_path], started)
    else:
        state.triples = load_triples(triples_path, corpus_name=state.corpus.name, seed=config.seed)

    train_triples_path = workdir / "train_triples.jsonl"
    eval_queries_path = workdir / "eval_queries.jsonl"
    started = time.perf_counter()
    if "partition" in config.stages:
        try:
            state.train_triples, state.eval_queries = augment.partition_triples(
                state.triples, holdout_per_pair=config.holdout_per_pair, seed=config.seed
            )
            augment.save_triples(state.train_triples, train_triples_path)
            augment.save_eval_queries(state.eval_queries, eval_queries_path)
        except Exception as exc:
            raise StageFailureError("partition", exc) from exc
        record("partition", [train_triples_path, eval_queries_path], started)
    else:
        state.train_triples = load_triples(
            train_triples_path, corpus_name=state.corpus.name, seed=config.seed
        )
        state.eval_queries = load_eval_queries(eval_queries_path)

    model_path = workdir / "model.bin"
    trainlog_path = workdir / "trainlog.jsonl"
    started = time.perf_counter()
    if "train" in config.stages:
        try:
            base_model = (
                restore_model(config.model_in)
                if config.model_in
                else init_model(
                    feat_dim=config.feat_dim,
                    emb_dim=config.emb_dim,
                    hash_seed=config.hash_seed,
                    seed=config.seed,
                )
            )
            state.model, log = train(base_model, state.train_triples, state.corpus, config.train)
            persist_model(state.model, model_path)
            save_trainlog(log, trainlog_path)
            timing["train_wall_s"] = log.wall_time_s
        except Exception as exc:
            raise StageFailureError("train", exc) from exc
        record("train", [model_path, trainlog_path], started)
    else:
        state.model = restore_model(model_path)

    index_path = workdir / "index.bin"
    started = time.perf_counter()
    if "index" in config.stages:
        try:
            index = build_index(state.model, state.corpus)
            save_index(index, index_path)
        except Exception as exc:
            raise StageFailureError("index", exc) from exc
        record("index", [index_path], started)
    else:
        index = load_index(index_path)

    started = time.perf_counter()
    if "evaluate" in config.stages:
        try:
            report = evaluate_retrieval(index, state.model, state.eval_queries, k_set=config.k_set)
            report_paths = write_retrieval_report(
                report, workdir / "retrieval_report", figure=config.figures
            )
        except Exception as exc:
            raise StageFailureError("evaluate", exc) from exc
        record("evaluate", report_paths, started)

    manifest = {
        "config": config.to_dict(),
        "corpus": {"name": state.corpus.name, "n_pairs": len(state.corpus)},
        "counts": {
            "queries": len(state.queries),
            "triples": len(state.triples) if state.triples else 0,
            "train_triples": len(state.train_triples) if state.train_triples else 0,
            "eval_queries": len(state.eval_queries),
        },
        "model_fingerprint": model_fingerprint(state.model) if state.model else "",
        "stages": stages_out,
        "timing": timing,
    }
    write_json(manifest, workdir / "manifest.json")
    return manifest


@dataclass(frozen=True)
class AblationReport:
    """Fine-tuned versus untrained retriever on identical eval queries."""

    untrained_retrieval: RetrievalReport
    trained_retrieval: RetrievalReport
    untrained_generation: GenerationReport
    trained_generation: GenerationReport
    deltas: dict[str, float]
    thresholds: dict[str, float]
    meets_thresholds: bool

    def to_dict(self) -> dict:
        return {
            "untrained": {
                "retrieval": self.untrained_retrieval.to_records(),
                "generation": self.untrained_generation.to_records(),
            },
            "trained": {
                "retrieval": self.trained_retrieval.to_records(),
                "generation": self.trained_generation.to_records(),
            },
            "deltas": self.deltas,
            "thresholds": self.thresholds,
            "meets_thresholds": self.meets_thresholds,
        }


def run_ablation(config: PipelineConfig, corpus: Corpus | None = None) -> AblationReport:
    """Compare the fine-tuned retriever against its untrained twin.

    Both arms share the corpus, generated queries, mined triples, eval
    holdout, initialization seed, and generator; only the training step
    differs. Writes ablation_report.json plus a comparison figure in the
    workdir and returns the report.
    """
    config.validate()
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    if corpus is None:
        corpus = load_corpus(config.corpus_path)
    state = _RunState(corpus=corpus)
    state.queries = _generate(config, state)
    triples = augment.mine_triples(state.queries, corpus, n_neg=config.n_neg, seed=config.seed)
    train_triples, eval_queries = augment.partition_triples(
        triples, holdout_per_pair=config.holdout_per_pair, seed=config.seed
    )
    untrained = init_model(
        feat_dim=config.feat_dim,
        emb_dim=config.emb_dim,
        hash_seed=config.hash_seed,
        seed=config.seed,
    )
    trained, _ = train(untrained, train_triples, corpus, config.train)
    generator = _generator(config)

    def arm(model: EmbeddingModel) -> tuple[RetrievalReport, GenerationReport]:
        index = build_index(model, corpus)
        return evaluate_end2end(
            eval_queries,
            corpus,
            index,
            model,
            generator,
            k_set=config.k_set,
            gen_k=config.gen_k,
            decoding=_decoding(config),
            max_input_tokens=config.max_input_tokens,
        )

    unt_ret, unt_gen = arm(untrained)
    tr_ret, tr_gen = arm(trained)
    k1 = min(config.k_set)
    deltas = {
        f"hit{k}_delta": tr_ret.hit[k] - unt_ret.hit[k] for k in tr_ret.k_set
    }
    deltas["mrr_delta"] = tr_ret.mrr - unt_ret.mrr
    thresholds = {
        f"hit{k1}_delta": config.ablation_hit1_delta,
        "mrr_delta": config.ablation_mrr_delta,
    }
    meets = (
        deltas[f"hit{k1}_delta"] >= config.ablation_hit1_delta
        and deltas["mrr_delta"] >= config.ablation_mrr_delta
    )
    report = AblationReport(
        untrained_retrieval=unt_ret,
        trained_retrieval=tr_ret,
        untrained_generation=unt_gen,
        trained_generation=tr_gen,
        deltas=deltas,
        thresholds=thresholds,
        meets_thresholds=meets,
    )
    write_json(report.to_dict(), workdir / "ablation_report.json")
    if config.figures:
        from .plots import ablation_figure

        ablation_figure(unt_ret, tr_ret, workdir / "ablation_report.png")
    return report


def run_diversity(config: PipelineConfig, corpus: Corpus | None = None):
    """Generate queries and write the per-type embedding distance report."""
    config.validate()
    workdir = Path(config.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    if corpus is None:
        corpus = load_corpus(config.corpus_path)
    state = _RunState(corpus=corpus)
    queries = _generate(config, state)
    model = init_model(
        feat_dim=config.feat_dim,
        emb_dim=config.emb_dim,
        hash_seed=config.hash_seed,
        seed=config.seed,
    )
    csv_path = workdir / "diversity.csv"
    report = diversity_report(queries, corpus, model, out_path=csv_path)
    if config.figures:
        from .plots import diversity_figure

        diversity_figure(report, workdir / "diversity.png")
    return report
