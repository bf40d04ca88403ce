"""Command-line entry points for every stage of the toolkit.

Single-stage commands (genqueries, mine, train, ...) take plain flags.
Pipeline-level commands (run, ablate, diversity) read an optional JSON
config file whose fields mirror PipelineConfig; any field can be
overridden on the command line with repeated --set key=value flags,
where dotted keys reach nested sections (--set train.epochs=3) and
values are parsed as JSON when possible. Credentials are never flags:
HTTP clients read their key from the environment variable named by
--api-key-env (default RAGTUNE_API_KEY).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .augment import (
    EvalQuery,
    load_eval_queries,
    load_triples,
    mine_triples,
    partition_triples,
    save_eval_queries,
    save_triples,
)
from .clients import DEFAULT_API_KEY_ENV, ChatCompletionsClient
from .corpus import load_corpus, save_corpus, split_corpus
from .embedder import init_model, model_fingerprint, persist_model, restore_model, tokenize
from .metrics import evaluate_generation, evaluate_retrieval
from .pipeline import (
    PipelineConfig,
    run_ablation,
    run_diversity,
    run_pipeline,
    write_generation_report,
    write_retrieval_report,
)
from .querygen import (
    ALL_QUERY_TYPES,
    DecodingParams,
    QueryType,
    generate_queries,
    load_queries,
    save_queries,
    synthesize_queries,
)
from .ragpipe import EchoGenerator, HttpGenerator, evaluate_end2end
from .retriever import bm25_build, bm25_search, build_index, load_index, save_index, search
from .synthdata import DEFAULT_DEMO_PAIRS, DEFAULT_DEMO_SEED, make_synthetic_corpus
from .trainer import TrainConfig, save_trainlog
from .trainer import train as train_model
from .util import read_jsonl

_TYPE_CHOICES = ",".join(t.value for t in ALL_QUERY_TYPES)


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}")
    if not ks:
        raise click.BadParameter("empty k list")
    return ks


def _parse_types(text: str) -> tuple[QueryType, ...]:
    try:
        return tuple(QueryType(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _apply_overrides(data: dict, overrides: tuple[str, ...]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise click.BadParameter(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return data


def _load_config(config_path: str | None, overrides: tuple[str, ...], **explicit) -> PipelineConfig:
    data: dict = {}
    if config_path:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    for key, value in explicit.items():
        if value is not None:
            data[key] = value
    _apply_overrides(data, overrides)
    try:
        return PipelineConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc}")


def _make_generator(kind: str, base_url: str, chat_model: str, api_key_env: str):
    if kind == "http":
        if not base_url or not chat_model:
            raise click.UsageError("--base-url and --chat-model are required with --generator http")
        return HttpGenerator(
            ChatCompletionsClient(base_url=base_url, model=chat_model, api_key_env=api_key_env)
        )
    return EchoGenerator()


def _eval_query_list(eval_path: str | None, corpus_path: str | None, use_original: bool) -> list[EvalQuery]:
    if use_original:
        if not corpus_path:
            raise click.UsageError("--use-original-questions needs --corpus")
        corpus = load_corpus(corpus_path)
        return [EvalQuery(query_text=p.question, positive_answer_id=p.id) for p in corpus]
    if not eval_path:
        raise click.UsageError("provide --eval-queries or --use-original-questions")
    return load_eval_queries(eval_path)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="ragtune")
def main():
    """Multi-angle query synthesis and retriever fine-tuning for QA corpora."""


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--holdout", type=float, default=None, help="Also write train/test splits with this holdout fraction.")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Directory for split files (default: next to the corpus).")
def ingest(corpus_path, holdout, seed, out_dir):
    """Validate a corpus file and print its vital statistics."""
    corpus = load_corpus(corpus_path)
    q_lens = [len(tokenize(p.question)) for p in corpus]
    a_lens = [len(tokenize(p.answer)) for p in corpus]
    click.echo(f"corpus {corpus.name!r}: {len(corpus)} QA pairs")
    click.echo(f"question tokens: min {min(q_lens)} mean {sum(q_lens) / len(q_lens):.1f} max {max(q_lens)}")
    click.echo(f"answer tokens:   min {min(a_lens)} mean {sum(a_lens) / len(a_lens):.1f} max {max(a_lens)}")
    if holdout is not None:
        kept, held = split_corpus(corpus, holdout, seed=seed)
        out = Path(out_dir) if out_dir else Path(corpus_path).parent
        train_path = save_corpus(kept, out / "train.jsonl")
        test_path = save_corpus(held, out / "test.jsonl")
        click.echo(f"wrote {train_path} ({len(kept)} pairs) and {test_path} ({len(held)} pairs)")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--types", "types_text", default=_TYPE_CHOICES, show_default=True, help="Comma-separated query types.")
@click.option("--k", "k_per_type", type=int, default=3, show_default=True, help="Variants per (pair, type) cell.")
@click.option("--client", "client_kind", type=click.Choice(["llm", "synthetic"]), default="synthetic", show_default=True)
@click.option("--seed", type=int, default=7, show_default=True, help="Synthesizer seed (llm client ignores it).")
@click.option("--base-url", default="", help="Chat-completions endpoint (llm client).")
@click.option("--model", "chat_model", default="", help="Chat model name (llm client).")
@click.option("--api-key-env", default=DEFAULT_API_KEY_ENV, show_default=True)
@click.option("--temperature", type=float, default=0.7, show_default=True)
@click.option("--max-tokens", type=int, default=512, show_default=True)
@click.option("--max-workers", type=int, default=1, show_default=True, help="Concurrent generation calls.")
def genqueries(corpus_path, out_path, types_text, k_per_type, client_kind, seed,
               base_url, chat_model, api_key_env, temperature, max_tokens, max_workers):
    """Write multi-angle query variants for every QA pair."""
    corpus = load_corpus(corpus_path)
    types = _parse_types(types_text)
    if client_kind == "llm":
        if not base_url or not chat_model:
            raise click.UsageError("--base-url and --model are required with --client llm")
        client = ChatCompletionsClient(base_url=base_url, model=chat_model, api_key_env=api_key_env)
        outcome = generate_queries(
            corpus,
            client,
            types=types,
            k_per_type=k_per_type,
            decoding=DecodingParams(temperature=temperature, max_tokens=max_tokens),
            max_workers=max_workers,
        )
    else:
        outcome = synthesize_queries(corpus, types=types, k_per_type=k_per_type, seed=seed)
    save_queries(outcome.queries, out_path)
    click.echo(f"wrote {len(outcome.queries)} queries to {out_path}")
    for err in outcome.errors:
        click.echo(f"failed cell: {err}", err=True)


@main.command()
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--n-neg", type=int, default=1, show_default=True, help="Negatives per triple.")
@click.option("--seed", type=int, default=7, show_default=True)
def mine(queries_path, corpus_path, out_path, n_neg, seed):
    """Mine (query, positive, negatives) training triples."""
    corpus = load_corpus(corpus_path)
    queries = load_queries(queries_path)
    triples = mine_triples(queries, corpus, n_neg=n_neg, seed=seed)
    save_triples(triples, out_path)
    click.echo(f"wrote {len(triples)} triples to {out_path}")


@main.command()
@click.option("--triples", "triples_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-out", required=True, type=click.Path(dir_okay=False))
@click.option("--eval-out", required=True, type=click.Path(dir_okay=False))
@click.option("--holdout-per-pair", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
def partition(triples_path, train_out, eval_out, holdout_per_pair, seed):
    """Split mined triples into a training set and held-out eval queries."""
    triples = load_triples(triples_path)
    train_set, eval_queries = partition_triples(triples, holdout_per_pair=holdout_per_pair, seed=seed)
    save_triples(train_set, train_out)
    save_eval_queries(eval_queries, eval_out)
    click.echo(f"wrote {len(train_set)} training triples to {train_out}")
    click.echo(f"wrote {len(eval_queries)} eval queries to {eval_out}")


@main.command("train")
@click.option("--triples", "triples_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model-in", type=click.Path(exists=True, dir_okay=False), default=None, help="Warm-start model (default: fresh init).")
@click.option("--model-out", required=True, type=click.Path(dir_okay=False))
@click.option("--trainlog", "trainlog_path", type=click.Path(dir_okay=False), default=None)
@click.option("--feat-dim", type=int, default=2**16, show_default=True, help="Hashed feature space for fresh init.")
@click.option("--emb-dim", type=int, default=128, show_default=True, help="Embedding width for fresh init.")
@click.option("--hash-seed", type=int, default=17, show_default=True)
@click.option("--init-seed", type=int, default=7, show_default=True)
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--lr", "learning_rate", type=float, default=1e-3, show_default=True)
@click.option("--tau", type=float, default=0.05, show_default=True)
@click.option("--optimizer", type=click.Choice(["adam", "sgd"]), default="adam", show_default=True)
@click.option("--no-inbatch-negatives", is_flag=True, default=False)
@click.option("--seed", type=int, default=0, show_default=True, help="Shuffle seed.")
def train_cmd(triples_path, corpus_path, model_in, model_out, trainlog_path, feat_dim,
              emb_dim, hash_seed, init_seed, epochs, batch_size, learning_rate, tau,
              optimizer, no_inbatch_negatives, seed):
    """Fine-tune an embedding model on mined triples."""
    corpus = load_corpus(corpus_path)
    triples = load_triples(triples_path, corpus_name=corpus.name)
    model = (
        restore_model(model_in)
        if model_in
        else init_model(feat_dim=feat_dim, emb_dim=emb_dim, hash_seed=hash_seed, seed=init_seed)
    )
    config = TrainConfig(
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        tau=tau,
        use_inbatch_negatives=not no_inbatch_negatives,
        optimizer=optimizer,
        seed=seed,
    )
    trained, log = train_model(model, triples, corpus, config)
    persist_model(trained, model_out)
    if trainlog_path:
        save_trainlog(log, trainlog_path)
    for i, (loss, gnorm) in enumerate(zip(log.epoch_mean_loss, log.epoch_grad_norm), start=1):
        click.echo(f"epoch {i}: mean loss {loss:.6f}  grad norm {gnorm:.4f}")
    click.echo(f"wrote model {model_fingerprint(trained)[:12]} to {model_out} ({log.wall_time_s:.1f}s)")


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def index_cmd(corpus_path, model_path, out_path):
    """Embed every answer and write the dense search index."""
    corpus = load_corpus(corpus_path)
    model = restore_model(model_path)
    idx = build_index(model, corpus)
    save_index(idx, out_path)
    click.echo(f"indexed {len(idx)} documents to {out_path}")


@main.command("search")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", required=True)
@click.option("--k", type=int, default=3, show_default=True)
def search_cmd(index_path, model_path, query, k):
    """Rank indexed answers for one query by cosine similarity."""
    idx = load_index(index_path)
    model = restore_model(model_path)
    ranked = search(idx, model, query, k=k)
    if ranked.degenerate:
        click.echo("query embeds to the zero vector; nothing to rank", err=True)
        return
    for rank, hit in enumerate(ranked.hits, start=1):
        click.echo(f"{rank}\t{hit.score:.6f}\t{hit.doc_id}\t{idx.text_of(hit.doc_id)[:96]}")


@main.command("bm25")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", required=True)
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--k1", type=float, default=1.5, show_default=True)
@click.option("--b", type=float, default=0.75, show_default=True)
def bm25_cmd(corpus_path, query, k, k1, b):
    """Rank corpus answers for one query with the BM25 lexical baseline."""
    corpus = load_corpus(corpus_path)
    idx = bm25_build(corpus, k1=k1, b=b)
    ranked = bm25_search(idx, query, k=k)
    if not ranked.hits:
        click.echo("no document shares a term with the query", err=True)
        return
    for rank, hit in enumerate(ranked.hits, start=1):
        click.echo(f"{rank}\t{hit.score:.6f}\t{hit.doc_id}\t{corpus[hit.doc_id].answer[:96]}")


@main.command("eval-retrieval")
@click.option("--engine", type=click.Choice(["dense", "bm25"]), default="dense", show_default=True)
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Dense index (dense engine).")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Embedding model (dense engine).")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Corpus (bm25 engine or --use-original-questions).")
@click.option("--eval-queries", "eval_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--use-original-questions", is_flag=True, help="Evaluate on corpus questions instead of a held-out file.")
@click.option("--k", "k_text", default="1,3", show_default=True, help="Comma-separated cutoffs.")
@click.option("--k1", type=float, default=1.5, show_default=True)
@click.option("--b", type=float, default=0.75, show_default=True)
@click.option("--report", "report_base", required=True, help="Output base path; writes .jsonl, .txt, .png.")
@click.option("--no-figure", is_flag=True)
def eval_retrieval(engine, index_path, model_path, corpus_path, eval_path,
                   use_original_questions, k_text, k1, b, report_base, no_figure):
    """Score retrieval quality: Hit@k, MRR, NDCG@k, Precision@k."""
    ks = _parse_ks(k_text)
    eval_queries = _eval_query_list(eval_path, corpus_path, use_original_questions)
    if engine == "bm25":
        if not corpus_path:
            raise click.UsageError("--engine bm25 needs --corpus")
        idx = bm25_build(load_corpus(corpus_path), k1=k1, b=b)
        report = evaluate_retrieval(idx, None, eval_queries, k_set=ks)
    else:
        if not index_path or not model_path:
            raise click.UsageError("--engine dense needs --index and --model")
        report = evaluate_retrieval(
            load_index(index_path), restore_model(model_path), eval_queries, k_set=ks
        )
    paths = write_retrieval_report(report, report_base, figure=not no_figure)
    click.echo(report.to_table())
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@main.command("eval-generation")
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False), help="JSONL of {id, text} records.")
@click.option("--references", required=True, type=click.Path(exists=True, dir_okay=False), help="JSONL of {id, text} records.")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Embedding model behind the soft-match scores.")
@click.option("--max-n", type=int, default=4, show_default=True, help="Highest BLEU order.")
@click.option("--rouge1-mode", type=click.Choice(["recall", "f1"]), default="recall", show_default=True)
@click.option("--report", "report_base", required=True)
@click.option("--no-figure", is_flag=True)
def eval_generation(predictions, references, model_path, max_n, rouge1_mode, report_base, no_figure):
    """Score generated answers against references (ROUGE, BLEU, embedding P/R/F1)."""
    preds = {r["id"]: r["text"] for r in read_jsonl(predictions)}
    refs = {r["id"]: r["text"] for r in read_jsonl(references)}
    model = restore_model(model_path)
    report = evaluate_generation(preds, refs, model, max_n=max_n, rouge1_mode=rouge1_mode)
    paths = write_generation_report(report, report_base, figure=not no_figure)
    click.echo(report.to_table())
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@main.command("rag-eval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--eval-queries", "eval_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--use-original-questions", is_flag=True)
@click.option("--k", "k_text", default="1,3", show_default=True)
@click.option("--gen-k", type=int, default=3, show_default=True, help="Contexts handed to the generator.")
@click.option("--generator", type=click.Choice(["echo", "http"]), default="echo", show_default=True)
@click.option("--base-url", default="")
@click.option("--chat-model", default="")
@click.option("--api-key-env", default=DEFAULT_API_KEY_ENV, show_default=True)
@click.option("--temperature", type=float, default=0.7, show_default=True)
@click.option("--max-tokens", type=int, default=512, show_default=True)
@click.option("--max-input-tokens", type=int, default=4096, show_default=True)
@click.option("--report", "report_base", required=True, help="Base path; writes <base>_retrieval.* and <base>_generation.*")
@click.option("--no-figure", is_flag=True)
def rag_eval(corpus_path, index_path, model_path, eval_path, use_original_questions,
             k_text, gen_k, generator, base_url, chat_model, api_key_env, temperature,
             max_tokens, max_input_tokens, report_base, no_figure):
    """End-to-end evaluation: retrieve, generate, score both stages."""
    corpus = load_corpus(corpus_path)
    eval_queries = _eval_query_list(eval_path, corpus_path, use_original_questions)
    gen = _make_generator(generator, base_url, chat_model, api_key_env)
    retrieval, generation = evaluate_end2end(
        eval_queries,
        corpus,
        load_index(index_path),
        restore_model(model_path),
        gen,
        k_set=_parse_ks(k_text),
        gen_k=gen_k,
        decoding=DecodingParams(temperature=temperature, max_tokens=max_tokens),
        max_input_tokens=max_input_tokens,
    )
    base = Path(report_base)
    paths = write_retrieval_report(retrieval, base.with_name(base.name + "_retrieval"), figure=not no_figure)
    paths += write_generation_report(generation, base.with_name(base.name + "_generation"), figure=not no_figure)
    click.echo(retrieval.to_table())
    click.echo(generation.to_table())
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workdir", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override any config field.")
def run_cmd(config_path, corpus_path, workdir, seed, overrides):
    """Run the full pipeline: generate, mine, partition, train, index, evaluate."""
    config = _load_config(config_path, overrides, corpus_path=corpus_path, workdir=workdir, seed=seed)
    manifest = run_pipeline(config)
    for stage in manifest["stages"]:
        click.echo(f"{stage['name']}: " + ", ".join(a["path"] for a in stage["artifacts"]))
    click.echo(f"model fingerprint {manifest['model_fingerprint'][:12]}")
    click.echo(f"manifest: {Path(config.workdir) / 'manifest.json'}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workdir", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override any config field.")
def ablate(config_path, corpus_path, workdir, seed, overrides):
    """Compare fine-tuned vs untrained retrieval; exits nonzero below thresholds."""
    config = _load_config(config_path, overrides, corpus_path=corpus_path, workdir=workdir, seed=seed)
    report = run_ablation(config)
    for k in sorted(report.trained_retrieval.k_set):
        click.echo(
            f"hit@{k}: untrained {report.untrained_retrieval.hit[k]:.4f}"
            f" -> fine-tuned {report.trained_retrieval.hit[k]:.4f}"
            f" (delta {report.deltas[f'hit{k}_delta']:+.4f})"
        )
    click.echo(
        f"mrr:   untrained {report.untrained_retrieval.mrr:.4f}"
        f" -> fine-tuned {report.trained_retrieval.mrr:.4f}"
        f" (delta {report.deltas['mrr_delta']:+.4f})"
    )
    for name, floor in sorted(report.thresholds.items()):
        click.echo(f"threshold {name} >= {floor:+.2f}")
    if not report.meets_thresholds:
        click.echo("ablation deltas fall short of the configured thresholds", err=True)
        sys.exit(1)
    click.echo("ablation thresholds met")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workdir", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override any config field.")
def diversity(config_path, corpus_path, workdir, seed, overrides):
    """Embedding distance of generated queries from their source questions."""
    config = _load_config(config_path, overrides, corpus_path=corpus_path, workdir=workdir, seed=seed)
    report = run_diversity(config)
    for qtype in sorted(report.per_type_mean):
        click.echo(f"{qtype}: mean distance {report.per_type_mean[qtype]:.4f}")
    click.echo(f"rows: {len(report.rows)}  csv: {Path(config.workdir) / 'diversity.csv'}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--k", type=int, default=3, show_default=True, help="Default retrieval depth per request.")
@click.option("--generator", type=click.Choice(["echo", "http"]), default="echo", show_default=True)
@click.option("--base-url", default="")
@click.option("--chat-model", default="")
@click.option("--api-key-env", default=DEFAULT_API_KEY_ENV, show_default=True)
@click.option("--max-input-tokens", type=int, default=4096, show_default=True)
def serve(model_path, index_path, host, port, k, generator, base_url, chat_model,
          api_key_env, max_input_tokens):
    """Serve GET /v1/health and POST /v1/query over trained artifacts."""
    import uvicorn

    from .service import create_app

    model = restore_model(model_path)
    idx = load_index(index_path)
    gen = _make_generator(generator, base_url, chat_model, api_key_env)
    app = create_app(model, idx, gen, default_k=k, max_input_tokens=max_input_tokens)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("demo-corpus")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--n-pairs", type=int, default=DEFAULT_DEMO_PAIRS, show_default=True)
@click.option("--seed", type=int, default=DEFAULT_DEMO_SEED, show_default=True)
def demo_corpus(out_path, n_pairs, seed):
    """Write a synthetic QA corpus for offline experiments."""
    corpus = make_synthetic_corpus(n_pairs, seed)
    save_corpus(corpus, out_path)
    click.echo(f"wrote {len(corpus)} pairs to {out_path}")


if __name__ == "__main__":
    main()
