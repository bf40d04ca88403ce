"""Report figures rendered next to the delimited outputs.

Every report path in the CLI writes machine-readable records first and
then, unless figures are disabled, one PNG per report through these
helpers. Rendering is deterministic: fixed size, fixed dpi, no
timestamps or software metadata in the PNG chunks.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import DiversityReport, GenerationReport, RetrievalReport

_BAR_COLOR = "#4878a8"
_BASE_COLOR = "#b0b0b0"


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _metric_items(report: RetrievalReport) -> list[tuple[str, float]]:
    items = [("mrr", report.mrr)]
    for k in report.k_set:
        items.append((f"hit@{k}", report.hit[k]))
        items.append((f"p@{k}", report.precision[k]))
        items.append((f"ndcg@{k}", report.ndcg[k]))
    return items


def retrieval_report_figure(report: RetrievalReport, path: str | Path) -> Path:
    items = _metric_items(report)
    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(items), 3.2))
    ax.bar([name for name, _ in items], [v for _, v in items], color=_BAR_COLOR)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"retrieval ({report.engine}, n={report.n_queries})")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    return _save(fig, path)


def generation_report_figure(report: GenerationReport, path: str | Path) -> Path:
    items = [("rouge1", report.rouge1), ("rougeL", report.rouge_l)]
    items.extend((f"bleu{n}", v) for n, v in sorted(report.bleu.items()))
    items.extend([("bert_p", report.bert_p), ("bert_r", report.bert_r), ("bert_f1", report.bert_f1)])
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(items), 3.2))
    ax.bar([name for name, _ in items], [v for _, v in items], color=_BAR_COLOR)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"generation (n={report.n_items})")
    ax.tick_params(axis="x", rotation=45)
    fig.tight_layout()
    return _save(fig, path)


def ablation_figure(
    untrained: RetrievalReport, trained: RetrievalReport, path: str | Path
) -> Path:
    names = [name for name, _ in _metric_items(trained)]
    base = [v for _, v in _metric_items(untrained)]
    tuned = [v for _, v in _metric_items(trained)]
    x = range(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(1.5 + 1.0 * len(names), 3.4))
    ax.bar([i - width / 2 for i in x], base, width, label="untrained", color=_BASE_COLOR)
    ax.bar([i + width / 2 for i in x], tuned, width, label="fine-tuned", color=_BAR_COLOR)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("retriever ablation")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def diversity_figure(report: DiversityReport, path: str | Path) -> Path:
    items = sorted(report.per_type_mean.items())
    fig, ax = plt.subplots(figsize=(1.0 + 1.1 * len(items), 3.2))
    ax.bar([name for name, _ in items], [v for _, v in items], color=_BAR_COLOR)
    ax.set_ylabel("mean embedding distance")
    ax.set_title("query diversity by type")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    return _save(fig, path)
