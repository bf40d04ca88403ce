"""Contrastive fine-tuning of the hashed-feature embedder.

The loss over a batch of n triples is

    L = -(1/n) sum_i log[ exp(s_ip / tau)
                          / (exp(s_ip / tau) + sum_m exp(s_im / tau)) ]

where s_ip is the cosine of query i and its positive answer, and m runs
over the triple's explicit negatives plus, when enabled, every other
in-batch positive answer. Cosines are taken between embeddings that are
L2-normalized projections of L2-normalized feature vectors; the analytic
gradient carries the chain rule through that normalization exactly and
is validated against central finite differences by gradient_check.

All floating-point reductions happen in a canonical order (items are
sorted before processing), so batch_loss is bit-identical under any
permutation of the batch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .augment import TripleSet
from .corpus import Corpus
from .embedder import EmbeddingModel, FeatureVector, featurize
from .util import write_jsonl

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainerError(Exception):
    """Base class for training failures."""


class InvalidConfigError(TrainerError):
    """A TrainConfig field is out of range."""


class DegenerateTextError(TrainerError):
    """A batch text embeds to the zero vector and cannot be trained on."""

    def __init__(self, text: str):
        self.text = text
        super().__init__(f"text embeds to the zero vector: {text!r}")


@dataclass(frozen=True)
class TextTriple:
    """A training triple with answer texts resolved from the corpus."""

    query: str
    positive: str
    negatives: tuple[str, ...]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    tau: float = 0.05
    use_inbatch_negatives: bool = True
    optimizer: str = "adam"
    seed: int = 0

    def validate(self) -> None:
        # epochs == 0 is allowed as an explicit no-op so an ablation can
        # run an untrained arm through the identical code path.
        if self.epochs < 0:
            raise InvalidConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.use_inbatch_negatives and self.batch_size < 2:
            raise InvalidConfigError("batch_size must be >= 2 when use_inbatch_negatives")
        # learning_rate 0 is a valid null update (useful for byte-identity
        # checks); negative rates are rejected.
        if self.learning_rate < 0.0:
            raise InvalidConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.tau <= 0.0:
            raise InvalidConfigError(f"tau must be > 0, got {self.tau}")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")

    def echo(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "tau": self.tau,
            "use_inbatch_negatives": self.use_inbatch_negatives,
            "optimizer": self.optimizer,
            "seed": self.seed,
        }


@dataclass
class TrainLog:
    """Per-epoch training trace.

    wall_time_s is kept in memory and in the run manifest but left out
    of the serialized log file so reruns stay byte-identical.
    """

    epoch_mean_loss: list[float] = field(default_factory=list)
    epoch_grad_norm: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0
    config: dict = field(default_factory=dict)
    seed: int = 0


def resolve_triples(tripleset: TripleSet, corpus: Corpus) -> list[TextTriple]:
    """Swap answer ids for answer texts; KeyError on unknown ids."""
    resolved = []
    for t in tripleset:
        resolved.append(
            TextTriple(
                query=t.query_text,
                positive=corpus[t.positive_answer_id].answer,
                negatives=tuple(corpus[i].answer for i in t.negative_answer_ids),
            )
        )
    return resolved


def _canonical(batch: Sequence[TextTriple]) -> list[TextTriple]:
    return sorted(batch, key=lambda t: (t.query, t.positive, t.negatives))


class _BatchGeometry:
    """Unique texts and per-item uid structure for one canonical batch."""

    def __init__(
        self,
        batch: Sequence[TextTriple],
        feature_of,
        use_inbatch_negatives: bool,
    ):
        items = _canonical(batch)
        uid_of: dict[str, int] = {}
        feats: list[FeatureVector] = []

        def uid(text: str) -> int:
            got = uid_of.get(text)
            if got is None:
                fv = feature_of(text)
                if fv.nnz == 0:
                    raise DegenerateTextError(text)
                got = len(feats)
                uid_of[text] = got
                feats.append(fv)
            return got

        self.q_uids = [uid(t.query) for t in items]
        self.p_uids = [uid(t.positive) for t in items]
        self.n_uids = [tuple(uid(n) for n in t.negatives) for t in items]
        self.feats = feats
        self.n_items = len(items)
        self.doc_uid_lists: list[list[int]] = []
        for i in range(self.n_items):
            docs = [self.p_uids[i]]
            docs.extend(self.n_uids[i])
            if use_inbatch_negatives:
                docs.extend(self.p_uids[j] for j in range(self.n_items) if j != i)
            self.doc_uid_lists.append(docs)


def _raw_embeddings(w64: np.ndarray, feats: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """Pre-normalization embeddings and their norms for unique texts."""
    n = len(feats)
    raw = np.empty((n, w64.shape[0]), dtype=np.float64)
    for t, fv in enumerate(feats):
        raw[t] = w64[:, fv.indices] @ fv.values
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmin(norms))
        raise DegenerateTextError(f"<unique text #{bad}>")
    return raw, norms


def _loss_and_grad(
    w64: np.ndarray,
    geom: _BatchGeometry,
    tau: float,
    want_grad: bool,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Loss and (optionally) the gradient restricted to touched columns.

    Returns (loss, cols, grad_cols) where grad_cols[:, j] is dL/dW[:, cols[j]];
    cols is None when want_grad is False.
    """
    raw, norms = _raw_embeddings(w64, geom.feats)
    unit = raw / norms[:, None]
    n = geom.n_items
    total = 0.0
    g_unit = np.zeros_like(unit) if want_grad else None
    for i in range(n):
        q = geom.q_uids[i]
        docs = geom.doc_uid_lists[i]
        sims = unit[docs] @ unit[q]
        x = sims / tau
        m = float(np.max(x))
        z = np.exp(x - m)
        zsum = float(np.sum(z))
        # positive sits at docs[0]
        total += (m + np.log(zsum)) - x[0]
        if want_grad:
            coef = z / (zsum * tau * n)
            coef[0] -= 1.0 / (tau * n)
            g_unit[q] += coef @ unit[docs]
            np.add.at(g_unit, docs, coef[:, None] * unit[q][None, :])
    loss = total / n
    if not want_grad:
        return loss, None, None

    # Chain through the L2 normalization: d(unit)/d(raw) applied to g_unit.
    proj = np.einsum("te,te->t", unit, g_unit)
    g_raw = (g_unit - proj[:, None] * unit) / norms[:, None]

    all_cols = np.unique(np.concatenate([fv.indices for fv in geom.feats]))
    col_pos = {int(c): j for j, c in enumerate(all_cols)}
    grad = np.zeros((w64.shape[0], all_cols.size), dtype=np.float64)
    for t, fv in enumerate(geom.feats):
        positions = [col_pos[int(c)] for c in fv.indices]
        grad[:, positions] += np.outer(g_raw[t], fv.values)
    return loss, all_cols, grad


def _feature_cache(model: EmbeddingModel):
    cache: dict[str, FeatureVector] = {}

    def feature_of(text: str) -> FeatureVector:
        fv = cache.get(text)
        if fv is None:
            fv = featurize(model, text)
            cache[text] = fv
        return fv

    return feature_of


def batch_loss(
    model: EmbeddingModel,
    batch: Sequence[TextTriple],
    tau: float = 0.05,
    use_inbatch_negatives: bool = True,
) -> tuple[float, np.ndarray]:
    """Mean contrastive loss over the batch and its full dense gradient.

    The gradient has the projection's shape. For large models prefer the
    training loop, which keeps gradients in touched-column form.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if tau <= 0.0:
        raise InvalidConfigError(f"tau must be > 0, got {tau}")
    geom = _BatchGeometry(batch, _feature_cache(model), use_inbatch_negatives)
    w64 = model.projection.astype(np.float64)
    loss, cols, grad_cols = _loss_and_grad(w64, geom, tau, want_grad=True)
    dense = np.zeros((model.emb_dim, model.feat_dim), dtype=np.float64)
    dense[:, cols] = grad_cols
    return loss, dense


def train(
    model: EmbeddingModel,
    tripleset: TripleSet,
    corpus: Corpus,
    config: TrainConfig = TrainConfig(),
) -> tuple[EmbeddingModel, TrainLog]:
    """Fine-tune the projection on mined triples.

    Triples are shuffled each epoch by a PCG64 generator seeded with
    config.seed and consumed in fixed-size batches (the trailing partial
    batch is kept). Arithmetic runs in float64 on a working copy of the
    projection; the updated model is cast back to float32, so a run with
    epochs 0 returns a byte-identical projection.

    Adam moments are updated lazily: only columns with nonzero gradient
    in a step decay and move that step. Hyperparameters are the standard
    beta1=0.9, beta2=0.999, eps=1e-8.
    """
    config.validate()
    triples = resolve_triples(tripleset, corpus)
    if not triples:
        raise TrainerError("tripleset is empty")
    feature_of = _feature_cache(model)
    for t in triples:
        for text in (t.query, t.positive, *t.negatives):
            if feature_of(text).nnz == 0:
                raise DegenerateTextError(text)

    w64 = model.projection.astype(np.float64)
    use_adam = config.optimizer == "adam"
    if use_adam:
        # Moments live feature-major so the lazy per-column update reads
        # and writes contiguous rows instead of strided columns.
        m = np.zeros((model.feat_dim, model.emb_dim), dtype=np.float64)
        v = np.zeros_like(m)
    step = 0
    started = time.perf_counter()
    log = TrainLog(config=config.echo(), seed=config.seed)
    rng = np.random.default_rng(config.seed)
    n = len(triples)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        norm_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            batch = [triples[int(i)] for i in order[start:start + config.batch_size]]
            geom = _BatchGeometry(batch, feature_of, config.use_inbatch_negatives)
            loss, cols, grad = _loss_and_grad(w64, geom, config.tau, want_grad=True)
            loss_sum += loss * len(batch)
            norm_sum += float(np.linalg.norm(grad))
            n_batches += 1
            step += 1
            if use_adam:
                g = grad.T
                mc = ADAM_BETA1 * m[cols] + (1.0 - ADAM_BETA1) * g
                vc = ADAM_BETA2 * v[cols] + (1.0 - ADAM_BETA2) * g * g
                m[cols] = mc
                v[cols] = vc
                mc /= 1.0 - ADAM_BETA1**step
                vc /= 1.0 - ADAM_BETA2**step
                w64[:, cols] -= config.learning_rate * (mc / (np.sqrt(vc) + ADAM_EPS)).T
            else:
                w64[:, cols] -= config.learning_rate * grad
        log.epoch_mean_loss.append(loss_sum / n)
        log.epoch_grad_norm.append(norm_sum / n_batches)
    log.wall_time_s = time.perf_counter() - started
    updated = EmbeddingModel(
        feat_dim=model.feat_dim,
        emb_dim=model.emb_dim,
        hash_seed=model.hash_seed,
        projection=w64.astype(np.float32),
    )
    return updated, log


def finite_difference_grad(
    model: EmbeddingModel,
    batch: Sequence[TextTriple],
    coords: Sequence[tuple[int, int]],
    eps: float = 1e-5,
    tau: float = 0.05,
    use_inbatch_negatives: bool = True,
) -> np.ndarray:
    """Central-difference derivative of batch_loss at the given (row, col) coords."""
    geom = _BatchGeometry(batch, _feature_cache(model), use_inbatch_negatives)
    w64 = model.projection.astype(np.float64)
    out = np.empty(len(coords), dtype=np.float64)
    for k, (r, c) in enumerate(coords):
        saved = w64[r, c]
        w64[r, c] = saved + eps
        hi, _, _ = _loss_and_grad(w64, geom, tau, want_grad=False)
        w64[r, c] = saved - eps
        lo, _, _ = _loss_and_grad(w64, geom, tau, want_grad=False)
        w64[r, c] = saved
        out[k] = (hi - lo) / (2.0 * eps)
    return out


def gradient_check(
    model: EmbeddingModel,
    batch: Sequence[TextTriple],
    eps: float = 1e-5,
    tau: float = 0.05,
    use_inbatch_negatives: bool = True,
    n_coords: int = 128,
    seed: int = 0,
) -> float:
    """Max relative error between the analytic and finite-diff gradients.

    Samples at least n_coords coordinates (seeded) among those whose
    analytic gradient magnitude is within a factor 1e-3 of the largest;
    tinier coordinates are dominated by finite-difference noise rather
    than by gradient bugs and are excluded by design. Relative error is
    |analytic - numeric| / max(|numeric|, 1e-12), so a gradient scaled
    by 2 reports an error of about 1.0.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    geom = _BatchGeometry(batch, _feature_cache(model), use_inbatch_negatives)
    w64 = model.projection.astype(np.float64)
    _, cols, grad = _loss_and_grad(w64, geom, tau, want_grad=True)
    mags = np.abs(grad)
    floor = float(mags.max()) * 1e-3
    rows, col_posns = np.nonzero(mags >= floor)
    if rows.size == 0:
        raise TrainerError("gradient is identically zero; nothing to check")
    rng = np.random.default_rng(seed)
    take = min(n_coords, rows.size)
    picks = rng.choice(rows.size, size=take, replace=False)
    coords = [(int(rows[i]), int(cols[col_posns[i]])) for i in picks]
    analytic = np.array([grad[rows[i], col_posns[i]] for i in picks], dtype=np.float64)
    numeric = finite_difference_grad(model, batch, coords, eps, tau, use_inbatch_negatives)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-12)
    return float(np.max(rel))


def save_trainlog(log: TrainLog, path: str | Path) -> Path:
    """One record per epoch plus a summary line; timing is omitted."""
    records = [
        {"epoch": i + 1, "mean_loss": loss, "grad_norm": norm}
        for i, (loss, norm) in enumerate(zip(log.epoch_mean_loss, log.epoch_grad_norm))
    ]
    records.append({"summary": {"config": log.config, "seed": log.seed, "epochs": len(log.epoch_mean_loss)}})
    return write_jsonl(path, records)
