"""From-scratch hashed-feature text embedder.

The embedding of a text is a linear projection of a sparse hashed
feature vector (token unigrams, token bigrams, character 3-grams),
L2-normalized at both stages. Everything here is deterministic given
the model parameters: the tokenizer has no learned state, feature
hashing uses keyed BLAKE2b, and initialization uses a seeded PCG64.
"""

from __future__ import annotations

import hashlib
import struct
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_FEAT_DIM = 2**18
DEFAULT_EMB_DIM = 256
DEFAULT_HASH_SEED = 17

_MAGIC = b"RTEM"
_VERSION = 1
# magic, version, feat_dim, emb_dim, hash_seed, sha256 of the matrix bytes
_HEADER = struct.Struct("<4sIQQq32s")


class EmbedderError(Exception):
    """Base class for embedder failures."""


class InvalidDimsError(EmbedderError):
    """Model dimensions must be positive integers."""


class DimensionMismatchError(EmbedderError):
    """Vectors passed to cosine must have equal length."""


class UnsupportedVersionError(EmbedderError):
    """Model file written by a newer format version."""


class CorruptFileError(EmbedderError):
    """Model file is truncated, mislabeled, or fails its checksum."""


def _is_han(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x2A6DF
        or 0x2A700 <= cp <= 0x2EBEF
    )


def tokenize(text: str) -> list[str]:
    """Deterministic tokenizer shared by the embedder, metrics, and prompts.

    NFC-normalizes and lowercases, emits each Han character as its own
    token, folds maximal runs of other letters and digits into single
    tokens, and drops punctuation and whitespace.
    """
    text = unicodedata.normalize("NFC", text).lower()
    tokens: list[str] = []
    run: list[str] = []
    for ch in text:
        if _is_han(ch):
            if run:
                tokens.append("".join(run))
                run = []
            tokens.append(ch)
        elif ch.isalnum():
            run.append(ch)
        else:
            if run:
                tokens.append("".join(run))
                run = []
    if run:
        tokens.append("".join(run))
    return tokens


def _normalized_text(text: str) -> str:
    """NFC + lowercase with whitespace runs collapsed to single spaces."""
    text = unicodedata.normalize("NFC", text).lower()
    return " ".join(text.split())


def hash_feature(key: str, hash_seed: int, feat_dim: int) -> int:
    """Map a feature key to a column index with keyed 64-bit BLAKE2b.

    BLAKE2b is fixed by RFC 7693, so indices are stable across platforms
    and Python versions for a given (hash_seed, feat_dim).
    """
    seed_bytes = struct.pack("<q", hash_seed)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8, key=seed_bytes).digest()
    return int.from_bytes(digest, "little") % feat_dim


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Sparse L2-normalized feature vector: sorted column indices and weights."""

    indices: np.ndarray  # int64, strictly increasing
    values: np.ndarray  # float64

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}


_EMPTY_INDICES = np.empty(0, dtype=np.int64)
_EMPTY_VALUES = np.empty(0, dtype=np.float64)


def feature_keys(text: str) -> list[str]:
    """Enumerate the raw feature keys of a text, before hashing.

    Token unigrams and bigrams come from tokenize(); character 3-grams
    are taken over the normalized text padded with two spaces per side,
    so the edge grams encode word and query boundaries and a single
    in-word transposition always leaves some 3-gram of a length >= 4
    word intact.
    """
    tokens = tokenize(text)
    keys = [f"u:{t}" for t in tokens]
    keys.extend(f"b:{a}\x1f{b}" for a, b in zip(tokens, tokens[1:]))
    normalized = _normalized_text(text)
    if normalized:
        padded = f"  {normalized}  "
        keys.extend(f"c:{padded[i:i + 3]}" for i in range(len(padded) - 2))
    return keys


def featurize(model: "EmbeddingModel", text: str) -> FeatureVector:
    """Hash a text into a sparse unit-norm feature vector.

    Feature weights are sublinear term frequencies 1 + ln(count); keys
    that collide under the hash sum their weights. Texts with no
    features produce an empty vector.
    """
    keys = feature_keys(text)
    if not keys:
        return FeatureVector(indices=_EMPTY_INDICES, values=_EMPTY_VALUES)
    counts: dict[str, int] = {}
    for key in keys:
        counts[key] = counts.get(key, 0) + 1
    buckets: dict[int, float] = {}
    for key, count in counts.items():
        idx = hash_feature(key, model.hash_seed, model.feat_dim)
        buckets[idx] = buckets.get(idx, 0.0) + 1.0 + np.log(count)
    indices = np.fromiter(sorted(buckets), count=len(buckets), dtype=np.int64)
    values = np.array([buckets[int(i)] for i in indices], dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm > 0.0:
        values = values / norm
    return FeatureVector(indices=indices, values=values)


@dataclass(eq=False)
class EmbeddingModel:
    """Linear projection over the hashed feature space.

    projection has shape (emb_dim, feat_dim), dtype float32; float32 is
    the canonical in-memory and on-disk precision so persist/restore
    round-trips are byte-exact. Numerical work upcasts to float64.
    """

    feat_dim: int
    emb_dim: int
    hash_seed: int
    projection: np.ndarray

    def __post_init__(self):
        if self.feat_dim < 1 or self.emb_dim < 1:
            raise InvalidDimsError(
                f"dimensions must be positive, got feat_dim={self.feat_dim} emb_dim={self.emb_dim}"
            )
        if self.projection.shape != (self.emb_dim, self.feat_dim):
            raise InvalidDimsError(
                f"projection shape {self.projection.shape} does not match "
                f"(emb_dim, feat_dim)=({self.emb_dim}, {self.feat_dim})"
            )
        if self.projection.dtype != np.float32:
            raise InvalidDimsError(f"projection dtype must be float32, got {self.projection.dtype}")


def init_model(
    feat_dim: int = DEFAULT_FEAT_DIM,
    emb_dim: int = DEFAULT_EMB_DIM,
    hash_seed: int = DEFAULT_HASH_SEED,
    seed: int = 0,
) -> EmbeddingModel:
    """Create a model with entries iid uniform on [-a, a], a = sqrt(6/(feat_dim+emb_dim)).

    Draws come from numpy's PCG64 generator seeded with `seed`, so
    initialization is reproducible bit for bit.
    """
    if feat_dim < 1 or emb_dim < 1:
        raise InvalidDimsError(
            f"dimensions must be positive, got feat_dim={feat_dim} emb_dim={emb_dim}"
        )
    bound = np.sqrt(6.0 / (feat_dim + emb_dim))
    rng = np.random.default_rng(seed)
    projection = rng.random((emb_dim, feat_dim), dtype=np.float32)
    projection *= np.float32(2.0 * bound)
    projection -= np.float32(bound)
    return EmbeddingModel(feat_dim=feat_dim, emb_dim=emb_dim, hash_seed=hash_seed, projection=projection)


def embed(model: EmbeddingModel, text: str) -> np.ndarray:
    """Project a text into the unit sphere of R^emb_dim.

    Returns the exact zero vector when the text yields no features (the
    degenerate case); use is_degenerate() to test for it.
    """
    features = featurize(model, text)
    return embed_features(model, features)


def embed_features(model: EmbeddingModel, features: FeatureVector) -> np.ndarray:
    """Embed a precomputed feature vector. Same contract as embed()."""
    if features.nnz == 0:
        return np.zeros(model.emb_dim, dtype=np.float64)
    raw = model.projection[:, features.indices].astype(np.float64) @ features.values
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return np.zeros(model.emb_dim, dtype=np.float64)
    return raw / norm


def is_degenerate(vector: np.ndarray) -> bool:
    """True for the all-zero vector embed() returns on featureless text."""
    return not np.any(vector)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in float64; 0.0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatchError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def persist_model(model: EmbeddingModel, path: str | Path) -> Path:
    """Write the versioned binary model file.

    Layout: magic, format version, feat_dim, emb_dim, hash_seed, SHA-256
    of the matrix bytes, then the projection as little-endian float32 in
    row-major order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.ascontiguousarray(model.projection, dtype="<f4").tobytes()
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        model.feat_dim,
        model.emb_dim,
        model.hash_seed,
        hashlib.sha256(matrix).digest(),
    )
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(matrix)
    return path


def restore_model(path: str | Path) -> EmbeddingModel:
    """Read a model file written by persist_model.

    Raises UnsupportedVersionError for newer format versions and
    CorruptFileError for bad magic, truncation, or checksum mismatch.
    """
    path = Path(path)
    with path.open("rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CorruptFileError(f"{path}: file shorter than header")
    magic, version, feat_dim, emb_dim, hash_seed, checksum = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise CorruptFileError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise UnsupportedVersionError(f"{path}: format version {version}, supported: {_VERSION}")
    matrix = blob[_HEADER.size:]
    expected = feat_dim * emb_dim * 4
    if len(matrix) != expected:
        raise CorruptFileError(f"{path}: matrix is {len(matrix)} bytes, expected {expected}")
    if hashlib.sha256(matrix).digest() != checksum:
        raise CorruptFileError(f"{path}: matrix checksum mismatch")
    projection = np.frombuffer(matrix, dtype="<f4").reshape(emb_dim, feat_dim).astype(np.float32)
    return EmbeddingModel(feat_dim=feat_dim, emb_dim=emb_dim, hash_seed=hash_seed, projection=projection)


def model_fingerprint(model: EmbeddingModel) -> str:
    """SHA-256 hex digest over the model header fields and matrix bytes."""
    h = hashlib.sha256()
    h.update(struct.pack("<IQQq", _VERSION, model.feat_dim, model.emb_dim, model.hash_seed))
    h.update(np.ascontiguousarray(model.projection, dtype="<f4").tobytes())
    return h.hexdigest()
