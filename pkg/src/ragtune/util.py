"""Small shared helpers: stable hashing, seeded RNG streams, JSONL I/O."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np


def stable_hash(*parts) -> int:
    """64-bit BLAKE2b hash of the parts, stable across runs and platforms.

    Used wherever a reproducible per-item seed is derived from names and
    a base seed; never use Python's builtin hash() for that, it is
    randomized per process.
    """
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(joined.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stable_rng(*parts) -> np.random.Generator:
    """PCG64 generator seeded from stable_hash of the parts."""
    return np.random.default_rng(stable_hash(*parts))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> Path:
    """Write records as JSON Lines with sorted keys (byte-stable output)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def read_jsonl(path: str | Path) -> Iterator[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
