"""Shared helpers: stable hashing, seeded RNG streams, JSONL round-trips."""

import hashlib

import numpy as np
import pytest

from ragtune.util import read_jsonl, sha256_file, stable_hash, stable_rng, write_jsonl


class TestStableHash:
    def test_known_value(self):
        """Pinned output: BLAKE2b-64 of 'a\\x1f1' little-endian. Guards the
        cross-run seeding scheme against accidental algorithm changes."""
        digest = hashlib.blake2b(b"a\x1f1", digest_size=8).digest()
        assert stable_hash("a", 1) == int.from_bytes(digest, "little")

    def test_part_boundaries_matter(self):
        assert stable_hash("ab", "c") != stable_hash("a", "bc")

    def test_repeatable_across_calls(self):
        assert stable_hash("seed", 42, "mine") == stable_hash("seed", 42, "mine")

    def test_rng_streams_are_independent(self):
        a = stable_rng(7, "stream-a").integers(1000, size=8)
        b = stable_rng(7, "stream-b").integers(1000, size=8)
        again = stable_rng(7, "stream-a").integers(1000, size=8)
        assert np.array_equal(a, again)
        assert not np.array_equal(a, b)


class TestJsonl:
    def test_roundtrip(self, tmp_path):
        records = [{"b": 2, "a": "text"}, {"answer": "第115條", "id": "x"}]
        path = write_jsonl(tmp_path / "r.jsonl", records)
        assert list(read_jsonl(path)) == records

    def test_sorted_keys_and_raw_unicode(self, tmp_path):
        path = write_jsonl(tmp_path / "r.jsonl", [{"b": 1, "a": 2}])
        text = path.read_text(encoding="utf-8")
        assert text == '{"a": 2, "b": 1}\n'
        path = write_jsonl(tmp_path / "u.jsonl", [{"t": "專利"}])
        assert "專利" in path.read_text(encoding="utf-8")

    def test_read_skips_blank_lines(self, tmp_path):
        path = tmp_path / "r.jsonl"
        path.write_text('{"a": 1}\n\n{"a": 2}\n', encoding="utf-8")
        assert list(read_jsonl(path)) == [{"a": 1}, {"a": 2}]

    def test_rewrite_is_byte_identical(self, tmp_path):
        records = [{"k": i, "v": f"t{i}"} for i in range(5)]
        first = write_jsonl(tmp_path / "a.jsonl", records).read_bytes()
        second = write_jsonl(tmp_path / "b.jsonl", records).read_bytes()
        assert first == second


class TestSha256File:
    def test_matches_hashlib(self, tmp_path):
        path = tmp_path / "blob.bin"
        payload = bytes(range(256)) * 100
        path.write_bytes(payload)
        assert sha256_file(path) == hashlib.sha256(payload).hexdigest()

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty"
        path.write_bytes(b"")
        assert sha256_file(path) == hashlib.sha256(b"").hexdigest()
