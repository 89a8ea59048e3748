"""Shared fixtures and independent oracles used across the suite.

The oracles here deliberately avoid the library's own search/storage code:
brute-force scans, shadow lists, and a hand-rolled cache simulator, so index
and store behavior is checked against something that cannot share its bugs.
"""

from __future__ import annotations

import numpy as np
import pytest

from contextdb import Document, Vector

# Filled in by tests/test_acceptance.py; printed after the run so the
# per-criterion verdicts are visible even with output capture on.
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, desc = ACCEPTANCE_RESULTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num} {verdict}: {desc}")


def brute_force_knn(data: np.ndarray, ids: list[str], q: np.ndarray,
                    k: int) -> list[tuple[str, float]]:
    """Independent exact k-NN: full scan, sorted by (distance, id)."""
    dists = np.sqrt(((data - q) ** 2).sum(axis=1))
    order = sorted(zip(dists.tolist(), ids))
    return [(doc_id, d) for d, doc_id in order[:k]]


def make_docs(data: np.ndarray, prefix: str = "d",
              metadata_fn=None) -> list[Document]:
    docs = []
    for i, row in enumerate(data):
        meta = metadata_fn(i) if metadata_fn else {}
        docs.append(Document(id=f"{prefix}{i:05d}", text=f"text {i}",
                             metadata=meta, embedding=Vector(row)))
    return docs


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows


class SimCache:
    """Reference cache simulator: plain dict plus an explicit recency list.

    Deliberately structured nothing like the real cache so shared bugs are
    unlikely: recency is a list we re-sort nowhere — least recent is simply
    the front; eviction scans it for an expired victim before falling back
    to the head.
    """

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.entries: dict[str, tuple[str, int, int]] = {}  # value, inserted, ttl
        self.recency: list[str] = []  # least recently used first

    def _touch(self, key: str) -> None:
        self.recency.remove(key)
        self.recency.append(key)

    def get(self, key: str, now: int):
        if key not in self.entries:
            return None
        value, inserted, ttl = self.entries[key]
        if now >= inserted + ttl:
            del self.entries[key]
            self.recency.remove(key)
            return None
        self._touch(key)
        return value

    def put(self, key: str, value: str, now: int, ttl: int) -> None:
        if key in self.entries:
            self.entries[key] = (value, now, ttl)
            self._touch(key)
            return
        if len(self.entries) >= self.capacity:
            victim = None
            for cand in self.recency:
                _, inserted, ttl0 = self.entries[cand]
                if now >= inserted + ttl0:
                    victim = cand
                    break
            if victim is None:
                victim = self.recency[0]
            del self.entries[victim]
            self.recency.remove(victim)
        self.entries[key] = (value, now, ttl)
        self.recency.append(key)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
