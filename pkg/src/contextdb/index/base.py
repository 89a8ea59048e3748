"""Shared scaffolding for the vector indexes: document table, dimension
checks, deterministic hit assembly, and the hybrid filtered-search strategy.

Ordering contract used everywhere: hits sorted by (distance, doc_id)
ascending, ranks consecutive from 1. Mutations and searches are serialized
by one reentrant lock per index, which satisfies the reader-writer contract
(a search sees the index entirely before or entirely after a mutation).
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Iterator, Sequence

import numpy as np

from ..core import Document, Vector
from ..errors import DimensionMismatchError, EmptyIndexError
from ..filters import FilterExpr, evaluate_filter


@dataclass(frozen=True)
class SearchHit:
    """One ranked result: document id, true Euclidean distance, 1-based rank."""

    doc_id: str
    distance: float
    rank: int


def rows_to_query_distances(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each matrix row to q (float64)."""
    diff = matrix - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


class _GrowableMatrix:
    """Dense float64 row store with amortized growth; rows are append-only."""

    def __init__(self, dim: int, capacity: int = 64):
        self.dim = dim
        self._data = np.zeros((capacity, dim), dtype=np.float64)
        self.count = 0

    def append(self, values: np.ndarray) -> int:
        if self.count == self._data.shape[0]:
            grown = np.zeros((max(self.count * 2, 64), self.dim), dtype=np.float64)
            grown[: self.count] = self._data[: self.count]
            self._data = grown
        self._data[self.count] = values
        self.count += 1
        return self.count - 1

    @property
    def rows(self) -> np.ndarray:
        return self._data[: self.count]

    def row(self, slot: int) -> np.ndarray:
        return self._data[slot]


class VectorIndex(ABC):
    """Base class for the flat, HNSW, and IVF document indexes."""

    kind: ClassVar[str]

    def __init__(self):
        self._docs: dict[str, Document] = {}
        self._dim: int | None = None
        self._lock = threading.RLock()

    # -- introspection --------------------------------------------------

    @property
    def dim(self) -> int | None:
        return self._dim

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document | None:
        return self._docs.get(doc_id)

    def documents(self) -> Iterator[Document]:
        return iter(list(self._docs.values()))

    # -- mutation ---------------------------------------------------------

    def insert(self, doc: Document) -> None:
        """Add or atomically replace the document with this id."""
        with self._lock:
            self._check_insert_dim(doc.embedding.dim)
            if doc.id in self._docs:
                self._remove_vector(doc.id)
            self._insert_vector(doc.id, doc.embedding.values)
            self._docs[doc.id] = doc

    def remove(self, doc_id: str) -> bool:
        """Remove the document; returns whether it was present."""
        with self._lock:
            if doc_id not in self._docs:
                return False
            self._remove_vector(doc_id)
            del self._docs[doc_id]
            return True

    # -- search ------------------------------------------------------------

    def search(self, query: Vector, k: int, **overrides) -> list[SearchHit]:
        """The k nearest documents by Euclidean distance (clamped to size)."""
        with self._lock:
            self._check_search_ready(query)
            if k < 1:
                raise ValueError(f"k must be >= 1, got {k}")
            pairs = self._nearest(query.values, min(k, len(self._docs)), **overrides)
            return self._to_hits(pairs, k)

    def search_filtered(self, query: Vector, k: int, filt: FilterExpr,
                        **overrides) -> list[SearchHit]:
        """k nearest documents among those satisfying the filter.

        Approximate indexes oversample max(4k, k+32) candidates, post-filter,
        and retry with doubled oversampling up to 3 times before settling for
        a short list; the flat index overrides this with an exact scan.
        """
        with self._lock:
            self._check_search_ready(query)
            if k < 1:
                raise ValueError(f"k must be >= 1, got {k}")
            total = len(self._docs)
            fetch = max(4 * k, k + 32)
            kept: list[tuple[float, str]] = []
            for _ in range(4):  # initial attempt + 3 doubled retries
                fetch = min(fetch, total)
                pairs = self._nearest(query.values, fetch, **overrides)
                kept = [p for p in pairs if evaluate_filter(filt, self._docs[p[1]])]
                if len(kept) >= k or len(pairs) >= total:
                    break
                fetch *= 2
            return self._to_hits(kept, k)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write a versioned snapshot; load_index() restores it verbatim."""
        from .snapshot import save_index

        with self._lock:
            save_index(self, path)

    # -- hooks for subclasses -----------------------------------------------

    @abstractmethod
    def _insert_vector(self, doc_id: str, values: np.ndarray) -> None: ...

    @abstractmethod
    def _remove_vector(self, doc_id: str) -> None: ...

    @abstractmethod
    def _nearest(self, q: np.ndarray, n: int, **overrides) -> list[tuple[float, str]]:
        """Up to n (distance, doc_id) candidates for live documents."""

    def _check_insert_dim(self, got: int) -> None:
        if self._dim is None:
            self._dim = got
        elif got != self._dim:
            raise DimensionMismatchError(expected=self._dim, got=got)

    def _check_search_ready(self, query: Vector) -> None:
        if not self._docs:
            raise EmptyIndexError(f"cannot search an empty {self.kind} index")
        if self._dim is not None and query.dim != self._dim:
            raise DimensionMismatchError(expected=self._dim, got=query.dim, what="query")

    # -- helpers -------------------------------------------------------------

    @staticmethod
    def _to_hits(pairs: Sequence[tuple[float, str]], k: int) -> list[SearchHit]:
        ordered = sorted(pairs)[:k]
        return [SearchHit(doc_id=doc_id, distance=float(dist), rank=i + 1)
                for i, (dist, doc_id) in enumerate(ordered)]
