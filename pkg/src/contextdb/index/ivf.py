"""IVF-Flat index: a k-means coarse quantizer over inverted lists.

train() fits centroids on a sample; every inserted vector lands in the list
of its nearest centroid. A search scores the query against all centroids,
scans the nprobe nearest lists exhaustively with the same exact-distance
kernel the flat index uses, and merges. With nprobe == nlist every list is
scanned, so results coincide with the flat index bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Vector
from ..errors import DimensionMismatchError, NotTrainedError, TrainingDataError
from .base import VectorIndex, _GrowableMatrix, rows_to_query_distances


@dataclass(frozen=True)
class IvfParams:
    """nlist=None means ceil(sqrt(N)) at train time; nprobe=None means
    min(8, nlist)."""

    nlist: int | None = None
    nprobe: int | None = None
    kmeans_iters: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.nlist is not None and self.nlist < 1:
            raise ValueError(f"nlist must be >= 1, got {self.nlist}")
        if self.nprobe is not None and self.nprobe < 1:
            raise ValueError(f"nprobe must be >= 1, got {self.nprobe}")
        if self.kmeans_iters < 1:
            raise ValueError(
                f"kmeans_iters must be >= 1, got {self.kmeans_iters}")


def _kmeans(x: np.ndarray, k: int, iters: int, seed: int) -> np.ndarray:
    """Seeded Lloyd iterations; stops early once no centroid moves more than
    1e-6. An emptied cluster is reseeded to the point currently farthest from
    its own centroid (each repair consumes a distinct point)."""
    n = x.shape[0]
    rng = np.random.default_rng(seed)
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    xn = np.einsum("ij,ij->i", x, x)
    for _ in range(iters):
        cn = np.einsum("ij,ij->i", centroids, centroids)
        d2 = xn[:, None] + cn[None, :] - 2.0 * (x @ centroids.T)
        np.maximum(d2, 0.0, out=d2)
        assign = d2.argmin(axis=1)
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, x)
        moved = centroids.copy()
        nonempty = counts > 0
        moved[nonempty] = sums[nonempty] / counts[nonempty, None]
        own = d2[np.arange(n), assign].copy()
        for c in np.flatnonzero(~nonempty):
            p = int(own.argmax())
            moved[c] = x[p]
            own[p] = -1.0
        shift = np.sqrt(
            np.einsum("ij,ij->i", moved - centroids, moved - centroids))
        centroids = moved
        if float(shift.max()) < 1e-6:
            break
    return centroids


class IvfIndex(VectorIndex):
    kind = "ivf"

    def __init__(self, params: IvfParams | None = None):
        super().__init__()
        self.params = params or IvfParams()
        self._centroids: np.ndarray | None = None
        self._nlist = 0
        self._lists: list[list[str]] = []
        self._assign_of: dict[str, int] = {}
        self._matrix: _GrowableMatrix | None = None
        self._slot_of: dict[str, int] = {}
        self._id_of: list[str] = []

    @property
    def trained(self) -> bool:
        return self._centroids is not None

    @property
    def nlist(self) -> int:
        return self._nlist

    @property
    def centroids(self) -> np.ndarray | None:
        return None if self._centroids is None else self._centroids.copy()

    def train(self, vectors: Sequence[Vector] | np.ndarray) -> None:
        with self._lock:
            if self._centroids is not None:
                raise ValueError("index is already trained")
            if isinstance(vectors, np.ndarray):
                x = np.asarray(vectors, dtype=np.float64)
                if x.ndim != 2:
                    raise ValueError(
                        f"training array must be 2-D, got shape {x.shape}")
            else:
                x = np.stack([v.values for v in vectors]) if len(vectors) \
                    else np.zeros((0, 1))
            n = x.shape[0]
            if n == 0:
                raise TrainingDataError(required=1, got=0)
            nlist = self.params.nlist or math.ceil(math.sqrt(n))
            if n < nlist:
                raise TrainingDataError(required=nlist, got=n)
            self._check_insert_dim(x.shape[1])
            self._centroids = _kmeans(x, nlist, self.params.kmeans_iters,
                                      self.params.seed)
            self._nlist = nlist
            self._lists = [[] for _ in range(nlist)]

    def _restore_centroids(self, centroids: np.ndarray) -> None:
        # snapshot loading: adopt fitted centroids without re-running k-means
        self._centroids = np.asarray(centroids, dtype=np.float64)
        self._nlist = self._centroids.shape[0]
        self._lists = [[] for _ in range(self._nlist)]
        self._check_insert_dim(self._centroids.shape[1])

    def _require_trained(self) -> None:
        if self._centroids is None:
            raise NotTrainedError("ivf index must be trained before use")

    def insert(self, doc) -> None:
        with self._lock:
            self._require_trained()
            super().insert(doc)

    def search(self, query, k, nprobe: int | None = None):
        """k nearest among the nprobe closest lists (may return fewer than k
        when the probed lists run short)."""
        with self._lock:
            self._require_trained()
            return super().search(query, k, nprobe=nprobe)

    def search_filtered(self, query, k, filt, nprobe: int | None = None):
        with self._lock:
            self._require_trained()
            return super().search_filtered(query, k, filt, nprobe=nprobe)

    # -- VectorIndex hooks --------------------------------------------------

    def _insert_vector(self, doc_id: str, values: np.ndarray) -> None:
        assert self._centroids is not None
        if self._matrix is None:
            self._matrix = _GrowableMatrix(values.shape[0])
        diff = self._centroids - values
        cid = int(np.einsum("ij,ij->i", diff, diff).argmin())
        slot = self._matrix.append(values)
        self._slot_of[doc_id] = slot
        self._id_of.append(doc_id)
        self._lists[cid].append(doc_id)
        self._assign_of[doc_id] = cid

    def _remove_vector(self, doc_id: str) -> None:
        assert self._matrix is not None
        slot = self._slot_of.pop(doc_id)
        last = self._matrix.count - 1
        if slot != last:
            moved = self._id_of[last]
            self._matrix._data[slot] = self._matrix._data[last]
            self._id_of[slot] = moved
            self._slot_of[moved] = slot
        self._id_of.pop()
        self._matrix.count -= 1
        self._lists[self._assign_of.pop(doc_id)].remove(doc_id)

    def _nearest(self, q: np.ndarray, n: int, *,
                 nprobe: int | None = None) -> list[tuple[float, str]]:
        assert self._centroids is not None and self._matrix is not None
        if nprobe is None:
            nprobe = self.params.nprobe if self.params.nprobe is not None \
                else min(8, self._nlist)
        if nprobe < 1:
            raise ValueError(f"nprobe must be >= 1, got {nprobe}")
        nprobe = min(nprobe, self._nlist)
        diff = self._centroids - q
        cd = np.einsum("ij,ij->i", diff, diff)
        probe = np.argsort(cd, kind="stable")[:nprobe]
        ids = [doc_id for c in probe for doc_id in self._lists[c]]
        if not ids:
            return []
        slots = np.fromiter((self._slot_of[i] for i in ids), dtype=np.int64,
                            count=len(ids))
        dists = rows_to_query_distances(self._matrix.rows[slots], q)
        # keep every boundary tie; the (distance, doc_id) sort settles them
        if n < dists.shape[0]:
            kth = np.partition(dists, n - 1)[n - 1]
            cut = np.flatnonzero(dists <= kth)
        else:
            cut = np.arange(dists.shape[0])
        return [(float(dists[i]), ids[i]) for i in cut]
