import numpy as np
import pytest

from contextdb import (Document, EmptyIndexError, FlatIndex, HnswIndex,
                       HnswParams, Vector, parse_filter)
from conftest import brute_force_knn, make_docs, unit_rows


def build(data: np.ndarray, seed: int = 0, **kw) -> HnswIndex:
    index = HnswIndex(HnswParams(seed=seed, **kw))
    for d in make_docs(data):
        index.insert(d)
    return index


class TestParams:
    def test_defaults(self):
        p = HnswParams()
        assert (p.m, p.ef_construction, p.ef_search) == (16, 200, 64)

    @pytest.mark.parametrize("kw", [{"m": 1}, {"ef_construction": 0},
                                    {"ef_search": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            HnswParams(**kw)


class TestBasics:
    def test_single_and_tiny(self):
        index = HnswIndex()
        index.insert(Document(id="only", text="", metadata={},
                              embedding=Vector([1.0, 1.0])))
        assert [h.doc_id for h in index.search(Vector([0.0, 0.0]), 3)] == ["only"]
        index.insert(Document(id="two", text="", metadata={},
                              embedding=Vector([5.0, 5.0])))
        assert [h.doc_id for h in index.search(Vector([4.0, 4.0]), 2)] == ["two", "only"]

    def test_empty_search(self):
        with pytest.raises(EmptyIndexError):
            HnswIndex().search(Vector([1.0]), 1)

    def test_replace_same_id(self, rng):
        data = unit_rows(rng, 50, 8)
        index = build(data)
        index.insert(Document(id="d00000", text="moved", metadata={},
                              embedding=Vector(data[1] * 0.999)))
        hits = index.search(Vector(data[1]), 2)
        assert {h.doc_id for h in hits} == {"d00000", "d00001"}
        assert index.get("d00000").text == "moved"
        assert len(index) == 50

    def test_exhaustive_k_returns_everything_alive(self, rng):
        data = unit_rows(rng, 120, 8)
        index = build(data)
        index.remove("d00003")
        hits = index.search(Vector(data[0]), 500)
        assert len(hits) == 119
        assert "d00003" not in {h.doc_id for h in hits}


class TestRecall:
    def test_matches_oracle_on_easy_workload(self, rng):
        # dim 8 is easy for a proximity graph: expect near-perfect agreement
        data = unit_rows(rng, 1200, 8)
        index = build(data)
        ids = [f"d{i:05d}" for i in range(len(data))]
        agree = 0
        for _ in range(40):
            q = unit_rows(rng, 1, 8)[0]
            want = {w for w, _ in brute_force_knn(data, ids, q, 10)}
            got = {h.doc_id for h in index.search(Vector(q), 10)}
            agree += len(want & got)
        assert agree / (40 * 10) >= 0.99

    def test_recall_does_not_degrade_with_wider_beam(self, rng):
        data = unit_rows(rng, 1500, 32)
        index = build(data)
        ids = [f"d{i:05d}" for i in range(len(data))]
        queries = unit_rows(rng, 30, 32)
        truths = [{w for w, _ in brute_force_knn(data, ids, q, 10)}
                  for q in queries]

        def recall(ef):
            hits = [index.search(Vector(q), 10, ef_search=ef) for q in queries]
            return sum(len({h.doc_id for h in hs} & t)
                       for hs, t in zip(hits, truths)) / 300

        narrow, wide = recall(16), recall(128)
        assert wide >= narrow
        assert wide >= 0.99

    def test_deterministic_for_fixed_seed(self, rng):
        data = unit_rows(rng, 400, 16)
        queries = unit_rows(rng, 10, 16)
        a, b = build(data, seed=3), build(data, seed=3)
        for q in queries:
            ha = [(h.doc_id, h.distance) for h in a.search(Vector(q), 5)]
            hb = [(h.doc_id, h.distance) for h in b.search(Vector(q), 5)]
            assert ha == hb


class TestTombstones:
    def test_removed_never_returned_but_still_routes(self, rng):
        data = unit_rows(rng, 600, 16)
        index = build(data)
        ids = [f"d{i:05d}" for i in range(len(data))]
        removed = set(ids[::5])
        for doc_id in removed:
            assert index.remove(doc_id)
        assert len(index) == 480
        live_ids = [i for i in ids if i not in removed]
        live_rows = np.stack([data[int(i[1:])] for i in live_ids])
        agree = total = 0
        for q in unit_rows(rng, 25, 16):
            got = [h.doc_id for h in index.search(Vector(q), 8)]
            assert not (set(got) & removed)
            want = [w for w, _ in brute_force_knn(live_rows, live_ids, q, 8)]
            agree += len(set(got) & set(want))
            total += 8
        assert agree / total >= 0.95

    def test_remove_everything_then_search(self):
        index = HnswIndex()
        for i in range(5):
            index.insert(Document(id=f"x{i}", text="", metadata={},
                                  embedding=Vector([float(i), 0.0])))
        for i in range(5):
            index.remove(f"x{i}")
        with pytest.raises(EmptyIndexError):
            index.search(Vector([0.0, 0.0]), 1)

    def test_reinsert_after_remove(self):
        index = HnswIndex()
        for i in range(20):
            index.insert(Document(id=f"x{i}", text="", metadata={},
                                  embedding=Vector([float(i), 0.0])))
        index.remove("x7")
        index.insert(Document(id="x7", text="back", metadata={},
                              embedding=Vector([7.0, 0.0])))
        hits = index.search(Vector([7.0, 0.0]), 1)
        assert hits[0].doc_id == "x7" and hits[0].distance == 0.0


class TestFiltered:
    def test_filtered_subset_and_order(self, rng):
        data = unit_rows(rng, 500, 16)
        index = HnswIndex()
        for i, row in enumerate(data):
            index.insert(Document(id=f"d{i:05d}", text="",
                                  metadata={"bucket": i % 4},
                                  embedding=Vector(row)))
        expr = parse_filter("bucket=2")
        for q in unit_rows(rng, 15, 16):
            hits = index.search_filtered(Vector(q), 6, expr)
            assert 0 < len(hits) <= 6
            assert all(index.get(h.doc_id).metadata["bucket"] == 2 for h in hits)
            assert [h.distance for h in hits] == sorted(h.distance for h in hits)
            assert [h.rank for h in hits] == list(range(1, len(hits) + 1))

    def test_filtered_agrees_with_flat_on_selective_filter(self, rng):
        data = unit_rows(rng, 400, 8)
        hnsw, flat = HnswIndex(), FlatIndex()
        for i, row in enumerate(data):
            doc = Document(id=f"d{i:05d}", text="", metadata={"odd": bool(i % 2)},
                           embedding=Vector(row))
            hnsw.insert(doc)
            flat.insert(doc)
        expr = parse_filter("odd=true")
        agree = total = 0
        for q in unit_rows(rng, 20, 8):
            want = [h.doc_id for h in flat.search_filtered(Vector(q), 5, expr)]
            got = [h.doc_id for h in hnsw.search_filtered(Vector(q), 5, expr)]
            agree += len(set(want) & set(got))
            total += len(want)
        assert agree / total >= 0.97
