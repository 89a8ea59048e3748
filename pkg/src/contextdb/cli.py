"""Command-line surface: ingest, query, demo-shoes, chat, bench.

Exit codes are a stable scripting contract: 0 success, 1 usage or parse
errors (including filter-grammar diagnostics), 2 data or storage errors.

The data directory comes from $CONTEXTDB_HOME (default ~/.contextdb) and may
hold a `config` file of `key = value` lines supplying defaults; flags always
win over config. An index directory (as written by `ingest`) holds the
snapshot itself plus `embedder.json` recording which embedder produced it,
so `query` can embed question text the same way.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .cache import DEFAULT_CAPACITY, DEFAULT_TTL_MS, ResponseCache
from .conversation import ConversationStore
from .core import (Document, EmbeddingProvider, FixtureEmbedder, HashEmbedder,
                   MetaValue, Vector, fixture_embed)
from .errors import CatalogError, ContextDbError, FilterParseError, StageError
from .filters import parse_filter
from .index import (FlatIndex, HnswIndex, HnswParams, IvfIndex, IvfParams,
                    load_index)
from .pipeline import MockLlm, Pipeline
from .profiles import ProfileStore

SNAPSHOT_NAME = "index.snap"
EMBEDDER_META_NAME = "embedder.json"

DEMO_QUESTION = "I need comfortable running shoes under $100"

# Reebok/ASICS prices are the worked example's; the Nike/Adidas prices are
# fixture choices kept above the $100 budget line.
SHOE_CATALOG = (
    {"id": "nike-zoomx", "name": "Nike ZoomX Infinity Run", "price": 150},
    {"id": "adidas-ultraboost", "name": "Adidas UltraBoost", "price": 120},
    {"id": "reebok-floatride", "name": "Reebok Floatride", "price": 90},
    {"id": "asics-gel-kayano", "name": "ASICS Gel-Kayano", "price": 110},
)

_EXPECTED_DEMO = {
    "nike-zoomx": 1.97,
    "adidas-ultraboost": 1.12,
    "reebok-floatride": 0.22,
    "asics-gel-kayano": 0.58,
}
_EXPECTED_RANKING = ["reebok-floatride", "asics-gel-kayano",
                     "adidas-ultraboost", "nike-zoomx"]


def demo_index() -> FlatIndex:
    """The four-shoe catalog under the 2D fixture embeddings."""
    index = FlatIndex()
    for rec in SHOE_CATALOG:
        index.insert(Document(
            id=rec["id"], text=rec["name"],
            metadata={"brand": rec["name"].split()[0], "price": rec["price"]},
            embedding=fixture_embed(rec["name"])))
    return index


def data_home() -> Path:
    return Path(os.environ.get("CONTEXTDB_HOME",
                               str(Path.home() / ".contextdb")))


def load_config(path: Path | None = None) -> dict[str, str]:
    """`key = value` lines; blank lines and #-comments ignored; quotes around
    a value are stripped."""
    if path is None:
        path = data_home() / "config"
    if not path.exists():
        return {}
    config: dict[str, str] = {}
    for raw in path.read_text("utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            continue
        value = value.strip()
        if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
            value = value[1:-1]
        config[key.strip()] = value
    return config


def _fmt_value(value: MetaValue) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _fmt_metadata(metadata) -> str:
    return " ".join(f"{k}={_fmt_value(metadata[k])}" for k in sorted(metadata))


def make_embedder(choice: str, dim: int | None, seed: int) -> EmbeddingProvider:
    if choice == "fixture":
        if dim not in (None, 2):
            raise CatalogError(
                f"the fixture embedder is 2-dimensional, --dim {dim} conflicts")
        return FixtureEmbedder()
    if choice == "hash":
        return HashEmbedder(dim=dim if dim is not None else 64, seed=seed)
    raise CatalogError(f"unknown embedder {choice!r}")


def _load_index_dir(index_dir: Path):
    meta_path = index_dir / EMBEDDER_META_NAME
    if not meta_path.exists():
        raise CatalogError(
            f"{index_dir} is not an index directory (missing "
            f"{EMBEDDER_META_NAME}; run `ingest` first)")
    meta = json.loads(meta_path.read_text("utf-8"))
    index = load_index(index_dir / SNAPSHOT_NAME)
    embedder = make_embedder(meta["embedder"], meta.get("dim"),
                             meta.get("seed", 0))
    return index, embedder


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    config = load_config()
    choice = args.embedder or config.get("embedder", "hash")
    dim = args.dim if args.dim is not None else (
        int(config["dim"]) if "dim" in config else None)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    embedder = make_embedder(choice, dim, seed)

    catalog_path = Path(args.catalog)
    index = FlatIndex()
    count = 0
    with open(catalog_path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                doc_id, text = rec["id"], rec["text"]
                if "embedding" in rec and rec["embedding"] is not None:
                    emb = Vector(rec["embedding"])
                else:
                    emb = embedder.embed(text)
                index.insert(Document(id=doc_id, text=text,
                                      metadata=rec.get("metadata", {}),
                                      embedding=emb))
            except Exception as exc:
                print(f"warning: line {lineno}: {exc}; skipped",
                      file=sys.stderr)
                continue
            count += 1
    if count == 0:
        raise CatalogError(f"no valid records in {catalog_path}")

    index_dir = Path(args.index)
    index_dir.mkdir(parents=True, exist_ok=True)
    index.save(index_dir / SNAPSHOT_NAME)
    (index_dir / EMBEDDER_META_NAME).write_text(json.dumps(
        {"embedder": choice, "dim": embedder.dim, "seed": seed,
         "kind": index.kind}) + "\n", encoding="utf-8")
    print(f"ingested {count} documents into {index_dir}")
    return 0


def cmd_query(args) -> int:
    config = load_config()
    k = args.k if args.k is not None else int(config.get("k", 4))
    filt = parse_filter(args.filter if args.filter is not None
                        else config.get("filter", ""))
    index, embedder = _load_index_dir(Path(args.index))
    qvec = embedder.embed(args.q)
    hits = index.search_filtered(qvec, k, filt) if filt \
        else index.search(qvec, k)
    if not hits:
        print("no results")
        return 0
    for hit in hits:
        doc = index.get(hit.doc_id)
        meta = f"  {_fmt_metadata(doc.metadata)}" if doc.metadata else ""
        print(f"{hit.rank}. {hit.doc_id}  distance={hit.distance:.2f}{meta}")
    return 0


def cmd_demo_shoes(args) -> int:
    index = demo_index()
    qvec = fixture_embed(DEMO_QUESTION)
    print(f"question: {DEMO_QUESTION}")
    print(f"query embedding: [{qvec.values[0]:.1f}, {qvec.values[1]:.1f}]")
    print()
    problems: list[str] = []

    print("catalog distances:")
    for rec in SHOE_CATALOG:
        doc = index.get(rec["id"])
        d = float(np.linalg.norm(doc.embedding.values - qvec.values))
        print(f"distance {rec['id']} {d:.2f}")
        expected = _EXPECTED_DEMO[rec["id"]]
        if abs(d - expected) > 0.005:
            problems.append(
                f"distance {rec['id']}: expected {expected}, got {d:.4f}")
    print()

    hits = index.search(qvec, k=4)
    ranking = [h.doc_id for h in hits]
    print("ranking: " + ", ".join(ranking))
    if ranking != _EXPECTED_RANKING:
        problems.append(
            f"ranking: expected {_EXPECTED_RANKING}, got {ranking}")

    filtered = index.search_filtered(qvec, k=1, filt=parse_filter("price<100"))
    if filtered:
        top = filtered[0]
        price = index.get(top.doc_id).metadata["price"]
        print(f"top_filtered: {top.doc_id} price={price} "
              f"distance={top.distance:.2f}")
        if top.doc_id != "reebok-floatride" or price != 90:
            problems.append(
                f"filtered pick: expected reebok-floatride at 90, "
                f"got {top.doc_id} at {price}")
        elif abs(top.distance - 0.22) > 0.005:
            problems.append(
                f"filtered distance: expected 0.22, got {top.distance:.4f}")
    else:
        problems.append("filtered search (price<100) returned nothing")

    print()
    if problems:
        print("DEMO_FAIL")
        for p in problems:
            print(f"  {p}")
        return 2
    print("DEMO_OK")
    return 0


def cmd_chat(args) -> int:
    config = load_config()
    k = args.k if args.k is not None else int(config.get("k", 4))
    filt = parse_filter(args.filter if args.filter is not None
                        else config.get("filter", ""))
    home = data_home()
    home.mkdir(parents=True, exist_ok=True)

    index_dir = Path(config["index_dir"]) if "index_dir" in config \
        else home / "index"
    if (index_dir / SNAPSHOT_NAME).exists():
        index, embedder = _load_index_dir(index_dir)
    else:
        # out-of-the-box demo: chat against the shoe catalog
        index, embedder = demo_index(), FixtureEmbedder()

    conversations = ConversationStore(home / "conversations.jsonl")
    profiles = ProfileStore(home / "profiles.jsonl")
    cache = ResponseCache(
        capacity=int(config.get("cache_capacity", DEFAULT_CAPACITY)),
        default_ttl_ms=int(config.get("cache_ttl_ms", DEFAULT_TTL_MS)))
    pipeline = Pipeline(
        index=index, conversations=conversations, profiles=profiles,
        embedder=embedder, llm=MockLlm(), cache=cache,
        history_window=int(config.get("history_window", 10)))
    try:
        for raw in sys.stdin:
            question = raw.strip()
            if not question:
                continue
            try:
                resp = pipeline.handle_query(args.session, args.user,
                                             question, k=k,
                                             filt=filt if filt else None)
            except StageError as exc:
                print(f"error: {exc}", file=sys.stderr)
                continue
            print(resp.text)
            if resp.cached:
                print("(cached)")
            if args.verbose:
                for stage, ms in resp.latency_breakdown.items():
                    print(f"latency {stage}={ms:.3f}ms")
                if resp.retrieved:
                    print("retrieved: "
                          + ", ".join(h.doc_id for h in resp.retrieved))
    finally:
        conversations.close()
        profiles.close()
    return 0


def _build_bench_index(kind: str, args, data: np.ndarray,
                       ids: list[str]):
    if kind == "flat":
        index = FlatIndex()
    elif kind == "hnsw":
        index = HnswIndex(HnswParams(
            m=args.m, ef_construction=args.ef_construction,
            ef_search=args.ef_search, seed=args.seed))
    else:
        index = IvfIndex(IvfParams(
            nlist=args.nlist, nprobe=args.nprobe,
            kmeans_iters=args.kmeans_iters, seed=args.seed))
        index.train(data)
    for i, row in enumerate(data):
        index.insert(Document(id=ids[i], text=ids[i], metadata={},
                              embedding=Vector(row)))
    return index


def cmd_bench(args) -> int:
    if args.n < 100:
        print("error: --n must be >= 100", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    data = rng.standard_normal((args.n, args.dim))
    data /= np.linalg.norm(data, axis=1, keepdims=True)
    queries = rng.standard_normal((100, args.dim))
    queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    ids = [f"doc-{i:06d}" for i in range(args.n)]

    flat = FlatIndex()
    for i, row in enumerate(data):
        flat.insert(Document(id=ids[i], text=ids[i], metadata={},
                             embedding=Vector(row)))

    t0 = time.perf_counter()
    index = _build_bench_index(args.kind, args, data, ids)
    build_ms = (time.perf_counter() - t0) * 1000.0

    k = args.k
    recalls, latencies = [], []
    for q in queries:
        qv = Vector(q)
        truth = {h.doc_id for h in flat.search(qv, k)}
        t0 = time.perf_counter()
        hits = index.search(qv, k)
        latencies.append((time.perf_counter() - t0) * 1000.0)
        recalls.append(len(truth & {h.doc_id for h in hits}) / len(truth))
    lat = np.array(latencies)

    print(f"kind={args.kind} n={args.n} dim={args.dim} k={k} seed={args.seed}")
    print(f"recall@{k}={float(np.mean(recalls)):.4f}")
    print(f"latency_build_ms={build_ms:.1f}")
    print(f"latency_p50_ms={float(np.percentile(lat, 50)):.3f}")
    print(f"latency_p95_ms={float(np.percentile(lat, 95)):.3f}")
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract reserves 2 for data
    errors, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contextdb",
                     description="Embedded multi-context store and RAG "
                                 "pipeline")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("ingest", help="build an index from a JSONL catalog")
    p.add_argument("--catalog", required=True)
    p.add_argument("--index", required=True, help="index directory to write")
    p.add_argument("--embedder", choices=["hash", "fixture"])
    p.add_argument("--dim", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="search an ingested index")
    p.add_argument("--index", required=True)
    p.add_argument("--q", required=True, help="question text")
    p.add_argument("--k", type=int)
    p.add_argument("--filter", help='e.g. \'price<100 && brand="Reebok"\'')
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("demo-shoes",
                       help="reproduce the worked running-shoes example")
    p.set_defaults(func=cmd_demo_shoes)

    p = sub.add_parser("chat", help="interactive pipeline loop over stdin")
    p.add_argument("--session", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--filter")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("bench", help="recall/latency vs the flat oracle")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kind", choices=["flat", "hnsw", "ivf"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--ef-construction", type=int, default=200)
    p.add_argument("--ef-search", type=int, default=64)
    p.add_argument("--nlist", type=int)
    p.add_argument("--nprobe", type=int)
    p.add_argument("--kmeans-iters", type=int, default=20)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FilterParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ContextDbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
