"""Command-line interface.

Subcommands:

* ``ingest``         build a corpus (store + LSH index + thumbnails) from scenes
* ``import-features`` build a corpus from externally computed float features
* ``search-exact``   brute-force k-NN over a store
* ``search-lsh``     approximate k-NN via the saved LSH index
* ``lsh-eval``       recall@k and latency percentiles of LSH vs exact
* ``precision-eval`` top-k precision on a synthetic labeled corpus
* ``serve``          run the HTTP query service
* ``bench``          compare the numba and numpy scan backends
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exact import QuerySpec, brute_force_search
from .ingest import (
    IngestJob,
    discover_scenes,
    load_job_config,
    lsh_index_path,
    run_ingest,
)
from .lsh import LshIndex, lsh_search
from .store import FeatureStore
from .tiler import TileGrid


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tilesearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build store + index from scene rasters")
    p.add_argument("--scenes", type=Path, help="directory of scene rasters")
    p.add_argument("--config", type=Path, help="JSON/TOML job config file")
    p.add_argument("--store", type=Path, help="output store prefix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--tile-size", type=int, default=128)
    p.add_argument("--stride", type=int, default=64)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--tables", type=int, default=32)
    p.add_argument("--bits", type=int, default=16)
    p.add_argument("--no-thumbnails", action="store_true")
    p.set_defaults(handler=cmd_ingest)

    for name in ("search-exact", "search-lsh"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} k-NN search")
        p.add_argument("--store", type=Path, required=True)
        p.add_argument("--query-id", required=True, help="tile id to query")
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--include-self", action="store_true")
        p.set_defaults(handler=cmd_search, method=name.split("-")[1])

    p = sub.add_parser(
        "import-features",
        help="build a store from externally computed float features",
    )
    p.add_argument("--floats", type=Path, required=True, help="raw f32 records, 512 per tile")
    p.add_argument("--ids", type=Path, required=True, help="newline-delimited tile ids")
    p.add_argument("--store", type=Path, required=True, help="output store prefix")
    p.add_argument("--seed", type=int, default=0, help="LSH family seed")
    p.add_argument("--tables", type=int, default=32)
    p.add_argument("--bits", type=int, default=16)
    p.set_defaults(handler=cmd_import_features)

    p = sub.add_parser("lsh-eval", help="recall@k + latency percentiles")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_lsh_eval)

    p = sub.add_parser("precision-eval", help="synthetic labeled-corpus precision")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--members", type=int, default=50)
    p.add_argument("--flips", type=int, default=32)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--queries", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_precision_eval)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--store", type=Path)
    p.add_argument("--config", type=Path, help="JSON service config")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-concurrency", type=int, default=None)
    p.add_argument("--cors-origin", action="append", default=[])
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("bench", help="compare scan backends (and LSH vs brute)")
    p.add_argument("--n", type=int, default=2_000_000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--search-n", type=int, default=0, help="also run the search comparison on this many vectors")
    p.add_argument("--k", type=int, default=30)
    p.set_defaults(handler=cmd_bench)

    return parser


def cmd_ingest(args) -> int:
    if args.config:
        job = load_job_config(args.config)
    else:
        if not args.scenes or not args.store:
            print("error: ingest needs --config or both --scenes and --store", file=sys.stderr)
            return 2
        job = IngestJob(
            scene_paths=tuple(discover_scenes(args.scenes)),
            store_prefix=args.store,
            seed=args.seed,
            parallelism=args.parallelism,
            patch_size=args.patch_size,
            grid=TileGrid(tile_size=args.tile_size, stride=args.stride),
            lsh_tables=args.tables,
            lsh_bits_per_key=args.bits,
            thumbnails=not args.no_thumbnails,
        )
    report = run_ingest(job)
    print(
        f"ingested {report.tile_count} tiles from {len(report.scenes)} scene(s) "
        f"in {report.elapsed_s:.1f} s"
    )
    print(f"store: {report.store_path}")
    print(f"index: {report.index_path}")
    return 0


def cmd_search(args) -> int:
    store = FeatureStore.open(args.store)
    spec = QuerySpec(
        query=store.get(args.query_id),
        k=args.k,
        exclude_self=not args.include_self,
        self_id=args.query_id,
    )
    if args.method == "exact":
        results = brute_force_search(store, spec)
    else:
        index = LshIndex.load(lsh_index_path(args.store))
        results = lsh_search(index, store, spec)
    for r in results:
        print(f"{r.rank}\t{r.id}\t{r.distance}")
    return 0


def cmd_import_features(args) -> int:
    from .featurizer import binarize, import_float_features, load_tile_ids
    from .lsh import build_index, make_family
    from .store import FeatureStoreBuilder

    ids = load_tile_ids(args.ids)
    builder = FeatureStoreBuilder()
    for tile_id, values in import_float_features(args.floats, ids):
        builder.put(tile_id, binarize(values))
    store = builder.seal(args.store)
    family = make_family(args.seed, tables=args.tables, bits_per_key=args.bits)
    index = build_index(store, family)
    index.save(lsh_index_path(args.store))
    print(f"imported {store.n} features into {args.store}")
    return 0


def cmd_lsh_eval(args) -> int:
    from .evalharness import lsh_evaluation

    store = FeatureStore.open(args.store)
    index = LshIndex.load(lsh_index_path(args.store))
    ev = lsh_evaluation(store, index, n_queries=args.queries, k=args.k, seed=args.seed)
    print(f"queries: {ev.queries}  k: {ev.k}")
    print(f"recall@{ev.k}: {ev.recall_at_k:.4f} (analytic prediction {ev.predicted_recall_at_k:.4f})")
    print(
        f"lsh latency ms: p50 {ev.latency_p50_ms:.2f}  "
        f"p90 {ev.latency_p90_ms:.2f}  p99 {ev.latency_p99_ms:.2f}"
    )
    return 0


def cmd_precision_eval(args) -> int:
    from .evalharness import precision_evaluation

    ev = precision_evaluation(
        classes=args.classes,
        members_per_class=args.members,
        flips=args.flips,
        k=args.k,
        n_queries=args.queries,
        seed=args.seed,
    )
    print(
        f"synthetic corpus: {ev.classes} classes x {ev.members_per_class} members, top-{ev.k}"
    )
    print(f"precision (exact): {ev.precision_exact:.3f}")
    print(f"precision (lsh):   {ev.precision_lsh:.3f}")
    return 0


def cmd_serve(args) -> int:
    from dataclasses import replace

    from .service import ServiceConfig, serve

    cfg = ServiceConfig.load(args.config)
    if args.store:
        cfg = replace(cfg, store_prefix=args.store)
    if args.host:
        cfg = replace(cfg, listen_addr=args.host)
    if args.port:
        cfg = replace(cfg, port=args.port)
    if args.max_concurrency:
        cfg = replace(cfg, max_concurrency=args.max_concurrency)
    if args.cors_origin:
        cfg = replace(cfg, cors_origins=tuple(args.cors_origin))
    serve(cfg)
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_scan, bench_search, format_report

    rates = bench_scan(n=args.n, repeats=args.repeats, seed=args.seed)
    comparison = None
    if args.search_n:
        comparison = bench_search(n=args.search_n, k=args.k, seed=args.seed)
    print(format_report(rates, comparison))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
