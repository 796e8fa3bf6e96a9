"""Command line interface.

Subcommands mirror the benchmark pipeline: ingest raw text, split the
corpus, run segmenters, corrupt gold for training data, emit SFT pairs,
score predictions, summarize ranks, and inspect annotation agreement.

Service credentials are never accepted on the command line; clients read
them from the environment variable named in their config (default
CONVSEG_API_KEY).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, runner
from .annotation import AGREEMENT_TASKS
from .corpus import DATA_SOURCES
from .ingest import FORMATS
from .segmenters import SEGMENTER_NAMES, build_segmenter


def _load_config(path: str) -> dict:
    """Read a TOML or JSON config file, deciding by suffix."""
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def _parse_floats(text: str, n: int, flag: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != n:
        raise SystemExit(f"{flag} needs {n} comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_preds(entries: list[str]) -> dict[str, str]:
    preds = {}
    for entry in entries:
        name, sep, path = entry.partition("=")
        if not sep or not name or not path:
            raise SystemExit(f"--pred expects NAME=DIR, got {entry!r}")
        if name in preds:
            raise SystemExit(f"duplicate prediction name {name!r}")
        preds[name] = path
    return preds


def _build_segmenters(args) -> dict:
    """Resolve --segmenter flags plus an optional config file into named
    estimator instances."""
    specs: list[dict] = []
    if args.config:
        config = _load_config(args.config)
        specs.extend(config.get("segmenters", []))
    for name in args.segmenter or []:
        spec: dict = {"name": name, "params": {}}
        if name == "llm":
            if not (args.llm_endpoint and args.llm_model):
                raise SystemExit(
                    "--segmenter llm needs --llm-endpoint and --llm-model "
                    "(or a --config entry)"
                )
            spec["params"] = {
                "config": {"endpoint": args.llm_endpoint, "model_id": args.llm_model}
            }
        elif name == "embedding-tiling":
            if args.vector_file:
                provider = {"provider_kind": "vector_file", "endpoint_or_path": args.vector_file}
                options: dict = {}
            elif args.embedding_endpoint:
                if not args.embedding_model:
                    raise SystemExit("--embedding-endpoint needs --embedding-model")
                provider = {
                    "provider_kind": "http_service",
                    "endpoint_or_path": args.embedding_endpoint,
                    "model_id": args.embedding_model,
                    "dimension": args.embedding_dim,
                }
                options = {"cache_dir": args.embedding_cache} if args.embedding_cache else {}
            else:
                raise SystemExit(
                    "--segmenter embedding-tiling needs --vector-file or "
                    "--embedding-endpoint (or a --config entry)"
                )
            spec["params"] = {"provider": provider, "provider_options": options}
        specs.append(spec)
    if not specs:
        raise SystemExit("pass --segmenter at least once, or --config with a segmenters list")
    segmenters = {}
    for spec in specs:
        name = spec["name"]
        model_name = spec.get("model_name", name)
        if model_name in segmenters:
            raise SystemExit(f"duplicate model name {model_name!r}; set model_name in the config")
        segmenters[model_name] = build_segmenter(name, spec.get("params"))
    return segmenters


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convseg",
        description="Conversational topic segmentation toolkit and benchmark runner.",
    )
    parser.add_argument("--version", action="version", version=f"convseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert raw text files into document JSONL")
    p.add_argument("inputs", nargs="*", help="raw text files")
    p.add_argument("--out", required=True, help="output directory (docs/ goes inside)")
    p.add_argument("--format", default="auto", choices=FORMATS)
    p.add_argument("--manifest", help="JSON list of {file, format, doc_id, metadata...}")
    p.add_argument("--stub-manifest", help="JSON stub list for licensed material")
    p.add_argument("--source-dir", help="directory with the licensed files the stubs name")
    p.add_argument("--data-source", default="other", choices=DATA_SOURCES)
    p.add_argument("--language-clue", default="")
    p.add_argument("--genre", default="")

    p = sub.add_parser("split", help="stratified train/valid/test split")
    p.add_argument("--docs", required=True)
    p.add_argument("--out", required=True, help="split manifest path")
    p.add_argument("--ratios", default="0.70,0.15,0.15")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("segment", help="run segmenters over documents")
    p.add_argument("--docs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segmenter", action="append", choices=SEGMENTER_NAMES)
    p.add_argument("--config", help="TOML or JSON file with a segmenters list")
    p.add_argument("--split", help="split manifest from `convseg split`")
    p.add_argument("--subset", default="test", choices=("train", "valid", "test"))
    p.add_argument("--gold", help="gold directory; checked before any model runs")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--llm-endpoint")
    p.add_argument("--llm-model")
    p.add_argument("--vector-file")
    p.add_argument("--embedding-endpoint")
    p.add_argument("--embedding-model")
    p.add_argument("--embedding-dim", type=int, default=0)
    p.add_argument("--embedding-cache")

    p = sub.add_parser("corrupt", help="merge gold boundaries into draft blocks")
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmf", help="four comma-separated span probabilities")

    p = sub.add_parser("emit-sft", help="corruption-restoration SFT pairs as JSONL")
    p.add_argument("--docs", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmf")
    p.add_argument("--split")
    p.add_argument("--subset", default="train", choices=("train", "valid", "test"))
    p.add_argument("--exclude-source", choices=DATA_SOURCES)
    p.add_argument("--name", default="sft.jsonl")

    p = sub.add_parser("score", help="score prediction directories against gold")
    p.add_argument("--docs", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", action="append", required=True, help="NAME=DIR, repeatable")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, help="fixed probe width (default: per-document)")

    p = sub.add_parser("report", help="rank models per subset from a score report")
    p.add_argument("--scores", required=True, help="report.json from `convseg score`")
    p.add_argument("--out", required=True)
    p.add_argument("--metric", default="pk", choices=("f1", "pk", "wd", "topic_acc"))

    p = sub.add_parser("stats", help="corpus statistics table")
    p.add_argument("--docs", required=True)
    p.add_argument("--gold", required=True)

    p = sub.add_parser("agree", help="inter-annotator agreement between two sheets")
    p.add_argument("--sheet-a", required=True)
    p.add_argument("--sheet-b", required=True)
    p.add_argument("--task", default="within_segment", choices=AGREEMENT_TASKS)

    p = sub.add_parser("ablate", help="leave-one-source-out SFT sets")
    p.add_argument("--docs", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--leave-out", required=True, help="comma-separated data sources")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pmf")
    p.add_argument("--split")
    p.add_argument("--subset", default="train", choices=("train", "valid", "test"))

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "ingest":
        docs = runner.run_ingest(
            args.inputs,
            args.out,
            fmt=args.format,
            manifest_path=args.manifest,
            stub_manifest=args.stub_manifest,
            source_dir=args.source_dir,
            data_source=args.data_source,
            language_clue=args.language_clue,
            genre=args.genre,
        )
        print(f"ingested {len(docs)} documents into {args.out}/docs")
    elif args.command == "split":
        ratios = _parse_floats(args.ratios, 3, "--ratios")
        manifest = runner.run_split(args.docs, args.out, ratios=ratios, seed=args.seed)
        print(
            f"split {len(manifest.train)}/{len(manifest.valid)}/{len(manifest.test)} "
            f"(train/valid/test) -> {args.out}"
        )
        for warning in manifest.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    elif args.command == "segment":
        segmenters = _build_segmenters(args)
        predictions = runner.run_segment(
            args.docs,
            args.out,
            segmenters,
            split_path=args.split,
            subset=args.subset,
            gold_dir=args.gold,
            workers=args.workers,
        )
        for model in sorted(predictions):
            print(f"{model}: {len(predictions[model])} documents -> {args.out}/predictions/{model}")
    elif args.command == "corrupt":
        pmf = _parse_floats(args.pmf, 4, "--pmf") if args.pmf else None
        blocks = runner.run_corrupt(args.gold, args.out, seed=args.seed, pmf=pmf)
        print(f"corrupted {len(blocks)} documents -> {args.out}/blocks")
    elif args.command == "emit-sft":
        pmf = _parse_floats(args.pmf, 4, "--pmf") if args.pmf else None
        count = runner.run_emit_sft(
            args.docs,
            args.gold,
            args.out,
            seed=args.seed,
            pmf=pmf,
            split_path=args.split,
            subset=args.subset,
            exclude_source=args.exclude_source,
            out_name=args.name,
        )
        print(f"wrote {count} SFT records -> {Path(args.out) / args.name}")
    elif args.command == "score":
        report = runner.run_score(
            args.docs, args.gold, _parse_preds(args.pred), args.out, k=args.k
        )
        print(report.to_text_table(), end="")
        print(f"report -> {args.out}/report.json")
    elif args.command == "report":
        ranks = runner.run_report(args.scores, args.out, metric=args.metric)
        for model in sorted(ranks):
            print(f"{model}: median rank {ranks[model]['median']:g} on {args.metric}")
        print(f"ranks -> {args.out}/ranks-{args.metric}.csv")
    elif args.command == "stats":
        print(runner.run_stats(args.docs, args.gold), end="")
    elif args.command == "agree":
        stats = runner.run_agree(args.sheet_a, args.sheet_b, args.task)
        print(json.dumps(stats, indent=2, sort_keys=True))
    elif args.command == "ablate":
        counts = runner.run_ablate(
            args.docs,
            args.gold,
            args.out,
            leave_out=[s for s in args.leave_out.split(",") if s],
            seed=args.seed,
            pmf=_parse_floats(args.pmf, 4, "--pmf") if args.pmf else None,
            split_path=args.split,
            subset=args.subset,
        )
        for source in sorted(counts):
            print(f"without {source}: {counts[source]} records")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
