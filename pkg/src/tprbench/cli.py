"""Command-line surface.

Subcommands:
    eval     score query embeddings (or a precomputed similarity matrix)
             against the test gallery and write a report
    stats    corpus word-count and entropy statistics from annotations
    convert  convert embedding files between UFEB and .npz

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .annotations import load_annotations
from .embeddings import (
    MAGIC,
    load_embeddings,
    load_embeddings_npz,
    write_embeddings,
    write_embeddings_npz,
)
from .evaluation import expand_queries, file_digest, render_report, run_evaluation
from .exceptions import InvalidInputError
from .metrics import MetricConfig
from .stats import compute_corpus_stats, histogram_export, stats_to_dict


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tprbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run the retrieval evaluation protocol")
    p_eval.add_argument("--annotations", required=True)
    p_eval.add_argument("--query-emb", help="UFEB file of caption-query embeddings")
    p_eval.add_argument("--gallery-emb", help="UFEB file of gallery-image embeddings")
    p_eval.add_argument("--sim", help="UFEB file holding a precomputed query x gallery similarity matrix")
    p_eval.add_argument("--ranks", default="1,5,10", help="comma-separated CMC cutoffs")
    p_eval.add_argument("--msd-k", type=float, default=1.0)
    p_eval.add_argument("--epsilon", type=float, default=1e-6)
    p_eval.add_argument("--per-query", action="store_true", help="include per-query metrics in the report")
    p_eval.add_argument("--avg-by", choices=("caption", "image"), default="caption")
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--format", choices=("json", "md"), default="json")
    p_eval.add_argument("--fig", help="also render per-query AP/SD distributions to this image file")

    p_stats = sub.add_parser("stats", help="corpus text statistics from an annotation file")
    p_stats.add_argument("--annotations", required=True)
    p_stats.add_argument("--out", required=True)
    p_stats.add_argument("--hist", help="write the word-count histogram as CSV")
    p_stats.add_argument("--fig", help="also render the word-count histogram to this image file")

    p_conv = sub.add_parser("convert", help="convert embedding files between UFEB and npz")
    p_conv.add_argument("--in", dest="src", required=True)
    p_conv.add_argument("--out", dest="dst", required=True)
    p_conv.add_argument("--to", choices=("ufeb", "npz"), help="target format (default: from output extension)")
    return parser


def _parse_ranks(text: str) -> tuple[int, ...]:
    try:
        cutoffs = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise InvalidInputError(f"--ranks must be comma-separated integers, got {text!r}") from exc
    if not cutoffs:
        raise InvalidInputError("--ranks must name at least one cutoff")
    return cutoffs


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = MetricConfig(msd_k=args.msd_k, rank_cutoffs=_parse_ranks(args.ranks), epsilon=args.epsilon)
    annotations = load_annotations(args.annotations)
    provenance = {"annotations": file_digest(args.annotations)}
    want_per_query = args.per_query or bool(args.fig)

    if args.sim is not None:
        sim_table = load_embeddings(args.sim)
        expected_qids = expand_queries(annotations).query_ids
        if list(sim_table.ids) != list(expected_qids):
            raise InvalidInputError(
                "--sim row ids do not match the caption queries derived from the annotations"
            )
        provenance["similarity"] = file_digest(args.sim)
        report = run_evaluation(
            annotations,
            similarity=sim_table.vectors,
            cfg=cfg,
            workers=args.workers,
            include_per_query=want_per_query,
            average_by=args.avg_by,
            provenance=provenance,
        )
    else:
        if not args.query_emb or not args.gallery_emb:
            raise InvalidInputError("eval needs --query-emb and --gallery-emb (or --sim)")
        provenance["query_embeddings"] = file_digest(args.query_emb)
        provenance["gallery_embeddings"] = file_digest(args.gallery_emb)
        report = run_evaluation(
            annotations,
            load_embeddings(args.query_emb),
            load_embeddings(args.gallery_emb),
            cfg=cfg,
            workers=args.workers,
            include_per_query=want_per_query,
            average_by=args.avg_by,
            provenance=provenance,
        )

    if args.fig:
        from .figures import save_metric_distributions

        save_metric_distributions(report.per_query, args.fig)
    if not args.per_query and report.per_query is not None:
        report = dataclasses.replace(report, per_query=None)
    Path(args.out).write_bytes(render_report(report, args.format))
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    records = load_annotations(args.annotations)
    captions = [caption for record in records for caption in record.captions]
    stats = compute_corpus_stats(captions)
    payload = stats_to_dict(stats)
    payload["num_captions"] = len(captions)
    payload["provenance"] = {"annotations": file_digest(args.annotations)}
    Path(args.out).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if args.hist:
        histogram_export(stats, args.hist)
    if args.fig:
        from .figures import save_wordcount_histogram

        save_wordcount_histogram(stats.histogram, args.fig)
    return 0


def _detect_format(path: str) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "ufeb" if head == MAGIC else "npz"


def _cmd_convert(args: argparse.Namespace) -> int:
    src_format = _detect_format(args.src)
    table = load_embeddings(args.src) if src_format == "ufeb" else load_embeddings_npz(args.src)
    target = args.to or ("npz" if args.dst.endswith(".npz") else "ufeb")
    if target == "npz":
        write_embeddings_npz(table, args.dst)
    else:
        write_embeddings(table, args.dst)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "stats":
            return _cmd_stats(args)
        return _cmd_convert(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
