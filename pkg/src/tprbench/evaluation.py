"""Protocol execution: similarities, rank lists, evaluation runs, reports.

Queries are captions (text side), the gallery is the test-split images,
and a gallery item matches a query when both carry the same person_id.
Caption queries are identified as "<image_id>#<caption_index>", e.g. the
second caption of image "im3" is query "im3#1". Text queries never appear
in the image gallery, so nothing is excluded from it.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .annotations import AnnotationRecord
from .embeddings import EmbeddingTable
from .exceptions import InvalidInputError
from .metrics import MetricConfig, QueryMetrics, RankedList, score_sorted

AVERAGING_MODES = ("caption", "image")


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metrics plus enough metadata to reproduce them."""

    rank_k: dict[int, float]
    map: float
    msd: float
    num_queries: int
    skipped_queries: int
    config: MetricConfig
    provenance: dict[str, str]
    average_by: str = "caption"
    per_query: tuple[dict, ...] | None = None


def query_id(image_id: str, caption_index: int) -> str:
    """Canonical id of one caption query."""
    return f"{image_id}#{caption_index}"


def compute_similarity_matrix(queries: EmbeddingTable, gallery: EmbeddingTable) -> np.ndarray:
    """Cosine similarity of every query row against every gallery row.

    Accumulates in float64; the result is clipped into [-1, 1].
    """
    if queries.dim != gallery.dim:
        raise InvalidInputError(
            f"dimension mismatch: queries have dim {queries.dim}, gallery has dim {gallery.dim}"
        )
    sim_parts = []
    for name, table in (("query", queries), ("gallery", gallery)):
        vecs = table.vectors.astype(np.float64)
        norms = np.linalg.norm(vecs, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise InvalidInputError(f"zero-norm vector in {name} table at row {int(zero[0])}")
        sim_parts.append(vecs / norms[:, None])
    sim = sim_parts[0] @ sim_parts[1].T
    np.clip(sim, -1.0, 1.0, out=sim)
    return sim


def _ranking_order(row: np.ndarray) -> np.ndarray:
    # Stable sort on the negated scores: descending similarity, ties kept
    # in ascending gallery index order.
    return np.argsort(-row, kind="stable")


def build_rank_lists(
    sim: np.ndarray,
    query_person_ids: Sequence[str],
    gallery_person_ids: Sequence[str],
) -> list[RankedList]:
    """Turn a similarity matrix into one validated RankedList per query.

    Row i of sim belongs to query_person_ids[i]; column j to
    gallery_person_ids[j].
    """
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape != (len(query_person_ids), len(gallery_person_ids)):
        raise InvalidInputError(
            f"similarity shape {sim.shape} does not match "
            f"{len(query_person_ids)} queries x {len(gallery_person_ids)} gallery items"
        )
    gallery = np.asarray(gallery_person_ids, dtype=object)
    lists = []
    for i, person in enumerate(query_person_ids):
        order = _ranking_order(sim[i])
        lists.append(RankedList(sims=sim[i][order], matched=gallery[order] == person))
    return lists


def _sha256(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def table_digest(table: EmbeddingTable) -> str:
    """Content digest of an embedding table (ids + raw float32 bytes)."""
    ids_blob = json.dumps(list(table.ids)).encode("utf-8")
    return _sha256(ids_blob, np.ascontiguousarray(table.vectors, dtype="<f4").tobytes())


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return _sha256(fh.read())


class QueryPlan(NamedTuple):
    """Test-split protocol layout derived from annotations (file order)."""

    gallery_ids: list[str]
    gallery_persons: list[str]
    query_ids: list[str]
    query_persons: list[str]
    image_index: np.ndarray  # per query, index of its source image


def expand_queries(records: Sequence[AnnotationRecord]) -> QueryPlan:
    """Expand test captions into the canonical query/gallery ordering."""
    test_records = [r for r in records if r.split == "test"]
    if not test_records:
        raise InvalidInputError("annotations contain no test-split records")
    gallery_ids = [r.image_id for r in test_records]
    gallery_persons = [r.person_id for r in test_records]
    qids, qpersons, qimage = [], [], []
    for img_idx, record in enumerate(test_records):
        for cap_idx in range(len(record.captions)):
            qids.append(query_id(record.image_id, cap_idx))
            qpersons.append(record.person_id)
            qimage.append(img_idx)
    return QueryPlan(gallery_ids, gallery_persons, qids, qpersons, np.array(qimage))


def _weighted_mean(values: np.ndarray, image_of: np.ndarray, average_by: str) -> float:
    """Mean over captions, or mean-of-image-means when averaging by image."""
    if average_by == "caption":
        return float(np.mean(values))
    means = []
    for img in np.unique(image_of):
        means.append(float(np.mean(values[image_of == img])))
    return float(np.mean(means))


def evaluate_rankings(
    sim: np.ndarray,
    query_persons: Sequence[str],
    gallery_persons: Sequence[str],
    *,
    cfg: MetricConfig | None = None,
    workers: int = 1,
    include_per_query: bool = False,
    average_by: str = "caption",
    query_ids: Sequence[str] | None = None,
    image_index: np.ndarray | None = None,
    provenance: dict[str, str] | None = None,
) -> EvalReport:
    """Score a similarity matrix: the evaluation engine under run_evaluation.

    Results are independent of `workers`: per-query scores land in a
    fixed slot and the final reduction always runs in ascending query
    order.
    """
    cfg = cfg or MetricConfig()
    if average_by not in AVERAGING_MODES:
        raise InvalidInputError(f"average_by must be one of {AVERAGING_MODES}")
    if workers < 1:
        raise InvalidInputError("workers must be >= 1")
    sim = np.asarray(sim, dtype=np.float64)
    n_queries = len(query_persons)
    if sim.shape != (n_queries, len(gallery_persons)):
        raise InvalidInputError(
            f"similarity shape {sim.shape} does not match "
            f"{n_queries} queries x {len(gallery_persons)} gallery items"
        )
    if not np.all(np.isfinite(sim)):
        raise InvalidInputError("similarity matrix contains non-finite values")
    if query_ids is None:
        query_ids = [f"q{i}" for i in range(n_queries)]
    if image_index is None:
        image_index = np.arange(n_queries)

    gallery_person_arr = np.asarray(gallery_persons, dtype=object)
    results: list[QueryMetrics | None] = [None] * n_queries

    def score_query(i: int) -> None:
        order = _ranking_order(sim[i])
        matched = gallery_person_arr[order] == query_persons[i]
        results[i] = score_sorted(sim[i][order], matched, cfg)

    if workers == 1:
        for i in range(n_queries):
            score_query(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(score_query, range(n_queries)))

    scorable = np.array([m is not None for m in results])
    if not scorable.any():
        raise InvalidInputError("no scorable queries: no query shares an identity with the gallery")

    sds = np.array([m.sd for m in results if m is not None])
    aps = np.array([m.ap for m in results if m is not None])
    first_hits = np.array([m.first_hit_rank for m in results if m is not None])
    image_scorable = image_index[scorable]

    rank_k = {
        k: _weighted_mean((first_hits <= k).astype(np.float64), image_scorable, average_by)
        for k in cfg.rank_cutoffs
    }

    per_query = None
    if include_per_query:
        per_query = tuple(
            {
                "query_id": qid,
                "ap": m.ap,
                "sd": m.sd,
                "pnr": m.pnr,
                "asp": m.asp,
                "first_hit_rank": m.first_hit_rank,
            }
            for qid, m in zip(query_ids, results)
            if m is not None
        )

    return EvalReport(
        rank_k=rank_k,
        map=_weighted_mean(aps, image_scorable, average_by),
        msd=_weighted_mean(sds, image_scorable, average_by),
        num_queries=n_queries,
        skipped_queries=int((~scorable).sum()),
        config=cfg,
        provenance=provenance or {},
        average_by=average_by,
        per_query=per_query,
    )


def run_evaluation(
    annotations: Sequence[AnnotationRecord],
    query_embeddings: EmbeddingTable | None = None,
    gallery_embeddings: EmbeddingTable | None = None,
    *,
    similarity: np.ndarray | None = None,
    cfg: MetricConfig | None = None,
    workers: int = 1,
    include_per_query: bool = False,
    average_by: str = "caption",
    provenance: dict[str, str] | None = None,
) -> EvalReport:
    """Run the full protocol: every test caption queries the test gallery.

    Either both embedding tables or a precomputed similarity matrix must
    be supplied. A precomputed matrix must have one row per caption query
    (annotation order, captions expanded in place) and one column per
    test image (annotation order).
    """
    plan = expand_queries(annotations)

    if similarity is None:
        if query_embeddings is None or gallery_embeddings is None:
            raise InvalidInputError(
                "either a similarity matrix or both embedding tables are required"
            )
        queries = query_embeddings.select(plan.query_ids)
        gallery = gallery_embeddings.select(plan.gallery_ids)
        sim = compute_similarity_matrix(queries, gallery)
        if provenance is None:
            provenance = {
                "query_embeddings": table_digest(query_embeddings),
                "gallery_embeddings": table_digest(gallery_embeddings),
            }
    else:
        sim = np.asarray(similarity, dtype=np.float64)
        if provenance is None and sim.ndim == 2:
            provenance = {"similarity": _sha256(np.ascontiguousarray(sim).tobytes())}

    return evaluate_rankings(
        sim,
        plan.query_persons,
        plan.gallery_persons,
        cfg=cfg,
        workers=workers,
        include_per_query=include_per_query,
        average_by=average_by,
        query_ids=plan.query_ids,
        image_index=plan.image_index,
        provenance=provenance,
    )


def report_to_dict(report: EvalReport) -> dict:
    """Plain-JSON view of a report (rank cutoffs become string keys)."""
    out = {
        "rank_k": {str(k): v for k, v in sorted(report.rank_k.items())},
        "map": report.map,
        "msd": report.msd,
        "num_queries": report.num_queries,
        "skipped_queries": report.skipped_queries,
        "average_by": report.average_by,
        "config": {
            "msd_k": report.config.msd_k,
            "rank_cutoffs": list(report.config.rank_cutoffs),
            "epsilon": report.config.epsilon,
        },
        "provenance": dict(sorted(report.provenance.items())),
    }
    if report.per_query is not None:
        out["per_query"] = list(report.per_query)
    return out


def render_report(report: EvalReport, format: str = "json") -> bytes:
    """Render a report as stable-key JSON or a markdown table.

    Rendering the same report twice yields identical bytes.
    """
    if format == "json":
        text = json.dumps(report_to_dict(report), sort_keys=True, indent=2)
        return (text + "\n").encode("utf-8")
    if format in ("md", "markdown"):
        cutoffs = sorted(report.rank_k)
        headers = [f"R@{k}" for k in cutoffs] + ["mAP", "mSD"]
        values = [report.rank_k[k] for k in cutoffs] + [report.map, report.msd]
        lines = [
            "| " + " | ".join(headers) + " |",
            "| " + " | ".join("---" for _ in headers) + " |",
            "| " + " | ".join(f"{v:.4f}" for v in values) + " |",
            "",
            f"queries: {report.num_queries} (skipped: {report.skipped_queries}), "
            f"averaged by {report.average_by}",
            f"msd_k: {report.config.msd_k}, epsilon: {report.config.epsilon}",
        ]
        for name, digest in sorted(report.provenance.items()):
            lines.append(f"{name}: {digest}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise InvalidInputError(f"unsupported report format {format!r}")
