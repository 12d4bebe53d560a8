"""Evaluation engine and benchmark harness for text-based person retrieval."""

from .annotations import AnnotationRecord, load_annotations, write_annotations
from .embeddings import EmbeddingTable, load_embeddings, write_embeddings
from .evaluation import (
    EvalReport,
    build_rank_lists,
    compute_similarity_matrix,
    render_report,
    run_evaluation,
)
from .exceptions import (
    AnnotationFormatError,
    DuplicateIdError,
    EmbeddingFormatError,
    InvalidInputError,
    UnscorableQueryError,
)
from .metrics import (
    MetricConfig,
    NormalizedRankedList,
    QueryMetrics,
    RankedList,
    compute_ap,
    compute_asp,
    compute_cmc,
    compute_map,
    compute_msd,
    compute_pnr,
    compute_sd,
    normalize_ranklist,
)
from .stats import (
    CorpusStats,
    compute_corpus_stats,
    corpus_entropy,
    histogram_export,
    text_entropy,
    tokenize_caption,
    word_count_stats,
)

__version__ = "0.1.0"
