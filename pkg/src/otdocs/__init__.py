"""Wasserstein document distances over cross-lingual word embeddings.

Core pieces: discrete optimal transport solvers (exact and Sinkhorn), tf-idf
document distributions over embedded tokens, Euclidean ground metrics from
pretrained embedding tables, and nearest-neighbor retrieval/classification
runners with ranking protocol reports.
"""

__version__ = "0.1.0"

from . import errors
from .corpus import LabeledCorpus, ParallelCorpus, ingest_labeled, ingest_parallel
from .embeddings import (
    EmbeddingCache,
    EmbeddingTable,
    OovReport,
    filter_oov,
    ground_metric,
    load_embeddings,
    save_embeddings,
    support_vectors,
)
from .runners import (
    RunConfig,
    explain_pair,
    run_classification,
    run_rank_summary,
    run_retrieval,
    run_sweep,
)
from .tasks import (
    DistanceMethod,
    PairStats,
    PreparedDoc,
    RankedResult,
    accuracy,
    average_rank,
    column_ranks,
    knn_classify,
    pair_distance,
    precision_at_1,
    prepare_document,
    rank_targets,
    score_collection,
)
from .text import (
    DocumentDistribution,
    Vocabulary,
    build_vocabulary,
    idf_weight,
    nbow_embed,
    tfidf_distribution,
    tokenize,
)
from .transport import (
    Distribution,
    SinkhornConfig,
    TransportPlan,
    entropy,
    exact_plan,
    marginal_violation,
    sinkhorn_plan,
    transport_cost,
    wasserstein_distance,
)

__all__ = [
    "__version__",
    "errors",
    # transport
    "Distribution", "SinkhornConfig", "TransportPlan", "exact_plan",
    "wasserstein_distance", "sinkhorn_plan", "entropy", "transport_cost",
    "marginal_violation",
    # text
    "Vocabulary", "DocumentDistribution", "tokenize", "build_vocabulary",
    "idf_weight", "tfidf_distribution", "nbow_embed",
    # embeddings
    "EmbeddingTable", "EmbeddingCache", "OovReport", "load_embeddings",
    "save_embeddings", "filter_oov", "ground_metric", "support_vectors",
    # tasks
    "DistanceMethod", "PreparedDoc", "PairStats", "RankedResult",
    "prepare_document", "pair_distance", "score_collection", "rank_targets",
    "precision_at_1", "knn_classify", "accuracy", "average_rank", "column_ranks",
    # corpus + runners
    "ParallelCorpus", "LabeledCorpus", "ingest_parallel", "ingest_labeled",
    "RunConfig", "run_retrieval", "run_classification", "run_sweep",
    "run_rank_summary", "explain_pair",
]
