"""Nearest-neighbor retrieval and zero-shot classification over document distances.

A document is "prepared" once (tf-idf distribution, OOV filtering, support
embeddings, dense idf-weighted vector); every pairwise distance afterwards is a
pure function of two prepared documents, so query evaluations parallelize over
shared immutable state.  Three distance families are supported:

* ``emd``  - exact transport cost between tf-idf distributions under the
  Euclidean embedding metric,
* ``semd`` - the entropic-regularized transport cost on the same inputs,
* ``nbow`` - one minus the cosine of the unit idf-weighted mean vectors.

Documents that end up empty after filtering poison their pairs: such pairs are
scored infinitely distant in rankings, excluded from classification votes, and
counted so batch reports surface the data problem instead of hiding it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .embeddings import EmbeddingTable, OovReport, filter_oov, support_vectors
from .errors import (
    ClassificationError,
    DegenerateVectorError,
    EmptyDocumentError,
    InputError,
)
from .text import (
    DocumentDistribution,
    Vocabulary,
    nbow_embed,
    tfidf_distribution,
)
from .transport import SinkhornConfig, exact_plan, sinkhorn_plan

METHOD_KINDS = ("nbow", "emd", "semd")


@dataclass(frozen=True)
class DistanceMethod:
    """Which distance family to use; sinkhorn settings travel with ``semd``."""

    kind: str
    sinkhorn: SinkhornConfig | None = None

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise InputError(f"unknown method kind {self.kind!r}; expected one of {METHOD_KINDS}")
        if self.kind == "semd" and self.sinkhorn is None:
            raise InputError("semd requires a SinkhornConfig")
        if self.kind != "semd" and self.sinkhorn is not None:
            raise InputError(f"{self.kind} does not take a SinkhornConfig")

    @classmethod
    def nbow(cls) -> "DistanceMethod":
        return cls("nbow")

    @classmethod
    def emd(cls) -> "DistanceMethod":
        return cls("emd")

    @classmethod
    def semd(cls, config: SinkhornConfig | None = None) -> "DistanceMethod":
        return cls("semd", config or SinkhornConfig())


@dataclass
class PreparedDoc:
    """A document vectorized for all three distance families.

    ``error`` is set when the transport representation is unusable (no
    in-vocabulary or no embedded tokens); ``nbow_error`` tracks the dense
    baseline separately since it can fail on its own (vector cancellation).
    """

    doc_id: str
    distribution: DocumentDistribution | None = None
    vectors: np.ndarray | None = None
    nbow: np.ndarray | None = None
    oov: OovReport | None = None
    error: str | None = None
    nbow_error: str | None = None

    def usable(self, kind: str) -> bool:
        return self.nbow is not None if kind == "nbow" else self.vectors is not None


def prepare_document(tokens: list[str], vocab: Vocabulary, table: EmbeddingTable,
                     doc_id: str = "") -> PreparedDoc:
    """Build every per-document representation up front; failures are recorded,
    not raised, so batch runs stay total."""
    doc = PreparedDoc(doc_id=doc_id)
    try:
        dist = tfidf_distribution(tokens, vocab, doc_id=doc_id)
        filtered, report = filter_oov(dist, table)
        doc.distribution = filtered
        doc.oov = report
        doc.vectors = support_vectors(filtered, table)
    except EmptyDocumentError as exc:
        doc.error = str(exc)
    try:
        doc.nbow = nbow_embed(tokens, vocab, table)
    except (EmptyDocumentError, DegenerateVectorError) as exc:
        doc.nbow_error = str(exc)
    return doc


@dataclass
class PairStats:
    """Counters a batch run accumulates while scoring pairs."""

    errored: int = 0
    nonconverged: int = 0

    def merge(self, other: "PairStats") -> None:
        self.errored += other.errored
        self.nonconverged += other.nonconverged


def _scored_pair(method: DistanceMethod, query: PreparedDoc,
                 target: PreparedDoc) -> tuple[float, bool]:
    """(distance, sinkhorn_converged) for one pair; inf when either side errored."""
    if not (query.usable(method.kind) and target.usable(method.kind)):
        return math.inf, True
    if method.kind == "nbow":
        return max(0.0, 1.0 - float(query.nbow @ target.nbow)), True
    cost = cdist(query.vectors, target.vectors, metric="euclidean")
    if method.kind == "emd":
        return exact_plan(query.distribution.weights, target.distribution.weights,
                          cost).objective, True
    plan = sinkhorn_plan(query.distribution.weights, target.distribution.weights,
                         cost, method.sinkhorn)
    return plan.objective, plan.converged


def pair_distance(method: DistanceMethod, query: PreparedDoc,
                  target: PreparedDoc) -> float:
    """Distance between two prepared documents under ``method``.

    Returns ``math.inf`` when either document is unusable for the method, so
    rankings remain total; callers needing the error account use
    :func:`score_collection`.
    """
    return _scored_pair(method, query, target)[0]


def score_collection(query: PreparedDoc, collection, method: DistanceMethod,
                     stats: PairStats | None = None) -> np.ndarray:
    """Distances from ``query`` to every document of ``collection`` (in order)."""
    distances = np.empty(len(collection))
    for i, target in enumerate(collection):
        d, converged = _scored_pair(method, query, target)
        distances[i] = d
        if stats is not None:
            if math.isinf(d):
                stats.errored += 1
            if not converged:
                stats.nonconverged += 1
    return distances


@dataclass(frozen=True)
class RankedResult:
    """Collection documents ordered by ascending distance from one query.

    Exact distance ties are broken by ascending ingestion index, so rankings
    are total and deterministic.
    """

    query_id: str
    ranked: tuple[tuple[str, float], ...]


def rank_targets(query: PreparedDoc, collection, method: DistanceMethod,
                 stats: PairStats | None = None) -> RankedResult:
    """Score and sort a whole collection against one query.

    Raises :class:`EmptyDocumentError` when the query itself is unusable;
    per-target failures only push those targets to the end of the ranking.
    """
    if len(collection) == 0:
        raise InputError("collection must be non-empty")
    if not query.usable(method.kind):
        raise EmptyDocumentError(
            f"query {query.doc_id!r} unusable for {method.kind}: "
            f"{query.error or query.nbow_error}"
        )
    distances = score_collection(query, collection, method, stats)
    order = np.argsort(distances, kind="stable")
    ranked = tuple((collection[i].doc_id, float(distances[i])) for i in order)
    return RankedResult(query_id=query.doc_id, ranked=ranked)


def precision_at_1(results, gold) -> float:
    """Fraction of queries whose top-ranked document is their gold target."""
    results = list(results)
    if not results:
        raise InputError("no ranked results to score")
    hits = 0
    for result in results:
        if result.query_id not in gold:
            raise InputError(f"query {result.query_id!r} missing from gold map")
        if result.ranked and result.ranked[0][0] == gold[result.query_id]:
            hits += 1
    return hits / len(results)


def knn_classify(query: PreparedDoc, labeled, k: int, method: DistanceMethod,
                 stats: PairStats | None = None) -> str:
    """Majority label among the k nearest labeled documents.

    Vote ties are broken by the smaller distance sum among tied labels, then by
    lexicographic label order.  Pairs scored infinite (either side errored) are
    excluded from the vote; if none remain a :class:`ClassificationError` is
    raised.
    """
    labeled = list(labeled)
    if not labeled:
        raise InputError("labeled pool must be non-empty")
    if k < 1:
        raise InputError("k must be >= 1")
    docs = [doc for doc, _ in labeled]
    distances = score_collection(query, docs, method, stats)
    finite = np.flatnonzero(np.isfinite(distances))
    if finite.size == 0:
        raise ClassificationError(
            f"query {query.doc_id!r}: no usable labeled neighbors (all pairs errored)"
        )
    order = finite[np.argsort(distances[finite], kind="stable")][:k]
    votes: dict[str, list[float]] = {}
    for i in order:
        votes.setdefault(labeled[i][1], []).append(float(distances[i]))
    ranked_labels = sorted(
        votes.items(), key=lambda item: (-len(item[1]), sum(item[1]), item[0])
    )
    return ranked_labels[0][0]


def accuracy(predictions, gold) -> float:
    """Fraction of ids predicted correctly; id sets must match exactly."""
    if set(predictions) != set(gold):
        raise InputError("prediction and gold id sets differ")
    if not gold:
        raise InputError("cannot score an empty id set")
    correct = sum(1 for key, label in gold.items() if predictions[key] == label)
    return correct / len(gold)


def column_ranks(score_table, higher_is_better: bool = True):
    """Tie-averaged ordinal ranks (1 = best) of each method within each column."""
    methods = list(score_table)
    if not methods:
        raise InputError("score table has no rows")
    columns = list(score_table[methods[0]])
    column_set = set(columns)
    for method in methods:
        if set(score_table[method]) != column_set:
            raise InputError(f"method {method!r} does not cover the same columns")
    ranks: dict[str, dict[str, float]] = {}
    for col in columns:
        values = np.array([float(score_table[m][col]) for m in methods])
        if not np.all(np.isfinite(values)):
            raise InputError(f"column {col!r} has a missing or non-finite cell")
        ordered = rankdata(-values if higher_is_better else values, method="average")
        ranks[col] = {m: float(r) for m, r in zip(methods, ordered)}
    return ranks


def average_rank(score_table, higher_is_better: bool = True) -> dict[str, float]:
    """Mean tie-averaged rank of each method across all columns of a score table.

    ``score_table`` maps method -> column -> score; every method must cover the
    same columns.
    """
    per_column = column_ranks(score_table, higher_is_better)
    methods = list(score_table)
    return {
        m: float(np.mean([per_column[col][m] for col in per_column]))
        for m in methods
    }
