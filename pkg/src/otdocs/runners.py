"""Experiment drivers: retrieval, zero-shot classification, sweeps, rank summaries.

Each runner takes a :class:`RunConfig`, loads its resources, fans independent
query evaluations out to a bounded thread pool, reduces results in query-id
order (so parallelism degree never changes any metric or ranking byte), and
returns a JSON-ready report echoing every effective config value.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import ingest_labeled, ingest_parallel
from .embeddings import EmbeddingCache, load_embeddings
from .errors import ClassificationError, EmptyDocumentError, InputError
from .tasks import (
    DistanceMethod,
    PairStats,
    accuracy,
    average_rank,
    column_ranks,
    knn_classify,
    pair_distance,
    prepare_document,
    rank_targets,
    score_collection,
)
from .text import build_vocabulary, tokenize
from .transport import SinkhornConfig, exact_plan, sinkhorn_plan

TSV_TOP_N = 10
DEFAULT_K_GRID = (1, 3, 5, 7, 9)
DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; defaults K=5 and lambda=0.01."""

    method: str = "emd"
    k: int = 5
    lam: float = 0.01
    max_iterations: int = 1000
    tolerance: float = 1e-6
    src_emb: str = ""
    tgt_emb: str | None = None
    source: str | None = None
    target: str | None = None
    train: str | None = None
    test: str | None = None
    out: str | None = None
    jobs: int = 1
    sample: int | None = None
    sample_seed: int = 0
    pair: str | None = None

    def __post_init__(self):
        if self.method not in ("nbow", "emd", "semd"):
            raise InputError(f"unknown method {self.method!r}")
        if self.k < 1:
            raise InputError("k must be >= 1")
        if not self.lam > 0:
            raise InputError("lambda must be positive")
        if self.max_iterations < 1:
            raise InputError("max-iter must be >= 1")
        if not self.tolerance > 0:
            raise InputError("tol must be positive")
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")
        if self.sample is not None and self.sample < 1:
            raise InputError("sample must be >= 1 when given")

    def distance_method(self) -> DistanceMethod:
        if self.method == "semd":
            return DistanceMethod.semd(SinkhornConfig(
                lam=self.lam,
                max_iterations=self.max_iterations,
                convergence_tolerance=self.tolerance,
            ))
        return DistanceMethod(self.method)

    def effective_tgt_emb(self) -> str:
        return self.tgt_emb if self.tgt_emb else self.src_emb

    def echo(self) -> dict:
        """Every effective value, so a run is reproducible from its report alone."""
        return {
            "method": self.method,
            "k": self.k,
            "lambda": self.lam,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
            "src_emb": self.src_emb,
            "tgt_emb": self.effective_tgt_emb(),
            "source": self.source,
            "target": self.target,
            "train": self.train,
            "test": self.test,
            "out": self.out,
            "jobs": self.jobs,
            "sample": self.sample,
            "sample_seed": self.sample_seed,
            "pair": self.pair,
        }


def _load_table(path, cache: EmbeddingCache | None):
    try:
        if cache is not None:
            return cache.get(path)
        return load_embeddings(path, label=Path(path).stem)
    except OSError as exc:
        raise InputError(f"cannot load embeddings from {path}: {exc}") from exc


def _pool_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _json_safe(value: float | None):
    if value is None or not np.isfinite(value):
        return None
    return float(value)


def _out_base(out: str) -> str:
    return out[:-5] if out.endswith(".json") else out


def write_report(report: dict, out: str, tsv_rows: list[tuple] | None = None,
                 tsv_header: tuple[str, ...] | None = None) -> dict:
    """Write ``<out>.json`` (and ``<out>.tsv`` when rows are given); returns paths."""
    base = _out_base(out)
    json_path = Path(base + ".json")
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    paths = {"json": str(json_path)}
    if tsv_rows is not None:
        tsv_path = Path(base + ".tsv")
        lines = []
        if tsv_header:
            lines.append("\t".join(tsv_header))
        for row in tsv_rows:
            lines.append("\t".join(_format_cell(cell) for cell in row))
        tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths["tsv"] = str(tsv_path)
    return paths


def _format_cell(cell) -> str:
    if isinstance(cell, float):
        return f"{cell:.12g}"
    return str(cell)


def run_retrieval(config: RunConfig, cache: EmbeddingCache | None = None) -> dict:
    """Rank the target collection against each (possibly sampled) source query.

    idf statistics are fit per language on the full corpus files, never on just
    the query sample.  Queries that are unusable after filtering count as
    misses and are reported under ``errors.query_errors``.
    """
    if not config.source or not config.target:
        raise InputError("retrieval requires --source and --target files")
    started = time.perf_counter()
    corpus = ingest_parallel(config.source, config.target)
    src_tokens = [tokenize(s) for s in corpus.source]
    tgt_tokens = [tokenize(s) for s in corpus.target]
    vocab_src = build_vocabulary(src_tokens)
    vocab_tgt = build_vocabulary(tgt_tokens)
    src_table = _load_table(config.src_emb, cache)
    tgt_table = src_table if config.effective_tgt_emb() == config.src_emb \
        else _load_table(config.effective_tgt_emb(), cache)

    queries = [prepare_document(toks, vocab_src, src_table, doc_id=f"q{i}")
               for i, toks in enumerate(src_tokens)]
    collection = [prepare_document(toks, vocab_tgt, tgt_table, doc_id=f"d{i}")
                  for i, toks in enumerate(tgt_tokens)]

    n = len(corpus)
    if config.sample is not None and config.sample < n:
        rng = np.random.default_rng(config.sample_seed)
        query_indices = sorted(rng.choice(n, size=config.sample, replace=False).tolist())
    else:
        query_indices = list(range(n))

    method = config.distance_method()

    def evaluate(i: int):
        stats = PairStats()
        gold_id = f"d{i}"
        try:
            result = rank_targets(queries[i], collection, method, stats)
        except EmptyDocumentError as exc:
            return {
                "query_id": f"q{i}", "gold_id": gold_id, "gold_rank": None,
                "top1_id": None, "top1_distance": None, "error": str(exc),
            }, stats, [], False
        gold_rank = next(
            rank for rank, (tid, _) in enumerate(result.ranked, start=1) if tid == gold_id
        )
        top = result.ranked[:TSV_TOP_N]
        rows = [(result.query_id, rank, tid, dist)
                for rank, (tid, dist) in enumerate(top, start=1)]
        record = {
            "query_id": result.query_id,
            "gold_id": gold_id,
            "gold_rank": gold_rank,
            "top1_id": result.ranked[0][0],
            "top1_distance": _json_safe(result.ranked[0][1]),
            "error": None,
        }
        return record, stats, rows, gold_rank == 1

    outcomes = _pool_map(evaluate, query_indices, config.jobs)

    totals = PairStats()
    per_query, tsv_rows = [], []
    hits = 0
    query_errors = 0
    for record, stats, rows, hit in outcomes:
        totals.merge(stats)
        per_query.append(record)
        tsv_rows.extend(rows)
        hits += hit
        query_errors += record["error"] is not None

    report = {
        "task": "retrieval",
        "config": config.echo(),
        "corpus": {
            "n_pairs": n,
            "n_queries": len(query_indices),
            "n_collection": n,
            "sample_size": len(query_indices),
        },
        "metrics": {"p_at_1": hits / len(query_indices)},
        "errors": {
            "query_errors": query_errors,
            "pair_errors": totals.errored,
            "nonconverged_pairs": totals.nonconverged,
        },
        "per_query": per_query,
        "timing": {"wall_seconds": time.perf_counter() - started},
    }
    if config.out:
        report["paths"] = write_report(
            report, config.out, tsv_rows,
            tsv_header=("query_id", "rank", "target_id", "distance"),
        )
    return report


def _prepare_classification(config: RunConfig, cache: EmbeddingCache | None):
    """Shared setup for classification runs and sweeps.

    Source-language idf comes from the train split; target-language idf from
    the test split's text (zero-shot: the only target-language data available,
    and labels never enter idf).
    """
    if not config.train or not config.test:
        raise InputError("classification requires --train and --test files")
    train = ingest_labeled(config.train, split="train")
    test = ingest_labeled(config.test, split="test")
    train_tokens = [tokenize(t) for t in train.texts]
    test_tokens = [tokenize(t) for t in test.texts]
    vocab_src = build_vocabulary(train_tokens)
    vocab_tgt = build_vocabulary(test_tokens)
    src_table = _load_table(config.src_emb, cache)
    tgt_table = src_table if config.effective_tgt_emb() == config.src_emb \
        else _load_table(config.effective_tgt_emb(), cache)
    train_docs = [prepare_document(toks, vocab_src, src_table, doc_id=f"r{i}")
                  for i, toks in enumerate(train_tokens)]
    test_docs = [prepare_document(toks, vocab_tgt, tgt_table, doc_id=f"e{i}")
                 for i, toks in enumerate(test_tokens)]
    return train, test, train_docs, test_docs


def run_classification(config: RunConfig, cache: EmbeddingCache | None = None) -> dict:
    """Zero-shot kNN: labels come only from the (source-language) train split."""
    started = time.perf_counter()
    train, test, train_docs, test_docs = _prepare_classification(config, cache)
    labeled = list(zip(train_docs, train.labels))
    method = config.distance_method()

    def classify(i: int):
        stats = PairStats()
        try:
            predicted = knn_classify(test_docs[i], labeled, config.k, method, stats)
            return predicted, None, stats
        except (ClassificationError, EmptyDocumentError) as exc:
            return None, str(exc), stats

    outcomes = _pool_map(classify, range(len(test_docs)), config.jobs)

    totals = PairStats()
    predictions: dict[str, str | None] = {}
    confusion: dict[str, dict[str, int]] = {}
    doc_errors = 0
    for i, (predicted, error, stats) in enumerate(outcomes):
        totals.merge(stats)
        predictions[f"e{i}"] = predicted
        doc_errors += error is not None
        gold_label = test.labels[i]
        cell = predicted if predicted is not None else "__error__"
        confusion.setdefault(gold_label, {}).setdefault(cell, 0)
        confusion[gold_label][cell] += 1

    gold = {f"e{i}": label for i, label in enumerate(test.labels)}
    report = {
        "task": "classification",
        "config": config.echo(),
        "corpus": {
            "n_train": len(train),
            "n_test": len(test),
            "labels": sorted(set(train.labels) | set(test.labels)),
            "rejected_train_lines": len(train.rejected_lines),
            "rejected_test_lines": len(test.rejected_lines),
        },
        "metrics": {"accuracy": accuracy(predictions, gold)},
        "confusion": confusion,
        "errors": {
            "test_doc_errors": doc_errors,
            "pair_errors": totals.errored,
            "nonconverged_pairs": totals.nonconverged,
        },
        "timing": {"wall_seconds": time.perf_counter() - started},
    }
    if config.out:
        report["paths"] = write_report(report, config.out)
    return report


def _vote(neighbors: list[tuple[float, str]]) -> str:
    """Majority label; ties by smaller distance sum, then lexicographic label."""
    votes: dict[str, list[float]] = {}
    for dist, label in neighbors:
        votes.setdefault(label, []).append(dist)
    ranked = sorted(votes.items(), key=lambda item: (-len(item[1]), sum(item[1]), item[0]))
    return ranked[0][0]


def run_sweep(config: RunConfig, cache: EmbeddingCache | None = None,
              k_grid=DEFAULT_K_GRID, lambda_grid=DEFAULT_LAMBDA_GRID) -> dict:
    """Grid accuracy over K (and lambda for semd) on a validation split.

    Distances are computed once per lambda and reused across every K, since K
    only changes the vote.  The reported best cell is the accuracy argmax,
    first-in-grid-order on ties.
    """
    started = time.perf_counter()
    train, test, train_docs, test_docs = _prepare_classification(config, cache)
    lambdas = list(lambda_grid) if config.method == "semd" else [None]
    ks = sorted(set(k_grid))
    max_k = max(ks)
    cells = []
    for lam in lambdas:
        cfg = config if lam is None else replace(config, lam=lam)
        method = cfg.distance_method()

        def nearest(i: int):
            stats = PairStats()
            distances = score_collection(test_docs[i], train_docs, method, stats)
            finite = np.flatnonzero(np.isfinite(distances))
            order = finite[np.argsort(distances[finite], kind="stable")][:max_k]
            return [(float(distances[j]), train.labels[j]) for j in order]

        neighbor_lists = _pool_map(nearest, range(len(test_docs)), config.jobs)
        for k in ks:
            correct = 0
            scored = 0
            for i, neighbors in enumerate(neighbor_lists):
                if not neighbors:
                    scored += 1  # errored doc counts as a miss
                    continue
                predicted = _vote(neighbors[:k])
                scored += 1
                correct += predicted == test.labels[i]
            cell = {"k": k, "lambda": lam, "accuracy": correct / scored}
            cells.append(cell)
    best = max(cells, key=lambda c: c["accuracy"])
    report = {
        "task": "sweep",
        "config": config.echo(),
        "grid": {"k": ks, "lambda": lambdas if lambdas != [None] else None},
        "cells": cells,
        "best": best,
        "timing": {"wall_seconds": time.perf_counter() - started},
    }
    if config.out:
        report["paths"] = write_report(report, config.out)
    return report


def _report_metric(report: dict) -> tuple[str, float]:
    metrics = report.get("metrics", {})
    for name in ("p_at_1", "accuracy"):
        if name in metrics:
            return name, float(metrics[name])
    raise InputError("report carries no p_at_1 or accuracy metric")


def _report_row_label(report: dict) -> str:
    cfg = report.get("config", {})
    emb = Path(cfg.get("src_emb") or "?").stem
    return f"{cfg.get('method', '?')}/{emb}"


def _report_pair(report: dict) -> str:
    cfg = report.get("config", {})
    if cfg.get("pair"):
        return cfg["pair"]
    left = cfg.get("source") or cfg.get("train") or "?"
    right = cfg.get("target") or cfg.get("test") or "?"
    return f"{Path(left).stem}-{Path(right).stem}"


def run_rank_summary(report_paths, out: str | None = None) -> dict:
    """Combine run reports into a method x language-pair table with average ranks.

    All reports must carry the same metric and jointly cover identical
    language-pair sets; both metrics used here are higher-is-better.
    """
    reports = []
    for path in report_paths:
        try:
            reports.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise InputError(f"cannot read report {path}: {exc}") from exc
    if not reports:
        raise InputError("rank summary needs at least one report")
    metric_names = {_report_metric(r)[0] for r in reports}
    if len(metric_names) > 1:
        raise InputError(f"reports mix incomparable metrics: {sorted(metric_names)}")
    metric_name = metric_names.pop()

    table: dict[str, dict[str, float]] = {}
    for report in reports:
        row = _report_row_label(report)
        pair = _report_pair(report)
        if pair in table.get(row, {}):
            raise InputError(f"duplicate cell for method {row!r}, pair {pair!r}")
        table.setdefault(row, {})[pair] = _report_metric(report)[1]

    averages = average_rank(table, higher_is_better=True)
    per_column = column_ranks(table, higher_is_better=True)
    columns = list(next(iter(table.values())))
    rows = [{
        "method": row,
        "cells": table[row],
        "average_rank": averages[row],
    } for row in table]
    summary = {
        "task": "rank_summary",
        "metric": metric_name,
        "columns": columns,
        "rows": rows,
        "column_ranks": per_column,
    }
    if out:
        tsv_rows = [tuple([r["method"]] + [r["cells"][c] for c in columns]
                          + [r["average_rank"]]) for r in rows]
        summary["paths"] = write_report(
            summary, out, tsv_rows,
            tsv_header=tuple(["method"] + columns + ["average_rank"]),
        )
    return summary


def explain_pair(config: RunConfig, source_text: str, target_text: str,
                 cache: EmbeddingCache | None = None) -> dict:
    """Single-pair debug view: tokens, supports, cost matrix, plan, distance.

    Each side gets a one-document vocabulary, so idf degenerates to a constant
    and the distribution reduces to normalized term frequency.
    """
    src_table = _load_table(config.src_emb, cache)
    tgt_table = src_table if config.effective_tgt_emb() == config.src_emb \
        else _load_table(config.effective_tgt_emb(), cache)
    src_tokens = tokenize(source_text)
    tgt_tokens = tokenize(target_text)
    vocab_src = build_vocabulary([src_tokens]) if src_tokens else None
    vocab_tgt = build_vocabulary([tgt_tokens]) if tgt_tokens else None
    if vocab_src is None or vocab_tgt is None:
        raise EmptyDocumentError("both texts must contain at least one token")
    query = prepare_document(src_tokens, vocab_src, src_table, doc_id="source")
    target = prepare_document(tgt_tokens, vocab_tgt, tgt_table, doc_id="target")
    method = config.distance_method()
    result = {
        "method": config.method,
        "config": config.echo(),
        "source": _doc_view(query),
        "target": _doc_view(target),
        "distance": None,
        "cost_matrix": None,
        "plan": None,
        "converged": None,
    }
    if not (query.usable(method.kind) and target.usable(method.kind)):
        result["error"] = query.error or query.nbow_error or target.error or target.nbow_error
        return result
    if method.kind == "nbow":
        result["distance"] = pair_distance(method, query, target)
        return result
    cost = cdist(query.vectors, target.vectors, metric="euclidean")
    if method.kind == "emd":
        plan = exact_plan(query.distribution.weights, target.distribution.weights, cost)
    else:
        plan = sinkhorn_plan(query.distribution.weights, target.distribution.weights,
                             cost, method.sinkhorn)
    result.update({
        "distance": plan.objective,
        "cost_matrix": cost.tolist(),
        "plan": plan.coupling.tolist(),
        "converged": plan.converged,
        "marginal_error": plan.marginal_error,
    })
    return result


def _doc_view(doc) -> dict:
    view = {
        "doc_id": doc.doc_id,
        "support": list(doc.distribution.tokens) if doc.distribution else None,
        "weights": doc.distribution.weights.tolist() if doc.distribution else None,
        "error": doc.error,
        "nbow_error": doc.nbow_error,
    }
    if doc.oov is not None:
        view["oov"] = {
            "dropped_tokens": list(doc.oov.dropped_tokens),
            "dropped_mass": doc.oov.dropped_mass,
            "coverage_ratio": doc.oov.coverage_ratio,
        }
    return view
