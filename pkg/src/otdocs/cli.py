"""Command-line entry points; thin wrappers over the runner layer.

Every command exits 0 on success and nonzero with a machine-readable JSON
error object on stderr otherwise.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .errors import InputError, OtdocsError
from .runners import (
    DEFAULT_K_GRID,
    DEFAULT_LAMBDA_GRID,
    RunConfig,
    explain_pair,
    run_classification,
    run_rank_summary,
    run_retrieval,
    run_sweep,
)


def _fail(exc: BaseException) -> None:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(payload), err=True)
    sys.exit(2)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OtdocsError as exc:
            _fail(exc)
        except OSError as exc:
            _fail(exc)
    return wrapper


def method_options(fn):
    fn = click.option("--method", type=click.Choice(["nbow", "emd", "semd"]),
                      default="emd", show_default=True)(fn)
    fn = click.option("--k", type=int, default=5, show_default=True,
                      help="Neighbors for classification votes.")(fn)
    fn = click.option("--lambda", "lam", type=float, default=0.01, show_default=True,
                      help="Entropic regularization parameter (semd).")(fn)
    fn = click.option("--max-iter", "max_iterations", type=int, default=1000,
                      show_default=True)(fn)
    fn = click.option("--tol", "tolerance", type=float, default=1e-6,
                      show_default=True, help="Sinkhorn marginal tolerance.")(fn)
    fn = click.option("--src-emb", required=True,
                      help="Embedding text file for the source language.")(fn)
    fn = click.option("--tgt-emb", default=None,
                      help="Embedding file for the target language (default: shared).")(fn)
    fn = click.option("--jobs", type=int, default=1, show_default=True,
                      help="Worker threads for query evaluation.")(fn)
    return fn


def _emit(report: dict, out: str | None) -> None:
    if out:
        summary = {
            "task": report.get("task"),
            "metrics": report.get("metrics") or report.get("best"),
            "errors": report.get("errors"),
            "paths": report.get("paths"),
        }
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        click.echo(json.dumps(report, indent=2, sort_keys=True))


@click.group()
@click.version_option(package_name="otdocs")
def main():
    """Wasserstein document distances over cross-lingual word embeddings."""


@main.command()
@method_options
@click.option("--source", required=True, help="Query-language sentences, one per line.")
@click.option("--target", required=True, help="Collection-language sentences, one per line.")
@click.option("--out", default=None, help="Report base path (writes .json and .tsv).")
@click.option("--sample", type=int, default=None,
              help="Evaluate only this many sampled queries (default: all).")
@click.option("--sample-seed", type=int, default=0, show_default=True)
@click.option("--pair", default=None, help="Language-pair label for rank summaries.")
@handles_errors
def retrieve(source, target, out, sample, sample_seed, pair, **kwargs):
    """Cross-lingual sentence retrieval with P@1 against the aligned gold pairing."""
    config = RunConfig(source=source, target=target, out=out, sample=sample,
                       sample_seed=sample_seed, pair=pair, **kwargs)
    _emit(run_retrieval(config), out)


@main.command()
@method_options
@click.option("--train", required=True, help="Labeled training split (label<TAB>text).")
@click.option("--test", required=True, help="Labeled evaluation split (label<TAB>text).")
@click.option("--out", default=None, help="Report base path (writes .json).")
@click.option("--pair", default=None, help="Language-pair label for rank summaries.")
@handles_errors
def classify(train, test, out, pair, **kwargs):
    """Zero-shot kNN document classification; labels come from the train split only."""
    config = RunConfig(train=train, test=test, out=out, pair=pair, **kwargs)
    _emit(run_classification(config), out)


def _parse_grid(raw: str | None, default, cast):
    if raw is None:
        return default
    try:
        values = tuple(cast(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise InputError(f"bad grid value: {exc}") from exc
    if not values:
        raise InputError("grid must contain at least one value")
    return values


@main.command()
@method_options
@click.option("--train", required=True)
@click.option("--test", required=True, help="Validation split the grid is scored on.")
@click.option("--out", default=None)
@click.option("--k-grid", default=None, help="Comma-separated K values "
              f"[default: {','.join(map(str, DEFAULT_K_GRID))}].")
@click.option("--lambda-grid", default=None, help="Comma-separated lambda values "
              f"[default: {','.join(map(str, DEFAULT_LAMBDA_GRID))}].")
@handles_errors
def sweep(train, test, out, k_grid, lambda_grid, **kwargs):
    """Grid-search K (and lambda for semd) on a validation split; reports the argmax."""
    config = RunConfig(train=train, test=test, out=out, **kwargs)
    report = run_sweep(
        config,
        k_grid=_parse_grid(k_grid, DEFAULT_K_GRID, int),
        lambda_grid=_parse_grid(lambda_grid, DEFAULT_LAMBDA_GRID, float),
    )
    _emit(report, out)


@main.command(name="rank-summary")
@click.argument("reports", nargs=-1, required=True)
@click.option("--out", default=None, help="Summary base path (writes .json and .tsv).")
@handles_errors
def rank_summary(reports, out):
    """Merge run reports into a method x language-pair table with average ranks."""
    _emit(run_rank_summary(list(reports), out=out), out)


@main.command()
@method_options
@click.option("--source", required=True, help="File whose full text is the first document.")
@click.option("--target", required=True, help="File whose full text is the second document.")
@handles_errors
def distance(source, target, **kwargs):
    """Debug one pair: prints supports, cost matrix, transport plan, and distance."""
    config = RunConfig(source=source, target=target, **kwargs)
    detail = explain_pair(config, Path(source).read_text(encoding="utf-8"),
                          Path(target).read_text(encoding="utf-8"))
    click.echo(json.dumps(detail, indent=2, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service (keeps embedding tables cached across requests)."""
    import uvicorn

    uvicorn.run("otdocs.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
