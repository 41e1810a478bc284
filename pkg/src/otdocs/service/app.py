"""FastAPI service wrapping the runner layer.

The process keeps loaded embedding tables in a cache on ``app.state``, so
repeated distance and retrieval requests against the same collections skip the
expensive table parse.  Library errors map to a machine-readable error object:
bad inputs become HTTP 400, numerical/internal failures become HTTP 500.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..embeddings import EmbeddingCache
from ..errors import InputError, OtdocsError
from ..runners import (
    DEFAULT_K_GRID,
    DEFAULT_LAMBDA_GRID,
    RunConfig,
    explain_pair,
    run_classification,
    run_rank_summary,
    run_retrieval,
    run_sweep,
)
from .schemas import (
    ClassifyRequest,
    DistanceRequest,
    HealthResponse,
    MethodParams,
    RankSummaryRequest,
    RetrieveRequest,
    SweepRequest,
)


def _config(params: MethodParams, **extra) -> RunConfig:
    return RunConfig(
        method=params.method,
        k=params.k,
        lam=params.lam,
        max_iterations=params.max_iterations,
        tolerance=params.tolerance,
        src_emb=params.src_emb,
        tgt_emb=params.tgt_emb,
        jobs=params.jobs,
        **extra,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="otdocs", version=__version__)
    app.state.embedding_cache = EmbeddingCache()

    @app.exception_handler(OtdocsError)
    async def library_error(request: Request, exc: OtdocsError):
        status = 400 if isinstance(exc, InputError) else 500
        return JSONResponse(
            status_code=status,
            content={"error": {"type": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            version=__version__,
            cached_tables=len(app.state.embedding_cache),
        )

    @app.post("/distance")
    def distance(request: DistanceRequest) -> dict:
        config = _config(request)
        return explain_pair(config, request.source_text, request.target_text,
                            cache=app.state.embedding_cache)

    @app.post("/retrieve")
    def retrieve(request: RetrieveRequest) -> dict:
        config = _config(request, source=request.source, target=request.target,
                         out=request.out, sample=request.sample,
                         sample_seed=request.sample_seed, pair=request.pair)
        return run_retrieval(config, cache=app.state.embedding_cache)

    @app.post("/classify")
    def classify(request: ClassifyRequest) -> dict:
        config = _config(request, train=request.train, test=request.test,
                         out=request.out, pair=request.pair)
        return run_classification(config, cache=app.state.embedding_cache)

    @app.post("/sweep")
    def sweep(request: SweepRequest) -> dict:
        config = _config(request, train=request.train, test=request.test,
                         out=request.out, pair=request.pair)
        return run_sweep(
            config,
            cache=app.state.embedding_cache,
            k_grid=tuple(request.k_grid) if request.k_grid else DEFAULT_K_GRID,
            lambda_grid=tuple(request.lambda_grid) if request.lambda_grid
            else DEFAULT_LAMBDA_GRID,
        )

    @app.post("/rank-summary")
    def rank_summary(request: RankSummaryRequest) -> dict:
        return run_rank_summary(request.reports, out=request.out)

    return app


app = create_app()
