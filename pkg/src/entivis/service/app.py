"""HTTP layer: FastAPI routes delegating to the handlers.

Run with:  uvicorn entivis.service.app:app
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..core import InputError, RuntimeFailure
from . import handlers
from .schemas import (
    ComposeRequest,
    ComposeResponse,
    DocVerifyRequest,
    EvaluateRequest,
    EvaluateResponse,
    FetchEvidenceRequest,
    FetchEvidenceResponse,
    HealthResponse,
    TamperRequest,
    TamperResponse,
    VerifyRequest,
    VerifyResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="entivis", version=__version__)

    @app.exception_handler(InputError)
    async def _input_error(_: Request, exc: InputError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    # A path the request named but the server cannot read is a caller
    # problem, same as any other invalid input.
    @app.exception_handler(FileNotFoundError)
    async def _missing_file(_: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": f"file not found: {exc}"})

    @app.exception_handler(RuntimeFailure)
    async def _runtime_failure(_: Request, exc: RuntimeFailure) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return handlers.health()

    @app.post("/verify", response_model=VerifyResponse)
    def verify(request: VerifyRequest) -> VerifyResponse:
        return handlers.verify(request)

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(request: EvaluateRequest) -> EvaluateResponse:
        return handlers.evaluate(request)

    @app.post("/docverify", response_model=EvaluateResponse)
    def docverify(request: DocVerifyRequest) -> EvaluateResponse:
        return handlers.docverify(request)

    @app.post("/tamper", response_model=TamperResponse)
    def tamper(request: TamperRequest) -> TamperResponse:
        return handlers.tamper(request)

    @app.post("/compose", response_model=ComposeResponse)
    def compose(request: ComposeRequest) -> ComposeResponse:
        return handlers.compose_debug(request)

    @app.post("/fetch-evidence", response_model=FetchEvidenceResponse)
    def fetch_evidence(request: FetchEvidenceRequest) -> FetchEvidenceResponse:
        return handlers.fetch(request)

    return app


app = create_app()
