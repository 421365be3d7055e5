"""Service operations behind the HTTP routes.

Each handler takes a request model and returns a response model; the FastAPI
app and the CLI's in-process path both call these, so HTTP is an optional
layer, not a required one.
"""

from __future__ import annotations

import json
from pathlib import Path

from .. import __version__
from ..backends import load_backend
from ..compose import BorderSpec, compose, parse_color, save_png
from ..core import (
    Document,
    EntityKind,
    InputError,
    Verdict,
    document_from_dict,
    parse_mode,
    read_jsonl,
    to_json_line,
    verdict_to_dict,
)
from ..dataset import (
    build_tampered_document_set,
    load_documents,
    load_pool,
    parse_strategy,
    pool_from_documents,
    tampered_set_to_dict,
)
from ..evaluation import (
    DocVerifyConfig,
    EvalReport,
    RunConfig,
    run_benchmark,
    run_config_from_dict,
    report_to_dict,
)
from ..evidence import fetch_evidence, load_fetcher_config
from ..prompts import load_template_bundle
from ..verifier import VerificationContext, verify_entity
from .schemas import (
    ComposeRequest,
    ComposeResponse,
    DocVerifyRequest,
    EvaluateRequest,
    EvaluateResponse,
    EvidenceItemModel,
    FetchEvidenceRequest,
    FetchEvidenceResponse,
    HealthResponse,
    ReportModel,
    TamperRequest,
    TamperResponse,
    VerdictModel,
    VerifyRequest,
    VerifyResponse,
)


def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _documents_from_path(path: str) -> list[Document]:
    """A document file is either one JSON object or JSON Lines of them."""

    text = Path(path).read_text("utf-8")
    stripped = text.strip()
    if not stripped:
        raise InputError(f"{path}: empty document file")
    if stripped.startswith("{") and "\n" not in stripped:
        return [document_from_dict(json.loads(stripped))]
    try:
        single = json.loads(stripped)
        if isinstance(single, dict):
            return [document_from_dict(single)]
    except json.JSONDecodeError:
        pass
    return [document_from_dict(rec) for _, rec in read_jsonl(text.splitlines(), origin=path)]


def _verdict_model(v: Verdict) -> VerdictModel:
    return VerdictModel.model_validate(verdict_to_dict(v))


def verify(request: VerifyRequest) -> VerifyResponse:
    """Verify every entity of the given document(s); answers come back in
    document order. Job failures propagate (a single document is small
    enough that partial output is not worth returning)."""

    if request.doc_path is not None:
        docs = _documents_from_path(request.doc_path)
        image_root = Path(request.image_root or Path(request.doc_path).parent)
    else:
        docs = [document_from_dict(request.doc.model_dump(exclude_none=True))]
        image_root = Path(request.image_root or ".")

    backend = load_backend(request.backend_config)
    registry, template_config = load_template_bundle(request.template_config)
    ctx = VerificationContext(
        backend=backend,
        registry=registry,
        template_config=template_config,
        mode=parse_mode(request.mode),
        image_root=image_root,
        evidence_root=Path(request.evidence_root) if request.evidence_root else None,
        n_evidence=request.n_evidence,
    )
    verdicts = []
    for doc in docs:
        for ann in doc.entities:
            verdicts.append(_verdict_model(verify_entity(doc, ann.entity, ctx)))
    return VerifyResponse(verdicts=verdicts)


# ---------------------------------------------------------------------------
# evaluate / docverify
# ---------------------------------------------------------------------------

def _report_model(report: EvalReport) -> ReportModel:
    return ReportModel.model_validate(report_to_dict(report))


def evaluate(request: EvaluateRequest) -> EvaluateResponse:
    config = run_config_from_dict(request.model_dump())
    report = run_benchmark(config)
    return EvaluateResponse(report=_report_model(report))


def docverify(request: DocVerifyRequest) -> EvaluateResponse:
    entity_types: tuple[EntityKind, ...] = ()
    if request.entity_type is not None:
        try:
            entity_types = (EntityKind(request.entity_type),)
        except ValueError:
            raise InputError(f"unknown entity type {request.entity_type!r}") from None
    config = RunConfig(
        dataset_path=request.dataset_path,
        backend_config=request.backend_config,
        mode=parse_mode(request.mode),
        output_dir=request.output_dir,
        evidence_root=request.evidence_root,
        n_evidence=request.n_evidence,
        template_config=request.template_config,
        entity_types=entity_types,
        docverify=DocVerifyConfig(
            strategy=request.strategy,
            seed=request.seed,
            pool_path=request.pool_path,
        ),
        parallelism=request.parallelism,
        max_error_fraction=request.max_error_fraction,
        entity_eval=False,
    )
    report = run_benchmark(config)
    return EvaluateResponse(report=_report_model(report))


# ---------------------------------------------------------------------------
# tamper-gen
# ---------------------------------------------------------------------------

def _strategy_slug(spec: str) -> str:
    return spec.replace(":", "-").replace(".", "_")


def tamper(request: TamperRequest) -> TamperResponse:
    docs = load_documents(request.dataset_path)
    default_type = None
    if request.entity_type is not None:
        try:
            default_type = EntityKind(request.entity_type)
        except ValueError:
            raise InputError(f"unknown entity type {request.entity_type!r}") from None
    strategy = parse_strategy(request.strategy, default_type)
    if request.pool_path:
        pool = load_pool(request.pool_path)
    else:
        pool = pool_from_documents(docs, strategy.target_type)

    sets = [
        build_tampered_document_set(doc, pool, strategy, request.seed) for doc in docs
    ]

    if request.out_path:
        out_path = Path(request.out_path)
    else:
        dataset = Path(request.dataset_path)
        out_path = dataset.with_name(
            f"{dataset.stem}.tampered.{_strategy_slug(strategy.to_spec())}.seed{request.seed}.jsonl"
        )
    with open(out_path, "w", encoding="utf-8") as fh:
        for ts in sets:
            fh.write(to_json_line(tampered_set_to_dict(ts)) + "\n")

    return TamperResponse(
        out_path=str(out_path),
        documents=len(sets),
        replaced=sum(len(ts.pairs) for ts in sets),
        skipped=sum(1 for ts in sets if ts.skipped),
        errors=sum(len(ts.errors) for ts in sets),
    )


# ---------------------------------------------------------------------------
# compose / fetch-evidence
# ---------------------------------------------------------------------------

def compose_debug(request: ComposeRequest) -> ComposeResponse:
    border = BorderSpec(
        news_color=parse_color(request.news_color),
        evidence_color=parse_color(request.evidence_color),
        thickness_px=request.thickness_px,
    )
    composite = compose(request.news_path, request.evidence_path, border)
    save_png(composite, request.out_path)
    return ComposeResponse(
        out_path=request.out_path,
        orientation=composite.orientation.value,
        width=composite.image.width,
        height=composite.image.height,
    )


def fetch(request: FetchEvidenceRequest) -> FetchEvidenceResponse:
    config = load_fetcher_config(request.fetcher_config)
    evidence = fetch_evidence(
        root=request.root,
        entity_id=request.entity_id,
        query=request.query,
        source=request.source,
        config=config,
        limit=request.limit,
    )
    return FetchEvidenceResponse(
        entity_id=evidence.entity_id,
        stored=len(evidence.items),
        removed=evidence.removed,
        items=[
            EvidenceItemModel(ref=item.ref, source=item.source, rank=item.rank)
            for item in evidence.items
        ],
    )
