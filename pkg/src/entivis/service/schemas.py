"""Request/response models for the verification service.

These pydantic models are the wire contract; the CLI builds the same models
and either POSTs them or hands them to the handlers in-process. Field names
follow the JSONL schemas of the core package exactly.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator


# ---------------------------------------------------------------------------
# Shared document/verdict shapes
# ---------------------------------------------------------------------------

class GeoModel(BaseModel):
    lat: float
    lon: float


class EntityModel(BaseModel):
    entity_id: str
    name: str
    type: str
    spatial_resolution: Optional[str] = None
    kb_id: Optional[str] = None
    geo: Optional[GeoModel] = None
    meta: Optional[dict[str, str]] = None
    visible: Optional[bool] = None


class DocumentModel(BaseModel):
    doc_id: str
    text: str
    image_path: str
    language: str
    entities: list[EntityModel] = Field(default_factory=list)


class VoteModel(BaseModel):
    evidence: Optional[str]
    p_yes: float
    source: str


class VerdictModel(BaseModel):
    doc_id: str
    entity_id: str
    mode: str
    decision: str
    cms: float
    votes: list[VoteModel]
    dropped: int
    template_id: Optional[str]
    model_id: Optional[str]


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

class VerifyRequest(BaseModel):
    """Verify the entities of one document (inline or on disk)."""

    doc: Optional[DocumentModel] = None
    doc_path: Optional[str] = None
    backend_config: str
    mode: str = "w/o"
    evidence_root: Optional[str] = None
    n_evidence: int = 20
    template_config: Optional[str] = None
    image_root: Optional[str] = None
    parallelism: int = 4

    @model_validator(mode="after")
    def _exactly_one_document(self) -> "VerifyRequest":
        if (self.doc is None) == (self.doc_path is None):
            raise ValueError("exactly one of 'doc' and 'doc_path' must be set")
        return self


class VerifyResponse(BaseModel):
    verdicts: list[VerdictModel]


# ---------------------------------------------------------------------------
# evaluate / docverify
# ---------------------------------------------------------------------------

class DocVerifyModel(BaseModel):
    strategy: str
    seed: int = 0
    pool_path: Optional[str] = None


class EvaluateRequest(BaseModel):
    """Mirror of the run-config JSON schema."""

    dataset_path: str
    backend_config: str
    mode: str
    output_dir: Optional[str] = None
    evidence_root: Optional[str] = None
    n_evidence: int = 20
    template_config: Optional[str] = None
    entity_types: list[str] = Field(default_factory=list)
    docverify: Optional[DocVerifyModel] = None
    parallelism: int = 4
    seed: int = 0
    unknown_as_incorrect: bool = False
    max_error_fraction: float = 0.1
    entity_eval: bool = True


class EvalRowModel(BaseModel):
    dataset: str
    entity_group: str
    mode: str
    model_id: str
    total: int
    correct: int
    incorrect: int
    unknown: int
    accuracy: Optional[float]
    urr: Optional[float]
    fallbacks: int
    dropped: int


class DocVerifyReportModel(BaseModel):
    strategy: str
    seed: int
    mode: str
    documents: int
    correct: int
    accuracy: Optional[float]
    skipped: int
    errored: int
    missing_candidates: int


class JobsModel(BaseModel):
    total: int
    failed: int


class ReportModel(BaseModel):
    config: dict[str, Any]
    jobs: JobsModel
    rows: list[EvalRowModel]
    docverify: Optional[DocVerifyReportModel]


class EvaluateResponse(BaseModel):
    report: ReportModel


class DocVerifyRequest(BaseModel):
    """Run only the document-level tampering protocol."""

    dataset_path: str
    backend_config: str
    strategy: str
    seed: int = 0
    mode: str = "w/o"
    pool_path: Optional[str] = None
    output_dir: Optional[str] = None
    evidence_root: Optional[str] = None
    n_evidence: int = 20
    template_config: Optional[str] = None
    entity_type: Optional[str] = None
    parallelism: int = 4
    max_error_fraction: float = 0.1


# ---------------------------------------------------------------------------
# tamper-gen
# ---------------------------------------------------------------------------

class TamperRequest(BaseModel):
    dataset_path: str
    strategy: str
    seed: int = 0
    pool_path: Optional[str] = None
    entity_type: Optional[str] = None
    out_path: Optional[str] = None


class TamperResponse(BaseModel):
    out_path: str
    documents: int
    replaced: int
    skipped: int
    errors: int


# ---------------------------------------------------------------------------
# compose / fetch-evidence
# ---------------------------------------------------------------------------

class ComposeRequest(BaseModel):
    news_path: str
    evidence_path: str
    out_path: str
    news_color: str = "red"
    evidence_color: str = "blue"
    thickness_px: int = 5


class ComposeResponse(BaseModel):
    out_path: str
    orientation: str
    width: int
    height: int


class FetchEvidenceRequest(BaseModel):
    root: str
    entity_id: str
    query: str
    source: str
    limit: int = 20
    fetcher_config: str


class EvidenceItemModel(BaseModel):
    ref: str
    source: str
    rank: int


class FetchEvidenceResponse(BaseModel):
    entity_id: str
    stored: int
    removed: int
    items: list[EvidenceItemModel]


class HealthResponse(BaseModel):
    status: str
    version: str
