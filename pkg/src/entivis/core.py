"""Core data model: entities, documents, class probabilities, verdicts.

Everything here is plain data plus pure functions. Validation returns issue
lists instead of raising so callers can aggregate and report; only structural
nonsense (an unknown enum value, a malformed record) raises.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Iterable, Mapping


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class EntivisError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EntivisError):
    """Bad input data or configuration. Maps to CLI exit code 1 / HTTP 400."""


class RuntimeFailure(EntivisError):
    """A run-time failure (backend outage, exhausted error budget).

    Maps to CLI exit code 2 / HTTP 500.
    """


class ParseError(InputError):
    """A record could not be parsed into the data model."""


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------

class EntityKind(str, enum.Enum):
    """What sort of named entity a record denotes."""

    PERSON = "person"
    LOCATION = "location"
    EVENT = "event"


class SpatialResolution(str, enum.Enum):
    """Granularity of a location entity. Only locations carry one."""

    CITY = "city"
    COUNTRY = "country"
    CONTINENT = "continent"


class VerifyMode(str, enum.Enum):
    """How an entity is checked against the news image.

    NO_EVIDENCE asks about the news image alone. COMP builds one composite
    image out of the news image and a reference image of the entity. SERIES
    passes both images separately to a multi-image backend.
    """

    NO_EVIDENCE = "no_evidence"
    COMP = "comp"
    SERIES = "series"


def parse_mode(value: str) -> "VerifyMode":
    """Accepts the CLI spelling "w/o" as well as the enum values."""

    normalized = value.strip().lower()
    if normalized in ("w/o", "wo", "no_evidence", "no-evidence"):
        return VerifyMode.NO_EVIDENCE
    try:
        return VerifyMode(normalized)
    except ValueError:
        raise InputError(
            f"unknown mode {value!r} (expected w/o, comp, or series)"
        ) from None


class Decision(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


class ProbSource(str, enum.Enum):
    """Where a probability pair came from.

    CONSTRAINED: read off the first generated token's top-k logprobs.
    FREEFORM_PARSED: parsed from generated text; probabilities are degenerate
    (1/0).
    """

    CONSTRAINED = "constrained"
    FREEFORM_PARSED = "freeform_parsed"


# ---------------------------------------------------------------------------
# Entities and documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeoPoint:
    """WGS84 coordinate in degrees. Bounds are checked by validate_document,
    not here, so out-of-range records can be loaded and reported."""

    lat: float
    lon: float


@dataclass(frozen=True)
class Entity:
    """A named entity as it appears in a knowledge base or NEL output.

    meta carries strategy-relevant attributes as strings (e.g. country,
    gender, parent_class); geo is only meaningful for locations.
    """

    entity_id: str
    name: str
    entity_type: EntityKind
    spatial_resolution: SpatialResolution | None = None
    kb_id: str | None = None
    geo: GeoPoint | None = None
    meta: Mapping[str, str] | None = None


@dataclass(frozen=True)
class AnnotatedEntity:
    """An entity attached to a document, with its ground-truth label.

    visible is True/False when a human verified whether the entity is depicted
    in the news image, and None when unannotated. Unannotated entities never
    enter accuracy computations.
    """

    entity: Entity
    visible: bool | None = None


@dataclass(frozen=True)
class Document:
    """One news item: text, its image, and the entities to verify."""

    doc_id: str
    text: str
    image_path: str
    language: str
    entities: tuple[AnnotatedEntity, ...] = ()


# ---------------------------------------------------------------------------
# Probabilities and verdicts
# ---------------------------------------------------------------------------

_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ClassProbs:
    """Probability mass assigned to the yes and no answer classes."""

    p_yes: float
    p_no: float
    source: ProbSource

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_yes <= 1.0 and 0.0 <= self.p_no <= 1.0):
            raise ValueError(f"probabilities out of range: {self.p_yes}, {self.p_no}")
        if abs(self.p_yes + self.p_no - 1.0) > _PROB_SUM_TOL:
            raise ValueError(
                f"p_yes + p_no must equal 1, got {self.p_yes + self.p_no!r}"
            )


@dataclass(frozen=True)
class Vote:
    """One backend answer. evidence names the reference image that produced
    it ("<entity_id>/<file>"), or None in no-evidence mode."""

    evidence: str | None
    probs: ClassProbs


@dataclass(frozen=True)
class Verdict:
    """The verification outcome for one (document, entity) pair.

    cms is the consistency score in [0, 1] (yes-probability, averaged over
    votes). decision is UNKNOWN only when a freeform answer could not be
    parsed; in that case votes is empty and cms is pinned to 0.5. mode records
    the mode actually used, which differs from the requested mode after a
    no-evidence fallback. dropped counts evidence queries that failed or
    produced unparseable answers.
    """

    doc_id: str
    entity_id: str
    mode: VerifyMode
    decision: Decision
    cms: float
    votes: tuple[Vote, ...] = ()
    dropped: int = 0
    template_id: str | None = None
    model_id: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.cms <= 1.0:
            raise ValueError(f"cms out of range: {self.cms}")
        if self.decision is Decision.UNKNOWN:
            if self.votes:
                raise ValueError("an unknown verdict carries no votes")
        elif not self.votes:
            raise ValueError("a decided verdict needs at least one vote")


# ---------------------------------------------------------------------------
# Document validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    """One problem found in a document. code is stable and machine-checkable."""

    code: str
    detail: str
    entity_id: str | None = None


DUPLICATE_ENTITY_ID = "duplicate_entity_id"
GEO_OUT_OF_BOUNDS = "geo_out_of_bounds"
SPATIAL_RESOLUTION_MISPLACED = "spatial_resolution_misplaced"
EMPTY_FIELD = "empty_field"
IMAGE_UNREADABLE = "image_unreadable"


def validate_document(doc: Document, image_root: str | None = None) -> list[ValidationIssue]:
    """Check a document against the model invariants.

    Returns an issue list (empty when valid) rather than raising, so a loader
    can aggregate across documents. When image_root is given, the document's
    image must exist under it and decode; otherwise image checks are skipped.
    """

    issues: list[ValidationIssue] = []
    if not doc.doc_id:
        issues.append(ValidationIssue(EMPTY_FIELD, "doc_id is empty"))
    if not doc.language:
        issues.append(ValidationIssue(EMPTY_FIELD, "language is empty", None))
    if not doc.image_path:
        issues.append(ValidationIssue(EMPTY_FIELD, "image_path is empty", None))

    seen: set[str] = set()
    for ann in doc.entities:
        ent = ann.entity
        if not ent.entity_id:
            issues.append(ValidationIssue(EMPTY_FIELD, "entity_id is empty", ent.entity_id))
        if ent.entity_id in seen:
            issues.append(
                ValidationIssue(
                    DUPLICATE_ENTITY_ID,
                    f"entity_id {ent.entity_id!r} appears more than once",
                    ent.entity_id,
                )
            )
        seen.add(ent.entity_id)
        if ent.geo is not None:
            if not (-90.0 <= ent.geo.lat <= 90.0 and -180.0 <= ent.geo.lon <= 180.0):
                issues.append(
                    ValidationIssue(
                        GEO_OUT_OF_BOUNDS,
                        f"lat/lon ({ent.geo.lat}, {ent.geo.lon}) outside valid ranges",
                        ent.entity_id,
                    )
                )
        if ent.spatial_resolution is not None and ent.entity_type is not EntityKind.LOCATION:
            issues.append(
                ValidationIssue(
                    SPATIAL_RESOLUTION_MISPLACED,
                    f"spatial_resolution set on a {ent.entity_type.value} entity",
                    ent.entity_id,
                )
            )

    if image_root is not None and doc.image_path:
        issues.extend(_check_image(doc, image_root))
    return issues


def _check_image(doc: Document, image_root: str) -> list[ValidationIssue]:
    import os

    from PIL import Image, UnidentifiedImageError

    path = os.path.join(image_root, doc.image_path)
    try:
        with Image.open(path) as im:
            im.verify()
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        return [ValidationIssue(IMAGE_UNREADABLE, f"{doc.image_path}: {exc}", None)]
    return []


# ---------------------------------------------------------------------------
# Record conversion (dict <-> object)
# ---------------------------------------------------------------------------
#
# Dict shapes are the wire contract shared by the JSONL files, the service
# schemas, and the CLI output. Field names here are frozen; renaming one is a
# breaking change.

def entity_to_dict(ent: Entity, visible: bool | None = None, *, annotated: bool = False) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "entity_id": ent.entity_id,
        "name": ent.name,
        "type": ent.entity_type.value,
    }
    if ent.spatial_resolution is not None:
        rec["spatial_resolution"] = ent.spatial_resolution.value
    if ent.kb_id is not None:
        rec["kb_id"] = ent.kb_id
    if ent.geo is not None:
        rec["geo"] = {"lat": ent.geo.lat, "lon": ent.geo.lon}
    if ent.meta is not None:
        rec["meta"] = dict(ent.meta)
    if annotated:
        rec["visible"] = visible
    return rec


def entity_from_dict(rec: Mapping[str, Any]) -> Entity:
    try:
        kind = EntityKind(rec["type"])
    except KeyError:
        raise ParseError("entity record lacks a 'type' field") from None
    except ValueError:
        raise ParseError(f"unknown entity type {rec.get('type')!r}") from None
    for key in ("entity_id", "name"):
        if key not in rec:
            raise ParseError(f"entity record lacks a {key!r} field")

    resolution = None
    if rec.get("spatial_resolution") is not None:
        try:
            resolution = SpatialResolution(rec["spatial_resolution"])
        except ValueError:
            raise ParseError(
                f"unknown spatial_resolution {rec['spatial_resolution']!r}"
            ) from None

    geo = None
    if rec.get("geo") is not None:
        g = rec["geo"]
        try:
            geo = GeoPoint(lat=float(g["lat"]), lon=float(g["lon"]))
        except (KeyError, TypeError, ValueError):
            raise ParseError(f"malformed geo object {g!r}") from None

    meta = rec.get("meta")
    if meta is not None:
        if not isinstance(meta, Mapping) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
        ):
            raise ParseError(f"meta must map strings to strings, got {meta!r}")
        meta = dict(meta)

    return Entity(
        entity_id=str(rec["entity_id"]),
        name=str(rec["name"]),
        entity_type=kind,
        spatial_resolution=resolution,
        kb_id=rec.get("kb_id"),
        geo=geo,
        meta=meta,
    )


def document_to_dict(doc: Document) -> dict[str, Any]:
    return {
        "doc_id": doc.doc_id,
        "text": doc.text,
        "image_path": doc.image_path,
        "language": doc.language,
        "entities": [
            entity_to_dict(ann.entity, ann.visible, annotated=True)
            for ann in doc.entities
        ],
    }


def document_from_dict(rec: Mapping[str, Any]) -> Document:
    for key in ("doc_id", "text", "image_path", "language"):
        if key not in rec:
            raise ParseError(f"document record lacks a {key!r} field")
    raw_entities = rec.get("entities", [])
    if not isinstance(raw_entities, list):
        raise ParseError("'entities' must be a list")
    entities = []
    for raw in raw_entities:
        ent = entity_from_dict(raw)
        visible = raw.get("visible")
        if visible is not None and not isinstance(visible, bool):
            raise ParseError(f"'visible' must be a boolean or null, got {visible!r}")
        entities.append(AnnotatedEntity(entity=ent, visible=visible))
    return Document(
        doc_id=str(rec["doc_id"]),
        text=str(rec["text"]),
        image_path=str(rec["image_path"]),
        language=str(rec["language"]),
        entities=tuple(entities),
    )


def verdict_to_dict(v: Verdict) -> dict[str, Any]:
    return {
        "doc_id": v.doc_id,
        "entity_id": v.entity_id,
        "mode": v.mode.value,
        "decision": v.decision.value,
        "cms": v.cms,
        "votes": [
            {
                "evidence": vote.evidence,
                "p_yes": vote.probs.p_yes,
                "source": vote.probs.source.value,
            }
            for vote in v.votes
        ],
        "dropped": v.dropped,
        "template_id": v.template_id,
        "model_id": v.model_id,
    }


def verdict_from_dict(rec: Mapping[str, Any]) -> Verdict:
    try:
        votes = tuple(
            Vote(
                evidence=raw.get("evidence"),
                probs=ClassProbs(
                    p_yes=float(raw["p_yes"]),
                    p_no=1.0 - float(raw["p_yes"]),
                    source=ProbSource(raw["source"]),
                ),
            )
            for raw in rec.get("votes", [])
        )
        return Verdict(
            doc_id=str(rec["doc_id"]),
            entity_id=str(rec["entity_id"]),
            mode=VerifyMode(rec["mode"]),
            decision=Decision(rec["decision"]),
            cms=float(rec["cms"]),
            votes=votes,
            dropped=int(rec.get("dropped", 0)),
            template_id=rec.get("template_id"),
            model_id=rec.get("model_id"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed verdict record: {exc}") from None


def to_json_line(rec: Mapping[str, Any]) -> str:
    """Serialize one record for a JSON Lines stream. Deterministic: compact
    separators, keys kept in insertion order (field order is part of the
    contract)."""

    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(lines: Iterable[str], origin: str = "<stream>") -> Iterable[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs, skipping blank lines. Parse errors
    carry the origin and 1-based line number."""

    for i, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            rec = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{origin}:{i}: invalid JSON: {exc}") from None
        if not isinstance(rec, dict):
            raise ParseError(f"{origin}:{i}: expected a JSON object")
        yield i, rec
