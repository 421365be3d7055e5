"""Dataset loading, corpus statistics, and entity tampering.

Datasets are JSON Lines files of document records; image paths inside them
are resolved relative to the dataset file's directory. Tampering replaces
entities with same-type impostors drawn from a candidate pool under a
strategy-specific constraint, deterministically per seed.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .core import (
    Document,
    Entity,
    EntityKind,
    GeoPoint,
    InputError,
    SpatialResolution,
    ValidationIssue,
    document_from_dict,
    entity_from_dict,
    entity_to_dict,
    read_jsonl,
    validate_document,
)


class DatasetValidationError(InputError):
    """One or more documents violate the model invariants."""

    def __init__(self, issues: Sequence[tuple[str, ValidationIssue]]) -> None:
        self.issues = tuple(issues)
        preview = "; ".join(
            f"{doc_id}: {issue.code} ({issue.detail})" for doc_id, issue in issues[:5]
        )
        more = f" (+{len(issues) - 5} more)" if len(issues) > 5 else ""
        super().__init__(f"{len(issues)} validation issue(s): {preview}{more}")


class NoEligibleCandidate(InputError):
    """The pool holds no entity satisfying the strategy for this original."""


# ---------------------------------------------------------------------------
# Loading and statistics
# ---------------------------------------------------------------------------

def load_documents(path: str | Path, check_images: bool = True) -> list[Document]:
    """Parse and validate a dataset file. Parse errors carry line numbers;
    validation issues are aggregated across documents before raising."""

    path = Path(path)
    image_root = str(path.parent) if check_images else None
    docs: list[Document] = []
    problems: list[tuple[str, ValidationIssue]] = []
    with open(path, encoding="utf-8") as fh:
        for _, rec in read_jsonl(fh, origin=str(path)):
            doc = document_from_dict(rec)
            for issue in validate_document(doc, image_root=image_root):
                problems.append((doc.doc_id, issue))
            docs.append(doc)
    if problems:
        raise DatasetValidationError(problems)
    return docs


@dataclass(frozen=True)
class DatasetStats:
    """Corpus counts: documents, distinct entities, and distinct entities
    verified visible. An entity shared by several documents counts once."""

    documents: int
    entities: int
    entities_visible: int


def dataset_stats(
    docs: Iterable[Document],
    entity_type: EntityKind | None = None,
    spatial_resolution: SpatialResolution | None = None,
) -> DatasetStats:
    """Counts over the documents, optionally restricted to one entity type
    and (for locations) one spatial resolution. A document counts when it
    contains at least one matching entity."""

    n_docs = 0
    ids: set[str] = set()
    visible_ids: set[str] = set()
    for doc in docs:
        matched = False
        for ann in doc.entities:
            ent = ann.entity
            if entity_type is not None and ent.entity_type is not entity_type:
                continue
            if spatial_resolution is not None and ent.spatial_resolution is not spatial_resolution:
                continue
            matched = True
            ids.add(ent.entity_id)
            if ann.visible is True:
                visible_ids.add(ent.entity_id)
        if matched:
            n_docs += 1
    return DatasetStats(
        documents=n_docs, entities=len(ids), entities_visible=len(visible_ids)
    )


# ---------------------------------------------------------------------------
# Great-circle distance
# ---------------------------------------------------------------------------

EARTH_RADIUS_KM = 6371.0088  # mean Earth radius


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance between two coordinates, in kilometers."""

    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    sin_dlat = math.sin((lat2 - lat1) / 2.0)
    sin_dlon = math.sin((lon2 - lon1) / 2.0)
    h = sin_dlat * sin_dlat + math.cos(lat1) * math.cos(lat2) * sin_dlon * sin_dlon
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


# ---------------------------------------------------------------------------
# Tampering strategies
# ---------------------------------------------------------------------------

# Meta keys strategies read: persons need "country" and/or "gender", events
# need "parent_class". Locations need geo coordinates instead.
META_COUNTRY = "country"
META_GENDER = "gender"
META_EVENT_CLASS = "parent_class"


@dataclass(frozen=True)
class TamperingStrategy:
    """How to pick an impostor for an entity of target_type.

    kind is one of: random, same_country, same_gender, same_country_gender,
    gcd_band, same_event_class. The gcd band is half-open: min_km <= d <
    max_km.
    """

    kind: str
    target_type: EntityKind
    min_km: float | None = None
    max_km: float | None = None

    def to_spec(self) -> str:
        if self.kind == "random":
            return "random"
        if self.kind == "gcd_band":
            return f"gcd:{_fmt_km(self.min_km)}:{_fmt_km(self.max_km)}"
        if self.kind == "same_event_class":
            return "event:same_class"
        return f"person:{self.kind}"


def _fmt_km(value: float | None) -> str:
    assert value is not None
    return str(int(value)) if float(value).is_integer() else str(value)


def parse_strategy(spec: str, default_type: EntityKind | None = None) -> TamperingStrategy:
    """Parse the compact strategy grammar:

        random | person:same_country | person:same_gender |
        person:same_country_gender | gcd:<min>:<max> | event:same_class

    `random` does not name an entity type, so one must come from context
    (default_type); the other forms imply theirs.
    """

    spec = spec.strip()
    if spec == "random":
        if default_type is None:
            raise InputError(
                "strategy 'random' needs a target entity type from context"
            )
        return TamperingStrategy(kind="random", target_type=default_type)
    if spec in ("person:same_country", "person:same_gender", "person:same_country_gender"):
        return TamperingStrategy(kind=spec.split(":", 1)[1], target_type=EntityKind.PERSON)
    if spec == "event:same_class":
        return TamperingStrategy(kind="same_event_class", target_type=EntityKind.EVENT)
    if spec.startswith("gcd:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise InputError(f"malformed gcd strategy {spec!r}, expected gcd:<min>:<max>")
        try:
            min_km, max_km = float(parts[1]), float(parts[2])
        except ValueError:
            raise InputError(f"non-numeric gcd bounds in {spec!r}") from None
        if min_km < 0 or max_km <= min_km:
            raise InputError(f"gcd band must satisfy 0 <= min < max, got {spec!r}")
        return TamperingStrategy(
            kind="gcd_band", target_type=EntityKind.LOCATION, min_km=min_km, max_km=max_km
        )
    raise InputError(f"unknown tampering strategy {spec!r}")


def _meta(ent: Entity, key: str) -> str | None:
    return None if ent.meta is None else ent.meta.get(key)


def eligible(strategy: TamperingStrategy, original: Entity, candidate: Entity) -> bool:
    """Whether candidate may replace original under the strategy."""

    if candidate.entity_id == original.entity_id:
        return False
    if candidate.entity_type is not strategy.target_type:
        return False
    if strategy.target_type is EntityKind.LOCATION:
        if candidate.spatial_resolution is not original.spatial_resolution:
            return False
    if strategy.kind == "random":
        return True
    if strategy.kind == "same_country":
        country = _meta(original, META_COUNTRY)
        return country is not None and _meta(candidate, META_COUNTRY) == country
    if strategy.kind == "same_gender":
        gender = _meta(original, META_GENDER)
        return gender is not None and _meta(candidate, META_GENDER) == gender
    if strategy.kind == "same_country_gender":
        country = _meta(original, META_COUNTRY)
        gender = _meta(original, META_GENDER)
        return (
            country is not None
            and gender is not None
            and _meta(candidate, META_COUNTRY) == country
            and _meta(candidate, META_GENDER) == gender
        )
    if strategy.kind == "same_event_class":
        cls = _meta(original, META_EVENT_CLASS)
        return cls is not None and _meta(candidate, META_EVENT_CLASS) == cls
    if strategy.kind == "gcd_band":
        if original.geo is None or candidate.geo is None:
            return False
        d = great_circle_distance(original.geo, candidate.geo)
        return strategy.min_km <= d < strategy.max_km
    raise InputError(f"unknown strategy kind {strategy.kind!r}")


def tamper_entity(
    original: Entity,
    pool: Sequence[Entity],
    strategy: TamperingStrategy,
    seed: int,
) -> Entity:
    """Pick a replacement uniformly among eligible pool entities. The same
    (original, pool, strategy, seed) always picks the same one."""

    candidates = [c for c in pool if eligible(strategy, original, c)]
    if not candidates:
        raise NoEligibleCandidate(
            f"no eligible {strategy.to_spec()} replacement for entity "
            f"{original.entity_id!r} in a pool of {len(pool)}"
        )
    return random.Random(seed).choice(candidates)


# ---------------------------------------------------------------------------
# Tampered document sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TamperedPair:
    original: Entity
    replacement: Entity


@dataclass(frozen=True)
class TamperedDocumentSet:
    """The impostor set for one document: each target-type entity paired
    with its replacement. skipped marks documents with no target-type
    entities; errors records entities no candidate was found for."""

    doc_id: str
    strategy: str
    seed: int
    pairs: tuple[TamperedPair, ...]
    errors: tuple[str, ...] = ()
    skipped: bool = False


def _entity_seed(seed: int, doc_id: str, entity_id: str) -> int:
    # Stable per-entity derivation so a pick does not depend on how many
    # entities came before it.
    digest = hashlib.sha256(f"{seed}|{doc_id}|{entity_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_tampered_document_set(
    doc: Document,
    pool: Sequence[Entity],
    strategy: TamperingStrategy,
    seed: int,
) -> TamperedDocumentSet:
    """Replace every target-type entity in the document, recording the
    pairing. Per-entity failures are collected, not raised."""

    targets = [
        ann.entity for ann in doc.entities if ann.entity.entity_type is strategy.target_type
    ]
    if not targets:
        return TamperedDocumentSet(
            doc_id=doc.doc_id,
            strategy=strategy.to_spec(),
            seed=seed,
            pairs=(),
            skipped=True,
        )
    pairs: list[TamperedPair] = []
    errors: list[str] = []
    for ent in targets:
        try:
            replacement = tamper_entity(
                ent, pool, strategy, _entity_seed(seed, doc.doc_id, ent.entity_id)
            )
        except NoEligibleCandidate as exc:
            errors.append(str(exc))
            continue
        pairs.append(TamperedPair(original=ent, replacement=replacement))
    return TamperedDocumentSet(
        doc_id=doc.doc_id,
        strategy=strategy.to_spec(),
        seed=seed,
        pairs=tuple(pairs),
        errors=tuple(errors),
    )


def tampered_set_to_dict(ts: TamperedDocumentSet) -> dict[str, Any]:
    return {
        "doc_id": ts.doc_id,
        "strategy": ts.strategy,
        "seed": ts.seed,
        "skipped": ts.skipped,
        "errors": list(ts.errors),
        "pairs": [
            {
                "original_entity_id": pair.original.entity_id,
                "replacement": entity_to_dict(pair.replacement),
            }
            for pair in ts.pairs
        ],
    }


# ---------------------------------------------------------------------------
# Candidate pools
# ---------------------------------------------------------------------------

def load_pool(path: str | Path) -> list[Entity]:
    """A pool file is JSON Lines of entity records."""

    pool: list[Entity] = []
    with open(path, encoding="utf-8") as fh:
        for _, rec in read_jsonl(fh, origin=str(path)):
            pool.append(entity_from_dict(rec))
    return pool


def pool_from_documents(
    docs: Iterable[Document],
    entity_type: EntityKind,
    spatial_resolution: SpatialResolution | None = None,
) -> list[Entity]:
    """Derive a pool from a corpus: the distinct matching entities in first
    occurrence order."""

    seen: set[str] = set()
    pool: list[Entity] = []
    for doc in docs:
        for ann in doc.entities:
            ent = ann.entity
            if ent.entity_type is not entity_type:
                continue
            if spatial_resolution is not None and ent.spatial_resolution is not spatial_resolution:
                continue
            if ent.entity_id in seen:
                continue
            seen.add(ent.entity_id)
            pool.append(ent)
    return pool
