"""Entity verification: turn backend answers into verdicts.

A job asks about one (document, entity) pair. Without evidence there is a
single question about the news image. With evidence, each selected reference
image yields one vote (composite image or two-image series), the votes are
majority-aggregated, and failed queries are dropped and counted. Evidence
queries run serially inside a job; concurrency belongs one level up, across
jobs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from statistics import fmean
from typing import Mapping, Sequence

from .backends import Backend, classify
from .compose import BorderSpec, DecodeError, compose, load_image
from .core import (
    ClassProbs,
    Decision,
    Document,
    Entity,
    InputError,
    RuntimeFailure,
    Verdict,
    VerifyMode,
    Vote,
)
from .evidence import EvidenceSet, ManifestNotFound, load_manifest, select_evidence
from .prompts import (
    QuestionTemplate,
    TemplateConfig,
    render_evidence_question,
    render_question,
    select_template,
)

logger = logging.getLogger(__name__)


class EmptyVotes(InputError):
    """Aggregation was asked to run over zero votes."""


class AllQueriesFailed(RuntimeFailure):
    """Every evidence query for an entity failed or was unparseable."""


# ---------------------------------------------------------------------------
# Vote aggregation
# ---------------------------------------------------------------------------

def _casts_yes(probs: ClassProbs) -> bool:
    # A vote must clear 0.5 to count as yes; exactly 0.5 is a no.
    return probs.p_yes > 0.5


def majority_vote(votes: Sequence[ClassProbs]) -> Decision:
    """Majority decision over per-evidence votes.

    Each vote casts for its winning class. On an equal split, the class whose
    votes carry the higher average winning-class probability wins; if those
    averages are equal too, yes wins. Averages are compared exactly (as
    rationals over the given float values) so the outcome cannot depend on
    summation order.
    """

    if not votes:
        raise EmptyVotes("majority_vote needs at least one vote")
    yes_votes = [v for v in votes if _casts_yes(v)]
    no_votes = [v for v in votes if not _casts_yes(v)]
    if len(yes_votes) > len(no_votes):
        return Decision.YES
    if len(no_votes) > len(yes_votes):
        return Decision.NO
    avg_yes = sum(Fraction(v.p_yes) for v in yes_votes) / len(yes_votes)
    avg_no = sum(Fraction(v.p_no) for v in no_votes) / len(no_votes)
    return Decision.YES if avg_yes >= avg_no else Decision.NO


def entity_consistency_score(votes: Sequence[ClassProbs]) -> float:
    """Consistency score in [0, 1]: mean yes-probability over the votes.
    With a single vote this is exactly that vote's p_yes."""

    if not votes:
        raise EmptyVotes("consistency score needs at least one vote")
    return fmean(v.p_yes for v in votes)


# ---------------------------------------------------------------------------
# Verification context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationContext:
    """Everything a job needs besides the document and entity."""

    backend: Backend
    registry: Mapping[str, QuestionTemplate]
    template_config: TemplateConfig
    mode: VerifyMode
    image_root: Path
    evidence_root: Path | None = None
    n_evidence: int = 20
    border: BorderSpec = field(default_factory=BorderSpec)
    max_new_tokens: int = 256
    top_k_logprobs: int = 20

    def template_for(self, entity: Entity, mode: VerifyMode) -> QuestionTemplate:
        return select_template(
            self.registry,
            self.template_config,
            self.backend.descriptor.model_id,
            entity.entity_type,
            mode,
        )


def _news_image(ctx: VerificationContext, doc: Document):
    return load_image(ctx.image_root / doc.image_path)


def _decided_verdict(
    doc: Document,
    entity: Entity,
    ctx: VerificationContext,
    mode: VerifyMode,
    template_id: str,
    votes: Sequence[Vote],
    dropped: int = 0,
) -> Verdict:
    probs = [v.probs for v in votes]
    return Verdict(
        doc_id=doc.doc_id,
        entity_id=entity.entity_id,
        mode=mode,
        decision=majority_vote(probs),
        cms=entity_consistency_score(probs),
        votes=tuple(votes),
        dropped=dropped,
        template_id=template_id,
        model_id=ctx.backend.descriptor.model_id,
    )


def _unknown_verdict(
    doc: Document, entity: Entity, ctx: VerificationContext, template_id: str, dropped: int = 0
) -> Verdict:
    # No parseable answer: the entity stays unknown and the score is pinned
    # to the indifferent 0.5 so downstream ranking does not read meaning
    # into it.
    return Verdict(
        doc_id=doc.doc_id,
        entity_id=entity.entity_id,
        mode=VerifyMode.NO_EVIDENCE,
        decision=Decision.UNKNOWN,
        cms=0.5,
        votes=(),
        dropped=dropped,
        template_id=template_id,
        model_id=ctx.backend.descriptor.model_id,
    )


# ---------------------------------------------------------------------------
# Verification entry points
# ---------------------------------------------------------------------------

def verify_without_evidence(doc: Document, entity: Entity, ctx: VerificationContext) -> Verdict:
    """Ask the backend about the news image alone."""

    template = ctx.template_for(entity, VerifyMode.NO_EVIDENCE)
    question = render_question(template, entity)
    news = _news_image(ctx, doc)
    probs = classify(
        ctx.backend,
        question,
        [news],
        max_new_tokens=ctx.max_new_tokens,
        top_k_logprobs=ctx.top_k_logprobs,
    )
    if probs is None:
        return _unknown_verdict(doc, entity, ctx, template.template_id)
    return _decided_verdict(
        doc, entity, ctx, VerifyMode.NO_EVIDENCE, template.template_id, [Vote(None, probs)]
    )


def verify_with_evidence(doc: Document, entity: Entity, ctx: VerificationContext) -> Verdict:
    """One vote per selected reference image, majority-aggregated.

    With no usable evidence on disk the job degrades to the no-evidence
    question and the verdict's mode says so. If evidence exists but every
    query fails, that is a run-time failure, not a quiet fallback.
    """

    if ctx.mode not in (VerifyMode.COMP, VerifyMode.SERIES):
        raise InputError(f"not an evidence mode: {ctx.mode.value}")
    if ctx.evidence_root is None:
        raise InputError(f"mode {ctx.mode.value} requires an evidence root")

    try:
        evidence = load_manifest(ctx.evidence_root, entity.entity_id)
    except ManifestNotFound:
        evidence = EvidenceSet(entity_id=entity.entity_id, items=())
    items = select_evidence(evidence, ctx.n_evidence)
    if not items:
        logger.warning(
            "no evidence for entity %s; falling back to no-evidence mode", entity.entity_id
        )
        return verify_without_evidence(doc, entity, ctx)

    template = ctx.template_for(entity, ctx.mode)
    question = render_evidence_question(
        template, entity, ctx.mode, ctx.border if ctx.mode is VerifyMode.COMP else None
    )
    news = _news_image(ctx, doc)

    votes: list[Vote] = []
    dropped = 0
    for item in items:
        try:
            if ctx.mode is VerifyMode.COMP:
                composite = compose(news, load_image(item.path), ctx.border)
                images = [composite.image]
            else:
                images = [news, load_image(item.path)]
            probs = classify(
                ctx.backend,
                question,
                images,
                max_new_tokens=ctx.max_new_tokens,
                top_k_logprobs=ctx.top_k_logprobs,
            )
        except (RuntimeFailure, DecodeError) as exc:
            logger.warning("evidence query failed for %s: %s", item.ref, exc)
            dropped += 1
            continue
        if probs is None:
            logger.warning("unparseable answer for evidence %s", item.ref)
            dropped += 1
            continue
        votes.append(Vote(evidence=item.ref, probs=probs))

    if not votes:
        raise AllQueriesFailed(
            f"all {len(items)} evidence queries failed for entity {entity.entity_id!r}"
        )
    return _decided_verdict(doc, entity, ctx, ctx.mode, template.template_id, votes, dropped)


def verify_entity(doc: Document, entity: Entity, ctx: VerificationContext) -> Verdict:
    """Dispatch on the context's mode."""

    if ctx.mode is VerifyMode.NO_EVIDENCE:
        return verify_without_evidence(doc, entity, ctx)
    return verify_with_evidence(doc, entity, ctx)
