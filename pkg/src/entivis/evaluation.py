"""Metrics, document-level verification, and the benchmark runner.

Accuracy by default excludes unknown verdicts from the denominator and
reports them separately as the unknown-response rate; --unknown-as-incorrect
switches to counting them as wrong. Reports are deterministic: no
timestamps, no output paths, keys sorted, rates rounded to 4 decimals, so
two runs with the same config produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .backends import Backend, load_backend
from .core import (
    Decision,
    Document,
    Entity,
    EntityKind,
    InputError,
    RuntimeFailure,
    Verdict,
    VerifyMode,
    parse_mode,
    to_json_line,
    verdict_to_dict,
)
from .dataset import (
    build_tampered_document_set,
    load_documents,
    load_pool,
    parse_strategy,
    pool_from_documents,
)
from .prompts import load_template_bundle
from .verifier import VerificationContext, verify_entity

logger = logging.getLogger(__name__)


class MissingGold(InputError):
    """A verdict has no ground-truth label to score against."""


class EmptyInput(InputError):
    """Nothing to evaluate."""


class RunFailed(RuntimeFailure):
    """Too many jobs errored for the run's results to be trusted."""


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

GoldKey = tuple[str, str]  # (doc_id, entity_id)


def accuracy(
    verdicts: Sequence[Verdict],
    gold: Mapping[GoldKey, bool],
    unknown_as_incorrect: bool = False,
) -> float | None:
    """Fraction of decided verdicts matching their label.

    Unknown verdicts leave the denominator unless unknown_as_incorrect is
    set. Returns None when the denominator is empty.
    """

    correct = incorrect = unknown = 0
    for v in verdicts:
        key = (v.doc_id, v.entity_id)
        if key not in gold:
            raise MissingGold(f"no gold label for {key}")
        if v.decision is Decision.UNKNOWN:
            unknown += 1
            continue
        expected = Decision.YES if gold[key] else Decision.NO
        if v.decision is expected:
            correct += 1
        else:
            incorrect += 1
    denominator = correct + incorrect + (unknown if unknown_as_incorrect else 0)
    if denominator == 0:
        return None
    return correct / denominator


def unknown_rate(verdicts: Sequence[Verdict]) -> float:
    """Share of verdicts that stayed unknown; 0.0 over an empty list."""

    if not verdicts:
        return 0.0
    unknown = sum(1 for v in verdicts if v.decision is Decision.UNKNOWN)
    return unknown / len(verdicts)


def verify_document(original_cms: Sequence[float], tampered_cms: Sequence[float]) -> bool:
    """Document-level check: does an untampered entity top the combined
    consistency ranking? Exact ties between the best original and the best
    impostor count as incorrect."""

    if not original_cms:
        raise EmptyInput("verify_document needs at least one original score")
    if not tampered_cms:
        return True
    return max(original_cms) > max(tampered_cms)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DocVerifyConfig:
    strategy: str
    seed: int
    pool_path: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run. Field names match the run-config JSON schema."""

    dataset_path: str
    backend_config: str
    mode: VerifyMode
    output_dir: str | None = None
    evidence_root: str | None = None
    n_evidence: int = 20
    template_config: str | None = None
    entity_types: tuple[EntityKind, ...] = ()
    docverify: DocVerifyConfig | None = None
    parallelism: int = 4
    seed: int = 0
    unknown_as_incorrect: bool = False
    max_error_fraction: float = 0.1
    # When off, only the docverify protocol runs; the flat per-entity
    # evaluation is skipped.
    entity_eval: bool = True


def run_config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    for key in ("dataset_path", "backend_config", "mode"):
        if key not in data:
            raise InputError(f"run config lacks {key!r}")
    docverify = None
    if data.get("docverify") is not None:
        dv = data["docverify"]
        if "strategy" not in dv:
            raise InputError("docverify config lacks 'strategy'")
        docverify = DocVerifyConfig(
            strategy=dv["strategy"],
            seed=int(dv.get("seed", 0)),
            pool_path=dv.get("pool_path"),
        )
    try:
        entity_types = tuple(EntityKind(t) for t in data.get("entity_types") or ())
    except ValueError as exc:
        raise InputError(f"run config: {exc}") from None
    return RunConfig(
        dataset_path=data["dataset_path"],
        backend_config=data["backend_config"],
        mode=parse_mode(data["mode"]),
        output_dir=data.get("output_dir"),
        evidence_root=data.get("evidence_root"),
        n_evidence=int(data.get("n_evidence", 20)),
        template_config=data.get("template_config"),
        entity_types=entity_types,
        docverify=docverify,
        parallelism=int(data.get("parallelism", 4)),
        seed=int(data.get("seed", 0)),
        unknown_as_incorrect=bool(data.get("unknown_as_incorrect", False)),
        max_error_fraction=float(data.get("max_error_fraction", 0.1)),
        entity_eval=bool(data.get("entity_eval", True)),
    )


def _config_echo(config: RunConfig) -> dict[str, Any]:
    # Echo what determines the results; runtime knobs (output_dir,
    # parallelism) stay out so identical runs into different directories
    # stay byte-identical.
    return {
        "dataset_path": config.dataset_path,
        "backend_config": config.backend_config,
        "mode": config.mode.value,
        "evidence_root": config.evidence_root,
        "n_evidence": config.n_evidence,
        "template_config": config.template_config,
        "entity_types": [k.value for k in config.entity_types],
        "docverify": (
            None
            if config.docverify is None
            else {
                "strategy": config.docverify.strategy,
                "seed": config.docverify.seed,
                "pool_path": config.docverify.pool_path,
            }
        ),
        "seed": config.seed,
        "unknown_as_incorrect": config.unknown_as_incorrect,
    }


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    """Aggregate over one entity-type group. correct + incorrect + unknown
    always equals total."""

    dataset: str
    entity_group: str
    mode: str
    model_id: str
    total: int
    correct: int
    incorrect: int
    unknown: int
    accuracy: float | None
    urr: float
    fallbacks: int
    dropped: int

    def __post_init__(self) -> None:
        if self.correct + self.incorrect + self.unknown != self.total:
            raise ValueError("row counts do not add up to total")


@dataclass(frozen=True)
class DocVerifyReport:
    strategy: str
    seed: int
    mode: str
    documents: int
    correct: int
    accuracy: float | None
    skipped: int
    errored: int
    missing_candidates: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    docverify: DocVerifyReport | None
    config: dict[str, Any]
    jobs_total: int
    jobs_failed: int


def _round(value: float | None) -> float | None:
    return None if value is None else round(value, 4)


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return {
        "config": report.config,
        "jobs": {"total": report.jobs_total, "failed": report.jobs_failed},
        "rows": [
            {
                "dataset": r.dataset,
                "entity_group": r.entity_group,
                "mode": r.mode,
                "model_id": r.model_id,
                "total": r.total,
                "correct": r.correct,
                "incorrect": r.incorrect,
                "unknown": r.unknown,
                "accuracy": _round(r.accuracy),
                "urr": _round(r.urr),
                "fallbacks": r.fallbacks,
                "dropped": r.dropped,
            }
            for r in report.rows
        ],
        "docverify": (
            None
            if report.docverify is None
            else {
                "strategy": report.docverify.strategy,
                "seed": report.docverify.seed,
                "mode": report.docverify.mode,
                "documents": report.docverify.documents,
                "correct": report.docverify.correct,
                "accuracy": _round(report.docverify.accuracy),
                "skipped": report.docverify.skipped,
                "errored": report.docverify.errored,
                "missing_candidates": report.docverify.missing_candidates,
            }
        ),
    }


def _fmt_rate(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def render_report_table(report: EvalReport) -> str:
    """Human-readable results table, one line per entity group."""

    header = (
        f"{'dataset':<24} {'entities':<18} {'mode':<12} {'model':<16} "
        f"{'total':>6} {'corr':>6} {'incorr':>6} {'unk':>5} "
        f"{'acc':>8} {'urr':>8} {'fall':>5} {'drop':>5}"
    )
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.dataset:<24} {r.entity_group:<18} {r.mode:<12} {r.model_id:<16} "
            f"{r.total:>6} {r.correct:>6} {r.incorrect:>6} {r.unknown:>5} "
            f"{_fmt_rate(r.accuracy):>8} {_fmt_rate(r.urr):>8} "
            f"{r.fallbacks:>5} {r.dropped:>5}"
        )
    if report.docverify is not None:
        dv = report.docverify
        lines.append("")
        lines.append(
            f"document verification  strategy={dv.strategy} seed={dv.seed} mode={dv.mode}: "
            f"{dv.correct}/{dv.documents} correct "
            f"(accuracy {_fmt_rate(dv.accuracy)}, skipped {dv.skipped}, "
            f"errored {dv.errored}, missing candidates {dv.missing_candidates})"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------

def _entity_group(entity: Entity) -> str:
    if entity.spatial_resolution is not None:
        return f"{entity.entity_type.value}/{entity.spatial_resolution.value}"
    return entity.entity_type.value


def _parallel_map(
    fn: Callable[[Any], Any], items: Sequence[Any], workers: int
) -> list[Any]:
    """Run fn over items with a bounded pool, results in input order; an
    item's exception becomes its result."""

    def safe(item: Any) -> Any:
        try:
            return fn(item)
        except Exception as exc:  # collected, counted against the budget
            return exc

    if workers <= 1 or len(items) <= 1:
        return [safe(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(safe, items))


def _select_jobs(
    docs: Sequence[Document], entity_types: tuple[EntityKind, ...]
) -> list[tuple[Document, Entity, bool]]:
    jobs = []
    for doc in docs:
        for ann in doc.entities:
            if ann.visible is None:
                continue
            if entity_types and ann.entity.entity_type not in entity_types:
                continue
            jobs.append((doc, ann.entity, ann.visible))
    return jobs


def run_benchmark(config: RunConfig, backend: Backend | None = None) -> EvalReport:
    """Execute a full evaluation run and, if an output directory is
    configured, write verdicts.jsonl, report.json and report.txt into it.

    A backend instance can be passed directly (tests); otherwise it is
    built from the configured backend file.
    """

    docs = load_documents(config.dataset_path)
    if backend is None:
        backend = load_backend(config.backend_config)
    registry, template_config = load_template_bundle(config.template_config)
    ctx = VerificationContext(
        backend=backend,
        registry=registry,
        template_config=template_config,
        mode=config.mode,
        image_root=Path(config.dataset_path).parent,
        evidence_root=Path(config.evidence_root) if config.evidence_root else None,
        n_evidence=config.n_evidence,
    )

    jobs = _select_jobs(docs, config.entity_types) if config.entity_eval else []
    if not jobs and config.docverify is None:
        raise EmptyInput("no annotated entities match the requested entity types")

    outcomes = _parallel_map(
        lambda job: verify_entity(job[0], job[1], ctx), jobs, config.parallelism
    )
    verdicts: list[Verdict] = []
    scored: list[tuple[Entity, Verdict, bool]] = []
    failed = 0
    for (doc, entity, gold_visible), outcome in zip(jobs, outcomes):
        if isinstance(outcome, Exception):
            if not isinstance(outcome, RuntimeFailure):
                raise outcome
            logger.warning(
                "job failed for %s/%s: %s", doc.doc_id, entity.entity_id, outcome
            )
            failed += 1
            continue
        verdicts.append(outcome)
        scored.append((entity, outcome, gold_visible))

    if jobs and failed / len(jobs) > config.max_error_fraction:
        raise RunFailed(
            f"{failed}/{len(jobs)} jobs failed, over the "
            f"{config.max_error_fraction:.0%} error budget"
        )

    dataset_name = Path(config.dataset_path).stem
    rows = _build_rows(dataset_name, config, scored)

    docverify_report = None
    if config.docverify is not None:
        docverify_report = _run_docverify(docs, ctx, config)

    report = EvalReport(
        rows=tuple(rows),
        docverify=docverify_report,
        config=_config_echo(config),
        jobs_total=len(jobs),
        jobs_failed=failed,
    )
    if config.output_dir is not None:
        write_report(report, verdicts, config.output_dir)
    return report


def _build_rows(
    dataset_name: str,
    config: RunConfig,
    scored: Sequence[tuple[Entity, Verdict, bool]],
) -> list[EvalRow]:
    groups: dict[str, list[tuple[Verdict, bool]]] = {}
    for entity, verdict, gold in scored:
        groups.setdefault(_entity_group(entity), []).append((verdict, gold))

    rows = []
    for group_name in sorted(groups):
        pairs = groups[group_name]
        group_verdicts = [v for v, _ in pairs]
        gold = {(v.doc_id, v.entity_id): label for v, label in pairs}
        correct = incorrect = unknown = 0
        for v, label in pairs:
            if v.decision is Decision.UNKNOWN:
                unknown += 1
            elif v.decision is (Decision.YES if label else Decision.NO):
                correct += 1
            else:
                incorrect += 1
        rows.append(
            EvalRow(
                dataset=dataset_name,
                entity_group=group_name,
                mode=config.mode.value,
                model_id=group_verdicts[0].model_id or "",
                total=len(pairs),
                correct=correct,
                incorrect=incorrect,
                unknown=unknown,
                accuracy=accuracy(group_verdicts, gold, config.unknown_as_incorrect),
                urr=unknown_rate(group_verdicts),
                fallbacks=sum(1 for v in group_verdicts if v.mode is not config.mode),
                dropped=sum(v.dropped for v in group_verdicts),
            )
        )
    return rows


def _run_docverify(
    docs: Sequence[Document], ctx: VerificationContext, config: RunConfig
) -> DocVerifyReport:
    """Score the document-level protocol: replace each target-type entity
    with an impostor, query consistency scores for both sets, and count a
    document correct when an original tops the combined ranking.

    Only entities that actually got a replacement enter the comparison, so
    the two sides stay symmetric.
    """

    assert config.docverify is not None
    default_type = config.entity_types[0] if len(config.entity_types) == 1 else None
    strategy = parse_strategy(config.docverify.strategy, default_type)
    if config.docverify.pool_path:
        pool = load_pool(config.docverify.pool_path)
    else:
        pool = pool_from_documents(docs, strategy.target_type)

    tampered_sets = [
        build_tampered_document_set(doc, pool, strategy, config.docverify.seed)
        for doc in docs
    ]

    # One flat query list over originals and replacements, parallelized the
    # same way as the main loop, then regrouped per document.
    query_jobs: list[tuple[int, str, Document, Entity]] = []
    for i, (doc, ts) in enumerate(zip(docs, tampered_sets)):
        if ts.skipped or not ts.pairs:
            continue
        for pair in ts.pairs:
            query_jobs.append((i, "original", doc, pair.original))
            query_jobs.append((i, "tampered", doc, pair.replacement))

    outcomes = _parallel_map(
        lambda job: verify_entity(job[2], job[3], ctx), query_jobs, config.parallelism
    )

    per_doc: dict[int, dict[str, list[float]]] = {}
    errored_docs: set[int] = set()
    for (i, side, _, entity), outcome in zip(query_jobs, outcomes):
        if isinstance(outcome, Exception):
            if not isinstance(outcome, RuntimeFailure):
                raise outcome
            logger.warning(
                "docverify query failed for doc index %d / %s: %s", i, entity.entity_id, outcome
            )
            errored_docs.add(i)
            continue
        per_doc.setdefault(i, {"original": [], "tampered": []})[side].append(outcome.cms)

    documents = correct = skipped = missing = 0
    for i, ts in enumerate(tampered_sets):
        if ts.skipped:
            skipped += 1
            continue
        if not ts.pairs:
            missing += 1
            continue
        if i in errored_docs:
            continue
        sides = per_doc[i]
        documents += 1
        if verify_document(sides["original"], sides["tampered"]):
            correct += 1

    return DocVerifyReport(
        strategy=strategy.to_spec(),
        seed=config.docverify.seed,
        mode=config.mode.value,
        documents=documents,
        correct=correct,
        accuracy=(correct / documents) if documents else None,
        skipped=skipped,
        errored=len(errored_docs),
        missing_candidates=missing,
    )


def write_report(report: EvalReport, verdicts: Sequence[Verdict], output_dir: str | Path) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verdicts.jsonl", "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(to_json_line(verdict_to_dict(v)) + "\n")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(render_report_table(report))
