"""Question templates and rendering.

Questions are always rendered in English, whatever language the document is
in. A template's pattern carries placeholders in angle brackets; <name> must
appear exactly once. Evidence-mode templates may additionally reference the
border colors (comp) or the image order (series).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .compose import BorderSpec, color_name
from .core import EntityKind, Entity, InputError, VerifyMode


class MissingPlaceholder(InputError):
    """A pattern lacks <name>, or contains a placeholder nothing substitutes."""


class ModeNotApplicable(InputError):
    """The template does not support the requested verification mode."""


class UnknownTemplateId(InputError):
    """A config references a template_id absent from the registry."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuestionTemplate:
    template_id: str
    pattern: str
    applicable_modes: frozenset[VerifyMode]
    answer_instruction: str | None = None


@dataclass(frozen=True)
class TemplateConfig:
    """Which template to use per (model, entity type, mode); anything not
    listed falls back to default_template_id."""

    default_template_id: str
    overrides: Mapping[tuple[str, EntityKind, VerifyMode], str]


# ---------------------------------------------------------------------------
# Registry and config loading
# ---------------------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"<[a-z_]+>")

# Placeholders render_question / render_evidence_question know how to fill.
_KNOWN_PLACEHOLDERS = {"<type>", "<name>", "<news_color>", "<evidence_color>"}


def _template_from_record(template_id: str, rec: Mapping[str, Any]) -> QuestionTemplate:
    pattern = rec.get("pattern")
    if not isinstance(pattern, str) or not pattern:
        raise InputError(f"template {template_id!r}: pattern missing or empty")
    if pattern.count("<name>") != 1:
        raise MissingPlaceholder(
            f"template {template_id!r}: pattern must contain <name> exactly once"
        )
    unknown = set(_PLACEHOLDER_RE.findall(pattern)) - _KNOWN_PLACEHOLDERS
    if unknown:
        raise MissingPlaceholder(
            f"template {template_id!r}: unknown placeholders {sorted(unknown)}"
        )
    modes = rec.get("applicable_modes")
    if not isinstance(modes, list) or not modes:
        raise InputError(f"template {template_id!r}: applicable_modes missing")
    try:
        mode_set = frozenset(VerifyMode(m) for m in modes)
    except ValueError as exc:
        raise InputError(f"template {template_id!r}: {exc}") from None
    instruction = rec.get("answer_instruction")
    if instruction is not None and not isinstance(instruction, str):
        raise InputError(f"template {template_id!r}: answer_instruction must be a string")
    return QuestionTemplate(
        template_id=template_id,
        pattern=pattern,
        applicable_modes=mode_set,
        answer_instruction=instruction,
    )


def registry_from_mapping(data: Mapping[str, Any]) -> dict[str, QuestionTemplate]:
    return {tid: _template_from_record(tid, rec) for tid, rec in data.items()}


def load_registry(path: str | Path) -> dict[str, QuestionTemplate]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: template registry must be a JSON object")
    return registry_from_mapping(data)


def config_from_mapping(data: Mapping[str, Any]) -> TemplateConfig:
    default_id = data.get("default_template_id")
    if not isinstance(default_id, str) or not default_id:
        raise InputError("template config lacks default_template_id")
    overrides: dict[tuple[str, EntityKind, VerifyMode], str] = {}
    for model_id, per_kind in data.get("overrides", {}).items():
        for kind_name, per_mode in per_kind.items():
            try:
                kind = EntityKind(kind_name)
            except ValueError:
                raise InputError(f"template config: unknown entity type {kind_name!r}") from None
            for mode_name, template_id in per_mode.items():
                try:
                    mode = VerifyMode(mode_name)
                except ValueError:
                    raise InputError(f"template config: unknown mode {mode_name!r}") from None
                overrides[(model_id, kind, mode)] = template_id
    return TemplateConfig(default_template_id=default_id, overrides=overrides)


def load_template_config(path: str | Path) -> TemplateConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: template config must be a JSON object")
    return config_from_mapping(data)


def default_registry() -> dict[str, QuestionTemplate]:
    text = resources.files("entivis.data").joinpath("templates.json").read_text("utf-8")
    return registry_from_mapping(json.loads(text))


def default_template_config() -> TemplateConfig:
    text = resources.files("entivis.data").joinpath("template_config.json").read_text("utf-8")
    return config_from_mapping(json.loads(text))


def load_template_bundle(
    path: str | Path | None,
) -> tuple[dict[str, QuestionTemplate], TemplateConfig]:
    """Registry plus config, ready to use.

    Without a path both come from the shipped defaults. A config file may
    embed a "templates" section; those templates overlay the shipped
    registry, so a custom config stays one self-contained file.
    """

    registry = default_registry()
    if path is None:
        return registry, default_template_config()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InputError(f"{path}: template config must be a JSON object")
    extra = data.get("templates")
    if extra is not None:
        if not isinstance(extra, dict):
            raise InputError(f"{path}: 'templates' must be a JSON object")
        registry.update(registry_from_mapping(extra))
    return registry, config_from_mapping(data)


# ---------------------------------------------------------------------------
# Selection and rendering
# ---------------------------------------------------------------------------

def select_template(
    registry: Mapping[str, QuestionTemplate],
    config: TemplateConfig,
    model_id: str,
    entity_kind: EntityKind,
    mode: VerifyMode,
) -> QuestionTemplate:
    """Exact (model, type, mode) match, else the config's default."""

    template_id = config.overrides.get((model_id, entity_kind, mode), config.default_template_id)
    try:
        return registry[template_id]
    except KeyError:
        raise UnknownTemplateId(f"template {template_id!r} not in registry") from None


def _render(template: QuestionTemplate, substitutions: Mapping[str, str]) -> str:
    if template.pattern.count("<name>") != 1:
        raise MissingPlaceholder(
            f"template {template.template_id!r}: pattern must contain <name> exactly once"
        )
    needed = set(_PLACEHOLDER_RE.findall(template.pattern))
    missing = needed - set(substitutions)
    if missing:
        raise MissingPlaceholder(
            f"template {template.template_id!r}: no substitution for {sorted(missing)}"
        )
    # <name> goes last so entity names containing placeholder-like text stay
    # literal instead of being substituted again.
    text = template.pattern
    for placeholder, value in substitutions.items():
        if placeholder == "<name>":
            continue
        text = text.replace(placeholder, value)
    text = text.replace("<name>", substitutions["<name>"])
    if template.answer_instruction:
        text = f"{text} {template.answer_instruction}"
    return text


def render_question(template: QuestionTemplate, entity: Entity) -> str:
    """Render the no-evidence question about the news image alone."""

    if VerifyMode.NO_EVIDENCE not in template.applicable_modes:
        raise ModeNotApplicable(
            f"template {template.template_id!r} does not apply to no-evidence mode"
        )
    return _render(
        template,
        {"<type>": entity.entity_type.value, "<name>": entity.name},
    )


def render_evidence_question(
    template: QuestionTemplate,
    entity: Entity,
    mode: VerifyMode,
    border: BorderSpec | None = None,
) -> str:
    """Render the question for an evidence-backed query.

    comp templates name the two images by border color, so the border spec
    used to build the composite must be passed in; series templates speak of
    the first and second image and ignore it.
    """

    if mode not in (VerifyMode.COMP, VerifyMode.SERIES):
        raise ModeNotApplicable(f"{mode.value} is not an evidence mode")
    if mode not in template.applicable_modes:
        raise ModeNotApplicable(
            f"template {template.template_id!r} does not apply to mode {mode.value!r}"
        )
    substitutions = {"<type>": entity.entity_type.value, "<name>": entity.name}
    if mode is VerifyMode.COMP:
        border = border or BorderSpec()
        substitutions["<news_color>"] = color_name(border.news_color)
        substitutions["<evidence_color>"] = color_name(border.evidence_color)
    return _render(template, substitutions)
