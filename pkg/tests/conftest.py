"""Shared fixtures: tiny rasters, documents, and canned mock backends."""

from __future__ import annotations

from pathlib import Path

import pytest
from PIL import Image

from entivis.backends import BackendDescriptor, MockBackend
from entivis.core import AnnotatedEntity, Document, Entity, EntityKind


def make_image(color=(120, 40, 40), size=(32, 24)) -> Image.Image:
    return Image.new("RGB", size, color)


def make_entity(
    entity_id: str = "e1",
    name: str = "Maria Keller",
    kind: EntityKind = EntityKind.PERSON,
    **extra,
) -> Entity:
    return Entity(entity_id=entity_id, name=name, entity_type=kind, **extra)


def make_document(
    tmp_path: Path,
    entities: tuple[AnnotatedEntity, ...],
    doc_id: str = "d1",
    image_name: str = "news.png",
) -> Document:
    make_image().save(tmp_path / image_name)
    return Document(
        doc_id=doc_id,
        text="A short wire item naming the entities under test.",
        image_path=image_name,
        language="en",
        entities=entities,
    )


def mock_backend(
    *,
    default=None,
    rules=None,
    fixtures=None,
    model_id: str = "llava-1.5",
    multi_image: bool = True,
    supports_logprobs: bool = True,
) -> MockBackend:
    return MockBackend(
        BackendDescriptor(
            model_id=model_id,
            multi_image=multi_image,
            supports_logprobs=supports_logprobs,
        ),
        fixtures=fixtures,
        rules=rules,
        default=default,
    )


@pytest.fixture
def news_image() -> Image.Image:
    return make_image()


@pytest.fixture
def person() -> Entity:
    return make_entity()
