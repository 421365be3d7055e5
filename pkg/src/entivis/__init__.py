"""Cross-modal entity verification.

Given a news document (text, image, named entities), decide for each entity
whether it is depicted in the news image by asking a vision-language model
backend, optionally supported by reference images of the entity.
"""

__version__ = "0.1.0"

from .core import (
    AnnotatedEntity,
    ClassProbs,
    Decision,
    Document,
    Entity,
    EntityKind,
    EntivisError,
    GeoPoint,
    InputError,
    ProbSource,
    RuntimeFailure,
    SpatialResolution,
    Verdict,
    VerifyMode,
    Vote,
)

__all__ = [
    "__version__",
    "AnnotatedEntity",
    "ClassProbs",
    "Decision",
    "Document",
    "Entity",
    "EntityKind",
    "EntivisError",
    "GeoPoint",
    "InputError",
    "ProbSource",
    "RuntimeFailure",
    "SpatialResolution",
    "Verdict",
    "VerifyMode",
    "Vote",
]
