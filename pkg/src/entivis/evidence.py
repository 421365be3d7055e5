"""Reference-image store, one directory per entity.

Layout: <root>/<percent-encoded entity_id>/manifest.json plus image files.
The manifest fixes the crawl order; selection is always a prefix of it. An
entity holds at most 20 images, whatever the sources contribute.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping
from urllib.parse import quote

import httpx
from PIL import Image, UnidentifiedImageError

from .core import InputError, RuntimeFailure
from .backends import TransportError

MAX_ITEMS_PER_ENTITY = 20

SOURCES = ("google", "bing", "wikidata", "other")


class ManifestNotFound(InputError):
    """The entity has no manifest under the store root."""


class ManifestParseError(InputError):
    """The manifest exists but does not follow the schema."""


class QuotaExceeded(RuntimeFailure):
    """The search endpoint rejected the request for rate/quota reasons."""


class NoResults(RuntimeFailure):
    """The search returned an empty result list."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvidenceItem:
    """One stored reference image. ref is the stable cross-file handle
    ("<entity_id>/<file>") used in verdict votes; path is where the bytes
    live right now."""

    path: Path
    source: str
    rank: int
    ref: str


@dataclass(frozen=True)
class EvidenceSet:
    """All usable evidence for one entity, in manifest order. removed counts
    manifest entries dropped because their file was missing or undecodable."""

    entity_id: str
    items: tuple[EvidenceItem, ...]
    removed: int = 0


# ---------------------------------------------------------------------------
# Loading and selection
# ---------------------------------------------------------------------------

def entity_dir(root: str | Path, entity_id: str) -> Path:
    return Path(root) / quote(entity_id, safe="")


def _decodable(path: Path) -> bool:
    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except (OSError, UnidentifiedImageError, ValueError):
        return False


def load_manifest(root: str | Path, entity_id: str) -> EvidenceSet:
    """Read an entity's manifest, silently dropping entries whose image file
    is missing or broken (the drop count is reported on the set)."""

    manifest_path = entity_dir(root, entity_id) / "manifest.json"
    if not manifest_path.is_file():
        raise ManifestNotFound(f"no manifest for entity {entity_id!r} under {root}")
    try:
        data = json.loads(manifest_path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{manifest_path}: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("items"), list):
        raise ManifestParseError(f"{manifest_path}: expected an object with an 'items' list")
    if data.get("entity_id") != entity_id:
        raise ManifestParseError(
            f"{manifest_path}: manifest names entity {data.get('entity_id')!r}"
        )

    items: list[EvidenceItem] = []
    removed = 0
    for rec in data["items"]:
        try:
            file_name = str(rec["file"])
            source = str(rec["source"])
            rank = int(rec["rank"])
        except (TypeError, KeyError, ValueError):
            raise ManifestParseError(f"{manifest_path}: malformed item {rec!r}") from None
        if source not in SOURCES:
            raise ManifestParseError(f"{manifest_path}: unknown source {source!r}")
        path = manifest_path.parent / file_name
        if not path.is_file() or not _decodable(path):
            removed += 1
            continue
        items.append(
            EvidenceItem(path=path, source=source, rank=rank, ref=f"{entity_id}/{file_name}")
        )
        if len(items) == MAX_ITEMS_PER_ENTITY:
            break
    return EvidenceSet(entity_id=entity_id, items=tuple(items), removed=removed)


def select_evidence(evidence: EvidenceSet, n: int) -> tuple[EvidenceItem, ...]:
    """The first min(n, available) items in manifest order."""

    if n < 0:
        raise InputError(f"evidence count must be non-negative, got {n}")
    return evidence.items[:n]


# ---------------------------------------------------------------------------
# Fetching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FetcherSource:
    endpoint_url: str
    api_key_env_var: str | None = None


def load_fetcher_config(path: str | Path) -> dict[str, FetcherSource]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    sources = data.get("sources") if isinstance(data, dict) else None
    if not isinstance(sources, dict):
        raise InputError(f"{path}: fetcher config needs a 'sources' object")
    out: dict[str, FetcherSource] = {}
    for name, rec in sources.items():
        if name not in SOURCES:
            raise InputError(f"{path}: unknown source {name!r}")
        if "endpoint_url" not in rec:
            raise InputError(f"{path}: source {name!r} lacks endpoint_url")
        out[name] = FetcherSource(
            endpoint_url=rec["endpoint_url"],
            api_key_env_var=rec.get("api_key_env_var"),
        )
    return out


_EXTENSIONS = {"JPEG": ".jpg", "PNG": ".png", "GIF": ".gif", "WEBP": ".webp", "BMP": ".bmp"}

# Store mutations are serialized; fetches are rare and cheap relative to
# model queries, so one lock is plenty.
_store_lock = threading.Lock()


def _existing_hashes(directory: Path) -> set[str]:
    hashes = set()
    for path in directory.iterdir():
        if path.name == "manifest.json" or not path.is_file():
            continue
        hashes.add(hashlib.sha256(path.read_bytes()).hexdigest())
    return hashes


def _write_manifest(directory: Path, entity_id: str, items: list[dict[str, Any]]) -> None:
    payload = {"entity_id": entity_id, "items": items}
    (directory / "manifest.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def fetch_evidence(
    root: str | Path,
    entity_id: str,
    query: str,
    source: str,
    config: Mapping[str, FetcherSource],
    limit: int = MAX_ITEMS_PER_ENTITY,
    transport: httpx.BaseTransport | None = None,
) -> EvidenceSet:
    """Search one source for reference images and add them to the store.

    Downloads are deduplicated by content hash (across sources), broken
    payloads are skipped, and the per-entity cap is enforced. Running the
    same fetch twice against identical responses changes nothing the second
    time. Returns the store state after the fetch.
    """

    if source not in SOURCES:
        raise InputError(f"unknown evidence source {source!r}")
    if source not in config:
        raise InputError(f"no endpoint configured for source {source!r}")
    if limit < 1:
        raise InputError(f"limit must be positive, got {limit}")

    src = config[source]
    headers = {}
    if src.api_key_env_var:
        key = os.environ.get(src.api_key_env_var)
        if not key:
            raise InputError(f"environment variable {src.api_key_env_var!r} is not set")
        headers["X-Api-Key"] = key

    with httpx.Client(transport=transport, headers=headers, timeout=30.0) as client:
        try:
            response = client.get(src.endpoint_url, params={"q": query, "limit": limit})
        except httpx.TransportError as exc:
            raise TransportError(f"search request failed: {exc}") from exc
        if response.status_code == 429:
            raise QuotaExceeded(f"source {source!r} rejected the search: quota exhausted")
        if response.status_code >= 400:
            raise TransportError(
                f"search returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            results = response.json().get("results", [])
        except ValueError as exc:
            raise TransportError(f"search returned invalid JSON: {exc}") from None
        if not results:
            raise NoResults(f"source {source!r} found nothing for {query!r}")

        with _store_lock:
            directory = entity_dir(root, entity_id)
            directory.mkdir(parents=True, exist_ok=True)
            manifest_path = directory / "manifest.json"
            if manifest_path.is_file():
                try:
                    manifest = json.loads(manifest_path.read_text("utf-8"))
                    existing_items = list(manifest.get("items", []))
                except (OSError, json.JSONDecodeError) as exc:
                    raise ManifestParseError(f"{manifest_path}: {exc}") from None
            else:
                existing_items = []
            seen_hashes = _existing_hashes(directory)

            added = 0
            for rank, rec in enumerate(results):
                if len(existing_items) >= MAX_ITEMS_PER_ENTITY or added >= limit:
                    break
                url = rec.get("url")
                if not url:
                    continue
                try:
                    download = client.get(url)
                except httpx.TransportError:
                    continue
                if download.status_code >= 400:
                    continue
                payload = download.content
                try:
                    with Image.open(io.BytesIO(payload)) as img:
                        img.verify()
                        fmt = img.format or "PNG"
                except (OSError, UnidentifiedImageError, ValueError):
                    continue
                digest = hashlib.sha256(payload).hexdigest()
                if digest in seen_hashes:
                    continue
                file_name = digest[:16] + _EXTENSIONS.get(fmt, ".img")
                (directory / file_name).write_bytes(payload)
                seen_hashes.add(digest)
                existing_items.append({"file": file_name, "source": source, "rank": rank})
                added += 1

            _write_manifest(directory, entity_id, existing_items)

    return load_manifest(root, entity_id)
