"""Command-line client.

Every command builds a service request model and either POSTs it to the
server named by --server or calls the service handler in-process (the
default; no server needed). stdout carries machine-readable JSON Lines,
everything human goes to stderr. Exit codes: 0 success, 1 bad input or
configuration, 2 runtime failure.
"""

from __future__ import annotations

import json
import logging
import sys
from typing import Any, Callable, TypeVar

import click
import httpx
from pydantic import BaseModel, ValidationError

from .core import EntityKind, InputError, RuntimeFailure
from .service import handlers
from .service.schemas import (
    ComposeRequest,
    ComposeResponse,
    DocVerifyRequest,
    EvaluateRequest,
    EvaluateResponse,
    FetchEvidenceRequest,
    FetchEvidenceResponse,
    TamperRequest,
    TamperResponse,
    VerifyRequest,
    VerifyResponse,
)

logger = logging.getLogger("entivis")

R = TypeVar("R", bound=BaseModel)


def _emit(record: Any) -> None:
    """One machine-readable line on stdout."""

    click.echo(json.dumps(record, ensure_ascii=False, separators=(",", ":")))


def _dispatch(
    server: str | None,
    path: str,
    request: BaseModel,
    handler: Callable[[Any], R],
    response_model: type[R],
) -> R:
    if server is None:
        return handler(request)
    url = server.rstrip("/") + path
    try:
        response = httpx.post(url, json=request.model_dump(mode="json"), timeout=None)
    except httpx.TransportError as exc:
        raise RuntimeFailure(f"cannot reach server {server}: {exc}") from exc
    if response.status_code >= 500:
        raise RuntimeFailure(_detail(response))
    if response.status_code >= 400:
        raise InputError(_detail(response))
    return response_model.model_validate(response.json())


def _detail(response: httpx.Response) -> str:
    try:
        return str(response.json().get("detail", response.text))
    except ValueError:
        return response.text


def _entity_types(value: str | None) -> list[str]:
    if not value:
        return []
    names = [part.strip() for part in value.split(",") if part.strip()]
    for name in names:
        try:
            EntityKind(name)
        except ValueError:
            raise InputError(f"unknown entity type {name!r}") from None
    return names


# ---------------------------------------------------------------------------
# Command group
# ---------------------------------------------------------------------------

@click.group()
@click.option("--server", default=None, metavar="URL", help="Verification service to talk to; default is in-process.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging on stderr.")
@click.pass_context
def cli(ctx: click.Context, server: str | None, verbose: bool) -> None:
    """Check whether named entities from news text appear in the news image."""

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not verbose:
        # httpx logs one INFO line per request; too chatty for a CLI default
        logging.getLogger("httpx").setLevel(logging.WARNING)
    ctx.obj = server


@cli.command()
@click.option("--doc", "doc_path", required=True, type=click.Path(), help="Document file (JSON object or JSON Lines).")
@click.option("--backend", "backend_config", required=True, type=click.Path(), help="Backend config JSON.")
@click.option("--mode", default="w/o", show_default=True, help="w/o, comp, or series.")
@click.option("--evidence-root", default=None, type=click.Path(), help="Evidence store root (comp/series).")
@click.option("--n-evidence", default=20, show_default=True, help="Evidence images per entity.")
@click.option("--template-config", default=None, type=click.Path(), help="Question template config JSON.")
@click.option("--image-root", default=None, type=click.Path(), help="Base directory for image paths (default: the document file's directory).")
@click.option("--parallelism", default=4, show_default=True)
@click.pass_obj
def verify(server: str | None, **kwargs: Any) -> None:
    """Verify one document's entities; one verdict JSON line per entity."""

    request = VerifyRequest(**kwargs)
    response = _dispatch(server, "/verify", request, handlers.verify, VerifyResponse)
    for verdict in response.verdicts:
        _emit(verdict.model_dump())


@cli.command()
@click.option("--dataset", "dataset_path", default=None, type=click.Path(), help="Dataset JSONL file.")
@click.option("--backend", "backend_config", default=None, type=click.Path(), help="Backend config JSON.")
@click.option("--mode", default="w/o", show_default=True, help="w/o, comp, or series.")
@click.option("--evidence-root", default=None, type=click.Path())
@click.option("--n-evidence", default=20, show_default=True)
@click.option("--template-config", default=None, type=click.Path())
@click.option("--entity-types", default=None, help="Comma-separated filter: person,location,event.")
@click.option("--output-dir", default=None, type=click.Path(), help="Where report.json/report.txt/verdicts.jsonl go.")
@click.option("--parallelism", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--unknown-as-incorrect", is_flag=True, help="Count unknown verdicts as wrong instead of excluding them.")
@click.option("--max-error-fraction", default=0.1, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(), help="Run-config JSON; replaces the other options.")
@click.pass_obj
def evaluate(
    server: str | None,
    dataset_path: str | None,
    backend_config: str | None,
    mode: str,
    evidence_root: str | None,
    n_evidence: int,
    template_config: str | None,
    entity_types: str | None,
    output_dir: str | None,
    parallelism: int,
    seed: int,
    unknown_as_incorrect: bool,
    max_error_fraction: float,
    config_path: str | None,
) -> None:
    """Run a benchmark over a dataset; prints the report as one JSON line."""

    if config_path is not None:
        with open(config_path, encoding="utf-8") as fh:
            try:
                request = EvaluateRequest.model_validate(json.load(fh))
            except ValidationError as exc:
                raise InputError(f"{config_path}: {exc}") from None
    else:
        if dataset_path is None or backend_config is None:
            raise click.UsageError("either --config or both --dataset and --backend are required")
        request = EvaluateRequest(
            dataset_path=dataset_path,
            backend_config=backend_config,
            mode=mode,
            evidence_root=evidence_root,
            n_evidence=n_evidence,
            template_config=template_config,
            entity_types=_entity_types(entity_types),
            output_dir=output_dir,
            parallelism=parallelism,
            seed=seed,
            unknown_as_incorrect=unknown_as_incorrect,
            max_error_fraction=max_error_fraction,
        )
    response = _dispatch(server, "/evaluate", request, handlers.evaluate, EvaluateResponse)
    _emit(response.report.model_dump())


@cli.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--backend", "backend_config", required=True, type=click.Path())
@click.option("--strategy", required=True, help="random | person:same_country | person:same_gender | person:same_country_gender | gcd:<min>:<max> | event:same_class")
@click.option("--seed", default=0, show_default=True)
@click.option("--mode", default="w/o", show_default=True)
@click.option("--pool", "pool_path", default=None, type=click.Path(), help="Candidate pool JSONL; default is the dataset's own entities.")
@click.option("--entity-types", default=None, help="Target type for the 'random' strategy (exactly one).")
@click.option("--evidence-root", default=None, type=click.Path())
@click.option("--n-evidence", default=20, show_default=True)
@click.option("--template-config", default=None, type=click.Path())
@click.option("--output-dir", default=None, type=click.Path())
@click.option("--parallelism", default=4, show_default=True)
@click.option("--max-error-fraction", default=0.1, show_default=True)
@click.pass_obj
def docverify(server: str | None, entity_types: str | None, **kwargs: Any) -> None:
    """Document-level tampering protocol; prints the report as a JSON line."""

    names = _entity_types(entity_types)
    if len(names) > 1:
        raise InputError("docverify takes at most one entity type")
    request = DocVerifyRequest(entity_type=names[0] if names else None, **kwargs)
    response = _dispatch(server, "/docverify", request, handlers.docverify, EvaluateResponse)
    _emit(response.report.model_dump())


@cli.command("tamper-gen")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--strategy", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--pool", "pool_path", default=None, type=click.Path())
@click.option("--entity-types", default=None, help="Target type for the 'random' strategy (exactly one).")
@click.option("--out", "out_path", default=None, type=click.Path(), help="Output file; default lands next to the dataset.")
@click.pass_obj
def tamper_gen(server: str | None, entity_types: str | None, **kwargs: Any) -> None:
    """Write tampered entity sets for a dataset."""

    names = _entity_types(entity_types)
    if len(names) > 1:
        raise InputError("tamper-gen takes at most one entity type")
    request = TamperRequest(entity_type=names[0] if names else None, **kwargs)
    response = _dispatch(server, "/tamper", request, handlers.tamper, TamperResponse)
    _emit(response.model_dump())


@cli.command()
@click.option("--news", "news_path", required=True, type=click.Path())
@click.option("--evidence", "evidence_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--news-color", default="red", show_default=True)
@click.option("--evidence-color", default="blue", show_default=True)
@click.option("--thickness", "thickness_px", default=5, show_default=True)
@click.pass_obj
def compose(server: str | None, **kwargs: Any) -> None:
    """Debug helper: write the composite image a comp query would see."""

    request = ComposeRequest(**kwargs)
    response = _dispatch(server, "/compose", request, handlers.compose_debug, ComposeResponse)
    _emit(response.model_dump())


@cli.command("fetch-evidence")
@click.option("--root", required=True, type=click.Path(), help="Evidence store root.")
@click.option("--entity-id", required=True)
@click.option("--query", required=True)
@click.option("--source", required=True, type=click.Choice(["google", "bing", "wikidata", "other"]))
@click.option("--limit", default=20, show_default=True)
@click.option("--config", "fetcher_config", required=True, type=click.Path(), help="Fetcher endpoints config JSON.")
@click.pass_obj
def fetch_evidence(server: str | None, **kwargs: Any) -> None:
    """Search one source for reference images and store them."""

    request = FetchEvidenceRequest(**kwargs)
    response = _dispatch(server, "/fetch-evidence", request, handlers.fetch, FetchEvidenceResponse)
    _emit(response.model_dump())


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    """Run the CLI with the spec'd exit codes (0 ok, 1 input, 2 runtime)."""

    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except FileNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except RuntimeFailure as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
