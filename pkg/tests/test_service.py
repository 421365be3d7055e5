"""HTTP service: routes, error mapping, wire shapes."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from entivis import __version__
from entivis.core import document_to_dict, entity_to_dict
from entivis.service.app import create_app

from conftest import make_entity, make_image


@pytest.fixture
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def write_backend(tmp_path, rules=None, default=None, name="backend.json"):
    path = tmp_path / name
    path.write_text(json.dumps({
        "model_id": "llava-1.5",
        "multi_image": True,
        "supports_logprobs": True,
        "rules": rules or [],
        **({"default": default} if default is not None else {}),
    }))
    return str(path)


def inline_doc(image_path="news.png"):
    return {
        "doc_id": "d1",
        "text": "t",
        "image_path": image_path,
        "language": "en",
        "entities": [
            {"entity_id": "e1", "name": "Maria Keller", "type": "person", "visible": True},
            {"entity_id": "e2", "name": "Jonas Weber", "type": "person", "visible": False},
        ],
    }


@pytest.fixture
def workspace(tmp_path):
    make_image().save(tmp_path / "news.png")
    backend = write_backend(
        tmp_path,
        rules=[
            {"if_prompt_contains": "Maria Keller", "p_yes": 0.92},
            {"if_prompt_contains": "Jonas Weber", "p_yes": 0.08},
        ],
        default={"p_yes": 0.5},
    )
    return tmp_path, backend


class TestHealth:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}


class TestVerify:
    def test_inline_document(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/verify", json={
            "doc": inline_doc(),
            "backend_config": backend,
            "image_root": str(tmp_path),
        })
        assert response.status_code == 200
        verdicts = response.json()["verdicts"]
        assert [v["entity_id"] for v in verdicts] == ["e1", "e2"]
        assert verdicts[0]["decision"] == "yes"
        assert verdicts[0]["cms"] == pytest.approx(0.92)
        assert verdicts[1]["decision"] == "no"
        assert verdicts[0]["mode"] == "no_evidence"
        assert verdicts[0]["votes"][0]["source"] == "constrained"

    def test_document_from_path(self, client, workspace):
        tmp_path, backend = workspace
        doc_path = tmp_path / "doc.json"
        doc_path.write_text(json.dumps(inline_doc()))
        response = client.post("/verify", json={
            "doc_path": str(doc_path),
            "backend_config": backend,
        })
        assert response.status_code == 200
        assert len(response.json()["verdicts"]) == 2

    def test_jsonl_document_file(self, client, workspace):
        tmp_path, backend = workspace
        doc_path = tmp_path / "docs.jsonl"
        with open(doc_path, "w") as fh:
            fh.write(json.dumps(inline_doc()) + "\n")
            second = inline_doc()
            second["doc_id"] = "d2"
            fh.write(json.dumps(second) + "\n")
        response = client.post("/verify", json={
            "doc_path": str(doc_path),
            "backend_config": backend,
        })
        assert response.status_code == 200
        assert [v["doc_id"] for v in response.json()["verdicts"]] == ["d1", "d1", "d2", "d2"]

    def test_doc_and_doc_path_conflict(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/verify", json={
            "doc": inline_doc(),
            "doc_path": str(tmp_path / "doc.json"),
            "backend_config": backend,
        })
        assert response.status_code == 422

    def test_neither_document(self, client, workspace):
        _, backend = workspace
        response = client.post("/verify", json={"backend_config": backend})
        assert response.status_code == 422

    def test_missing_doc_path_is_client_error(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/verify", json={
            "doc_path": str(tmp_path / "nope.json"),
            "backend_config": backend,
        })
        assert response.status_code == 400
        assert "detail" in response.json()

    def test_bad_mode_is_client_error(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/verify", json={
            "doc": inline_doc(),
            "backend_config": backend,
            "image_root": str(tmp_path),
            "mode": "telepathy",
        })
        assert response.status_code == 400

    def test_backend_failure_is_server_error(self, client, tmp_path):
        make_image().save(tmp_path / "news.png")
        # No rules, no default: every query raises a runtime failure.
        backend = write_backend(tmp_path)
        response = client.post("/verify", json={
            "doc": inline_doc(),
            "backend_config": backend,
            "image_root": str(tmp_path),
        })
        assert response.status_code == 500
        assert "detail" in response.json()


class TestEvaluate:
    def dataset(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        with open(path, "w") as fh:
            fh.write(json.dumps(inline_doc()) + "\n")
        return str(path)

    def test_report_shape(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/evaluate", json={
            "dataset_path": self.dataset(tmp_path),
            "backend_config": backend,
            "mode": "w/o",
        })
        assert response.status_code == 200
        report = response.json()["report"]
        assert report["jobs"] == {"total": 2, "failed": 0}
        row = report["rows"][0]
        assert row["entity_group"] == "person"
        assert (row["correct"], row["incorrect"], row["unknown"]) == (2, 0, 0)
        assert row["accuracy"] == 1.0
        assert report["docverify"] is None

    def test_missing_dataset(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/evaluate", json={
            "dataset_path": str(tmp_path / "absent.jsonl"),
            "backend_config": backend,
            "mode": "w/o",
        })
        assert response.status_code == 400

    def test_output_dir_writes_report(self, client, workspace):
        tmp_path, backend = workspace
        out = tmp_path / "out"
        response = client.post("/evaluate", json={
            "dataset_path": self.dataset(tmp_path),
            "backend_config": backend,
            "mode": "w/o",
            "output_dir": str(out),
        })
        assert response.status_code == 200
        assert (out / "report.json").is_file()
        assert (out / "verdicts.jsonl").is_file()
        assert (out / "report.txt").is_file()


class TestDocVerify:
    def test_protocol_report(self, client, workspace):
        tmp_path, backend = workspace
        docs = tmp_path / "docs.jsonl"
        with open(docs, "w") as fh:
            fh.write(json.dumps(inline_doc()) + "\n")
        pool = tmp_path / "pool.jsonl"
        with open(pool, "w") as fh:
            for i in range(3):
                fh.write(json.dumps(entity_to_dict(
                    make_entity(entity_id=f"q{i}", name=f"Impostor {i}"))) + "\n")
        response = client.post("/docverify", json={
            "dataset_path": str(docs),
            "backend_config": backend,
            "strategy": "random",
            "entity_type": "person",
            "pool_path": str(pool),
            "seed": 4,
        })
        assert response.status_code == 200
        report = response.json()["report"]
        assert report["rows"] == []
        dv = report["docverify"]
        # Originals answer 0.92/0.08, impostors hit the 0.5 default:
        # max(original) > max(tampered), so the document scores correct.
        assert (dv["documents"], dv["correct"]) == (1, 1)
        assert dv["strategy"] == "random"

    def test_unknown_entity_type(self, client, workspace):
        tmp_path, backend = workspace
        response = client.post("/docverify", json={
            "dataset_path": str(tmp_path / "docs.jsonl"),
            "backend_config": backend,
            "strategy": "random",
            "entity_type": "animal",
        })
        assert response.status_code == 400


class TestTamper:
    def test_generates_pairs_file(self, client, tmp_path):
        make_image().save(tmp_path / "news.png")
        docs = tmp_path / "docs.jsonl"
        records = []
        for i in range(3):
            rec = inline_doc()
            rec["doc_id"] = f"d{i}"
            records.append(rec)
        with open(docs, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
        out = tmp_path / "tampered.jsonl"
        response = client.post("/tamper", json={
            "dataset_path": str(docs),
            "strategy": "random",
            "entity_type": "person",
            "seed": 2,
            "out_path": str(out),
        })
        assert response.status_code == 200
        body = response.json()
        assert body["documents"] == 3
        assert body["replaced"] == 6  # two persons per document
        assert body["errors"] == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3
        first = json.loads(lines[0])
        assert first["strategy"] == "random"
        assert {p["original_entity_id"] for p in first["pairs"]} == {"e1", "e2"}

    def test_default_out_path_named_after_inputs(self, client, tmp_path):
        make_image().save(tmp_path / "news.png")
        docs = tmp_path / "docs.jsonl"
        with open(docs, "w") as fh:
            fh.write(json.dumps(inline_doc()) + "\n")
        response = client.post("/tamper", json={
            "dataset_path": str(docs),
            "strategy": "person:same_country",
            "seed": 7,
        })
        assert response.status_code == 200
        out = response.json()["out_path"]
        assert out.endswith("docs.tampered.person-same_country.seed7.jsonl")


class TestCompose:
    def test_vertical_composition(self, client, tmp_path):
        news = tmp_path / "news.png"
        evidence = tmp_path / "evidence.png"
        make_image(size=(600, 400)).save(news)
        make_image(size=(300, 200), color=(60, 60, 60)).save(evidence)
        out = tmp_path / "composite.png"
        response = client.post("/compose", json={
            "news_path": str(news),
            "evidence_path": str(evidence),
            "out_path": str(out),
        })
        assert response.status_code == 200
        body = response.json()
        assert body["orientation"] == "vertical"
        assert (body["width"], body["height"]) == (610, 820)
        assert out.is_file()

    def test_bad_color_rejected(self, client, tmp_path):
        news = tmp_path / "news.png"
        make_image().save(news)
        response = client.post("/compose", json={
            "news_path": str(news),
            "evidence_path": str(news),
            "out_path": str(tmp_path / "o.png"),
            "news_color": "sparkle",
        })
        assert response.status_code == 400


class TestFetchEvidence:
    def test_missing_config_file(self, client, tmp_path):
        response = client.post("/fetch-evidence", json={
            "root": str(tmp_path),
            "entity_id": "Q1",
            "query": "test",
            "source": "google",
            "fetcher_config": str(tmp_path / "absent.json"),
        })
        assert response.status_code == 400

    def test_unconfigured_source(self, client, tmp_path):
        config = tmp_path / "fetcher.json"
        config.write_text(json.dumps({
            "sources": {"google": {"endpoint_url": "http://search.test/s"}}
        }))
        response = client.post("/fetch-evidence", json={
            "root": str(tmp_path),
            "entity_id": "Q1",
            "query": "test",
            "source": "bing",
            "fetcher_config": str(config),
        })
        assert response.status_code == 400

    def test_validation_error_on_missing_field(self, client, tmp_path):
        response = client.post("/fetch-evidence", json={"root": str(tmp_path)})
        assert response.status_code == 422
