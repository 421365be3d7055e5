"""Domain model: enums, invariants, validation, and serialization."""

from __future__ import annotations

import io
import json

import pytest
from hypothesis import given, strategies as st

from entivis.core import (
    DUPLICATE_ENTITY_ID,
    EMPTY_FIELD,
    GEO_OUT_OF_BOUNDS,
    IMAGE_UNREADABLE,
    SPATIAL_RESOLUTION_MISPLACED,
    AnnotatedEntity,
    ClassProbs,
    Decision,
    Document,
    Entity,
    EntityKind,
    GeoPoint,
    ParseError,
    ProbSource,
    SpatialResolution,
    Verdict,
    VerifyMode,
    Vote,
    document_from_dict,
    document_to_dict,
    entity_from_dict,
    entity_to_dict,
    parse_mode,
    read_jsonl,
    to_json_line,
    validate_document,
    verdict_from_dict,
    verdict_to_dict,
)

from conftest import make_document, make_entity


class TestParseMode:
    @pytest.mark.parametrize("raw", ["w/o", "wo", "no_evidence", "no-evidence"])
    def test_no_evidence_spellings(self, raw):
        assert parse_mode(raw) is VerifyMode.NO_EVIDENCE

    def test_comp_and_series(self):
        assert parse_mode("comp") is VerifyMode.COMP
        assert parse_mode("series") is VerifyMode.SERIES

    def test_unknown_mode_rejected(self):
        with pytest.raises(Exception):
            parse_mode("collage")


class TestClassProbs:
    def test_probs_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ClassProbs(p_yes=0.6, p_no=0.6, source=ProbSource.CONSTRAINED)

    def test_probs_must_be_in_range(self):
        with pytest.raises(ValueError):
            ClassProbs(p_yes=1.2, p_no=-0.2, source=ProbSource.CONSTRAINED)

    def test_valid_pair_accepted(self):
        cp = ClassProbs(p_yes=0.75, p_no=0.25, source=ProbSource.CONSTRAINED)
        assert cp.p_yes == 0.75


class TestVerdictInvariants:
    def test_unknown_carries_no_votes(self):
        vote = Vote(None, ClassProbs(1.0, 0.0, ProbSource.CONSTRAINED))
        with pytest.raises(ValueError):
            Verdict("d", "e", VerifyMode.NO_EVIDENCE, Decision.UNKNOWN, 0.5, votes=(vote,))

    def test_decided_needs_votes(self):
        with pytest.raises(ValueError):
            Verdict("d", "e", VerifyMode.NO_EVIDENCE, Decision.YES, 1.0)

    def test_cms_bounds(self):
        vote = Vote(None, ClassProbs(1.0, 0.0, ProbSource.CONSTRAINED))
        with pytest.raises(ValueError):
            Verdict("d", "e", VerifyMode.NO_EVIDENCE, Decision.YES, 1.5, votes=(vote,))


class TestValidateDocument:
    def test_clean_document(self, tmp_path):
        doc = make_document(tmp_path, (AnnotatedEntity(make_entity(), True),))
        assert validate_document(doc, image_root=str(tmp_path)) == []

    def test_duplicate_entity_ids_flagged(self, tmp_path):
        doc = make_document(
            tmp_path,
            (
                AnnotatedEntity(make_entity("same"), True),
                AnnotatedEntity(make_entity("same", name="Other Name"), False),
            ),
        )
        codes = [i.code for i in validate_document(doc)]
        assert DUPLICATE_ENTITY_ID in codes

    def test_geo_out_of_bounds(self, tmp_path):
        bad = Entity(
            entity_id="loc",
            name="Nowhere",
            entity_type=EntityKind.LOCATION,
            spatial_resolution=SpatialResolution.CITY,
            geo=GeoPoint(lat=91.0, lon=0.0),
        )
        doc = make_document(tmp_path, (AnnotatedEntity(bad, None),))
        codes = [i.code for i in validate_document(doc)]
        assert GEO_OUT_OF_BOUNDS in codes

    def test_resolution_only_on_locations(self, tmp_path):
        bad = Entity(
            entity_id="p",
            name="A Person",
            entity_type=EntityKind.PERSON,
            spatial_resolution=SpatialResolution.CITY,
        )
        doc = make_document(tmp_path, (AnnotatedEntity(bad, None),))
        codes = [i.code for i in validate_document(doc)]
        assert SPATIAL_RESOLUTION_MISPLACED in codes

    def test_empty_text_is_allowed(self, tmp_path):
        # Entities are pre-extracted, so a document may carry no text at all.
        doc = make_document(tmp_path, (AnnotatedEntity(make_entity(), True),))
        hollow = Document(
            doc_id=doc.doc_id, text="", image_path=doc.image_path,
            language=doc.language, entities=doc.entities,
        )
        assert validate_document(hollow, image_root=str(tmp_path)) == []

    def test_empty_doc_id_flagged(self, tmp_path):
        doc = make_document(tmp_path, (AnnotatedEntity(make_entity(), True),))
        anon = Document(
            doc_id="", text=doc.text, image_path=doc.image_path,
            language=doc.language, entities=doc.entities,
        )
        codes = [i.code for i in validate_document(anon)]
        assert EMPTY_FIELD in codes

    def test_missing_image_flagged_only_with_root(self, tmp_path):
        doc = make_document(tmp_path, (AnnotatedEntity(make_entity(), True),))
        gone = Document(
            doc_id=doc.doc_id, text=doc.text, image_path="absent.png",
            language=doc.language, entities=doc.entities,
        )
        assert validate_document(gone) == []
        codes = [i.code for i in validate_document(gone, image_root=str(tmp_path))]
        assert IMAGE_UNREADABLE in codes


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def geo_points():
    finite = dict(allow_nan=False, allow_infinity=False)
    return st.builds(
        GeoPoint,
        lat=st.floats(min_value=-90, max_value=90, **finite),
        lon=st.floats(min_value=-180, max_value=180, **finite),
    )


def entities():
    ids = st.text(
        alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")),
        min_size=1, max_size=12,
    )
    return st.builds(
        Entity,
        entity_id=ids,
        name=st.text(min_size=1, max_size=30).filter(str.strip),
        entity_type=st.sampled_from(EntityKind),
        spatial_resolution=st.none(),
        kb_id=st.none() | ids,
        geo=st.none() | geo_points(),
        meta=st.none() | st.dictionaries(ids, ids, max_size=3),
    )


@given(entities())
def test_entity_round_trip(ent):
    assert entity_from_dict(entity_to_dict(ent)) == ent


@given(entities(), st.none() | st.booleans())
def test_annotated_entity_round_trip(ent, visible):
    rec = entity_to_dict(ent, visible=visible, annotated=True)
    assert rec.get("visible", None) == visible
    assert entity_from_dict(rec) == ent


def test_document_round_trip(tmp_path):
    doc = make_document(
        tmp_path,
        (
            AnnotatedEntity(make_entity("a", name="Ada"), True),
            AnnotatedEntity(make_entity("b", name="Bo"), None),
        ),
    )
    again = document_from_dict(document_to_dict(doc))
    assert again == doc
    assert [a.visible for a in again.entities] == [True, None]


def test_verdict_round_trip_and_field_names():
    verdict = Verdict(
        doc_id="d1",
        entity_id="e1",
        mode=VerifyMode.COMP,
        decision=Decision.YES,
        cms=0.8,
        # Wire records carry only p_yes; these values reconstruct exactly.
        votes=(
            Vote("e1/a.png", ClassProbs(0.75, 0.25, ProbSource.CONSTRAINED)),
            Vote("e1/b.png", ClassProbs(0.5, 0.5, ProbSource.FREEFORM_PARSED)),
        ),
        dropped=1,
        template_id="comp_evidence",
        model_id="llava-1.5",
    )
    rec = verdict_to_dict(verdict)
    assert list(rec) == [
        "doc_id", "entity_id", "mode", "decision", "cms", "votes",
        "dropped", "template_id", "model_id",
    ]
    assert rec["votes"][0] == {"evidence": "e1/a.png", "p_yes": 0.75, "source": "constrained"}
    assert verdict_from_dict(rec) == verdict


def test_to_json_line_is_compact_and_stable():
    line = to_json_line({"b": 1, "a": [1, 2]})
    assert line == '{"b":1,"a":[1,2]}'
    assert "\n" not in line


def test_read_jsonl_reports_line_numbers():
    stream = io.StringIO('{"ok": 1}\nnot json\n')
    with pytest.raises(ParseError) as err:
        list(read_jsonl(stream, origin="data.jsonl"))
    assert "data.jsonl:2" in str(err.value)


def test_read_jsonl_skips_blank_lines():
    stream = io.StringIO('{"a": 1}\n\n{"b": 2}\n')
    recs = list(read_jsonl(stream))
    assert [rec for _, rec in recs] == [{"a": 1}, {"b": 2}]
    assert [lineno for lineno, _ in recs] == [1, 3]


def test_document_from_dict_rejects_unknown_type():
    rec = {
        "doc_id": "d", "text": "t", "image_path": "i.png", "language": "en",
        "entities": [{"entity_id": "e", "name": "n", "type": "animal"}],
    }
    with pytest.raises(Exception):
        document_from_dict(rec)


def test_json_line_round_trips_through_loads():
    rec = {"doc_id": "d", "cms": 0.5}
    assert json.loads(to_json_line(rec)) == rec
