#!/usr/bin/env python3
"""Regenerate the synthetic benchmark files shipped under datasets/.

The corpora are stand-ins with made-up entities and tiny placeholder
images, sized so each split's document / distinct-entity / visible-entity
statistics land on the published benchmark figures exactly. Generation is
fully seeded and therefore reproducible; every written split is loaded
back and its statistics asserted before the script exits 0.

Run from the repository root:

    python3 scripts/generate_datasets.py
"""

from __future__ import annotations

import argparse
import json
import math
import random
import sys
from pathlib import Path

from PIL import Image

from entivis.core import (
    AnnotatedEntity,
    Document,
    Entity,
    EntityKind,
    GeoPoint,
    SpatialResolution,
    document_to_dict,
    entity_to_dict,
    to_json_line,
)
from entivis.dataset import (
    META_COUNTRY,
    META_EVENT_CLASS,
    META_GENDER,
    dataset_stats,
    great_circle_distance,
    load_documents,
)

DEFAULT_SEED = 7
N_SHARED_IMAGES = 12

# Locations are chained so every point sits 25-200 km from at least one
# other point in its file, and each split's candidate pool covers its
# locations at the same band, so replacement inside the band is always
# possible. Boxes are (lat_min, lat_max, lon_min, lon_max).
EUROPE_BOX = (35.0, 60.0, -10.0, 30.0)
CITY_BOX = (45.0, 55.0, 0.0, 20.0)
BAND_KM = (25.0, 200.0)

FIRST_NAMES = [
    "Anna", "Ben", "Clara", "David", "Elena", "Felix", "Greta", "Henrik",
    "Ida", "Jonas", "Katrin", "Lars", "Marta", "Nils", "Olga", "Pavel",
    "Rosa", "Stefan", "Tilda", "Viktor", "Wanda", "Yusuf", "Zofia", "Aldo",
    "Berit", "Carmen", "Dmitri", "Esther", "Fabio", "Gunnar", "Helene",
    "Igor", "Jana", "Kurt", "Leonor", "Mikkel", "Nadia", "Oskar", "Petra",
    "Rainer", "Silvia", "Tomas", "Ursula", "Vera", "Walter", "Ximena",
    "Yann", "Zara", "Arne", "Beata", "Cedric", "Doris", "Emil", "Freja",
    "Gilles", "Hanne", "Ivo", "Jolanta", "Kasimir", "Lucie",
]
LAST_NAMES = [
    "Keller", "Weber", "Novak", "Lindgren", "Moreau", "Santos", "Kovacs",
    "Jansen", "Petrov", "Olsen", "Fischer", "Marino", "Dubois", "Hansen",
    "Varga", "Bakker", "Sorensen", "Costa", "Wagner", "Lemaire", "Horvath",
    "Nilsson", "Schmid", "Ferrari", "Dupont", "Eriksen", "Nagy", "Visser",
    "Ivanov", "Berg", "Huber", "Ricci", "Fontaine", "Madsen", "Szabo",
    "Smit", "Lund", "Pereira", "Becker", "Girard", "Toth", "Larsson",
    "Maier", "Romano", "Mercier", "Poulsen", "Kiss", "Vries", "Sokolov",
    "Dahl", "Braun", "Greco", "Roux", "Jensen", "Molnar", "Mulder",
    "Strand", "Silva", "Vogel", "Laurent",
]
PERSON_COUNTRIES = [
    "Germany", "France", "Spain", "Italy", "Poland", "Sweden",
    "Netherlands", "Portugal", "Austria", "Denmark",
]
GENDERS = ["female", "male"]

PLACE_PRE = [
    "Ash", "Bel", "Cor", "Dun", "Elm", "Fen", "Gris", "Hal", "Ingle",
    "Jor", "Kel", "Lun", "Mar", "Nor", "Ost", "Pel", "Quin", "Ros", "Sal",
    "Tor", "Ulm", "Ver", "Wex", "Yar", "Zel", "Bran", "Crag", "Dor",
    "Ebel", "Falk",
]
PLACE_MID = ["", "ber", "ken", "wood", "stone", "mere", "fel", "brook"]
PLACE_SUF = [
    "ton", "ham", "wick", "by", "stad", "burg", "ville", "haven", "port",
    "gate", "dale", "moor", "holm", "minster",
]

EVENT_CLASSES = ["sports", "politics", "culture", "disaster"]
EVENT_KINDS = {
    "sports": ["Marathon", "Regatta", "Grand Prix", "Championship", "Open"],
    "politics": ["Summit", "Election", "Referendum", "Congress"],
    "culture": ["Festival", "Biennale", "Film Awards", "Carnival"],
    "disaster": ["Earthquake", "Flood", "Wildfire", "Storm"],
}

COUNTRY_PRE = [
    "Nor", "Ost", "Sud", "Vest", "Al", "Bel", "Cor", "Dal", "Er", "Fin",
    "Gal", "Hel", "Il", "Jut", "Kar", "Lor", "Mer", "Nav", "Or", "Pol",
]
COUNTRY_SUF = ["via", "land", "mark", "onia", "heim", "stria"]
CONTINENTS = [
    ("Africa", GeoPoint(9.1, 18.3)),
    ("Asia", GeoPoint(43.7, 87.3)),
    ("Europe", GeoPoint(49.8, 15.5)),
    ("North America", GeoPoint(45.5, -98.3)),
    ("Oceania", GeoPoint(-22.7, 140.0)),
    ("South America", GeoPoint(-8.8, -55.5)),
]

# Per-split layout: documents, base entities per doc, extra entities (one
# more in each of the first k docs), docs carrying the base visible count,
# base visibles per such doc, extra visibles (one more in the first k docs).
# Totals: E = docs*base + extra; E_vis = vis_docs*vis_base + vis_extra.
SPLITS = {
    ("tamperednews_ent", EntityKind.PERSON): dict(
        docs=104, base=28, extra=28, vis_docs=104, vis_base=1, vis_extra=0,
        expect=(104, 2940, 104), language="en", prefix="tnp",
    ),
    ("tamperednews_ent", EntityKind.LOCATION): dict(
        docs=100, base=24, extra=19, vis_docs=100, vis_base=1, vis_extra=23,
        expect=(100, 2419, 123), language="en", prefix="tnl",
    ),
    ("tamperednews_ent", EntityKind.EVENT): dict(
        docs=98, base=5, extra=11, vis_docs=66, vis_base=1, vis_extra=0,
        expect=(98, 501, 66), language="en", prefix="tne",
    ),
    ("news400_ent", EntityKind.PERSON): dict(
        docs=122, base=28, extra=82, vis_docs=122, vis_base=5, vis_extra=32,
        expect=(122, 3498, 642), language="de", prefix="n4p",
    ),
    ("news400_ent", EntityKind.LOCATION): dict(
        docs=67, base=48, extra=60, vis_docs=67, vis_base=13, vis_extra=55,
        expect=(67, 3276, 926), language="de", prefix="n4l",
    ),
    ("news400_ent", EntityKind.EVENT): dict(
        docs=25, base=19, extra=14, vis_docs=25, vis_base=5, vis_extra=12,
        expect=(25, 489, 137), language="de", prefix="n4e",
    ),
}

FILE_BY_TYPE = {
    EntityKind.PERSON: "persons.jsonl",
    EntityKind.LOCATION: "locations.jsonl",
    EntityKind.EVENT: "events.jsonl",
}


# ---------------------------------------------------------------------------
# Name and coordinate factories
# ---------------------------------------------------------------------------

def person_name(i: int) -> str:
    return f"{FIRST_NAMES[i % len(FIRST_NAMES)]} {LAST_NAMES[(i // len(FIRST_NAMES)) % len(LAST_NAMES)]}"


def place_names(n: int) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()
    for suf in PLACE_SUF:
        for mid in PLACE_MID:
            for pre in PLACE_PRE:
                name = pre + mid + suf
                if name not in seen:
                    seen.add(name)
                    names.append(name)
                if len(names) == n:
                    return names
    raise AssertionError(f"only {len(names)} place names available, need {n}")


def event_names(n: int) -> list[tuple[str, str]]:
    """(name, parent_class) pairs. Names are unique because each carries a
    distinct (year, place) prefix; classes cycle so every class is well
    represented in any contiguous slice."""

    out: list[tuple[str, str]] = []
    places = place_names(120)
    for year in range(1996, 2016):
        for place_i, place in enumerate(places):
            cls = EVENT_CLASSES[(year + place_i) % len(EVENT_CLASSES)]
            kinds = EVENT_KINDS[cls]
            kind = kinds[(year * 7 + place_i) % len(kinds)]
            out.append((f"{year} {place} {kind}", cls))
            if len(out) == n:
                return out
    raise AssertionError(f"only {len(out)} event names available, need {n}")


def country_names(n: int) -> list[str]:
    names = []
    for suf in COUNTRY_SUF:
        for pre in COUNTRY_PRE:
            names.append(pre + suf)
            if len(names) == n:
                return names
    raise AssertionError(f"need {n} country names")


def offset_in_band(rng: random.Random, base: GeoPoint,
                   box: tuple[float, float, float, float] | None = None) -> GeoPoint:
    """A point 25-200 km from base, verified with the haversine oracle and
    optionally kept inside box. Retries until both constraints hold."""

    while True:
        d_km = rng.uniform(50.0, 150.0)
        bearing = rng.uniform(0.0, 2.0 * math.pi)
        dlat = (d_km / 111.195) * math.cos(bearing)
        dlon = (d_km / (111.195 * max(0.05, math.cos(math.radians(base.lat))))) * math.sin(bearing)
        lat, lon = base.lat + dlat, base.lon + dlon
        if box is not None:
            lat_min, lat_max, lon_min, lon_max = box
            if not (lat_min <= lat <= lat_max and lon_min <= lon <= lon_max):
                continue
        cand = GeoPoint(round(lat, 4), round(lon, 4))
        if BAND_KM[0] <= great_circle_distance(base, cand) < BAND_KM[1]:
            return cand


def geo_chain(rng: random.Random, n: int, box: tuple[float, float, float, float]) -> list[GeoPoint]:
    """n points inside box, each within BAND_KM of at least one other.

    Every point after the first is dropped 50-150 km from a random earlier
    point, which makes that earlier point an in-band neighbour; the first
    point's neighbour is the second. Verified before returning.
    """

    assert n >= 2
    lat_min, lat_max, lon_min, lon_max = box
    pts: list[GeoPoint] = [
        GeoPoint(round(rng.uniform(lat_min, lat_max), 4), round(rng.uniform(lon_min, lon_max), 4))
    ]
    anchors = [1]
    for i in range(1, n):
        j = rng.randrange(i)
        pts.append(offset_in_band(rng, pts[j], box))
        anchors.append(j)
    for i, pt in enumerate(pts):
        d = great_circle_distance(pt, pts[anchors[i]])
        assert BAND_KM[0] <= d < BAND_KM[1], (i, d)
    return pts


def make_entities(kind: EntityKind, prefix: str, n: int, rng: random.Random) -> list[Entity]:
    """n distinct entities of one kind, with the meta the tampering
    strategies read (country/gender, parent_class, or coordinates)."""

    out: list[Entity] = []
    if kind is EntityKind.PERSON:
        for i in range(n):
            out.append(Entity(
                entity_id=f"{prefix}-e{i:04d}",
                name=person_name(i),
                entity_type=kind,
                kb_id=f"Q{74000 + i}",
                meta={
                    META_COUNTRY: PERSON_COUNTRIES[i % len(PERSON_COUNTRIES)],
                    META_GENDER: GENDERS[(i // len(PERSON_COUNTRIES)) % 2],
                },
            ))
    elif kind is EntityKind.LOCATION:
        names = place_names(n)
        points = geo_chain(rng, n, EUROPE_BOX)
        for i in range(n):
            out.append(Entity(
                entity_id=f"{prefix}-e{i:04d}",
                name=names[i],
                entity_type=kind,
                spatial_resolution=SpatialResolution.CITY,
                kb_id=f"Q{31000 + i}",
                geo=points[i],
            ))
    else:
        for i, (name, cls) in enumerate(event_names(n)):
            out.append(Entity(
                entity_id=f"{prefix}-e{i:04d}",
                name=name,
                entity_type=kind,
                kb_id=f"Q{9000 + i}",
                meta={META_EVENT_CLASS: cls},
            ))
    return out


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------

PALETTE = [
    (196, 60, 48), (52, 101, 164), (78, 154, 66), (196, 160, 0),
    (117, 80, 123), (6, 152, 154), (211, 115, 40), (92, 53, 102),
    (140, 180, 80), (60, 60, 120), (170, 100, 100), (40, 130, 100),
]


def write_placeholder_png(path: Path, index: int, size: tuple[int, int] = (32, 32)) -> None:
    img = Image.new("RGB", size, PALETTE[index % len(PALETTE)])
    px = img.load()
    for x in range(size[0]):
        px[x, (x * (index + 3)) % size[1]] = (255, 255, 255)
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")


def write_shared_images(root: Path) -> None:
    for i in range(N_SHARED_IMAGES):
        write_placeholder_png(root / "images" / f"img_{i:02d}.png", i)


# ---------------------------------------------------------------------------
# Split builders
# ---------------------------------------------------------------------------

def doc_text(language: str, names: list[str]) -> str:
    listed = ", ".join(names[:3])
    if language == "de":
        return f"Der Bericht erwähnt {listed} im Zusammenhang mit dem Foto."
    return f"The report mentions {listed} in connection with the photo."


def build_split(dataset: str, kind: EntityKind, layout: dict, rng: random.Random) -> list[Document]:
    n_docs = layout["docs"]
    total = n_docs * layout["base"] + layout["extra"]
    entities = make_entities(kind, layout["prefix"], total, rng)
    docs: list[Document] = []
    cursor = 0
    for i in range(n_docs):
        count = layout["base"] + (1 if i < layout["extra"] else 0)
        mine = entities[cursor:cursor + count]
        cursor += count
        n_vis = (layout["vis_base"] if i < layout["vis_docs"] else 0)
        n_vis += 1 if i < layout["vis_extra"] else 0
        assert n_vis <= count
        annotated = tuple(
            AnnotatedEntity(entity=ent, visible=(k < n_vis)) for k, ent in enumerate(mine)
        )
        vis_names = [a.entity.name for a in annotated if a.visible]
        docs.append(Document(
            doc_id=f"{layout['prefix']}-doc{i:04d}",
            text=doc_text(layout["language"], vis_names or [a.entity.name for a in annotated]),
            image_path=f"../images/img_{i % N_SHARED_IMAGES:02d}.png",
            language=layout["language"],
            entities=annotated,
        ))
    assert cursor == total
    return docs


def build_mmg(rng: random.Random) -> list[Document]:
    """200 documents, each annotated with its city, country, and continent,
    all verified visible. Entities recur across documents: 123 distinct
    cities, 47 countries, 6 continents."""

    city_points = geo_chain(rng, 123, CITY_BOX)
    cities = [
        Entity(
            entity_id=f"mmg-city-{i:03d}", name=name, entity_type=EntityKind.LOCATION,
            spatial_resolution=SpatialResolution.CITY, kb_id=f"Q{51000 + i}", geo=city_points[i],
        )
        for i, name in enumerate(place_names(123))
    ]
    countries = [
        Entity(
            entity_id=f"mmg-country-{i:02d}", name=name, entity_type=EntityKind.LOCATION,
            spatial_resolution=SpatialResolution.COUNTRY, kb_id=f"Q{61000 + i}",
            geo=GeoPoint(round(rng.uniform(-40.0, 65.0), 4), round(rng.uniform(-120.0, 150.0), 4)),
        )
        for i, name in enumerate(country_names(47))
    ]
    continents = [
        Entity(
            entity_id=f"mmg-cont-{i}", name=name, entity_type=EntityKind.LOCATION,
            spatial_resolution=SpatialResolution.CONTINENT, kb_id=f"Q{71000 + i}", geo=pt,
        )
        for i, (name, pt) in enumerate(CONTINENTS)
    ]
    docs = []
    for i in range(200):
        triple = (cities[i % 123], countries[i % 47], continents[i % 6])
        docs.append(Document(
            doc_id=f"mmg-doc{i:04d}",
            text=doc_text("en", [e.name for e in triple]),
            image_path=f"../images/img_{i % N_SHARED_IMAGES:02d}.png",
            language="en",
            entities=tuple(AnnotatedEntity(entity=e, visible=True) for e in triple),
        ))
    return docs


# ---------------------------------------------------------------------------
# Candidate pools
# ---------------------------------------------------------------------------

def build_pools(rng: random.Random) -> dict[EntityKind, list[Entity]]:
    """Small standalone person and event pools for tamper-gen. Every
    (country, gender) cell and every event class holds at least two
    members. Location pools are built per split by
    covering_location_pool so the distance-band strategies always find
    a candidate."""

    pools: dict[EntityKind, list[Entity]] = {}
    persons = []
    for i in range(len(PERSON_COUNTRIES) * 2 * 2):
        country = PERSON_COUNTRIES[i % len(PERSON_COUNTRIES)]
        gender = GENDERS[(i // len(PERSON_COUNTRIES)) % 2]
        persons.append(Entity(
            entity_id=f"pool-p-{i:02d}", name=person_name(500 + i),
            entity_type=EntityKind.PERSON, kb_id=f"Q{90000 + i}",
            meta={META_COUNTRY: country, META_GENDER: gender},
        ))
    pools[EntityKind.PERSON] = persons

    events = []
    for i, (name, cls) in enumerate(event_names(640)[-32:]):
        events.append(Entity(
            entity_id=f"pool-e-{i:02d}", name=name, entity_type=EntityKind.EVENT,
            kb_id=f"Q{92000 + i}", meta={META_EVENT_CLASS: cls},
        ))
    pools[EntityKind.EVENT] = events
    for cls in EVENT_CLASSES:
        assert sum(1 for e in events if e.meta[META_EVENT_CLASS] == cls) >= 2
    return pools


POOL_NAME_PREFIXES = ["New", "Old", "North", "South", "East", "West", "Upper", "Lower"]


def covering_location_pool(rng: random.Random, docs: list[Document], kb_base: int) -> list[Entity]:
    """City candidates for distance-band tampering over docs.

    Greedy cover: walk the distinct locations in document order, and
    whenever one has no in-band anchor yet, drop a fresh anchor 50-150 km
    away from it. Every location then has a candidate 25-200 km away,
    which the final sweep re-verifies.
    """

    targets: list[Entity] = []
    seen: set[str] = set()
    for doc in docs:
        for ann in doc.entities:
            ent = ann.entity
            if ent.entity_type is EntityKind.LOCATION and ent.entity_id not in seen:
                seen.add(ent.entity_id)
                targets.append(ent)
    anchors: list[GeoPoint] = []
    for ent in targets:
        if any(BAND_KM[0] <= great_circle_distance(ent.geo, a) < BAND_KM[1] for a in anchors):
            continue
        anchors.append(offset_in_band(rng, ent.geo))
    n_pre = len(POOL_NAME_PREFIXES)
    base_names = place_names((len(anchors) + n_pre - 1) // n_pre)
    pool = [
        Entity(
            entity_id=f"pool-l-{i:03d}",
            name=f"{POOL_NAME_PREFIXES[i % n_pre]} {base_names[i // n_pre]}",
            entity_type=EntityKind.LOCATION,
            spatial_resolution=SpatialResolution.CITY,
            kb_id=f"Q{kb_base + i}",
            geo=anchors[i],
        )
        for i in range(len(anchors))
    ]
    for ent in targets:
        assert any(
            BAND_KM[0] <= great_circle_distance(ent.geo, cand.geo) < BAND_KM[1]
            for cand in pool
        ), f"{ent.entity_id} has no in-band candidate"
    return pool


# ---------------------------------------------------------------------------
# Demo files
# ---------------------------------------------------------------------------

def write_demo(root: Path) -> None:
    demo = root / "demo"
    demo.mkdir(parents=True, exist_ok=True)
    write_placeholder_png(demo / "image.png", 4, size=(48, 36))

    entities = (
        AnnotatedEntity(
            entity=Entity(entity_id="demo-p1", name="Maria Keller",
                          entity_type=EntityKind.PERSON, kb_id="Q90001",
                          meta={META_COUNTRY: "Germany", META_GENDER: "female"}),
            visible=True,
        ),
        AnnotatedEntity(
            entity=Entity(entity_id="demo-p2", name="Jonas Weber",
                          entity_type=EntityKind.PERSON, kb_id="Q90002",
                          meta={META_COUNTRY: "Germany", META_GENDER: "male"}),
            visible=False,
        ),
    )
    doc = Document(
        doc_id="demo-doc1",
        text="Maria Keller spoke at the opening while Jonas Weber followed the session remotely.",
        image_path="image.png",
        language="en",
        entities=entities,
    )
    (demo / "doc.json").write_text(
        json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )

    # The model_id matches a row in the shipped template config so the
    # comp/series question templates resolve for this mock too.
    mock = {
        "model_id": "llava-1.5",
        "multi_image": True,
        "supports_logprobs": True,
        "rules": [
            {"if_prompt_contains": "Maria Keller", "p_yes": 0.92},
            {"if_prompt_contains": "Jonas Weber", "p_yes": 0.08},
        ],
        "default": {"p_yes": 0.5},
    }
    (demo / "backend_mock.json").write_text(
        json.dumps(mock, indent=2) + "\n", encoding="utf-8"
    )

    for ent_id, base_index in (("demo-p1", 6), ("demo-p2", 9)):
        ent_dir = demo / "evidence" / ent_id
        ent_dir.mkdir(parents=True, exist_ok=True)
        items = []
        for rank, source in enumerate(("google", "wikidata")):
            fname = f"{source}_{rank}.png"
            write_placeholder_png(ent_dir / fname, base_index + rank, size=(40, 30))
            items.append({"file": fname, "source": source, "rank": rank})
        (ent_dir / "manifest.json").write_text(
            json.dumps({"entity_id": ent_id, "items": items}, indent=2) + "\n",
            encoding="utf-8",
        )


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def write_documents(path: Path, docs: list[Document]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(to_json_line(document_to_dict(doc)) + "\n")


def write_pool(path: Path, pool: list[Entity]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for ent in pool:
            fh.write(to_json_line(entity_to_dict(ent)) + "\n")


def check_split(path: Path, kind: EntityKind, expect: tuple[int, int, int]) -> None:
    docs = load_documents(path)
    st = dataset_stats(docs, entity_type=kind)
    got = (st.documents, st.entities, st.entities_visible)
    assert got == expect, f"{path}: stats {got}, expected {expect}"
    print(f"  {path}  D={got[0]} E={got[1]} E_vis={got[2]}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", type=Path,
                        default=Path(__file__).resolve().parent.parent / "datasets")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)
    root: Path = args.root

    rng = random.Random(args.seed)
    write_shared_images(root)

    print("splits:")
    location_docs: dict[str, list[Document]] = {}
    for (dataset, kind), layout in SPLITS.items():
        docs = build_split(dataset, kind, layout, rng)
        if kind is EntityKind.LOCATION:
            location_docs[dataset] = docs
        path = root / dataset / FILE_BY_TYPE[kind]
        write_documents(path, docs)
        check_split(path, kind, layout["expect"])

    mmg_docs = build_mmg(rng)
    mmg_path = root / "mmg_ent" / "locations.jsonl"
    write_documents(mmg_path, mmg_docs)
    expectations = [
        (SpatialResolution.CITY, (200, 123, 123)),
        (SpatialResolution.COUNTRY, (200, 47, 47)),
        (SpatialResolution.CONTINENT, (200, 6, 6)),
        (None, (200, 176, 176)),
    ]
    loaded = load_documents(mmg_path)
    for resolution, expect in expectations:
        st = dataset_stats(loaded, entity_type=EntityKind.LOCATION, spatial_resolution=resolution)
        got = (st.documents, st.entities, st.entities_visible)
        assert got == expect, f"mmg {resolution}: {got} != {expect}"
    print(f"  {mmg_path}  D=200 E=176 E_vis=176 (123/47/6 by resolution)")

    pools = build_pools(rng)
    for di, dataset in enumerate(("tamperednews_ent", "news400_ent")):
        for kind, pool in pools.items():
            write_pool(root / dataset / "pools" / FILE_BY_TYPE[kind], pool)
        loc_pool = covering_location_pool(rng, location_docs[dataset], kb_base=910000 + 10000 * di)
        write_pool(root / dataset / "pools" / FILE_BY_TYPE[EntityKind.LOCATION], loc_pool)
        print(f"  {dataset} location pool: {len(loc_pool)} candidates")
    seen: set[str] = set()
    mmg_pool = []
    for d in mmg_docs:
        for ann in d.entities:
            if ann.entity.entity_id not in seen:
                seen.add(ann.entity.entity_id)
                mmg_pool.append(ann.entity)
    write_pool(root / "mmg_ent" / "pools" / "locations.jsonl", mmg_pool)

    write_demo(root)
    print("demo files and pools written under", root)
    return 0


if __name__ == "__main__":
    sys.exit(main())
