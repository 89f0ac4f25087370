#!/usr/bin/env python3
"""Writes the committed fixtures.

The golden fact set is computed here from the values the generator itself
put into each document, with its own copy of the routing rule (best
extractor score times evidence share, sensitive or ambiguous -> curation).
It shares no code with the Rust extractor.

Run from anywhere: python3 fixtures/generate.py
"""

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

ROOT = Path(__file__).resolve().parent
VERSION = 1

PERSON, PLACE, CITY, COUNTY, COUNTRY, GENDER = "Q5", "Q2221906", "Q515", "Q28575", "Q6256", "Q48264"
MALE, FEMALE = "Q6581097", "Q6581072"

EXTRACTOR_SCORE = 0.95
AUTO, FLOOR = 0.8, 0.4
MERGE = 0.01

MONTHS_EN = ["January", "February", "March", "April", "May", "June", "July",
             "August", "September", "October", "November", "December"]
MONTHS_ES = ["enero", "febrero", "marzo", "abril", "mayo", "junio", "julio",
             "agosto", "septiembre", "octubre", "noviembre", "diciembre"]


def header(schema):
    return json.dumps({"schema": schema, "version": VERSION})


def write_jsonl(path, schema, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(header(schema) + "\n")
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=1)
        f.write("\n")


def iso(t):
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------- ontology

def pred(pid, name, kind, functional, dim=None, subj=(), obj=(), sensitive=False):
    p = {"id": pid, "name": name, "value_kind": kind, "functional": functional,
         "allowed_subject_types": list(subj), "allowed_object_types": list(obj),
         "sensitive": sensitive}
    if dim:
        p["unit_dimension"] = dim
    return p


ONTOLOGY = [
    pred("P2048", "height", "quantity", True, "length", [PERSON]),
    pred("P2067", "mass", "quantity", True, "mass", [PERSON]),
    pred("P569", "date of birth", "date", True, subj=[PERSON]),
    pred("P19", "place of birth", "entity_ref", True, subj=[PERSON], obj=[PLACE]),
    pred("P27", "country of citizenship", "entity_ref", False, subj=[PERSON], obj=[COUNTRY]),
    pred("P26", "spouse", "entity_ref", False, subj=[PERSON], obj=[PERSON]),
    pred("P40", "child", "entity_ref", False, subj=[PERSON], obj=[PERSON]),
    pred("P22", "father", "entity_ref", True, subj=[PERSON], obj=[PERSON]),
    pred("P25", "mother", "entity_ref", True, subj=[PERSON], obj=[PERSON]),
    pred("P21", "sex or gender", "entity_ref", True, subj=[PERSON], obj=[GENDER]),
    pred("P2218", "net worth", "money", True, subj=[PERSON], sensitive=True),
    pred("P1082", "population", "quantity", True, subj=[PLACE]),
    pred("P131", "located in the administrative territorial entity", "entity_ref", True,
         subj=[CITY], obj=[COUNTY]),
    pred("P150", "contains the administrative territorial entity", "entity_ref", False,
         subj=[COUNTY], obj=[CITY]),
    pred("P2397", "YouTube channel ID", "external_id", False, subj=[PERSON], sensitive=True),
    pred("P1477", "birth name", "string", True, subj=[PERSON]),
]
ONT = {p["id"]: p for p in ONTOLOGY}


# ---------------------------------------------------------------- rules

def vx(id_, pattern, build):
    return {"id": id_, "pattern": pattern, "build": build}


RULES_EN = {
    "schema": "odke.rules", "version": VERSION, "language": "en",
    "rules": [
        {"rule_id": "en.height", "keys": ["height"], "predicate": "P2048",
         "aggregator": "metric_preference",
         "value_extractors": [
             vx("metric", r"(?P<value>\d+(?:\.\d+)?\s*(?:cm|m))\b", {"kind": "quantity"}),
             vx("imperial", r"(?P<value>(?P<ft>\d+)\s*ft(?:\s*(?P<in>\d+)\s*in)?)",
                {"kind": "quantity", "components": [{"group": "ft", "unit": "ft"},
                                                    {"group": "in", "unit": "in"}]})]},
        {"rule_id": "en.weight", "keys": ["weight"], "predicate": "P2067",
         "aggregator": "metric_preference",
         "value_extractors": [
             vx("metric", r"(?P<value>\d+(?:\.\d+)?\s*kg)\b", {"kind": "quantity"}),
             vx("imperial", r"(?P<value>\d+(?:\.\d+)?\s*lb)\b", {"kind": "quantity"})]},
        {"rule_id": "en.birth_date", "keys": ["birth_date", "born"], "predicate": "P569",
         "value_extractors": [
             vx("mdy", r"(?P<value>[A-Z][a-z]+ \d{1,2}, \d{4})", {"kind": "date"})]},
        {"rule_id": "en.birth_name", "keys": ["birth_name"], "predicate": "P1477",
         "value_extractors": [vx("text", r"(?P<value>\S.*\S)", {"kind": "text"})]},
        {"rule_id": "en.net_worth", "keys": ["net_worth"], "predicate": "P2218",
         "value_extractors": [
             vx("usd", r"(?P<value>US\$\s*\d[\d.,]*(?:\s*(?:billion|million))?)", {"kind": "money"})]},
        {"rule_id": "en.population", "keys": ["population", "population_total"], "predicate": "P1082",
         "value_extractors": [
             vx("count", r"(?P<value>\d{1,3}(?:,\d{3})+|\d+)", {"kind": "quantity", "unit": "1"})]},
        {"rule_id": "en.youtube", "keys": ["youtube"], "predicate": "P2397",
         "value_extractors": [
             vx("handle", r"@(?P<value>[A-Za-z0-9_]+)", {"kind": "external_id", "scheme": "youtube"})]},
    ],
    "link_rules": [
        {"rule_id": "en.birth_place", "keys": ["birth_place"], "predicate": "P19"},
        {"rule_id": "en.spouse", "keys": ["spouse"], "predicate": "P26"},
        {"rule_id": "en.citizenship", "keys": ["citizenship", "nationality"], "predicate": "P27"},
        {"rule_id": "en.children", "keys": ["children"], "predicate": "P40"},
        {"rule_id": "en.father", "keys": ["father"], "predicate": "P22"},
        {"rule_id": "en.mother", "keys": ["mother"], "predicate": "P25"},
        {"rule_id": "en.gender", "keys": ["gender"], "predicate": "P21"},
        {"rule_id": "en.located_in", "keys": ["subdivision_name", "located_in"], "predicate": "P131"},
        {"rule_id": "en.cities", "keys": ["cities"], "predicate": "P150"},
    ],
}

RULES_ES = {
    "schema": "odke.rules", "version": VERSION, "language": "es",
    "rules": [
        {"rule_id": "es.height", "keys": ["altura"], "predicate": "P2048",
         "value_extractors": [
             vx("metric", r"(?P<value>\d+(?:,\d+)?\s*(?:cm|m))\b", {"kind": "quantity"})]},
        {"rule_id": "es.weight", "keys": ["peso"], "predicate": "P2067",
         "value_extractors": [
             vx("metric", r"(?P<value>\d+(?:,\d+)?\s*kg)\b", {"kind": "quantity"})]},
        {"rule_id": "es.birth_date", "keys": ["fecha_de_nacimiento", "nacimiento"], "predicate": "P569",
         "value_extractors": [
             vx("dmy", r"(?P<value>\d{1,2} de [a-záéíóú]+ de \d{4})", {"kind": "date"})]},
        {"rule_id": "es.birth_name", "keys": ["nombre_de_nacimiento"], "predicate": "P1477",
         "value_extractors": [vx("text", r"(?P<value>\S.*\S)", {"kind": "text"})]},
        {"rule_id": "es.population", "keys": ["población", "poblacion"], "predicate": "P1082",
         "value_extractors": [
             vx("count", r"(?P<value>\d{1,3}(?:\.\d{3})+|\d+)", {"kind": "quantity", "unit": "1"})]},
    ],
    "link_rules": [
        {"rule_id": "es.birth_place", "keys": ["lugar_de_nacimiento"], "predicate": "P19"},
        {"rule_id": "es.spouse", "keys": ["cónyuge", "conyuge"], "predicate": "P26"},
        {"rule_id": "es.citizenship", "keys": ["nacionalidad"], "predicate": "P27"},
        {"rule_id": "es.children", "keys": ["hijos"], "predicate": "P40"},
        {"rule_id": "es.father", "keys": ["padre"], "predicate": "P22"},
        {"rule_id": "es.mother", "keys": ["madre"], "predicate": "P25"},
        {"rule_id": "es.gender", "keys": ["sexo"], "predicate": "P21"},
        {"rule_id": "es.located_in", "keys": ["ubicación", "ubicacion"], "predicate": "P131"},
        {"rule_id": "es.cities", "keys": ["ciudades"], "predicate": "P150"},
    ],
}

LINK_RULES = {
    "schema": "odke.link_rules", "version": VERSION,
    "rules": [
        {"rule_id": "spouse", "kind": "symmetric", "source": "P26"},
        {"rule_id": "contains", "kind": "inverse", "source": "P150", "target": "P131", "correction": True},
        {"rule_id": "parent", "kind": "conditional_inverse", "source": "P40",
         "condition": {"predicate": "P21", "map": {MALE: "P22", FEMALE: "P25"}}},
        {"rule_id": "father", "kind": "inverse", "source": "P22", "target": "P40"},
        {"rule_id": "mother", "kind": "inverse", "source": "P25", "target": "P40"},
    ],
}

QUERY_TEMPLATES = {
    "schema": "odke.query_templates", "version": VERSION,
    "templates": [
        {"predicate": "P2048", "language": "en", "pattern": "{subject} {predicate_phrase}", "phrase": "height"},
        {"predicate": "P2048", "language": "es", "pattern": "{subject} {predicate_phrase}", "phrase": "altura"},
        {"predicate": "P569", "language": "en", "pattern": "{subject} {predicate_phrase}", "phrase": "born"},
        {"predicate": "P569", "language": "es", "pattern": "{subject} {predicate_phrase}", "phrase": "nacimiento"},
        {"predicate": "P19", "language": "en", "pattern": "{subject} {predicate_phrase}", "phrase": "birthplace"},
        {"predicate": "P2397", "language": "en", "pattern": "{subject} {predicate_phrase}", "phrase": "youtube channel"},
    ],
}

QUESTIONS = {
    "schema": "odke.question_templates", "version": VERSION,
    "templates": {
        "en": {"P569": "When was {subject} born?", "P2048": "How tall is {subject}?",
               "P19": "Where was {subject} born?"},
        "es": {"P569": "¿Cuándo nació {subject}?", "P2048": "¿Cuánto mide {subject}?"},
    },
}


# ---------------------------------------------------------------- entities

FIRST = ["Alma", "Bruno", "Carmen", "Dario", "Elena", "Fabio", "Gloria", "Hector", "Ines", "Julian",
         "Karla", "Lucas", "Marta", "Nicolas", "Olga", "Pablo", "Rosa", "Sergio", "Teresa", "Ulises"]
LAST = ["Aldana", "Berrocal", "Cifuentes", "Doval", "Echeverri", "Fontecha", "Garrido", "Huerta",
        "Iturbe", "Jaramillo", "Kessler", "Lozano", "Maldonado", "Navarrete", "Orozco", "Pacheco",
        "Quintana", "Robledo", "Saavedra", "Tamayo"]
CITY_NAMES = ["Valdoria", "Mirecourt", "Ostrava Nova", "Pellworth", "Quimbaya", "Rennick",
              "Sorrento Bay", "Tarnholm"]
COUNTY_NAMES = ["Aldmere County", "Brisk County", "Corvale County", "Dunmore County"]
COUNTRIES = [("Q90001", "Avaloria"), ("Q90002", "Belmonte"), ("Q90003", "Carrasco")]


def entity(id_, name, types, aliases=()):
    return {"id": id_, "canonical_name": name,
            "aliases": [{"name": a, "language": l} for a, l in aliases],
            "types": sorted(types)}


def person_id(i):
    return f"Q7{i:05d}"


def city_id(i):
    return f"Q61{i:03d}"


def county_id(i):
    return f"Q62{i:03d}"


def build_world():
    rng = random.Random(20240601)
    persons = []
    for i in range(20):
        cm = rng.randint(155, 205)
        persons.append({
            "id": person_id(i + 1),
            "name": f"{FIRST[i]} {LAST[i]}",
            "cm": cm,
            "kg": rng.randint(50, 110),
            "dob": (rng.randint(1950, 2000), rng.randint(1, 12), rng.randint(1, 28)),
            "city": rng.randrange(8),
            "countries": [rng.randrange(3)],
            "gender": MALE if i % 2 else FEMALE,
            "birth_name": f"{FIRST[i]} María {LAST[i]}" if i % 4 == 0 else None,
        })
    cities = []
    for i, name in enumerate(CITY_NAMES):
        cities.append({"id": city_id(i + 1), "name": name, "county": i % 4,
                       "population": rng.randint(20_000, 3_000_000)})
    # Designed cases.
    persons[0]["cm"] = 184
    persons[3]["countries"] = [0, 1]
    persons[1]["spouse"] = 8
    persons[8]["spouse"] = 1
    persons[1]["children"] = [14, 15]
    return persons, cities


MICHELLES = [("Q71001", "Michelle Williams"), ("Q71002", "Michelle Williams")]
EXTRA_PERSONS = [("Q71003", "Vera Lindqvist")]


def kg_entities(persons, cities):
    out = []
    for p in persons:
        out.append(entity(p["id"], p["name"], [PERSON]))
    for id_, name in MICHELLES + EXTRA_PERSONS:
        out.append(entity(id_, name, [PERSON]))
    for c in cities:
        out.append(entity(c["id"], c["name"], [CITY, PLACE]))
    for i, name in enumerate(COUNTY_NAMES):
        out.append(entity(county_id(i + 1), name, [COUNTY, PLACE],
                          aliases=[(name.replace(" County", ""), "es")]))
    for id_, name in COUNTRIES:
        out.append(entity(id_, name, [COUNTRY]))
    out.append(entity(MALE, "male", [GENDER], aliases=[("masculino", "es")]))
    out.append(entity(FEMALE, "female", [GENDER], aliases=[("femenino", "es")]))
    return out


# ---------------------------------------------------------------- documents

def fmt_int(n, sep):
    s = f"{n:,}"
    return s.replace(",", sep)


def height_en(cm):
    inches = cm / 2.54
    ft, inch = int(inches // 12), round(inches % 12)
    if inch == 12:
        ft, inch = ft + 1, 0
    return f"{cm / 100:.2f} m ({ft} ft {inch} in)"


def height_es(cm):
    return f"{cm / 100:.2f}".replace(".", ",") + " m"


def weight_en(kg):
    return f"{kg} kg ({round(kg * 2.20462)} lb)"


def date_en(d):
    y, m, day = d
    return f"{MONTHS_EN[m - 1]} {day}, {y}"


def date_es(d):
    y, m, day = d
    return f"{day} de {MONTHS_ES[m - 1]} de {y}"


def iso_date(d):
    y, m, day = d
    return f"{y:04d}-{m:02d}-{day:02d}"


def row(key, raw, links=()):
    """links: (anchor text, target) with target {"entity": id} or {"url": u}."""
    hl = []
    for anchor, target in links:
        start = raw.index(anchor)
        hl.append({"start": start, "end": start + len(anchor), "target": target})
    return {"key": key, "raw_value": raw, "hyperlinks": hl}


def link_row(key, targets, sep=", "):
    """targets: (anchor, target); anchors must be distinct."""
    raw = sep.join(a for a, _ in targets)
    return row(key, raw, targets)


class Doc:
    def __init__(self, url, lang, subject, rev_time, rev="r1"):
        self.d = {"url": url, "language": lang, "revision_id": rev,
                  "revision_time": iso(rev_time), "subject_hint": subject,
                  "infobox": [], "passages": []}
        self.truth = []  # (predicate, value-json, ambiguous)

    def add(self, r, truths=()):
        self.d["infobox"].append(r)
        self.truth.extend(truths)

    def passage(self, text):
        n = len(self.d["passages"])
        self.d["passages"].append({"id": f"p{n}", "text": text})


def q(mag, unit):
    return {"kind": "quantity", "magnitude": float(mag), "unit": unit}


def ent(id_):
    return {"kind": "entity_ref", "id": id_}


def text(t, lang):
    return {"kind": "text", "text": t, "language": lang}


def wiki(lang, name):
    return f"https://{lang}.wiki.example/wiki/{name.replace(' ', '_')}"


def person_docs(p, lang, persons, cities, rev_time, overrides=None):
    o = overrides or {}
    doc = Doc(wiki(lang, p["name"]), lang, p["id"], rev_time)
    city = cities[p["city"]]
    if lang == "en":
        doc.passage(f"{p['name']} is a fictional person born in {city['name']}.")
        doc.add(row("height", o.get("height_raw", height_en(p["cm"]))),
                [("P2048", q(o.get("cm", p["cm"]), "cm"), False)])
        doc.add(row("weight", weight_en(p["kg"])), [("P2067", q(p["kg"], "kg"), False)])
        doc.add(row("birth_date", date_en(p["dob"])),
                [("P569", {"kind": "date", "date": iso_date(p["dob"]), "precision": "day"}, False)])
    else:
        doc.passage(f"{p['name']} es una persona ficticia nacida en {city['name']}.")
        doc.add(row("altura", o.get("height_raw", height_es(p["cm"]))),
                [("P2048", q(o.get("cm", p["cm"]), "cm"), False)])
        doc.add(row("peso", f"{p['kg']} kg"), [("P2067", q(p["kg"], "kg"), False)])
        doc.add(row("fecha_de_nacimiento", date_es(p["dob"])),
                [("P569", {"kind": "date", "date": iso_date(p["dob"]), "precision": "day"}, False)])
    k = {"en": {"birth_place": "birth_place", "citizenship": "citizenship", "gender": "gender",
                "spouse": "spouse", "children": "children", "birth_name": "birth_name"},
         "es": {"birth_place": "lugar_de_nacimiento", "citizenship": "nacionalidad", "gender": "sexo",
                "spouse": "cónyuge", "children": "hijos", "birth_name": "nombre_de_nacimiento"}}[lang]
    if "birth_place" in o:
        r, truths = o["birth_place"]
        doc.add(r, truths)
    else:
        doc.add(link_row(k["birth_place"], [(city["name"], {"entity": city["id"]})]),
                [("P19", ent(city["id"]), False)])
    countries = o.get("countries", p["countries"])
    doc.add(link_row(k["citizenship"], [(COUNTRIES[c][1], {"entity": COUNTRIES[c][0]}) for c in countries]),
            [("P27", ent(COUNTRIES[c][0]), False) for c in countries])
    gname = {"en": {MALE: "male", FEMALE: "female"}, "es": {MALE: "masculino", FEMALE: "femenino"}}[lang]
    doc.add(link_row(k["gender"], [(gname[p["gender"]], {"entity": p["gender"]})]),
            [("P21", ent(p["gender"]), False)])
    if "spouse_row" in o:
        r, truths = o["spouse_row"]
        doc.add(r, truths)
    elif "spouse" in p:
        s = persons[p["spouse"]]
        doc.add(link_row(k["spouse"], [(s["name"], {"entity": s["id"]})]), [("P26", ent(s["id"]), False)])
    if "children" in p:
        kids = [persons[c] for c in p["children"]]
        doc.add(link_row(k["children"], [(c["name"], {"entity": c["id"]}) for c in kids]),
                [("P40", ent(c["id"]), False) for c in kids])
    if p["birth_name"]:
        doc.add(row(k["birth_name"], p["birth_name"]), [("P1477", text(p["birth_name"], lang), False)])
    for extra in o.get("extra", []):
        doc.add(*extra)
    return doc


def city_doc(c, lang, rev_time, population=None):
    pop = c["population"] if population is None else population
    doc = Doc(wiki(lang, c["name"]), lang, c["id"], rev_time)
    county = county_id(c["county"] + 1)
    cname = COUNTY_NAMES[c["county"]]
    if lang == "en":
        doc.passage(f"{c['name']} is a fictional city in {cname}.")
        doc.add(row("population_total", fmt_int(pop, ",")), [("P1082", q(pop, "1"), False)])
        doc.add(link_row("subdivision_name", [(cname, {"entity": county})]), [("P131", ent(county), False)])
    else:
        doc.passage(f"{c['name']} es una ciudad ficticia de {cname}.")
        doc.add(row("población", fmt_int(pop, ".")), [("P1082", q(pop, "1"), False)])
        doc.add(link_row("ubicación", [(cname, {"entity": county})]), [("P131", ent(county), False)])
    return doc


def county_doc(i, cities, lang, rev_time):
    name = COUNTY_NAMES[i]
    members = [c for c in cities if c["county"] == i]
    doc = Doc(wiki(lang, name), lang, county_id(i + 1), rev_time)
    if lang == "en":
        doc.passage(f"{name} is a fictional county with {len(members)} cities.")
        key = "cities"
    else:
        doc.passage(f"{name} es un condado ficticio con {len(members)} ciudades.")
        key = "ciudades"
    doc.add(link_row(key, [(c["name"], {"entity": c["id"]}) for c in members]),
            [("P150", ent(c["id"]), False) for c in members])
    return doc


def golden_corpus(persons, cities):
    t0 = datetime(2024, 5, 1, tzinfo=timezone.utc)
    docs = []
    for i, p in enumerate(persons):
        rt = t0 + timedelta(hours=i)
        en_o, es_o = {}, {}
        if i == 2:
            es_o = {"height_raw": "1,80 m", "cm": 180}
        if i == 3:
            es_o = {"countries": p["countries"][:1]}
        if i == 4:
            # Links to a person where a place is required: dropped as a type violation.
            other = persons[5]
            en_o["birth_place"] = (link_row("birth_place", [(other["name"], {"entity": other["id"]})]), [])
        if i == 6:
            en_o["spouse_row"] = (
                link_row("spouse", [("Michelle Williams", {"url": "https://en.wiki.example/wiki/Michelle_Williams"})]),
                [("P26", text("Michelle Williams", "en"), True)])
        if i == 10:
            en_o["birth_place"] = (
                link_row("birth_place", [("Springfield", {"url": "https://en.wiki.example/wiki/Springfield"})]),
                [("P19", text("Springfield", "en"), False)])
        if i == 11:
            c = cities[p["city"]]
            en_o["birth_place"] = (
                link_row("birth_place", [(c["name"], {"url": wiki("en", c["name"])})]),
                [("P19", ent(c["id"]), False)])
        if i in (12, 13, 14):
            amount = [("US$ 1.2 billion", 120_000_000_000), ("US$ 350 million", 35_000_000_000),
                      ("US$ 2,500,000", 250_000_000)][i - 12]
            en_o["extra"] = [(row("net_worth", amount[0]),
                              [("P2218", {"kind": "money", "minor_units": amount[1], "currency": "USD"}, False)])]
        if i in (15, 16):
            handle = p["name"].replace(" ", "")
            en_o["extra"] = [(row("youtube", f"@{handle} (official)"),
                              [("P2397", {"kind": "external_id", "id": handle, "scheme": "youtube"}, False)])]
        docs.append(person_docs(p, "en", persons, cities, rt, en_o))
        if i < 10:
            docs.append(person_docs(p, "es", persons, cities, rt + timedelta(minutes=30), es_o))
    for i, c in enumerate(cities):
        rt = t0 + timedelta(days=1, hours=i)
        docs.append(city_doc(c, "en", rt))
        if i < 4:
            docs.append(city_doc(c, "es", rt + timedelta(minutes=30)))
    for i in range(4):
        rt = t0 + timedelta(days=2, hours=i)
        docs.append(county_doc(i, cities, "en", rt))
        docs.append(county_doc(i, cities, "es", rt))
    assert len(docs) == 50, len(docs)
    return docs


# ---------------------------------------------------------------- golden

def canonical(v):
    k = v["kind"]
    if k == "entity_ref":
        return "entity:" + v["id"]
    if k == "quantity":
        m = v["magnitude"]
        return f"quantity:{int(m) if m == int(m) else m}:{v['unit']}"
    if k == "date":
        return "date:" + v["date"]
    if k == "money":
        return f"money:{v['minor_units']}:{v['currency']}"
    if k == "text":
        return "text:" + v["text"]
    if k == "external_id":
        return f"external_id:{v['scheme']}:{v['id']}"
    raise ValueError(k)


def same_cluster(a, b):
    if a["kind"] == "quantity" and b["kind"] == "quantity" and a["unit"] == b["unit"]:
        lo = min(abs(a["magnitude"]), abs(b["magnitude"]))
        return lo > 0 and abs(a["magnitude"] - b["magnitude"]) / lo <= MERGE
    return canonical(a) == canonical(b)


def route_for(score, sensitive, ambiguous):
    if sensitive or ambiguous:
        return "curation"
    if score >= AUTO:
        return "auto"
    if score >= FLOOR:
        return "curation"
    return "drop"


def golden_records(docs):
    """Groups every truth by (subject, predicate), clusters equal values and
    routes them. Each truth is one candidate from one document."""
    groups = {}
    for doc in docs:
        s = doc.d["subject_hint"]
        for pid, value, ambiguous in doc.truth:
            groups.setdefault((s, pid), []).append((doc.d["url"], value, ambiguous))
    out = []
    for (s, pid), cands in sorted(groups.items()):
        p = ONT[pid]
        clusters = []
        for url, value, amb in cands:
            for c in clusters:
                if same_cluster(c["value"], value):
                    c["members"].append(url)
                    break
            else:
                clusters.append({"value": value, "members": [url], "ambiguous": amb})
        sources = len({u for u, _, _ in cands})
        for c in clusters:
            share = (len(c["members"]) / len(cands)) if p["functional"] else (len(set(c["members"])) / sources)
            c["score"] = EXTRACTOR_SCORE * share
        clusters.sort(key=lambda c: (-c["score"], -len(set(c["members"]))))
        first = None
        for c in clusters:
            own = route_for(c["score"], p["sensitive"], c["ambiguous"])
            if p["functional"] and first is not None:
                own = "drop" if first in ("auto", "drop") else "curation"
            if first is None:
                first = own
            if own != "drop":
                out.append({"subject": s, "predicate": pid, "value": c["value"], "route": own})
    return out


# ---------------------------------------------------------------- special fixtures

def antetokounmpo():
    gid = "Q8991894"
    t = datetime(2024, 5, 10, tzinfo=timezone.utc)
    docs = []
    for n, (url, raw) in enumerate([
        ("https://en.wiki.example/wiki/Giannis_Antetokounmpo", "2.13 m (6 ft 11 in)"),
        ("https://stats.example/players/giannis-antetokounmpo", "2.13 m"),
        ("https://fan.example/profiles/giannis", "211 cm"),
    ]):
        d = Doc(url, "en", gid, t + timedelta(hours=n))
        d.passage(f"Giannis Antetokounmpo is a basketball player. Listed height {raw}.")
        d.add(row("height", raw))
        docs.append(d.d)
    kg = [entity(gid, "Giannis Antetokounmpo", [PERSON], aliases=[("The Greek Freak", "en")])]
    golden = [{"subject": gid, "predicate": "P2048", "value": q(213, "cm"), "route": "auto"}]
    return docs, kg, golden


def seed_fact(s, p, value, conf=0.95):
    return {"subject": s, "predicate": p, "object": value, "confidence": conf,
            "provenance": [{"source_url": "https://seed.example/kg", "revision_id": "seed",
                            "span": {"type": "derived", "from": "seed"}, "extractor_id": "seed",
                            "extracted_at": "2024-01-01T00:00:00Z", "pipeline_run_id": "seed"}],
            "language": "en", "status": "auto_ingested"}


def family():
    """Closure adds exactly four facts: the reverse spouse edge, father and
    mother of the child, and the city's county."""
    a, b, c = "Q80001", "Q80002", "Q80003"
    city, county = "Q80010", "Q80011"
    kg = [entity(a, "Anders Holm", [PERSON]), entity(b, "Brita Holm", [PERSON]),
          entity(c, "Cecilia Holm", [PERSON]), entity(city, "Holmstad", [CITY, PLACE]),
          entity(county, "Holm County", [COUNTY, PLACE]),
          entity(MALE, "male", [GENDER]), entity(FEMALE, "female", [GENDER])]
    facts = [seed_fact(a, "P26", ent(b)), seed_fact(a, "P40", ent(c)), seed_fact(b, "P40", ent(c)),
             seed_fact(a, "P21", ent(MALE)), seed_fact(b, "P21", ent(FEMALE)),
             seed_fact(county, "P150", ent(city))]
    expected = [
        {"subject": b, "predicate": "P26", "value": ent(a)},
        {"subject": c, "predicate": "P22", "value": ent(a)},
        {"subject": c, "predicate": "P25", "value": ent(b)},
        {"subject": city, "predicate": "P131", "value": ent(county)},
    ]
    return kg, facts, expected


def stream(persons, cities):
    """25 pages with 8 revisions each; every revision changes at least one
    value, and four revisions are reverted vandalism."""
    rng = random.Random(7)
    t0 = datetime(2024, 6, 3, tzinfo=timezone.utc)
    docs, events = [], []
    pages = [("person", p) for p in persons] + [("city", c) for c in cities[:5]]
    vandal = {(3, 4), (9, 2), (17, 6), (22, 3)}
    for n, (kind, ent_) in enumerate(pages):
        t = t0 + timedelta(minutes=rng.randint(0, 120))
        for r in range(1, 9):
            t += timedelta(minutes=rng.randint(150, 420))
            flags = []
            if kind == "person":
                p = dict(ent_)
                p["kg"] = ent_["kg"] + r
                if (n, r) in vandal:
                    p["cm"] = 999
                    flags = ["anonymous", "reverted"]
                d = person_docs(p, "en", persons, cities, t)
            else:
                pop = ent_["population"] + 1000 * r
                if (n, r) in vandal:
                    pop = 1
                    flags = ["anonymous", "reverted"]
                d = city_doc(ent_, "en", t, population=pop)
            d.d["revision_id"] = f"r{r}"
            docs.append(d.d)
            events.append({"url": d.d["url"], "revision_id": f"r{r}", "event_time": iso(t),
                           "editor_flags": flags})
    events.sort(key=lambda e: (e["event_time"], e["url"]))
    assert len(events) == 200
    # The delayed event is the last revision of a page, so no later edit of
    # the same page competes with it.
    delayed = next(e for e in events if e["url"].endswith("Elena_Echeverri") and e["revision_id"] == "r8")
    return docs, events, f"{delayed['url']}@{delayed['revision_id']}"


# ---------------------------------------------------------------- configs

CONFIG_GOLDEN = """mode = "batch"
workers = 1
now = "2024-06-01T00:00:00Z"
languages = ["en", "es"]
run_id = "golden"

[[targets]]
type = "Q5"
predicate = "P2048"

[paths]
ontology = "ontology.jsonl"
kg = "kg_seed.jsonl"
corpus = "corpus.jsonl"
rules = ["rules/en.json", "rules/es.json"]
state_dir = "state/golden"
link_rules = "link_rules.json"
query_templates = "query_templates.json"
questions = "questions.json"
golden = "golden.jsonl"
"""

CONFIG_ANTE = """mode = "batch"
now = "2024-06-01T00:00:00Z"
run_id = "antetokounmpo"

[paths]
ontology = "../ontology.jsonl"
kg = "kg.jsonl"
corpus = "corpus.jsonl"
rules = ["../rules/en.json"]
state_dir = "../state/antetokounmpo"
golden = "golden.jsonl"

[scoring]
auto_threshold = 0.6
curation_floor = 0.3
merge_threshold = 0.005
"""

CONFIG_FAMILY = """now = "2024-06-01T00:00:00Z"
run_id = "family"

[paths]
ontology = "../ontology.jsonl"
kg = "kg.jsonl"
corpus = "../corpus.jsonl"
rules = ["../rules/en.json"]
state_dir = "../state/family"
seed_facts = "facts.jsonl"
link_rules = "../link_rules.json"
"""

CONFIG_STREAM = """mode = "stream"
run_id = "stream"
full_scan = false

[paths]
ontology = "../ontology.jsonl"
kg = "../kg_seed.jsonl"
corpus = "corpus.jsonl"
feed = "feed.jsonl"
rules = ["../rules/en.json"]
state_dir = "../state/{state}"

[stream]
sla_minutes = 240
poll_interval_minutes = 60
processing_minutes = 30
queue_capacity = 64
priority_predicates = ["P569"]
{extra}"""


def main():
    persons, cities = build_world()
    write_jsonl(ROOT / "ontology.jsonl", "odke.ontology", ONTOLOGY)
    write_jsonl(ROOT / "kg_seed.jsonl", "odke.kg", kg_entities(persons, cities))
    write_json(ROOT / "rules" / "en.json", RULES_EN)
    write_json(ROOT / "rules" / "es.json", RULES_ES)
    write_json(ROOT / "link_rules.json", LINK_RULES)
    write_json(ROOT / "query_templates.json", QUERY_TEMPLATES)
    write_json(ROOT / "questions.json", QUESTIONS)

    docs = golden_corpus(persons, cities)
    write_jsonl(ROOT / "corpus.jsonl", "odke.corpus", [d.d for d in docs])
    write_jsonl(ROOT / "golden.jsonl", "odke.golden", golden_records(docs))
    (ROOT / "golden.toml").write_text(CONFIG_GOLDEN)

    a_docs, a_kg, a_golden = antetokounmpo()
    write_jsonl(ROOT / "antetokounmpo" / "corpus.jsonl", "odke.corpus", a_docs)
    write_jsonl(ROOT / "antetokounmpo" / "kg.jsonl", "odke.kg", a_kg)
    write_jsonl(ROOT / "antetokounmpo" / "golden.jsonl", "odke.golden", a_golden)
    (ROOT / "antetokounmpo" / "config.toml").write_text(CONFIG_ANTE)

    f_kg, f_facts, f_expected = family()
    write_jsonl(ROOT / "family" / "kg.jsonl", "odke.kg", f_kg)
    write_jsonl(ROOT / "family" / "facts.jsonl", "odke.facts", f_facts)
    write_json(ROOT / "family" / "expected_inferred.json", f_expected)
    (ROOT / "family" / "config.toml").write_text(CONFIG_FAMILY)

    s_docs, events, delayed = stream(persons, cities)
    write_jsonl(ROOT / "stream" / "corpus.jsonl", "odke.corpus", s_docs)
    write_jsonl(ROOT / "stream" / "feed.jsonl", "odke.feed", events)
    (ROOT / "stream" / "config.toml").write_text(CONFIG_STREAM.format(state="stream", extra=""))
    (ROOT / "stream" / "config_delay.toml").write_text(CONFIG_STREAM.format(
        state="stream_delay",
        extra=f'\n[[stream.inject_delay]]\nevent = "{delayed}"\nminutes = 300\n'))
    write_jsonl(ROOT / "stream" / "empty_feed.jsonl", "odke.feed", [])


if __name__ == "__main__":
    main()
