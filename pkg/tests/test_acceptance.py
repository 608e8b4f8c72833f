"""End-to-end checks of the externally promised behaviors.

Each test covers one promise and prints one PASS or FAIL line so a run
of this module reads as a checklist.
"""

import contextlib
import json
import random
import string

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from modeladapt.annotations import parse_source_spec, resolve_source, validate_annotations
from modeladapt.cli import cli
from modeladapt.demo import build, catalog_document
from modeladapt.errors import ConstraintError
from modeladapt.interpret import plan as build_plan, plan_to_doc
from modeladapt.model import catalog_from_document
from modeladapt.policy import ANONYMOUS, ClientContext, prune_model
from modeladapt.render import format_value, markdown_to_html
from modeladapt.service import create_app
from modeladapt.storage import Aggregate, Atom, Database, JoinStep, PredicateGroup, QueryPlan

import oracle
from conftest import library_document
from test_cli import fetch, live_server

CURATOR_HEADERS = {"X-Client-Id": "curator-1", "X-Client-Roles": "curator"}

ETYPE_HOPS = [{"inbound": ["RNASeq", "Experiment_Study_fkey"]}]
ANATOMY_HOPS = [
    {"inbound": ["RNASeq", "Experiment_Study_fkey"]},
    {"inbound": ["RNASeq", "Replicate_Experiment_fkey"]},
    {"outbound": ["RNASeq", "Replicate_Specimen_fkey"]},
    {"inbound": ["RNASeq", "Specimen_Tissue_Specimen_fkey"]},
    {"outbound": ["RNASeq", "Specimen_Tissue_Tissue_fkey"]},
]
ANATOMY_SOURCE = ANATOMY_HOPS + ["Name"]


@contextlib.contextmanager
def criterion(capsys, number: int, title: str):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"FAIL [{number:02d}] {title}")
        raise
    with capsys.disabled():
        print(f"PASS [{number:02d}] {title}")


@pytest.fixture(scope="module")
def service(demo_db):
    with TestClient(create_app(demo_db)) as client:
        yield client


# -- 1: role-based model pruning -------------------------------------------


def expected_model(doc: dict, roles: set[str]) -> dict:
    """Independent derivation of the visible model from the raw document:
    a column stays when its enumerate/select ACLs admit one of the roles,
    and constraints survive only with all endpoints visible."""
    effective = roles | {"*"}

    def column_visible(cdoc):
        acls = cdoc.get("acls", {})
        for right in ("enumerate", "select"):
            if right in acls and not (set(acls[right]) & effective):
                return False
        return True

    out = {}
    for schema, table, tdoc in oracle.all_tables(doc):
        visible = [c["name"] for c in tdoc["columns"] if column_visible(c)]
        columns = ["RID", "RCT", "RMT", "RCB", "RMB"] + [
            c for c in visible if c not in ("RID", "RCT", "RMT", "RCB", "RMB")]
        keys = [["RID"]] + [
            k["columns"] for k in tdoc.get("keys", [])
            if all(c in columns for c in k["columns"])
        ]
        fkeys = [
            fk["name"][1]
            for fk in tdoc.get("foreign_keys", [])
            if all(c in columns for c in fk["from_columns"])
            and all(
                column_visible(c) or c["name"] in ("RID", "RCT", "RMT", "RCB", "RMB")
                for c in oracle.table_doc(doc, fk["to"]["schema"], fk["to"]["table"])["columns"]
                if c["name"] in fk["to"]["columns"]
            )
        ]
        out[f"{schema}:{table}"] = {"columns": columns, "keys": keys, "fkeys": fkeys}
    return out


def test_c01_model_prunes_to_role(service, capsys):
    with criterion(capsys, 1, "model document adapts to the caller's role"):
        doc = catalog_document()
        for headers, roles in (({}, set()), (CURATOR_HEADERS, {"curator"})):
            model = service.get("/model", headers=headers).json()
            got = {}
            for schema, tables in model["schemas"].items():
                for name, tdoc in tables["tables"].items():
                    got[f"{schema}:{name}"] = {
                        "columns": [c["name"] for c in tdoc["columns"]],
                        "keys": [k["columns"] for k in tdoc["keys"]],
                        "fkeys": [fk["name"][1] for fk in tdoc["foreign_keys"]],
                    }
            assert got == expected_model(doc, roles)

        anon = service.get("/model").json()
        study = anon["schemas"]["RNASeq"]["tables"]["Study"]
        assert "Curation_Status" not in [c["name"] for c in study["columns"]]

        curator = service.get("/model", headers=CURATOR_HEADERS).json()
        study = curator["schemas"]["RNASeq"]["tables"]["Study"]
        status = next(c for c in study["columns"] if c["name"] == "Curation_Status")
        assert status["rights"]["update"] is True


# -- 2: row-level policy ----------------------------------------------------


def test_c02_row_policy_filters_entities(service, demo_doc, demo_rows, capsys):
    with criterion(capsys, 2, "row policy gates unreleased studies"):
        anon = service.get("/entity/RNASeq/Study", params={"limit": 100}).json()
        got = {r["rid"] for r in anon["rows"]}
        expected = {
            r["RID"]
            for r in oracle.policy_rows(demo_doc, demo_rows, "RNASeq", "Study", set())
        }
        assert got == expected
        assert all(
            r["Curation_Status"] == "Release"
            for r in demo_rows[("RNASeq", "Study")]
            if r["RID"] in got
        )
        curator = service.get(
            "/entity/RNASeq/Study", params={"limit": 100}, headers=CURATOR_HEADERS
        ).json()
        assert {r["rid"] for r in curator["rows"]} == {
            r["RID"] for r in demo_rows[("RNASeq", "Study")]}


# -- 3: multi-hop source resolution ----------------------------------------


def test_c03_five_hop_source_aggregates(demo_db, demo_doc, demo_rows, curator_view, capsys):
    with criterion(capsys, 3, "five-hop path resolves and aggregates per study"):
        model, va, _ = curator_view
        study = model.get_table("RNASeq", "Study")
        defs = va.tables[("RNASeq", "Study")]
        resolved = resolve_source(
            model, study, parse_source_spec({"source": ANATOMY_SOURCE}), defs.sources)
        assert len(resolved.hops) == 5
        assert resolved.multivalued is True

        def aggregate(func):
            joins, prev = [], "base"
            for j, hop in enumerate(resolved.hops):
                joins.append(JoinStep(
                    alias=f"h{j}", from_alias=prev, left_columns=hop.left_columns,
                    table=(hop.table_schema, hop.table_name),
                    right_columns=hop.right_columns))
                prev = f"h{j}"
            plan = QueryPlan(
                base=("RNASeq", "Study"), joins=tuple(joins), mode="aggregate",
                aggregate=Aggregate(func=func, alias=prev, column="Name"))
            return {r["RID"]: r["value"] for r in demo_db.execute(plan).rows}

        arrays = aggregate("array_d")
        counts = aggregate("cnt_d")
        for row in demo_rows[("RNASeq", "Study")]:
            values = oracle.path_values(
                demo_doc, demo_rows, "RNASeq", "Study", row, ANATOMY_HOPS, "Name")
            rid = row["RID"]
            assert arrays.get(rid, []) == oracle.array_d(values)
            assert counts.get(rid, 0) == oracle.cnt_d(values)
            assert counts.get(rid, 0) == len(arrays.get(rid, []))


# -- 4: faceted queries vs the oracle ---------------------------------------


FACETS = [
    ("Title", {"hops": [], "column": "Title"},
     ["Kidney development atlas", "Ureter obstruction time course",
      "Embryonic heart pilot", "Nephron progenitor niche"]),
    (ANATOMY_SOURCE, {"hops": ANATOMY_HOPS, "column": "Name"},
     ["Kidney", "Ureter", "Bladder", "Gonad", "Heart", None]),
    (ETYPE_HOPS + ["Experiment_Type"], {"hops": ETYPE_HOPS, "column": "Experiment_Type"},
     ["RNA-Seq", "scRNA-Seq", "ATAC-Seq", None]),
]


def test_c04_randomized_facets_match_oracle(service, demo_doc, demo_rows, capsys):
    with criterion(capsys, 4, "20 random facet states equal the nested-loop oracle"):
        rng = random.Random(404)
        for trial in range(20):
            headers, roles = rng.choice([({}, set()), (CURATOR_HEADERS, {"curator"})])

            wire, facets = [], []
            for source, oracle_facet, pool in FACETS:
                if rng.random() < 0.55:
                    picks = rng.sample(pool, rng.randint(1, 2))
                    wire.append({"source": source, "choices": picks})
                    facets.append({**oracle_facet, "choices": picks})

            listing = service.get(
                "/entity/RNASeq/Study",
                params={"filters": json.dumps(wire), "limit": 100},
                headers=headers,
            ).json()
            got = {r["rid"] for r in listing["rows"]}
            expected = {
                r["RID"] for r in oracle.entity_set(
                    demo_doc, demo_rows, "RNASeq", "Study", roles, facets)
            }
            assert got == expected, f"trial {trial}: {wire}"

            for source, oracle_facet, _ in FACETS:
                others_wire = [w for w in wire if w["source"] != source]
                others_oracle = [
                    f for w, f in zip(wire, facets) if w["source"] != source]
                values = service.get(
                    "/facet/RNASeq/Study/values",
                    params={
                        "source": json.dumps({"source": source}),
                        "filters": json.dumps(others_wire),
                        "limit": 100,
                    },
                    headers=headers,
                ).json()["values"]
                got_counts = {v["value"]: v["count"] for v in values}
                expected_counts = oracle.facet_counts(
                    demo_doc, demo_rows, "RNASeq", "Study", roles,
                    oracle_facet, others_oracle)
                assert got_counts == expected_counts, f"trial {trial}: {source}"

                # sibling counts never exceed the unfiltered counts
                baseline = service.get(
                    "/facet/RNASeq/Study/values",
                    params={"source": json.dumps({"source": source}), "limit": 100},
                    headers=headers,
                ).json()["values"]
                unfiltered = {v["value"]: v["count"] for v in baseline}
                assert all(
                    count <= unfiltered.get(value, 0)
                    for value, count in got_counts.items()
                )


# -- 5: context fallback ----------------------------------------------------


def test_c05_context_fallback(capsys):
    with criterion(capsys, 5, "plan contexts fall back parent then wildcard"):
        doc = catalog_document()
        study = doc["schemas"]["RNASeq"]["tables"]["Study"]
        study["annotations"]["tag:isrd.isi.edu,2016:visible-columns"] = {
            "entry": ["Title", "Summary"]}
        catalog = catalog_from_document(doc)
        client = ClientContext(id="curator-1", roles=frozenset({"curator"}))
        model = prune_model(catalog, client)
        va, _ = validate_annotations(model)
        table = model.get_table("RNASeq", "Study")
        create_doc = plan_to_doc(build_plan(table, "entry/create", model, va))
        entry_doc = plan_to_doc(build_plan(table, "entry", model, va))
        del create_doc["context"], entry_doc["context"]  # only the label differs
        assert create_doc == entry_doc

        doc = catalog_document()
        study = doc["schemas"]["RNASeq"]["tables"]["Study"]
        study["annotations"]["tag:isrd.isi.edu,2016:visible-columns"] = {
            "*": ["Title"]}
        catalog = catalog_from_document(doc)
        model = prune_model(catalog, client)
        va, _ = validate_annotations(model)
        table = model.get_table("RNASeq", "Study")
        detailed = build_plan(table, "detailed", model, va)
        wildcard = build_plan(table, "*", model, va)
        assert [p.display_name for p in detailed.properties] == ["Title"]
        assert plan_to_doc(detailed)["properties"] == plan_to_doc(wildcard)["properties"]


# -- 6: heuristic defaults --------------------------------------------------


def test_c06_heuristics_on_bare_model(capsys):
    with criterion(capsys, 6, "unannotated model gets usable defaults"):
        catalog = catalog_from_document(library_document())
        model = prune_model(catalog, ANONYMOUS)
        va, diagnostics = validate_annotations(model)
        assert diagnostics == []

        book = model.get_table("Library", "Book")
        compact = build_plan(book, "compact", model, va)
        assert [(p.kind, p.display_name) for p in compact.properties] == [
            ("scalar", "RID"), ("scalar", "Title"), ("scalar", "Name"),
            ("entity_ref", "Author"),
            ("scalar", "RCT"), ("scalar", "RMT"), ("scalar", "RCB"), ("scalar", "RMB"),
        ]
        entry = build_plan(book, "entry", model, va)
        assert [(p.display_name, p.required) for p in entry.properties] == [
            ("Title", True), ("Name", False), ("Author", False)]
        assert compact.row_name == "{{{Title}}}"
        assert compact.sort == (("RID", False),)

        author = model.get_table("Library", "Author")
        detailed = build_plan(author, "detailed", model, va)
        assert detailed.row_name == "{{{Name}}}"
        assert detailed.sort == (("Name", False),)
        assert [r.name for r in detailed.relationships] == ["Book"]

        accession = model.get_table("Library", "Accession")
        plan = build_plan(accession, "detailed", model, va)
        assert plan.row_name == "{{{Accession_Number}}}"
        assert plan.sort == (("Accession_Number", False),)
        assert plan.relationships == ()


# -- 7: annotation pruning keeps the rest ------------------------------------


def test_c07_dangling_sourcekey_pruned_with_diagnostic(capsys):
    with criterion(capsys, 7, "dangling sourcekey drops one entry, keeps the rest"):
        doc = catalog_document()
        study = doc["schemas"]["RNASeq"]["tables"]["Study"]
        study["annotations"]["tag:isrd.isi.edu,2016:visible-columns"]["compact"] = [
            {"sourcekey": "no_such_key"},
            "Title",
            {"sourcekey": "experiment_types"},
        ]
        catalog = catalog_from_document(doc)
        model = prune_model(catalog, ANONYMOUS)
        va, diagnostics = validate_annotations(model)
        errors = [d for d in diagnostics if d.severity == "error"]
        assert len(errors) == 1
        assert errors[0].index == 0 and "no_such_key" in errors[0].message
        table = model.get_table("RNASeq", "Study")
        compact = build_plan(table, "compact", model, va)
        assert [p.display_name for p in compact.properties] == [
            "Title", "Experiment Types"]


# -- 8: CRUD invariants over random operation sequences ----------------------


def test_c08_random_crud_keeps_invariants(capsys):
    with criterion(capsys, 8, "random CRUD sequences keep integrity invariants"):
        rng = random.Random(808)
        doc = library_document()
        for round_ in range(8):
            db = Database(catalog_from_document(doc))
            writers = [
                ClientContext(id=f"w{i}", roles=frozenset({"staff"})) for i in range(3)]
            authors: dict[str, str] = {}
            books: list[str] = []
            creator: dict[str, str] = {}
            last_rmt: dict[str, str] = {}
            for step in range(30):
                writer = rng.choice(writers)
                op = rng.choice(
                    ["insert_author", "insert_book", "update", "delete",
                     "dangling_insert", "dangling_update", "restricted_delete"])
                if op == "insert_author":
                    name = f"A{round_}-{step}"
                    row = db.insert("Library", "Author", [{"Name": name}], writer)[0]
                    authors[row["RID"]] = name
                    creator[row["RID"]] = writer.id
                    assert row["RCB"] == writer.id and row["RMB"] == writer.id
                    last_rmt[row["RID"]] = row["RMT"]
                elif op == "insert_book" and authors:
                    target = rng.choice(sorted(authors))
                    row = db.insert(
                        "Library", "Book",
                        [{"Title": f"T{round_}-{step}", "Author": target}], writer)[0]
                    books.append(row["RID"])
                    creator[row["RID"]] = writer.id
                elif op == "update" and authors:
                    rid = rng.choice(sorted(authors))
                    row = db.update(
                        "Library", "Author", [rid],
                        {"Name": f"A{round_}-{step}-u"}, writer)[0]
                    assert row["RMB"] == writer.id
                    assert row["RCB"] == creator[rid]  # creator never rewritten
                    assert row["RMT"] >= last_rmt[rid]
                    last_rmt[rid] = row["RMT"]
                    authors[rid] = row["Name"]
                elif op == "delete" and books:
                    rid = books.pop(rng.randrange(len(books)))
                    db.delete("Library", "Book", [rid], writer)
                elif op == "dangling_insert":
                    with pytest.raises(ConstraintError):
                        db.insert("Library", "Book",
                                  [{"Title": "x", "Author": "9-ZZZZ"}], writer)
                elif op == "dangling_update" and books:
                    with pytest.raises(ConstraintError):
                        db.update("Library", "Book", [rng.choice(books)],
                                  {"Author": "9-ZZZZ"}, writer)
                elif op == "restricted_delete" and books:
                    book = rng.choice(books)
                    referenced = next(
                        r["RID"] for r in db.snapshot.tables[("Library", "Book")].values()
                        if r["RID"] == book)
                    author = db.snapshot.tables[("Library", "Book")][referenced]["Author"]
                    with pytest.raises(ConstraintError):
                        db.delete("Library", "Author", [author], writer)
                problems = oracle.integrity_errors(doc, oracle.snapshot_rows(db))
                assert problems == [], problems
            all_rids = [
                r["RID"] for rows in db.snapshot.tables.values() for r in rows.values()]
            assert len(all_rids) == len(set(all_rids))


# -- 9: rendering goldens and safety ----------------------------------------


def test_c09_rendering_goldens_and_fuzz(capsys):
    with criterion(capsys, 9, "rendering goldens hold and output stays escaped"):
        markdown = "::: iframe [Cell Browser](https://cb.example/s1){width=1000 height=600}\n:::"
        assert markdown_to_html(markdown) == (
            '<figure class="embed">'
            '<figcaption><a href="https://cb.example/s1" target="_blank">Cell Browser</a></figcaption>'
            '<iframe src="https://cb.example/s1" width="1000" height="600"></iframe>'
            "</figure>"
        )
        assert format_value(1234567, "int") == "1,234,567"
        assert format_value("2023-07-04", "date") == "2023-07-04"
        assert format_value("2023-07-04T12:30:59.000000Z", "timestamp") == "2023-07-04 12:30"

        rng = random.Random(909)
        alphabet = string.printable + "<script>alert(1)</script>\"'&`é中"
        for _ in range(10000):
            text = "".join(
                rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
            html = markdown_to_html(text)
            assert "<script" not in html.lower()


# -- 10: live model evolution through the CLI --------------------------------


def test_c10_cli_annotation_change_is_live(tmp_path, capsys):
    with criterion(capsys, 10, "CLI annotation change shows up without restart"):
        db = build(tmp_path / "data")
        runner = CliRunner()
        with live_server(db) as url:
            before = fetch(f"{url}/entity/RNASeq/Study")
            assert [r["values"]["Title"] for r in before["rows"]] == [
                "Kidney development atlas",
                "Ureter obstruction time course",
                "Bladder urothelium survey",
                "Gonad differentiation map",
            ]
            assert fetch(f"{url}/model")["version"] == 1
            value = json.dumps({
                "row_name": {"row_markdown_pattern": "{{{RID}}}: {{{Title}}}"},
                "*": {"row_order": [{"column": "RMT", "descending": True}]},
            })
            result = runner.invoke(cli, [
                "set-annotation", "RNASeq:Study",
                "tag:isrd.isi.edu,2016:table-display", value, "--url", url,
            ])
            assert result.exit_code == 0, result.output

            model = fetch(f"{url}/model")
            assert model["version"] == 2
            display = model["schemas"]["RNASeq"]["tables"]["Study"]["annotations"][
                "tag:isrd.isi.edu,2016:table-display"]
            assert display["*"]["row_order"] == [
                {"column": "RMT", "descending": True}]

            after = fetch(f"{url}/entity/RNASeq/Study")
            assert [r["values"]["Title"] for r in after["rows"]] == [
                "Kidney development atlas",
                "Gonad differentiation map",
                "Bladder urothelium survey",
                "Ureter obstruction time course",
            ]
        db.close()
