import pytest

from modeladapt.annotations import (
    Diagnostic,
    is_context_name,
    parse_source_spec,
    resolve_context,
    resolve_source,
    validate_annotations,
)
from modeladapt.demo import CURATOR, build, catalog_document
from modeladapt.errors import ParseError, ResolutionError
from modeladapt.model import catalog_from_document
from modeladapt.policy import ANONYMOUS, prune_model

import oracle


# -- context names ----------------------------------------------------------


@pytest.mark.parametrize("name", ["detailed", "compact", "compact/brief", "entry",
                                  "entry/create", "entry/edit", "filter", "row_name", "*"])
def test_valid_context_names(name):
    assert is_context_name(name)


@pytest.mark.parametrize("name", ["", "Detailed", "compact/brief/x", "entry/",
                                  "/entry", "9x", "a-b", None, 7])
def test_invalid_context_names(name):
    assert not is_context_name(name)


def test_resolve_context_chain():
    mapping = {"entry": 1, "*": 2}
    assert resolve_context(mapping, "entry") == 1
    assert resolve_context(mapping, "entry/create") == 1  # parent fallback
    assert resolve_context(mapping, "detailed") == 2      # wildcard fallback
    assert resolve_context({"entry": 1}, "detailed") is None
    assert resolve_context({"entry/edit": 3, "entry": 1}, "entry/edit") == 3


def test_resolve_context_invalid_request():
    with pytest.raises(ParseError):
        resolve_context({}, "Nope Nope")


# -- diagnostics ------------------------------------------------------------


def test_diagnostic_format_line():
    d = Diagnostic(
        severity="error",
        table="RNASeq:Study",
        tag="tag:isrd.isi.edu,2016:visible-columns",
        context="compact",
        index=2,
        message="sourcekey 'x' is not defined",
    )
    assert d.format_line() == (
        "ERROR table=RNASeq:Study tag=visible-columns context=compact idx=2 "
        "msg=sourcekey 'x' is not defined"
    )


# -- source parsing ---------------------------------------------------------


def test_parse_bare_column():
    spec = parse_source_spec("Title")
    assert spec.column == "Title" and spec.hops == () and spec.aggregate is None


def test_parse_path_source():
    spec = parse_source_spec(
        {"source": [{"inbound": ["S", "F1"]}, {"outbound": ["S", "F2"]}, "Name"],
         "aggregate": "array_d"}
    )
    assert [h.direction for h in spec.hops] == ["inbound", "outbound"]
    assert spec.end_column == "Name" and spec.aggregate == "array_d"


def test_parse_source_string_is_bare_column():
    assert parse_source_spec({"source": "Title"}).column == "Title"


@pytest.mark.parametrize(
    "entry",
    [
        42,
        {"source": []},
        {"source": [{"inbound": ["S"]}, "C"]},
        {"source": [{"sideways": ["S", "F"]}, "C"]},
        {"source": ["C", {"inbound": ["S", "F"]}]},  # hop after end column
        {"source": [{"inbound": ["S", "F"]}]},       # no end column
        {"source": [{"inbound": ["S", "F"]}, "C"], "aggregate": "median"},
    ],
)
def test_parse_rejects_malformed(entry):
    with pytest.raises(ResolutionError):
        parse_source_spec(entry)


# -- source resolution on the demo fixture ----------------------------------


ANATOMY_PATH = [
    {"inbound": ["RNASeq", "Experiment_Study_fkey"]},
    {"inbound": ["RNASeq", "Replicate_Experiment_fkey"]},
    {"outbound": ["RNASeq", "Replicate_Specimen_fkey"]},
    {"inbound": ["RNASeq", "Specimen_Tissue_Specimen_fkey"]},
    {"outbound": ["RNASeq", "Specimen_Tissue_Tissue_fkey"]},
    "Name",
]


def test_five_hop_path_resolves(curator_view):
    model, va, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec({"source": ANATOMY_PATH, "aggregate": "array_d"})
    resolved = resolve_source(model, study, spec)
    assert len(resolved.hops) == 5
    assert resolved.multivalued is True
    assert resolved.aggregate == "array_d"
    assert resolved.final_table == ("Vocab", "Tissue")
    assert resolved.end_column == "Name"
    assert resolved.entity_mode is True  # Name is a key of Vocab:Tissue


def test_resolved_key_is_canonical(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec({"source": ANATOMY_PATH, "aggregate": "array_d"})
    bare = parse_source_spec({"source": ANATOMY_PATH})
    with_agg = resolve_source(model, study, spec).key()
    without = resolve_source(model, study, bare).key()
    assert with_agg == without  # aggregate excluded from identity
    assert with_agg.endswith("/Name")
    assert with_agg.startswith("inb:RNASeq:Experiment_Study_fkey/")


def test_outbound_hop_must_start_at_owner(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec(
        {"source": [{"outbound": ["RNASeq", "Replicate_Specimen_fkey"]}, "Species"]}
    )
    with pytest.raises(ResolutionError):
        resolve_source(model, study, spec)


def test_unknown_fkey_rejected(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec({"source": [{"inbound": ["RNASeq", "Ghost_fkey"]}, "RID"]})
    with pytest.raises(ResolutionError):
        resolve_source(model, study, spec)


def test_missing_end_column_rejected(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec(
        {"source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]}, "Nope"]}
    )
    with pytest.raises(ResolutionError):
        resolve_source(model, study, spec)


def test_entity_mode_uniform_rule(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    # bare RID is a key member: entity mode
    assert resolve_source(model, study, parse_source_spec("RID")).entity_mode is True
    # bare Title is not a key of Study
    assert resolve_source(model, study, parse_source_spec("Title")).entity_mode is False
    # path ending in a non-key column
    spec = parse_source_spec(
        {"source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]}, "Experiment_Type"]}
    )
    assert resolve_source(model, study, spec).entity_mode is False


def test_aggregate_requires_path():
    with pytest.raises(ResolutionError, match="aggregate"):
        parse_source_spec({"source": "Title", "aggregate": "cnt"})
    with pytest.raises(ResolutionError, match="aggregate"):
        parse_source_spec({"sourcekey": "x", "aggregate": "cnt"})


def test_entity_mode_rejects_min_max_sum(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    for agg in ("min", "max", "sum"):
        spec = parse_source_spec({"source": ANATOMY_PATH, "aggregate": agg})
        with pytest.raises(ResolutionError):
            resolve_source(model, study, spec)


def test_sum_requires_numeric(curator_view):
    model, _, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    file_path = [
        {"inbound": ["RNASeq", "Study_File_Study_fkey"]},
        {"outbound": ["RNASeq", "Study_File_File_fkey"]},
    ]
    with pytest.raises(ResolutionError):
        resolve_source(model, study, parse_source_spec(
            {"source": file_path + ["Filename"], "aggregate": "sum"}))
    resolved = resolve_source(model, study, parse_source_spec(
        {"source": file_path + ["Bytes"], "aggregate": "sum"}))
    assert resolved.aggregate == "sum" and resolved.end_type == "int"


def test_multivalued_only_with_inbound(curator_view):
    model, _, _ = curator_view
    experiment = model.get_table("RNASeq", "Experiment")
    outbound_only = parse_source_spec(
        {"source": [{"outbound": ["RNASeq", "Experiment_Study_fkey"]}, "Title"]}
    )
    assert resolve_source(model, experiment, outbound_only).multivalued is False


def test_sourcekey_resolution(curator_view):
    model, va, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    defs = va.tables[("RNASeq", "Study")].sources
    assert "experiment_types" in defs
    spec = parse_source_spec({"sourcekey": "experiment_types"})
    resolved = resolve_source(model, study, spec, defs)
    assert resolved.multivalued and resolved.aggregate == "array_d"


def test_sourcekey_unknown(curator_view):
    model, va, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec({"sourcekey": "missing"})
    with pytest.raises(ResolutionError):
        resolve_source(model, study, spec, va.tables[("RNASeq", "Study")].sources)


def test_path_walk_agrees_with_oracle(demo_db, demo_doc, demo_rows, curator_view):
    """Hop resolution and the nested-loop oracle traverse identically."""
    model, va, _ = curator_view
    study = model.get_table("RNASeq", "Study")
    spec = parse_source_spec({"source": ANATOMY_PATH, "aggregate": "array_d"})
    resolved = resolve_source(model, study, spec)
    # resolution only records structure; confirm endpoint tables line up
    # with what the oracle derives straight from the raw document
    for hop, raw in zip(resolved.hops, ANATOMY_PATH[:-1]):
        direction = "inbound" if "inbound" in raw else "outbound"
        schema, table, fk = oracle.find_fkey(demo_doc, tuple(raw[direction]))
        if direction == "inbound":
            assert (hop.table_schema, hop.table_name) == (schema, table)
            assert list(hop.left_columns) == list(fk["to"]["columns"])
            assert list(hop.right_columns) == list(fk["from_columns"])
        else:
            assert (hop.table_schema, hop.table_name) == (
                fk["to"]["schema"], fk["to"]["table"])
            assert list(hop.left_columns) == list(fk["from_columns"])
            assert list(hop.right_columns) == list(fk["to"]["columns"])


# -- whole-catalog validation ----------------------------------------------


def test_demo_validates_clean_for_both_roles(anon_view, curator_view):
    assert anon_view[2] == []
    assert curator_view[2] == []


def rebuilt_view(mutate, client=CURATOR):
    doc = catalog_document()
    mutate(doc)
    catalog = catalog_from_document(doc)
    model = prune_model(catalog, client)
    return model, validate_annotations(model)


def study_annotations(doc):
    return doc["schemas"]["RNASeq"]["tables"]["Study"]["annotations"]


def test_dangling_sourcekey_dropped_with_one_error():
    def mutate(doc):
        vc = study_annotations(doc)["tag:isrd.isi.edu,2016:visible-columns"]
        vc["compact"] = [{"sourcekey": "no_such"}] + vc["compact"]

    model, (va, diagnostics) = rebuilt_view(mutate)
    errors = [d for d in diagnostics if d.severity == "error"]
    assert len(errors) == 1
    assert errors[0].context == "compact" and errors[0].index == 0
    kept = va.tables[("RNASeq", "Study")].visible_columns["compact"]
    assert len(kept) == 2  # Title + experiment_types survive, order kept
    assert kept[0].resolved.end_column == "Title"


def test_invalid_context_key_dropped():
    def mutate(doc):
        vc = study_annotations(doc)["tag:isrd.isi.edu,2016:visible-columns"]
        vc["Compact Brief"] = ["Title"]

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "error" and "context" in d.message for d in diagnostics)
    assert "Compact Brief" not in va.tables[("RNASeq", "Study")].visible_columns


def test_unrecognized_tag_warns_but_is_kept():
    def mutate(doc):
        study_annotations(doc)["tag:example.org,2030:future"] = {"x": 1}

    model, (va, diagnostics) = rebuilt_view(mutate)
    warnings = [d for d in diagnostics if d.severity == "warning"]
    assert any("future" in (d.tag or "") for d in warnings)
    table = model.get_table("RNASeq", "Study")
    assert table.annotations["tag:example.org,2030:future"] == {"x": 1}


def test_nested_sourcekey_rejected():
    def mutate(doc):
        sd = study_annotations(doc)["tag:isrd.isi.edu,2019:source-definitions"]
        sd["sources"]["indirect"] = {"sourcekey": "experiment_types"}

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(
        d.severity == "error" and "sourcekey" in d.message for d in diagnostics
    )
    assert "indirect" not in va.tables[("RNASeq", "Study")].sources


def test_entry_context_rejects_pseudo_columns():
    def mutate(doc):
        vc = study_annotations(doc)["tag:isrd.isi.edu,2016:visible-columns"]
        vc["entry"] = ["Title", {"sourcekey": "experiment_types"}]

    model, (va, diagnostics) = rebuilt_view(mutate)
    errors = [d for d in diagnostics if d.severity == "error" and d.context == "entry"]
    assert len(errors) == 1
    kept = va.tables[("RNASeq", "Study")].visible_columns["entry"]
    assert len(kept) == 1 and kept[0].resolved.end_column == "Title"


def test_entry_context_rejects_system_columns():
    def mutate(doc):
        vc = study_annotations(doc)["tag:isrd.isi.edu,2016:visible-columns"]
        vc["entry"] = ["RCT", "Title"]

    model, (va, diagnostics) = rebuilt_view(mutate)
    errors = [d for d in diagnostics if d.severity == "error" and d.context == "entry"]
    assert len(errors) == 1
    kept = va.tables[("RNASeq", "Study")].visible_columns["entry"]
    assert [e.resolved.end_column for e in kept] == ["Title"]


def test_entry_context_allows_single_outbound_entity_ref():
    def mutate(doc):
        exp = doc["schemas"]["RNASeq"]["tables"]["Experiment"]
        exp.setdefault("annotations", {})["tag:isrd.isi.edu,2016:visible-columns"] = {
            "entry": [
                "Name",
                {"source": [{"outbound": ["RNASeq", "Experiment_Study_fkey"]}, "RID"]},
            ]
        }

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert [d for d in diagnostics if d.severity == "error"] == []
    kept = va.tables[("RNASeq", "Experiment")].visible_columns["entry"]
    assert len(kept) == 2


def test_row_order_unknown_column_diagnosed():
    def mutate(doc):
        study_annotations(doc)["tag:isrd.isi.edu,2016:table-display"]["*"] = {
            "row_order": [{"column": "Nope"}]
        }

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "error" and "Nope" in d.message for d in diagnostics)


def test_required_annotation_on_system_column_warns():
    def mutate(doc):
        cols = doc["schemas"]["RNASeq"]["tables"]["Study"]["columns"]
        cols.insert(0, {"name": "RID", "type": "text", "nullable": False,
                        "annotations": {"tag:isrd.isi.edu,2018:required": True}})
        summary = next(c for c in cols if c["name"] == "Summary")
        summary.setdefault("annotations", {})["tag:isrd.isi.edu,2018:required"] = True

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "warning" for d in diagnostics)
    assert "Summary" in va.tables[("RNASeq", "Study")].required
    assert "RID" not in va.tables[("RNASeq", "Study")].required


def test_asset_annotation_validated_per_column():
    def mutate(doc):
        cols = doc["schemas"]["RNASeq"]["tables"]["File"]["columns"]
        url = next(c for c in cols if c["name"] == "URL")
        url["annotations"]["tag:isrd.isi.edu,2017:asset"]["byte_count_column"] = "Nope"

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "error" and "Nope" in d.message for d in diagnostics)
    asset = va.tables[("RNASeq", "File")].assets.get("URL")
    # the valid parts survive
    assert asset is not None and asset.get("filename_column") == "Filename"
    assert "byte_count_column" not in asset


def test_visible_fkey_bare_pair_wrapped():
    model, (va, diagnostics) = rebuilt_view(lambda doc: None)
    vfk = va.tables[("RNASeq", "Study")].visible_fkeys["detailed"]
    # first entry was the bare [schema, constraint] pair form
    first = vfk[0]
    assert first.resolved.hops[0].direction == "inbound"
    assert first.resolved.multivalued and first.resolved.entity_mode


def test_visible_fkey_rejects_scalar_path():
    def mutate(doc):
        study_annotations(doc)["tag:isrd.isi.edu,2016:visible-foreign-keys"]["detailed"].append(
            {"source": [{"inbound": ["RNASeq", "Experiment_Study_fkey"]},
                        "Experiment_Type"]}
        )

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "error" for d in diagnostics)
    assert len(va.tables[("RNASeq", "Study")].visible_fkeys["detailed"]) == 2


def test_selection_filter_validated_against_target():
    def mutate(doc):
        exp = doc["schemas"]["RNASeq"]["tables"]["Experiment"]
        fk = next(f for f in exp["foreign_keys"]
                  if f["name"] == ["RNASeq", "Experiment_Protocol_fkey"])
        fk["annotations"]["tag:isrd.isi.edu,2016:foreign-key"]["selection_filter"] = [
            {"source": "NotAColumn", "choices": ["x"]}
        ]

    model, (va, diagnostics) = rebuilt_view(mutate)
    assert any(d.severity == "error" for d in diagnostics)
    fkd = va.fkeys.get(("RNASeq", "Experiment_Protocol_fkey"))
    assert fkd is not None and fkd.selection_filter == ()


def test_anon_model_validation_sees_no_curation_status_sources(anon_view):
    _, va, diagnostics = anon_view
    assert diagnostics == []
    # Protocol picker filter mentions Category which anonymous can see
    assert ("RNASeq", "Experiment_Protocol_fkey") in va.fkeys
