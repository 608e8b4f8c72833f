import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modeladapt.model import catalog_from_document
from modeladapt.policy import (
    ANONYMOUS,
    ClientContext,
    prune_model,
    row_predicate,
)

import oracle


def policy_doc(**overrides) -> dict:
    doc = {
        "owners": ["admin"],
        "acls": {"enumerate": ["*"], "select": ["*"]},
        "schemas": {
            "S": {
                "tables": {
                    "T": {
                        "columns": [
                            {"name": "Open", "type": "text"},
                            {"name": "Secret", "type": "text",
                             "acls": {"enumerate": ["staff"], "select": ["staff"]}},
                        ],
                        "keys": [],
                        "foreign_keys": [],
                        "acls": {"insert": ["staff"], "update": ["staff"],
                                 "delete": ["staff"]},
                    }
                }
            }
        },
    }
    doc.update(overrides)
    return doc


def staff() -> ClientContext:
    return ClientContext(id="s1", roles=frozenset({"staff"}))


def test_every_client_holds_the_wildcard_role():
    assert "*" in ANONYMOUS.roles
    assert "*" in staff().roles


def test_acl_chain_most_specific_wins():
    cat = catalog_from_document(policy_doc())
    table = cat.get_table("S", "T")
    anon = prune_model(cat, ANONYMOUS)
    # column-level select for Secret overrides the catalog-wide grant
    assert anon.get_table("S", "T").column("Secret") is None
    st_model = prune_model(cat, staff())
    assert st_model.get_table("S", "T").column("Secret") is not None
    assert table.column("Secret").acls["select"] == ["staff"]


def test_absent_right_falls_back_to_owners():
    doc = policy_doc(acls={})  # no catalog acls at all
    doc["schemas"]["S"]["tables"]["T"]["acls"] = {}  # none at the table either
    cat = catalog_from_document(doc)
    assert prune_model(cat, ANONYMOUS).get_table("S", "T") is None
    admin = ClientContext(id="a", roles=frozenset({"admin"}))
    model = prune_model(cat, admin)
    rights = model.rights_of(model.get_table("S", "T"))
    assert rights.select and rights.insert and rights.update and rights.delete


def test_write_rights_imply_select_and_visibility():
    doc = policy_doc()
    doc["schemas"]["S"]["tables"]["T"]["acls"] = {
        "enumerate": [], "select": [], "update": ["editor"]}
    cat = catalog_from_document(doc)
    editor = ClientContext(id="e", roles=frozenset({"editor"}))
    model = prune_model(cat, editor)
    table = model.get_table("S", "T")
    assert table is not None
    rights = model.rights_of(table)
    assert rights.update and rights.select and rights.visible
    # someone with no rights at all loses the table
    assert prune_model(cat, ANONYMOUS).get_table("S", "T") is None


def test_column_rights_bounded_by_table_rights():
    doc = policy_doc()
    # column grants insert to everyone, table does not
    doc["schemas"]["S"]["tables"]["T"]["columns"][0]["acls"] = {"insert": ["*"]}
    cat = catalog_from_document(doc)
    model = prune_model(cat, ANONYMOUS)
    rights = model.rights_of(model.get_table("S", "T"), "Open")
    assert rights.select is True
    assert rights.insert is False  # table-level insert denies


def test_keys_with_hidden_columns_are_dropped():
    doc = policy_doc()
    doc["schemas"]["S"]["tables"]["T"]["keys"] = [{"name": "sec", "columns": ["Secret"]}]
    cat = catalog_from_document(doc)
    anon = prune_model(cat, ANONYMOUS)
    assert all(k.name != "sec" for k in anon.get_table("S", "T").keys)
    st_model = prune_model(cat, staff())
    assert any(k.name == "sec" for k in st_model.get_table("S", "T").keys)


def test_fkeys_with_hidden_endpoints_are_dropped():
    doc = policy_doc()
    tables = doc["schemas"]["S"]["tables"]
    tables["T"]["keys"] = [{"name": "sec", "columns": ["Secret"]}]
    tables["U"] = {
        "columns": [{"name": "Ref", "type": "text"}],
        "keys": [],
        "foreign_keys": [
            {"name": ["S", "U_T_fkey"], "from_columns": ["Ref"],
             "to": {"schema": "S", "table": "T", "columns": ["Secret"]}}
        ],
    }
    cat = catalog_from_document(doc)
    assert prune_model(cat, ANONYMOUS).get_table("S", "U").foreign_keys == ()
    assert len(prune_model(cat, staff()).get_table("S", "U").foreign_keys) == 1


def test_invisible_table_breaks_fkeys_pointing_at_it():
    doc = policy_doc()
    doc["schemas"]["S"]["tables"]["T"]["acls"] = {"enumerate": ["staff"], "select": ["staff"]}
    doc["schemas"]["S"]["tables"]["U"] = {
        "columns": [{"name": "Ref", "type": "text"}],
        "keys": [],
        "foreign_keys": [
            {"name": ["S", "U_T_fkey"], "from_columns": ["Ref"],
             "to": {"schema": "S", "table": "T", "columns": ["RID"]}}
        ],
    }
    cat = catalog_from_document(doc)
    anon = prune_model(cat, ANONYMOUS)
    assert anon.get_table("S", "T") is None
    assert anon.get_table("S", "U").foreign_keys == ()


def test_demo_pruning_matches_expectations(demo_db, anon_view, curator_view):
    anon_model, _, _ = anon_view
    cur_model, _, _ = curator_view
    anon_study = anon_model.get_table("RNASeq", "Study")
    assert anon_study.column("Curation_Status") is None
    assert all(
        "Curation_Status" not in fk.from_columns for fk in anon_study.foreign_keys
    )
    cur_study = cur_model.get_table("RNASeq", "Study")
    assert cur_study.column("Curation_Status") is not None
    assert cur_model.rights_of(cur_study, "Curation_Status").update is True
    assert anon_model.rights_of(anon_study).insert is False
    assert cur_model.rights_of(cur_study).delete is True


# -- row predicates ---------------------------------------------------------


def test_row_predicate_none_without_policy(library_catalog):
    table = library_catalog.get_table("Library", "Book")
    assert row_predicate(table, ANONYMOUS) is None


def test_row_predicate_fail_closed():
    doc = policy_doc()
    doc["schemas"]["S"]["tables"]["T"]["row_policy"] = {
        "rules": [{"roles": ["staff"]}]
    }
    cat = catalog_from_document(doc)
    table = cat.get_table("S", "T")
    pred = row_predicate(table, ANONYMOUS)
    assert pred is not None
    assert not pred.matches({"Open": "x"})
    assert row_predicate(table, staff()) is None


def test_row_predicate_disjunction():
    doc = policy_doc()
    doc["schemas"]["S"]["tables"]["T"]["row_policy"] = {
        "rules": [
            {"roles": ["*"], "predicate": {"column": "Open", "in": ["a"]}},
            {"roles": ["staff"], "predicate": {"column": "Open", "in": ["b"]}},
        ]
    }
    cat = catalog_from_document(doc)
    table = cat.get_table("S", "T")
    anon = row_predicate(table, ANONYMOUS)
    assert anon.matches({"Open": "a"}) and not anon.matches({"Open": "b"})
    with_staff = row_predicate(table, staff())
    assert with_staff.matches({"Open": "a"}) and with_staff.matches({"Open": "b"})
    assert not with_staff.matches({"Open": "c"})


def test_demo_row_policy_matches_oracle(demo_db, demo_doc, demo_rows):
    table = demo_db.catalog.get_table("RNASeq", "Study")
    for roles in (set(), {"curator"}):
        client = ClientContext(id="x", roles=frozenset(roles))
        pred = row_predicate(table, client)
        mine = [
            r for r in demo_rows[("RNASeq", "Study")]
            if pred is None or pred.matches(r)
        ]
        expected = oracle.policy_rows(demo_doc, demo_rows, "RNASeq", "Study", roles)
        assert {r["RID"] for r in mine} == {r["RID"] for r in expected}


# -- property tests ---------------------------------------------------------

RIGHT_NAMES = ("enumerate", "select", "insert", "update", "delete")
ROLE_POOL = ("*", "staff", "editor", "admin")

acl_strategy = st.dictionaries(
    st.sampled_from(RIGHT_NAMES),
    st.lists(st.sampled_from(ROLE_POOL), max_size=3),
    max_size=5,
)


@settings(max_examples=150, deadline=None)
@given(
    table_acls=acl_strategy,
    catalog_acls=acl_strategy,
    roles=st.sets(st.sampled_from(ROLE_POOL[1:]), max_size=3),
)
def test_rights_implications_hold(table_acls, catalog_acls, roles):
    doc = {
        "owners": ["admin"],
        "acls": catalog_acls,
        "schemas": {"S": {"tables": {"T": {
            "columns": [{"name": "A", "type": "text"}],
            "keys": [], "foreign_keys": [], "acls": table_acls,
        }}}},
    }
    cat = catalog_from_document(doc)
    client = ClientContext(id="c", roles=frozenset(roles))
    model = prune_model(cat, client)
    table = model.get_table("S", "T")
    if table is None:
        return
    rights = model.rights_of(table)
    assert rights.visible
    # any write right implies select; select implies visible
    if rights.insert or rights.update or rights.delete:
        assert rights.select
    if rights.select:
        assert rights.visible
    if table.column("A") is not None:
        col_rights = model.rights_of(table, "A")
        # column rights never exceed table rights
        assert not (col_rights.insert and not rights.insert)
        assert not (col_rights.update and not rights.update)
        assert not (col_rights.select and not rights.select)


@settings(max_examples=100, deadline=None)
@given(
    rules=st.lists(
        st.tuples(
            st.sets(st.sampled_from(ROLE_POOL), min_size=1, max_size=2),
            st.one_of(st.none(), st.sets(st.sampled_from("abc"), max_size=2)),
        ),
        max_size=4,
    ),
    roles=st.sets(st.sampled_from(ROLE_POOL[1:]), max_size=2),
    value=st.sampled_from("abcd"),
)
def test_row_predicate_equals_oracle(rules, roles, value):
    policy = {
        "rules": [
            {"roles": sorted(rs), **({"predicate": {"column": "A", "in": sorted(vals)}}
                                     if vals is not None else {})}
            for rs, vals in rules
        ]
    }
    doc = {
        "owners": ["admin"],
        "acls": {"enumerate": ["*"], "select": ["*"]},
        "schemas": {"S": {"tables": {"T": {
            "columns": [{"name": "A", "type": "text"}],
            "keys": [], "foreign_keys": [], "row_policy": policy,
        }}}},
    }
    cat = catalog_from_document(doc)
    table = cat.get_table("S", "T")
    client = ClientContext(id="c", roles=frozenset(roles))
    pred = row_predicate(table, client)
    row = {"A": value, "RID": "1"}
    mine = pred is None or pred.matches(row)
    expected = bool(oracle.visible_rows({"row_policy": policy}, [row], roles))
    assert mine == expected
