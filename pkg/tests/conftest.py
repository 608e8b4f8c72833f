import pytest

from modeladapt.annotations import validate_annotations
from modeladapt.demo import CURATOR, build, catalog_document
from modeladapt.model import catalog_from_document, catalog_to_document
from modeladapt.policy import ANONYMOUS, prune_model

import oracle


@pytest.fixture(scope="session")
def demo_db():
    """Shared read-only demo database; tests that mutate build their own."""
    return build()


@pytest.fixture(scope="session")
def demo_doc(demo_db):
    return catalog_to_document(demo_db.catalog)


@pytest.fixture(scope="session")
def demo_rows(demo_db):
    return oracle.snapshot_rows(demo_db)


@pytest.fixture(scope="session")
def anon_view(demo_db):
    model = prune_model(demo_db.catalog, ANONYMOUS)
    va, diagnostics = validate_annotations(model)
    return model, va, diagnostics


@pytest.fixture(scope="session")
def curator_view(demo_db):
    model = prune_model(demo_db.catalog, CURATOR)
    va, diagnostics = validate_annotations(model)
    return model, va, diagnostics


def library_document() -> dict:
    """Three related tables with no annotations at all, small enough to
    predict every heuristic by hand."""
    return {
        "acls": {
            "enumerate": ["*"], "select": ["*"],
            "insert": ["*"], "update": ["*"], "delete": ["*"],
        },
        "schemas": {
            "Library": {
                "tables": {
                    "Book": {
                        "columns": [
                            {"name": "Title", "type": "text", "nullable": False},
                            {"name": "Name", "type": "text", "nullable": True},
                            {"name": "Author", "type": "text", "nullable": True},
                        ],
                        "keys": [],
                        "foreign_keys": [
                            {
                                "name": ["Library", "Book_Author_fkey"],
                                "from_columns": ["Author"],
                                "to": {
                                    "schema": "Library",
                                    "table": "Author",
                                    "columns": ["RID"],
                                },
                            }
                        ],
                    },
                    "Author": {
                        "columns": [
                            {"name": "Name", "type": "text", "nullable": False},
                        ],
                        "keys": [{"columns": ["Name"]}],
                        "foreign_keys": [],
                    },
                    "Accession": {
                        "columns": [
                            {"name": "Accession_Number", "type": "text", "nullable": False},
                            {"name": "Book", "type": "text", "nullable": True},
                        ],
                        "keys": [{"columns": ["Accession_Number"]}],
                        "foreign_keys": [
                            {
                                "name": ["Library", "Accession_Book_fkey"],
                                "from_columns": ["Book"],
                                "to": {
                                    "schema": "Library",
                                    "table": "Book",
                                    "columns": ["RID"],
                                },
                            }
                        ],
                    },
                }
            }
        }
    }


@pytest.fixture()
def library_catalog():
    return catalog_from_document(library_document())


@pytest.fixture()
def library_view(library_catalog):
    model = prune_model(library_catalog, ANONYMOUS)
    va, diagnostics = validate_annotations(model)
    assert diagnostics == []
    return model, va


@pytest.fixture()
def demo_document_factory():
    """Fresh mutable copy of the demo catalog document for tests that
    tweak annotations before re-parsing."""
    return catalog_document
