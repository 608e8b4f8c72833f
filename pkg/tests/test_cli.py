import contextlib
import json
import socket
import threading
import time
import urllib.request

import pytest
import uvicorn
from click.testing import CliRunner

from modeladapt.cli import cli
from modeladapt.demo import build, catalog_document
from modeladapt.model import catalog_from_document
from modeladapt.service import create_app
from modeladapt.storage import Database

from conftest import library_document


@pytest.fixture()
def runner():
    return CliRunner()


def write_catalog(tmp_path, doc, name="catalog.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


@contextlib.contextmanager
def live_server(db):
    config = uvicorn.Config(create_app(db), host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def fetch(url, headers=None):
    request = urllib.request.Request(url, headers=headers or {})
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


# -- help -------------------------------------------------------------------


def test_help_lists_commands(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for verb in ("validate", "serve", "load", "demo", "set-annotation"):
        assert verb in result.output


# -- validate ---------------------------------------------------------------


def test_validate_clean_catalog(runner, tmp_path):
    path = write_catalog(tmp_path, catalog_document())
    result = runner.invoke(cli, ["validate", path])
    assert result.exit_code == 0
    assert "ERROR" not in result.output
    result = runner.invoke(cli, ["validate", path, "--roles", "curator"])
    assert result.exit_code == 0 and result.output == ""


def test_validate_malformed_json(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    result = runner.invoke(cli, ["validate", str(path)])
    assert result.exit_code == 1
    assert result.output.startswith("ERROR")


def test_validate_structural_error(runner, tmp_path):
    doc = library_document()
    accession = doc["schemas"]["Library"]["tables"]["Accession"]
    accession["foreign_keys"][0]["to"]["columns"] = ["Title"]  # not a key of Book
    result = runner.invoke(cli, ["validate", write_catalog(tmp_path, doc)])
    assert result.exit_code == 1
    assert "not a key" in result.output


def test_validate_annotation_error(runner, tmp_path):
    doc = catalog_document()
    study = doc["schemas"]["RNASeq"]["tables"]["Study"]
    study["annotations"]["tag:isrd.isi.edu,2016:visible-columns"]["compact"] = [
        {"sourcekey": "no_such_key"},
        "Title",
    ]
    result = runner.invoke(cli, ["validate", write_catalog(tmp_path, doc)])
    assert result.exit_code == 2
    assert (
        "ERROR table=RNASeq:Study tag=visible-columns context=compact idx=0"
        in result.output
    )


def test_validate_warnings_still_pass(runner, tmp_path):
    doc = catalog_document()
    doc["schemas"]["RNASeq"]["tables"]["Study"]["annotations"]["tag:example.com,2020:custom"] = 1
    result = runner.invoke(cli, ["validate", write_catalog(tmp_path, doc)])
    assert result.exit_code == 0
    assert "WARNING" in result.output


# -- demo -------------------------------------------------------------------


def test_demo_writes_selfcontained_dir(runner, tmp_path):
    out = tmp_path / "demo"
    result = runner.invoke(cli, ["demo", str(out)])
    assert result.exit_code == 0
    assert "RNASeq:Study: 8 rows" in result.output
    assert f"catalog and data written to {out}" in result.output
    assert (out / "catalog.json").exists()
    assert (out / "snapshot.json").exists()
    db = Database(catalog_from_document(catalog_document()), out)
    assert len(db.snapshot.tables[("RNASeq", "Replicate")]) == 17
    db.close()


# -- load -------------------------------------------------------------------


def test_load_csv(runner, tmp_path):
    write_catalog(tmp_path, library_document())
    csv_path = tmp_path / "authors.csv"
    csv_path.write_text("Name\nBorges\nCalvino\n", encoding="utf-8")
    result = runner.invoke(
        cli, ["load", "Library:Author", str(csv_path), "--data-dir", str(tmp_path)])
    assert result.exit_code == 0
    assert "2 rows inserted into Library:Author" in result.output
    db = Database(catalog_from_document(library_document()), tmp_path)
    rows = list(db.snapshot.tables[("Library", "Author")].values())
    assert sorted(r["Name"] for r in rows) == ["Borges", "Calvino"]
    assert all(r["RCB"] == "loader" for r in rows)
    db.close()


def test_load_rejects_bad_table_argument(runner, tmp_path):
    write_catalog(tmp_path, library_document())
    csv_path = tmp_path / "x.csv"
    csv_path.write_text("Name\nA\n", encoding="utf-8")
    result = runner.invoke(
        cli, ["load", "Author", str(csv_path), "--data-dir", str(tmp_path)])
    assert result.exit_code == 1
    assert "Schema:Table" in result.output


def test_load_requires_stored_catalog(runner, tmp_path):
    csv_path = tmp_path / "x.csv"
    csv_path.write_text("Name\nA\n", encoding="utf-8")
    result = runner.invoke(
        cli, ["load", "Library:Author", str(csv_path), "--data-dir", str(tmp_path)])
    assert result.exit_code == 1
    assert "not found" in result.output


def test_load_reports_constraint_errors(runner, tmp_path):
    write_catalog(tmp_path, library_document())
    csv_path = tmp_path / "authors.csv"
    csv_path.write_text("Name\nTwin\nTwin\n", encoding="utf-8")
    result = runner.invoke(
        cli, ["load", "Library:Author", str(csv_path), "--data-dir", str(tmp_path)])
    assert result.exit_code == 1
    assert result.output.startswith("ERROR")


# -- set-annotation against a live server -----------------------------------


def test_set_annotation_live(runner, tmp_path):
    db = build(tmp_path / "data")
    with live_server(db) as url:
        before = fetch(f"{url}/entity/RNASeq/Study")
        assert [r["values"]["Title"] for r in before["rows"]] == [
            "Kidney development atlas",
            "Ureter obstruction time course",
            "Bladder urothelium survey",
            "Gonad differentiation map",
        ]
        value = json.dumps({
            "row_name": {"row_markdown_pattern": "{{{RID}}}: {{{Title}}}"},
            "*": {"row_order": [{"column": "RMT", "descending": True}]},
        })
        result = runner.invoke(cli, [
            "set-annotation", "RNASeq:Study",
            "tag:isrd.isi.edu,2016:table-display", value, "--url", url,
        ])
        assert result.exit_code == 0, result.output
        assert "annotation set; catalog version 2" in result.output
        after = fetch(f"{url}/entity/RNASeq/Study")
        assert [r["values"]["Title"] for r in after["rows"]] == [
            "Kidney development atlas",
            "Gonad differentiation map",
            "Bladder urothelium survey",
            "Ureter obstruction time course",
        ]
    # the applied change also reaches the stored catalog for restarts
    stored = json.loads((tmp_path / "data" / "catalog.json").read_text())
    display = stored["schemas"]["RNASeq"]["tables"]["Study"]["annotations"][
        "tag:isrd.isi.edu,2016:table-display"]
    assert display["*"]["row_order"] == [{"column": "RMT", "descending": True}]
    db.close()


def test_set_annotation_requires_owner_role(runner, tmp_path):
    db = build()
    with live_server(db) as url:
        result = runner.invoke(cli, [
            "set-annotation", "RNASeq:Study",
            "tag:isrd.isi.edu,2015:display", json.dumps({"name": "Studies"}),
            "--url", url, "--roles", "visitor",
        ])
        assert result.exit_code == 1
        assert "server returned 403" in result.output


def test_set_annotation_argument_errors(runner):
    result = runner.invoke(cli, [
        "set-annotation", "Study", "tag:x", "{}"])
    assert result.exit_code == 1 and "Schema:Table" in result.output
    result = runner.invoke(cli, [
        "set-annotation", "RNASeq:Study", "tag:x", "{not json"])
    assert result.exit_code == 1 and "not valid JSON" in result.output


def test_set_annotation_unreachable_server(runner, tmp_path):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        free_port = s.getsockname()[1]
    result = runner.invoke(cli, [
        "set-annotation", "RNASeq:Study", "tag:x", "{}",
        "--url", f"http://127.0.0.1:{free_port}",
    ])
    assert result.exit_code == 1
    assert "cannot reach" in result.output
