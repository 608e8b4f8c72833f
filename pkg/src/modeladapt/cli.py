"""Operator commands: validate a catalog, run the service, bulk-load
rows, materialize the demo fixture, and push annotation changes to a
running server."""

from __future__ import annotations

import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

import click

from .annotations import validate_annotations
from .errors import ModelAdaptError, ModelError, ParseError
from .model import Catalog, parse_catalog
from .policy import ClientContext, prune_model
from .storage import Database, read_rows


def _load_catalog(path: str) -> Catalog:
    return parse_catalog(Path(path).read_text(encoding="utf-8"))


def _client(roles: str, identity: str | None = None) -> ClientContext:
    parts = frozenset(r.strip() for r in roles.split(",") if r.strip())
    return ClientContext(id=identity, roles=parts)


@click.group()
def cli() -> None:
    """Model-adaptive data service tooling."""


@cli.command()
@click.argument("catalog_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--roles", default="*", show_default=True,
              help="Comma-separated roles to validate as.")
def validate(catalog_path: str, roles: str) -> None:
    """Check a catalog document and its annotations.

    Exit 0 when clean (warnings allowed), 1 on model errors, 2 on
    annotation errors.
    """
    try:
        catalog = _load_catalog(catalog_path)
    except (ParseError, ModelError) as exc:
        click.echo(f"ERROR {exc.message}")
        sys.exit(1)
    model = prune_model(catalog, _client(roles))
    _, diagnostics = validate_annotations(model)
    for diag in diagnostics:
        click.echo(diag.format_line())
    if any(d.severity == "error" for d in diagnostics):
        sys.exit(2)
    sys.exit(0)


@cli.command()
@click.argument("catalog_path", type=click.Path(exists=True, dir_okay=False),
                required=False)
@click.option("--data-dir", type=click.Path(file_okay=False), default=None,
              help="Directory for the change log and snapshots; omit for in-memory.")
@click.option("--port", default=8111, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--tokens", "tokens_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file mapping bearer tokens to identities.")
def serve(catalog_path: str | None, data_dir: str | None, port: int, host: str,
          tokens_path: str | None) -> None:
    """Run the HTTP service.

    A catalog.json inside --data-dir wins over the positional catalog so
    a restarted server keeps model changes applied while it was up.
    """
    import uvicorn

    from .service import create_app

    stored = Path(data_dir) / "catalog.json" if data_dir else None
    try:
        if stored is not None and stored.exists():
            catalog = _load_catalog(str(stored))
        elif catalog_path is not None:
            catalog = _load_catalog(catalog_path)
        else:
            click.echo("ERROR no catalog: pass a catalog path or a --data-dir "
                       "containing catalog.json")
            sys.exit(1)
    except (ParseError, ModelError) as exc:
        click.echo(f"ERROR {exc.message}")
        sys.exit(1)
    model = prune_model(catalog, _client("*"))
    _, diagnostics = validate_annotations(model)
    for diag in diagnostics:
        click.echo(diag.format_line())
    tokens = None
    if tokens_path is not None:
        tokens = json.loads(Path(tokens_path).read_text(encoding="utf-8"))
    db = Database(catalog, data_dir)
    try:
        uvicorn.run(create_app(db, tokens), host=host, port=port, log_level="warning")
    finally:
        db.save()
        db.close()


@cli.command()
@click.argument("table")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory holding catalog.json and the change log.")
@click.option("--identity", default="loader", show_default=True)
@click.option("--roles", default="*", show_default=True)
def load(table: str, file: str, data_dir: str, identity: str, roles: str) -> None:
    """Bulk-insert CSV or JSONL rows into TABLE (format Schema:Table)."""
    if ":" not in table:
        click.echo("ERROR table must be Schema:Table")
        sys.exit(1)
    schema, name = table.split(":", 1)
    stored = Path(data_dir) / "catalog.json"
    if not stored.exists():
        click.echo(f"ERROR {stored} not found")
        sys.exit(1)
    try:
        catalog = _load_catalog(str(stored))
    except (ParseError, ModelError) as exc:
        click.echo(f"ERROR {exc.message}")
        sys.exit(1)
    db = Database(catalog, data_dir)
    try:
        rows = read_rows(file)
        inserted = db.insert(schema, name, rows, _client(roles, identity))
        db.save()
    except ModelAdaptError as exc:
        click.echo(f"ERROR {exc.message}")
        sys.exit(1)
    finally:
        db.close()
    click.echo(f"{len(inserted)} rows inserted into {table}")


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
def demo(out_dir: str) -> None:
    """Write the RNASeq demo catalog and data set into OUT_DIR."""
    from .demo import build

    db = build(out_dir)
    db.save()
    db.close()
    counts = {
        f"{s}:{t}": len(rows)
        for (s, t), rows in sorted(db.snapshot.tables.items())
        if rows
    }
    for key, count in counts.items():
        click.echo(f"{key}: {count} rows")
    click.echo(f"catalog and data written to {out_dir}")


@cli.command("set-annotation")
@click.argument("table")
@click.argument("tag")
@click.argument("value")
@click.option("--url", default="http://127.0.0.1:8111", show_default=True,
              help="Base URL of a running server.")
@click.option("--column", default=None, help="Target a column instead of the table.")
@click.option("--identity", default="curator-1", show_default=True)
@click.option("--roles", default="curator", show_default=True)
def set_annotation(table: str, tag: str, value: str, url: str,
                   column: str | None, identity: str, roles: str) -> None:
    """Set an annotation on a live server; TABLE is Schema:Table and
    VALUE is the annotation payload as JSON."""
    if ":" not in table:
        click.echo("ERROR table must be Schema:Table")
        sys.exit(1)
    schema, name = table.split(":", 1)
    try:
        payload = json.loads(value)
    except json.JSONDecodeError as exc:
        click.echo(f"ERROR value is not valid JSON: {exc}")
        sys.exit(1)
    change = {
        "op": "set-annotation",
        "schema": schema,
        "table": name,
        "tag": tag,
        "value": payload,
    }
    if column is not None:
        change["column"] = column
    request = urllib.request.Request(
        url.rstrip("/") + "/model/change",
        data=json.dumps(change).encode("utf-8"),
        headers={
            "Content-Type": "application/json",
            "X-Client-Id": identity,
            "X-Client-Roles": roles,
        },
        method="POST",
    )
    try:
        with urllib.request.urlopen(request) as response:
            body = json.loads(response.read())
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")
        click.echo(f"ERROR server returned {exc.code}: {detail}")
        sys.exit(1)
    except urllib.error.URLError as exc:
        click.echo(f"ERROR cannot reach {url}: {exc.reason}")
        sys.exit(1)
    click.echo(f"annotation set; catalog version {body.get('version')}")


def main() -> None:
    cli(prog_name="modeladapt")


if __name__ == "__main__":
    main()
