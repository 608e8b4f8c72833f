"""Relational catalog document, in-memory model, and structural validation.

The catalog is an immutable snapshot: every mutation goes through
:func:`apply_model_change`, which returns a fresh snapshot with a bumped
version and leaves the input untouched.  Annotation values are stored
verbatim as opaque JSON documents keyed by tag URI; they are validated
later, at interpretation time, never here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Optional

from .errors import ModelError, ParseError

SCALAR_TYPES = ("text", "markdown", "int", "float", "boolean", "date", "timestamp")

# System columns, injected into every table in this order.
SYSTEM_COLUMNS = (
    ("RID", "text"),
    ("RCT", "timestamp"),
    ("RMT", "timestamp"),
    ("RCB", "text"),
    ("RMB", "text"),
)
SYSTEM_COLUMN_NAMES = tuple(name for name, _ in SYSTEM_COLUMNS)

# Identifier grammar; spaces are legal inside names ("Specimen Tissue").
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_ ]*$")

AnnotationMap = dict  # tag URI -> opaque JSON document


def is_identifier(name: object) -> bool:
    return isinstance(name, str) and bool(_IDENT_RE.match(name))


@dataclass(frozen=True)
class Column:
    name: str
    type: str
    nullable: bool = True
    is_system: bool = False
    comment: Optional[str] = None
    annotations: AnnotationMap = field(default_factory=dict)
    acls: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Key:
    name: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class ForeignKey:
    name: tuple[str, str]  # (schema name, constraint name)
    from_columns: tuple[str, ...]
    to_schema: str
    to_table: str
    to_columns: tuple[str, ...]
    annotations: AnnotationMap = field(default_factory=dict)


@dataclass(frozen=True)
class Table:
    schema: str
    name: str
    columns: tuple[Column, ...]  # creation order, preserved
    keys: tuple[Key, ...]
    foreign_keys: tuple[ForeignKey, ...]
    annotations: AnnotationMap = field(default_factory=dict)
    acls: dict = field(default_factory=dict)
    row_policy: Optional[dict] = None

    def column(self, name: str) -> Optional[Column]:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def user_columns(self) -> list[Column]:
        return [c for c in self.columns if not c.is_system]

    def shortest_key(self) -> Key:
        """Shortest key; ties broken by column-name order for determinism."""
        return min(self.keys, key=lambda k: (len(k.columns), k.columns))


@dataclass(frozen=True)
class Catalog:
    schemas: dict[str, tuple[Table, ...]]
    version: int = 1
    owners: tuple[str, ...] = ()
    acls: dict = field(default_factory=dict)

    def tables(self) -> Iterator[Table]:
        for tables in self.schemas.values():
            yield from tables

    def get_table(self, schema: str, name: str) -> Optional[Table]:
        for table in self.schemas.get(schema, ()):
            if table.name == name:
                return table
        return None

    def find_fkey(self, name: tuple[str, str]) -> Optional[tuple[Table, ForeignKey]]:
        """Locate a foreign key by its (schema, constraint) name pair."""
        for table in self.tables():
            for fk in table.foreign_keys:
                if fk.name == tuple(name):
                    return table, fk
        return None


# ---------------------------------------------------------------------------
# Parsing


def parse_catalog(document: bytes | str) -> Catalog:
    """Parse a catalog file, check structural invariants, and inject
    system columns and the RID key into every table."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"catalog document is not UTF-8: {exc}")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"catalog document is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ParseError("catalog document must be a JSON object")
    return catalog_from_document(doc)


def catalog_from_document(doc: dict) -> Catalog:
    schemas_doc = doc.get("schemas")
    if not isinstance(schemas_doc, dict):
        raise ParseError("catalog document lacks a 'schemas' object")
    owners = doc.get("owners", [])
    if not (isinstance(owners, list) and all(isinstance(o, str) for o in owners)):
        raise ModelError("'owners' must be a list of role names")
    acls = doc.get("acls", {})
    _check_acls(acls, "catalog", table_level=True)
    version = doc.get("version", 1)
    if not isinstance(version, int) or version < 1:
        raise ModelError("'version' must be a positive integer")

    schemas: dict[str, tuple[Table, ...]] = {}
    for schema_name, schema_doc in schemas_doc.items():
        if not is_identifier(schema_name):
            raise ModelError(f"invalid schema name {schema_name!r}")
        tables_doc = schema_doc.get("tables", {}) if isinstance(schema_doc, dict) else None
        if not isinstance(tables_doc, dict):
            raise ParseError(f"schema {schema_name!r} lacks a 'tables' object")
        tables = tuple(
            _parse_table(schema_name, table_name, table_doc)
            for table_name, table_doc in tables_doc.items()
        )
        schemas[schema_name] = tables

    catalog = Catalog(schemas=schemas, version=version, owners=tuple(owners), acls=acls)
    _check_catalog(catalog)
    return catalog


def _parse_table(schema: str, name: str, doc: Any) -> Table:
    where = f"{schema}:{name}"
    if not is_identifier(name):
        raise ModelError(f"invalid table name {name!r}")
    if not isinstance(doc, dict):
        raise ParseError(f"table {where} must be a JSON object")

    columns: list[Column] = []
    seen: set[str] = set()
    for col_doc in doc.get("columns", []):
        col = _parse_column(where, col_doc)
        if col.name in seen:
            raise ModelError(f"duplicate column {col.name!r} in {where}")
        seen.add(col.name)
        columns.append(col)

    # Inject engine-managed system columns ahead of user columns.
    injected = []
    for sys_name, sys_type in SYSTEM_COLUMNS:
        existing = next((c for c in columns if c.name == sys_name), None)
        if existing is None:
            injected.append(Column(name=sys_name, type=sys_type, nullable=False, is_system=True))
        else:
            if existing.type != sys_type or existing.nullable:
                raise ModelError(
                    f"system column {sys_name} in {where} must be non-nullable {sys_type}"
                )
            columns.remove(existing)
            injected.append(replace(existing, is_system=True))
    columns = injected + columns

    keys: list[Key] = []
    key_names: set[str] = set()
    for key_doc in doc.get("keys", []):
        if not isinstance(key_doc, dict):
            raise ParseError(f"key in {where} must be an object")
        kcols = key_doc.get("columns")
        kname = key_doc.get("name")
        if kname is None and isinstance(kcols, list) and all(isinstance(c, str) for c in kcols):
            kname = f"{name}_{'_'.join(kcols)}_key"
        if not is_identifier(kname):
            raise ModelError(f"invalid key name {kname!r} in {where}")
        if not (isinstance(kcols, list) and kcols and all(isinstance(c, str) for c in kcols)):
            raise ModelError(f"key {kname!r} in {where} needs a non-empty column list")
        if kname in key_names:
            raise ModelError(f"duplicate key name {kname!r} in {where}")
        key_names.add(kname)
        keys.append(Key(name=kname, columns=tuple(kcols)))
    if not any(k.columns == ("RID",) for k in keys):
        keys.insert(0, Key(name=f"{name}_RID_key", columns=("RID",)))

    fkeys: list[ForeignKey] = []
    for fk_doc in doc.get("foreign_keys", []):
        fkeys.append(_parse_fkey(where, fk_doc))

    annotations = doc.get("annotations", {})
    if not isinstance(annotations, dict):
        raise ParseError(f"annotations of {where} must be an object")
    acls = doc.get("acls", {})
    _check_acls(acls, where, table_level=True)
    row_policy = doc.get("row_policy") or None
    if row_policy is not None and not isinstance(row_policy, dict):
        raise ParseError(f"row_policy of {where} must be an object")

    return Table(
        schema=schema,
        name=name,
        columns=tuple(columns),
        keys=tuple(keys),
        foreign_keys=tuple(fkeys),
        annotations=annotations,
        acls=acls,
        row_policy=row_policy,
    )


def _parse_column(where: str, doc: Any) -> Column:
    if not isinstance(doc, dict):
        raise ParseError(f"column in {where} must be an object")
    name = doc.get("name")
    if not is_identifier(name):
        raise ModelError(f"invalid column name {name!r} in {where}")
    ctype = doc.get("type", "text")
    if ctype not in SCALAR_TYPES:
        raise ModelError(f"column {where}.{name} has unknown type {ctype!r}")
    annotations = doc.get("annotations", {})
    if not isinstance(annotations, dict):
        raise ParseError(f"annotations of column {where}.{name} must be an object")
    acls = doc.get("acls", {})
    _check_acls(acls, f"{where}.{name}", table_level=False)
    return Column(
        name=name,
        type=ctype,
        nullable=bool(doc.get("nullable", True)),
        comment=doc.get("comment"),
        annotations=annotations,
        acls=acls,
    )


def _parse_fkey(where: str, doc: Any) -> ForeignKey:
    if not isinstance(doc, dict):
        raise ParseError(f"foreign key in {where} must be an object")
    name = doc.get("name")
    if not (isinstance(name, list) and len(name) == 2 and all(is_identifier(n) for n in name)):
        raise ModelError(f"foreign key in {where} needs a [schema, constraint] name pair")
    from_cols = doc.get("from_columns")
    to = doc.get("to", {})
    to_cols = to.get("columns") if isinstance(to, dict) else None
    if not (isinstance(from_cols, list) and from_cols):
        raise ModelError(f"foreign key {name[1]!r} in {where} needs from_columns")
    if not (isinstance(to, dict) and isinstance(to.get("schema"), str) and isinstance(to.get("table"), str)):
        raise ModelError(f"foreign key {name[1]!r} in {where} needs a 'to' table reference")
    if not (isinstance(to_cols, list) and len(to_cols) == len(from_cols)):
        raise ModelError(f"foreign key {name[1]!r} in {where}: from/to column arity mismatch")
    annotations = doc.get("annotations", {})
    if not isinstance(annotations, dict):
        raise ParseError(f"annotations of fkey {name[1]!r} in {where} must be an object")
    return ForeignKey(
        name=(name[0], name[1]),
        from_columns=tuple(from_cols),
        to_schema=to["schema"],
        to_table=to["table"],
        to_columns=tuple(to_cols),
        annotations=annotations,
    )


def _check_acls(acls: Any, where: str, table_level: bool) -> None:
    rights = {"enumerate", "select", "insert", "update", "delete"}
    if not table_level:
        rights = {"enumerate", "select", "insert", "update"}
    if not isinstance(acls, dict):
        raise ParseError(f"acls of {where} must be an object")
    for right, roles in acls.items():
        if right not in rights:
            raise ModelError(f"unknown right {right!r} in acls of {where}")
        if not (isinstance(roles, list) and all(isinstance(r, str) for r in roles)):
            raise ModelError(f"acl {right!r} of {where} must list role names")


def _check_catalog(catalog: Catalog) -> None:
    """Cross-element invariants: fkey resolution, name uniqueness, policies."""
    fkey_names: set[tuple[str, str]] = set()
    for table in catalog.tables():
        where = f"{table.schema}:{table.name}"
        colnames = set(table.column_names())
        for key in table.keys:
            missing = [c for c in key.columns if c not in colnames]
            if missing:
                raise ModelError(f"key {key.name!r} of {where} references missing columns {missing}")
        for fk in table.foreign_keys:
            if fk.name in fkey_names:
                raise ModelError(f"duplicate foreign key name {fk.name}")
            fkey_names.add(fk.name)
            missing = [c for c in fk.from_columns if c not in colnames]
            if missing:
                raise ModelError(f"fkey {fk.name} references missing columns {missing} in {where}")
            target = catalog.get_table(fk.to_schema, fk.to_table)
            if target is None:
                raise ModelError(f"fkey {fk.name} targets unknown table {fk.to_schema}:{fk.to_table}")
            if not any(set(k.columns) == set(fk.to_columns) for k in target.keys):
                raise ModelError(
                    f"fkey {fk.name} targets columns {list(fk.to_columns)} which are not a key "
                    f"of {fk.to_schema}:{fk.to_table}"
                )
        if table.row_policy is not None:
            _check_row_policy(table)


def _check_row_policy(table: Table) -> None:
    where = f"{table.schema}:{table.name}"
    rules = table.row_policy.get("rules") if isinstance(table.row_policy, dict) else None
    if not isinstance(rules, list):
        raise ModelError(f"row_policy of {where} needs a 'rules' list")
    for rule in rules:
        if not isinstance(rule, dict) or not isinstance(rule.get("roles"), list):
            raise ModelError(f"row_policy rule of {where} needs a 'roles' list")
        pred = rule.get("predicate")
        if pred is None:
            continue
        colname = pred.get("column") if isinstance(pred, dict) else None
        values = pred.get("in") if isinstance(pred, dict) else None
        col = table.column(colname) if isinstance(colname, str) else None
        if col is None:
            raise ModelError(f"row_policy of {where} references missing column {colname!r}")
        if col.type != "text":
            raise ModelError(f"row_policy predicate column {colname!r} of {where} must be text")
        if not isinstance(values, list):
            raise ModelError(f"row_policy predicate of {where} needs an 'in' value list")


# ---------------------------------------------------------------------------
# Serialization


def catalog_to_document(catalog: Catalog) -> dict:
    doc: dict = {"version": catalog.version, "schemas": {}}
    if catalog.owners:
        doc["owners"] = list(catalog.owners)
    if catalog.acls:
        doc["acls"] = catalog.acls
    for schema_name, tables in catalog.schemas.items():
        doc["schemas"][schema_name] = {"tables": {t.name: _table_to_doc(t) for t in tables}}
    return doc


def serialize_catalog(catalog: Catalog) -> bytes:
    return json.dumps(catalog_to_document(catalog), indent=2).encode("utf-8")


def _table_to_doc(table: Table) -> dict:
    doc: dict = {
        "columns": [
            {
                "name": c.name,
                "type": c.type,
                "nullable": c.nullable,
                **({"comment": c.comment} if c.comment is not None else {}),
                **({"annotations": c.annotations} if c.annotations else {}),
                **({"acls": c.acls} if c.acls else {}),
            }
            for c in table.columns
        ],
        "keys": [{"name": k.name, "columns": list(k.columns)} for k in table.keys],
        "foreign_keys": [
            {
                "name": list(fk.name),
                "from_columns": list(fk.from_columns),
                "to": {"schema": fk.to_schema, "table": fk.to_table, "columns": list(fk.to_columns)},
                **({"annotations": fk.annotations} if fk.annotations else {}),
            }
            for fk in table.foreign_keys
        ],
    }
    if table.annotations:
        doc["annotations"] = table.annotations
    if table.acls:
        doc["acls"] = table.acls
    if table.row_policy is not None:
        doc["row_policy"] = table.row_policy
    return doc


# ---------------------------------------------------------------------------
# Model changes


@dataclass(frozen=True)
class ModelChange:
    """One catalog mutation.  ``op`` selects the change kind; the other
    fields locate the target element and carry the new definition."""

    op: str
    schema: Optional[str] = None
    table: Optional[str] = None
    column: Optional[str] = None
    fkey: Optional[tuple[str, str]] = None
    tag: Optional[str] = None
    value: Any = None


CHANGE_OPS = (
    "add-table",
    "add-column",
    "drop-column",
    "add-fkey",
    "drop-fkey",
    "set-annotation",
    "delete-annotation",
    "set-acl",
    "set-row-policy",
)


def model_change_from_json(doc: dict) -> ModelChange:
    op = doc.get("op")
    if op not in CHANGE_OPS:
        raise ParseError(f"unknown model change op {op!r}")
    fkey = doc.get("fkey")
    if fkey is not None:
        if not (isinstance(fkey, list) and len(fkey) == 2):
            raise ParseError("'fkey' must be a [schema, constraint] pair")
        fkey = (fkey[0], fkey[1])
    return ModelChange(
        op=op,
        schema=doc.get("schema"),
        table=doc.get("table"),
        column=doc.get("column"),
        fkey=fkey,
        tag=doc.get("tag"),
        value=doc.get("value"),
    )


def apply_model_change(catalog: Catalog, change: ModelChange) -> Catalog:
    """Apply one change and return a new snapshot with version + 1.

    The change is applied to the document form and re-parsed, so every
    structural invariant is re-checked and the input snapshot is never
    touched.
    """
    # Document dicts alias the live catalog's annotation objects; work on
    # a deep copy so the input snapshot really is immutable.
    doc = json.loads(json.dumps(catalog_to_document(catalog)))
    _apply_to_document(catalog, doc, change)
    doc["version"] = catalog.version + 1
    return catalog_from_document(doc)


def _table_doc(catalog: Catalog, doc: dict, change: ModelChange) -> dict:
    schema, table = change.schema, change.table
    if catalog.get_table(schema or "", table or "") is None:
        raise ModelError(f"unknown table {schema}:{table}")
    return doc["schemas"][schema]["tables"][table]


def _apply_to_document(catalog: Catalog, doc: dict, change: ModelChange) -> None:
    op = change.op
    if op == "add-table":
        if not isinstance(change.value, dict):
            raise ModelError("add-table needs a table definition in 'value'")
        schema = change.schema or ""
        doc["schemas"].setdefault(schema, {"tables": {}})
        tables = doc["schemas"][schema]["tables"]
        if change.table in tables:
            raise ModelError(f"table {schema}:{change.table} already exists")
        tables[change.table] = change.value
    elif op == "add-column":
        tdoc = _table_doc(catalog, doc, change)
        if not isinstance(change.value, dict):
            raise ModelError("add-column needs a column definition in 'value'")
        tdoc["columns"].append(change.value)  # appended last in creation order
    elif op == "drop-column":
        tdoc = _table_doc(catalog, doc, change)
        before = len(tdoc["columns"])
        tdoc["columns"] = [c for c in tdoc["columns"] if c["name"] != change.column]
        if len(tdoc["columns"]) == before:
            raise ModelError(f"unknown column {change.column!r}")
        tdoc["keys"] = [k for k in tdoc["keys"] if change.column not in k["columns"]]
    elif op == "add-fkey":
        tdoc = _table_doc(catalog, doc, change)
        if not isinstance(change.value, dict):
            raise ModelError("add-fkey needs a foreign key definition in 'value'")
        tdoc["foreign_keys"].append(change.value)
    elif op == "drop-fkey":
        if change.fkey is None:
            raise ModelError("drop-fkey needs the fkey name pair")
        found = catalog.find_fkey(change.fkey)
        if found is None:
            raise ModelError(f"unknown foreign key {change.fkey}")
        owner, _ = found
        tdoc = doc["schemas"][owner.schema]["tables"][owner.name]
        tdoc["foreign_keys"] = [f for f in tdoc["foreign_keys"] if tuple(f["name"]) != change.fkey]
    elif op in ("set-annotation", "delete-annotation"):
        target = _annotation_target(catalog, doc, change)
        anns = target.setdefault("annotations", {})
        if op == "set-annotation":
            if change.tag is None:
                raise ModelError("set-annotation needs a 'tag'")
            anns[change.tag] = change.value
        else:
            anns.pop(change.tag, None)
            if not anns:
                target.pop("annotations", None)
    elif op == "set-acl":
        if change.table is None:
            doc["acls"] = change.value or {}
        else:
            target = _annotation_target(catalog, doc, change)
            if change.value:
                target["acls"] = change.value
            else:
                target.pop("acls", None)
    elif op == "set-row-policy":
        tdoc = _table_doc(catalog, doc, change)
        if change.value:
            tdoc["row_policy"] = change.value
        else:
            tdoc.pop("row_policy", None)
    else:  # pragma: no cover - guarded by CHANGE_OPS
        raise ModelError(f"unhandled change op {op!r}")


def _annotation_target(catalog: Catalog, doc: dict, change: ModelChange) -> dict:
    """Locate the table, column, or fkey sub-document a change addresses."""
    if change.fkey is not None:
        found = catalog.find_fkey(change.fkey)
        if found is None:
            raise ModelError(f"unknown foreign key {change.fkey}")
        owner, _ = found
        tdoc = doc["schemas"][owner.schema]["tables"][owner.name]
        for fk_doc in tdoc["foreign_keys"]:
            if tuple(fk_doc["name"]) == change.fkey:
                return fk_doc
        raise ModelError(f"unknown foreign key {change.fkey}")  # pragma: no cover
    tdoc = _table_doc(catalog, doc, change)
    if change.column is None:
        return tdoc
    for col_doc in tdoc["columns"]:
        if col_doc["name"] == change.column:
            return col_doc
    raise ModelError(f"unknown column {change.column!r} in {change.schema}:{change.table}")
