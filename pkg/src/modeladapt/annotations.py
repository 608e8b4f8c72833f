"""Annotation payload validation, source-path resolution, and
narrow-scope pruning.

Payloads are checked against the role-based model, so an annotation can
be valid for one client and partially invalid for another (a pruned
column takes its annotation fragments with it).  Invalid list entries
are dropped individually, never the whole list, and each dropped
fragment produces a diagnostic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ParseError, ResolutionError
from .model import SYSTEM_COLUMN_NAMES, Table
from .policy import RoleBasedModel
from .render import parse_template

TAG_SOURCE_DEFINITIONS = "tag:isrd.isi.edu,2019:source-definitions"
TAG_VISIBLE_COLUMNS = "tag:isrd.isi.edu,2016:visible-columns"
TAG_VISIBLE_FOREIGN_KEYS = "tag:isrd.isi.edu,2016:visible-foreign-keys"
TAG_TABLE_DISPLAY = "tag:isrd.isi.edu,2016:table-display"
TAG_COLUMN_DISPLAY = "tag:isrd.isi.edu,2016:column-display"
TAG_ASSET = "tag:isrd.isi.edu,2017:asset"
TAG_REQUIRED = "tag:isrd.isi.edu,2018:required"
TAG_FOREIGN_KEY = "tag:isrd.isi.edu,2016:foreign-key"
TAG_DISPLAY = "tag:isrd.isi.edu,2015:display"
TAG_GENERATED = "tag:isrd.isi.edu,2016:generated"
TAG_IMMUTABLE = "tag:isrd.isi.edu,2016:immutable"

TABLE_TAGS = {
    TAG_SOURCE_DEFINITIONS,
    TAG_VISIBLE_COLUMNS,
    TAG_VISIBLE_FOREIGN_KEYS,
    TAG_TABLE_DISPLAY,
    TAG_DISPLAY,
    TAG_GENERATED,
    TAG_IMMUTABLE,
}
COLUMN_TAGS = {TAG_COLUMN_DISPLAY, TAG_ASSET, TAG_REQUIRED, TAG_DISPLAY, TAG_GENERATED, TAG_IMMUTABLE}
FKEY_TAGS = {TAG_FOREIGN_KEY}

AGGREGATES = ("array_d", "cnt_d", "cnt", "min", "max", "sum")
NUMERIC_TYPES = ("int", "float")

_CONTEXT_RE = re.compile(r"^\*$|^[a-z_][a-z0-9_]*(/[a-z0-9_]+)?$")

ENTRY_CONTEXTS = ("entry", "entry/create", "entry/edit")


def is_context_name(name: object) -> bool:
    return isinstance(name, str) and bool(_CONTEXT_RE.match(name))


def resolve_context(context_map: dict, requested: str):
    """Context lookup: exact key, then parent, then "*", then absent.

    Returns None when no configuration applies (use heuristics).
    """
    if not is_context_name(requested):
        raise ParseError(f"invalid context name {requested!r}")
    if requested in context_map:
        return context_map[requested]
    if "/" in requested:
        parent = requested.split("/", 1)[0]
        if parent in context_map:
            return context_map[parent]
    if "*" in context_map:
        return context_map["*"]
    return None


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # warning | error
    table: str = ""
    tag: str = ""
    context: str = ""
    index: Optional[int] = None
    message: str = ""

    def format_line(self) -> str:
        parts = [self.severity.upper()]
        if self.table:
            parts.append(f"table={self.table}")
        if self.tag:
            parts.append(f"tag={self.tag.rsplit(':', 1)[-1]}")
        if self.context:
            parts.append(f"context={self.context}")
        if self.index is not None:
            parts.append(f"idx={self.index}")
        parts.append(f"msg={self.message}")
        return " ".join(parts)


# ---------------------------------------------------------------------------
# Source specifications


@dataclass(frozen=True)
class FkHop:
    direction: str  # inbound | outbound
    fkey_name: tuple[str, str]


@dataclass(frozen=True)
class SourceSpec:
    column: Optional[str] = None
    hops: tuple[FkHop, ...] = ()
    end_column: Optional[str] = None
    sourcekey: Optional[str] = None
    aggregate: Optional[str] = None


@dataclass(frozen=True)
class ResolvedHop:
    direction: str
    fkey_name: tuple[str, str]
    table_schema: str  # table this hop lands on
    table_name: str
    left_columns: tuple[str, ...]  # join columns on the previous table
    right_columns: tuple[str, ...]  # join columns on the landed table


@dataclass(frozen=True)
class ResolvedSource:
    base_schema: str
    base_table: str
    hops: tuple[ResolvedHop, ...]
    end_column: str
    end_type: str
    entity_mode: bool
    multivalued: bool
    aggregate: Optional[str] = None

    @property
    def final_table(self) -> tuple[str, str]:
        if self.hops:
            last = self.hops[-1]
            return (last.table_schema, last.table_name)
        return (self.base_schema, self.base_table)

    def key(self) -> str:
        """Canonical identity of the path + end column (aggregate excluded)."""
        parts = [f"{h.direction[:3]}:{h.fkey_name[0]}:{h.fkey_name[1]}" for h in self.hops]
        parts.append(self.end_column)
        return "/".join(parts)


def parse_source_spec(entry: Any) -> SourceSpec:
    """Parse one visible-columns / source-definitions entry into a SourceSpec."""
    if isinstance(entry, str):
        return SourceSpec(column=entry)
    if not isinstance(entry, dict):
        raise ResolutionError(f"source entry must be a column name or object, got {type(entry).__name__}")
    if "sourcekey" in entry:
        if "source" in entry:
            raise ResolutionError("entry has both 'source' and 'sourcekey'")
        if "aggregate" in entry:
            raise ResolutionError("aggregate belongs on the source definition, not the reference")
        key = entry["sourcekey"]
        if not isinstance(key, str):
            raise ResolutionError("'sourcekey' must be a name")
        return SourceSpec(sourcekey=key)
    source = entry.get("source")
    aggregate = entry.get("aggregate")
    if aggregate is not None and aggregate not in AGGREGATES:
        raise ResolutionError(f"unknown aggregate {aggregate!r}")
    if isinstance(source, str):
        if aggregate is not None:
            raise ResolutionError("aggregate requires a foreign key path")
        return SourceSpec(column=source)
    if isinstance(source, list) and source:
        *hop_docs, end = source
        if not isinstance(end, str):
            raise ResolutionError("source path must end with a column name")
        if not hop_docs:
            if aggregate is not None:
                raise ResolutionError("aggregate requires a foreign key path")
            return SourceSpec(column=end)
        hops = tuple(_parse_hop(h) for h in hop_docs)
        return SourceSpec(hops=hops, end_column=end, aggregate=aggregate)
    raise ResolutionError("entry lacks a usable 'source'")


def _parse_hop(doc: Any) -> FkHop:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ResolutionError("path step must be an object with one of 'inbound'/'outbound'")
    direction, name = next(iter(doc.items()))
    if direction not in ("inbound", "outbound"):
        raise ResolutionError(f"unknown path direction {direction!r}")
    if not (isinstance(name, list) and len(name) == 2):
        raise ResolutionError("foreign key name must be a [schema, constraint] pair")
    return FkHop(direction=direction, fkey_name=(name[0], name[1]))


def resolve_source(
    model: RoleBasedModel,
    base: Table,
    spec: SourceSpec,
    defs: Optional[dict[str, "SourceDef"]] = None,
) -> ResolvedSource:
    """Walk a source path hop by hop against the role-based model."""
    if spec.sourcekey is not None:
        if not defs or spec.sourcekey not in defs:
            raise ResolutionError(f"sourcekey {spec.sourcekey!r} is not defined")
        return defs[spec.sourcekey].resolved

    if spec.column is not None:
        col = base.column(spec.column)
        if col is None:
            raise ResolutionError(f"unknown column {spec.column!r} in {base.schema}:{base.name}")
        return ResolvedSource(
            base_schema=base.schema,
            base_table=base.name,
            hops=(),
            end_column=col.name,
            end_type=col.type,
            entity_mode=_is_key_column(base, col.name),
            multivalued=False,
            aggregate=None,
        )

    current = base
    hops: list[ResolvedHop] = []
    for hop in spec.hops:
        found = model.find_fkey(hop.fkey_name)
        if found is None:
            raise ResolutionError(f"unknown foreign key {list(hop.fkey_name)}")
        owner, fk = found
        if hop.direction == "outbound":
            if (owner.schema, owner.name) != (current.schema, current.name):
                raise ResolutionError(
                    f"foreign key {list(hop.fkey_name)} is not outbound from {current.schema}:{current.name}"
                )
            nxt = model.get_table(fk.to_schema, fk.to_table)
            left, right = fk.from_columns, fk.to_columns
        else:
            if (fk.to_schema, fk.to_table) != (current.schema, current.name):
                raise ResolutionError(
                    f"foreign key {list(hop.fkey_name)} is not inbound into {current.schema}:{current.name}"
                )
            nxt = model.get_table(owner.schema, owner.name)
            left, right = fk.to_columns, fk.from_columns
        if nxt is None:  # pragma: no cover - pruning removes such fkeys
            raise ResolutionError(f"foreign key {list(hop.fkey_name)} reaches a hidden table")
        hops.append(
            ResolvedHop(
                direction=hop.direction,
                fkey_name=hop.fkey_name,
                table_schema=nxt.schema,
                table_name=nxt.name,
                left_columns=left,
                right_columns=right,
            )
        )
        current = nxt

    end_col = current.column(spec.end_column or "")
    if end_col is None:
        raise ResolutionError(
            f"unknown end column {spec.end_column!r} in {current.schema}:{current.name}"
        )
    entity_mode = _is_key_column(current, end_col.name)
    aggregate = spec.aggregate
    if entity_mode and aggregate not in (None, "array_d", "cnt", "cnt_d"):
        raise ResolutionError(f"aggregate {aggregate!r} is not valid for an entity-mode source")
    if aggregate == "sum" and end_col.type not in NUMERIC_TYPES:
        raise ResolutionError(f"aggregate 'sum' requires a numeric column, got {end_col.type}")
    return ResolvedSource(
        base_schema=base.schema,
        base_table=base.name,
        hops=tuple(hops),
        end_column=end_col.name,
        end_type=end_col.type,
        entity_mode=entity_mode,
        multivalued=any(h.direction == "inbound" for h in hops),
        aggregate=aggregate,
    )


def _is_key_column(table: Table, column: str) -> bool:
    return any(column in key.columns for key in table.keys)


# ---------------------------------------------------------------------------
# Validated annotation structures


@dataclass(frozen=True)
class SourceDef:
    name: str
    entry: "PseudoColumnEntry"

    @property
    def resolved(self) -> ResolvedSource:
        return self.entry.resolved


@dataclass(frozen=True)
class PseudoColumnEntry:
    spec: SourceSpec
    resolved: ResolvedSource
    markdown_name: Optional[str] = None
    display_pattern: Optional[str] = None
    comment: Optional[str] = None
    facet_kind: Optional[str] = None
    preselected: tuple = ()

    def merged_with(self, other: "PseudoColumnEntry") -> "PseudoColumnEntry":
        """Inline attributes override the referenced definition's."""
        return PseudoColumnEntry(
            spec=other.spec,
            resolved=other.resolved,
            markdown_name=self.markdown_name or other.markdown_name,
            display_pattern=self.display_pattern or other.display_pattern,
            comment=self.comment or other.comment,
            facet_kind=self.facet_kind or other.facet_kind,
            preselected=self.preselected or other.preselected,
        )


@dataclass(frozen=True)
class TableDisplay:
    row_markdown_pattern: Optional[str] = None
    row_order: Optional[tuple[tuple[str, bool], ...]] = None  # (column, descending)


@dataclass(frozen=True)
class FkeyDisplay:
    to_name: Optional[str] = None
    from_name: Optional[str] = None
    selection_filter: tuple = ()  # validated raw filter entries


@dataclass
class TableAnnotations:
    sources: dict[str, SourceDef] = field(default_factory=dict)
    visible_columns: dict[str, list[PseudoColumnEntry]] = field(default_factory=dict)
    visible_fkeys: dict[str, list[PseudoColumnEntry]] = field(default_factory=dict)
    table_display: dict[str, TableDisplay] = field(default_factory=dict)
    column_display: dict[str, dict[str, str]] = field(default_factory=dict)
    display_names: dict[Optional[str], str] = field(default_factory=dict)  # None = the table
    comments: dict[Optional[str], str] = field(default_factory=dict)
    assets: dict[str, dict] = field(default_factory=dict)
    required: set[str] = field(default_factory=set)
    generated: set[str] = field(default_factory=set)
    immutable: set[str] = field(default_factory=set)
    generated_table: bool = False
    immutable_table: bool = False


@dataclass
class ValidatedAnnotations:
    catalog_version: int
    tables: dict[tuple[str, str], TableAnnotations] = field(default_factory=dict)
    fkeys: dict[tuple[str, str], FkeyDisplay] = field(default_factory=dict)

    def for_table(self, table: Table) -> TableAnnotations:
        return self.tables.setdefault((table.schema, table.name), TableAnnotations())


# ---------------------------------------------------------------------------
# Validation


class _Validator:
    def __init__(self, model: RoleBasedModel):
        self.model = model
        self.diagnostics: list[Diagnostic] = []
        self.result = ValidatedAnnotations(catalog_version=model.catalog.version)

    def error(self, message: str, *, table="", tag="", context="", index=None):
        self.diagnostics.append(
            Diagnostic("error", table=table, tag=tag, context=context, index=index, message=message)
        )

    def warning(self, message: str, *, table="", tag="", context="", index=None):
        self.diagnostics.append(
            Diagnostic("warning", table=table, tag=tag, context=context, index=index, message=message)
        )

    # -- table-level tags ---------------------------------------------------

    def validate_table(self, table: Table) -> None:
        tname = f"{table.schema}:{table.name}"
        anns = self.result.for_table(table)
        payloads = table.annotations

        defs_payload = payloads.get(TAG_SOURCE_DEFINITIONS)
        if defs_payload is not None:
            self._source_definitions(table, tname, anns, defs_payload)
        vc = payloads.get(TAG_VISIBLE_COLUMNS)
        if vc is not None:
            anns.visible_columns = self._context_lists(
                table, tname, anns, vc, TAG_VISIBLE_COLUMNS
            )
        vfk = payloads.get(TAG_VISIBLE_FOREIGN_KEYS)
        if vfk is not None:
            anns.visible_fkeys = self._context_lists(
                table, tname, anns, vfk, TAG_VISIBLE_FOREIGN_KEYS, relationships=True
            )
        td = payloads.get(TAG_TABLE_DISPLAY)
        if td is not None:
            self._table_display(table, tname, anns, td)
        self._generic_tags(table, tname, anns, payloads, column=None)

        for col in table.columns:
            self._column_tags(table, tname, anns, col)
        for fk in table.foreign_keys:
            self._fkey_tags(table, tname, fk)

        for tag in payloads:
            if tag not in TABLE_TAGS:
                self.warning(f"unrecognized annotation tag {tag!r} retained", table=tname, tag=tag)

    def _source_definitions(self, table: Table, tname: str, anns: TableAnnotations, payload) -> None:
        tag = TAG_SOURCE_DEFINITIONS
        if not isinstance(payload, dict) or not isinstance(payload.get("sources"), dict):
            self.error("payload must be an object with a 'sources' map", table=tname, tag=tag)
            return
        for name, entry in payload["sources"].items():
            if isinstance(entry, dict) and "sourcekey" in entry:
                self.error(
                    f"definition {name!r} may not itself use 'sourcekey'", table=tname, tag=tag
                )
                continue
            parsed = self._entry(table, tname, tag, "", None, entry, defs=None)
            if parsed is not None:
                anns.sources[name] = SourceDef(name=name, entry=parsed)

    def _context_lists(
        self, table, tname, anns, payload, tag, relationships=False
    ) -> dict[str, list[PseudoColumnEntry]]:
        out: dict[str, list[PseudoColumnEntry]] = {}
        if not isinstance(payload, dict):
            self.error("payload must be a context map", table=tname, tag=tag)
            return out
        for context, entries in payload.items():
            if not is_context_name(context):
                self.error(f"invalid context key {context!r}", table=tname, tag=tag)
                continue
            if not isinstance(entries, list):
                self.error("context value must be a list", table=tname, tag=tag, context=context)
                continue
            kept: list[PseudoColumnEntry] = []
            for idx, raw in enumerate(entries):
                entry = self._entry(
                    table, tname, tag, context, idx, raw, defs=anns.sources, relationship=relationships
                )
                if entry is not None:
                    kept.append(entry)
            out[context] = kept
        return out

    def _entry(
        self, table, tname, tag, context, idx, raw, defs, relationship=False
    ) -> Optional[PseudoColumnEntry]:
        # visible-foreign-keys also accepts a bare [schema, constraint] pair
        if relationship and isinstance(raw, list) and len(raw) == 2:
            raw = {"source": [{"inbound": raw}, "RID"]}
        try:
            spec = parse_source_spec(raw)
            resolved = resolve_source(self.model, table, spec, defs)
        except ResolutionError as exc:
            self.error(str(exc), table=tname, tag=tag, context=context, index=idx)
            return None
        entry = PseudoColumnEntry(spec=spec, resolved=resolved)
        if isinstance(raw, dict):
            entry = self._entry_extras(entry, tname, tag, context, idx, raw)
            if entry is None:
                return None
        if spec.sourcekey is not None:
            entry = entry.merged_with(defs[spec.sourcekey].entry)
            resolved = entry.resolved
        if relationship and not (resolved.entity_mode and resolved.multivalued):
            self.error(
                "relationship source must be entity mode with at least one inbound hop",
                table=tname, tag=tag, context=context, index=idx,
            )
            return None
        if context in ENTRY_CONTEXTS and not relationship:
            ok = not resolved.multivalued and resolved.aggregate is None and len(resolved.hops) <= 1
            if resolved.hops and not (resolved.entity_mode and resolved.hops[0].direction == "outbound"):
                ok = False
            if not resolved.hops and resolved.end_column in SYSTEM_COLUMN_NAMES:
                ok = False
            if not ok:
                self.error(
                    "entry context allows only writable columns and direct outbound references",
                    table=tname, tag=tag, context=context, index=idx,
                )
                return None
        return entry

    def _entry_extras(self, entry, tname, tag, context, idx, raw) -> Optional[PseudoColumnEntry]:
        markdown_name = raw.get("markdown_name")
        comment = raw.get("comment")
        display = raw.get("display")
        pattern = None
        if display is not None:
            pattern = display.get("markdown_pattern") if isinstance(display, dict) else None
            if not isinstance(pattern, str):
                self.error("display must carry a markdown_pattern", table=tname, tag=tag, context=context, index=idx)
                return None
            try:
                parse_template(pattern)
            except ParseError as exc:
                self.error(f"bad markdown_pattern: {exc}", table=tname, tag=tag, context=context, index=idx)
                return None
        facet_kind = raw.get("kind")
        if facet_kind is not None and facet_kind not in ("choice", "range", "text_search"):
            self.error(f"unknown facet kind {facet_kind!r}", table=tname, tag=tag, context=context, index=idx)
            return None
        preselected = raw.get("preselected", ())
        if preselected and not isinstance(preselected, list):
            self.error("preselected must be a list", table=tname, tag=tag, context=context, index=idx)
            return None
        return PseudoColumnEntry(
            spec=entry.spec,
            resolved=entry.resolved,
            markdown_name=markdown_name if isinstance(markdown_name, str) else None,
            display_pattern=pattern,
            comment=comment if isinstance(comment, str) else None,
            facet_kind=facet_kind,
            preselected=tuple(preselected) if isinstance(preselected, list) else (),
        )

    def _table_display(self, table, tname, anns, payload) -> None:
        tag = TAG_TABLE_DISPLAY
        if not isinstance(payload, dict):
            self.error("payload must be a context map", table=tname, tag=tag)
            return
        for context, body in payload.items():
            if not is_context_name(context):
                self.error(f"invalid context key {context!r}", table=tname, tag=tag)
                continue
            if not isinstance(body, dict):
                self.error("context value must be an object", table=tname, tag=tag, context=context)
                continue
            pattern = body.get("row_markdown_pattern")
            if pattern is not None:
                if not isinstance(pattern, str):
                    self.error("row_markdown_pattern must be text", table=tname, tag=tag, context=context)
                    pattern = None
                else:
                    try:
                        parse_template(pattern)
                    except ParseError as exc:
                        self.error(f"bad row_markdown_pattern: {exc}", table=tname, tag=tag, context=context)
                        pattern = None
            row_order = None
            if "row_order" in body:
                row_order = self._row_order(table, tname, context, body["row_order"])
            anns.table_display[context] = TableDisplay(
                row_markdown_pattern=pattern, row_order=row_order
            )

    def _row_order(self, table, tname, context, payload) -> Optional[tuple]:
        tag = TAG_TABLE_DISPLAY
        if not isinstance(payload, list):
            self.error("row_order must be a list", table=tname, tag=tag, context=context)
            return None
        order: list[tuple[str, bool]] = []
        for idx, item in enumerate(payload):
            if isinstance(item, str):
                column, descending = item, False
            elif isinstance(item, dict) and isinstance(item.get("column"), str):
                column, descending = item["column"], bool(item.get("descending", False))
            else:
                self.error("row_order item needs a 'column'", table=tname, tag=tag, context=context, index=idx)
                continue
            if table.column(column) is None:
                self.error(f"row_order references unknown column {column!r}", table=tname, tag=tag, context=context, index=idx)
                continue
            order.append((column, descending))
        return tuple(order) if order else None

    # -- column-level tags --------------------------------------------------

    def _column_tags(self, table, tname, anns, col) -> None:
        for tag, payload in col.annotations.items():
            if tag == TAG_COLUMN_DISPLAY:
                self._column_display(table, tname, anns, col, payload)
            elif tag == TAG_ASSET:
                self._asset(table, tname, anns, col, payload)
            elif tag == TAG_REQUIRED:
                if col.is_system:
                    self.warning(f"required on system column {col.name} ignored", table=tname, tag=tag)
                else:
                    anns.required.add(col.name)
            elif tag == TAG_GENERATED:
                anns.generated.add(col.name)
            elif tag == TAG_IMMUTABLE:
                anns.immutable.add(col.name)
            elif tag == TAG_DISPLAY:
                self._display(tname, anns, payload, column=col.name)
            else:
                self.warning(
                    f"unrecognized annotation tag {tag!r} on column {col.name} retained",
                    table=tname, tag=tag,
                )

    def _column_display(self, table, tname, anns, col, payload) -> None:
        tag = TAG_COLUMN_DISPLAY
        if not isinstance(payload, dict):
            self.error(f"column-display of {col.name} must be a context map", table=tname, tag=tag)
            return
        out: dict[str, str] = {}
        for context, body in payload.items():
            if not is_context_name(context):
                self.error(f"invalid context key {context!r} on column {col.name}", table=tname, tag=tag)
                continue
            pattern = body.get("markdown_pattern") if isinstance(body, dict) else None
            if not isinstance(pattern, str):
                self.error(f"column-display of {col.name} needs markdown_pattern", table=tname, tag=tag, context=context)
                continue
            try:
                parse_template(pattern)
            except ParseError as exc:
                self.error(f"bad markdown_pattern on {col.name}: {exc}", table=tname, tag=tag, context=context)
                continue
            out[context] = pattern
        if out:
            anns.column_display[col.name] = out

    def _asset(self, table, tname, anns, col, payload) -> None:
        tag = TAG_ASSET
        if not isinstance(payload, dict):
            self.error(f"asset of {col.name} must be an object", table=tname, tag=tag)
            return
        mapping = {"url": col.name}
        for key in ("filename_column", "byte_count_column", "checksum_column"):
            ref = payload.get(key)
            if ref is None:
                continue
            if not isinstance(ref, str) or table.column(ref) is None:
                self.error(f"asset {key} references unknown column {ref!r}", table=tname, tag=tag)
                continue
            mapping[key] = ref
        anns.assets[col.name] = mapping

    def _display(self, tname, anns, payload, column: Optional[str]) -> None:
        tag = TAG_DISPLAY
        where = f" on column {column}" if column else ""
        if not isinstance(payload, dict):
            self.error(f"display{where} must be an object", table=tname, tag=tag)
            return
        name = payload.get("name")
        if name is not None:
            if isinstance(name, str):
                anns.display_names[column] = name
            else:
                self.error(f"display name{where} must be text", table=tname, tag=tag)
        comment = payload.get("comment")
        if comment is not None:
            if isinstance(comment, str):
                anns.comments[column] = comment
            else:
                self.error(f"display comment{where} must be text", table=tname, tag=tag)

    def _generic_tags(self, table, tname, anns, payloads, column) -> None:
        if TAG_DISPLAY in payloads:
            self._display(tname, anns, payloads[TAG_DISPLAY], column=None)
        if TAG_GENERATED in payloads:
            anns.generated_table = True
        if TAG_IMMUTABLE in payloads:
            anns.immutable_table = True

    # -- fkey-level tags ----------------------------------------------------

    def _fkey_tags(self, table, tname, fk) -> None:
        for tag, payload in fk.annotations.items():
            if tag != TAG_FOREIGN_KEY:
                self.warning(
                    f"unrecognized annotation tag {tag!r} on fkey {fk.name[1]} retained",
                    table=tname, tag=tag,
                )
                continue
            if not isinstance(payload, dict):
                self.error(f"foreign-key annotation of {fk.name[1]} must be an object", table=tname, tag=tag)
                continue
            to_name = payload.get("to_name")
            from_name = payload.get("from_name")
            selection = []
            raw_filters = payload.get("selection_filter", [])
            if raw_filters and not isinstance(raw_filters, list):
                self.error(f"selection_filter of {fk.name[1]} must be a list", table=tname, tag=tag)
                raw_filters = []
            target = self.model.get_table(fk.to_schema, fk.to_table)
            for idx, raw in enumerate(raw_filters):
                if target is None:
                    break
                if not isinstance(raw, dict) or "source" not in raw:
                    self.error(f"selection_filter entry needs a 'source'", table=tname, tag=tag, index=idx)
                    continue
                try:
                    spec = parse_source_spec({"source": raw["source"]})
                    resolve_source(self.model, target, spec, None)
                except ResolutionError as exc:
                    self.error(f"selection_filter: {exc}", table=tname, tag=tag, index=idx)
                    continue
                selection.append(raw)
            self.result.fkeys[fk.name] = FkeyDisplay(
                to_name=to_name if isinstance(to_name, str) else None,
                from_name=from_name if isinstance(from_name, str) else None,
                selection_filter=tuple(selection),
            )


def validate_annotations(model: RoleBasedModel) -> tuple[ValidatedAnnotations, list[Diagnostic]]:
    """Validate every recognized annotation against the role-based model,
    pruning invalid fragments at the narrowest scope."""
    validator = _Validator(model)
    for table in model.catalog.tables():
        validator.validate_table(table)
    return validator.result, validator.diagnostics
