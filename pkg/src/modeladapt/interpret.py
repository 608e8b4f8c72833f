"""Entity-relationship interpretation: turn a table plus a presentation
context into an ordered plan of properties, relationships, and facets.

Annotations drive the plan where present; heuristics fill every gap so an
unannotated catalog still yields a complete, usable interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .annotations import (
    PseudoColumnEntry,
    ResolvedHop,
    ResolvedSource,
    TableAnnotations,
    ValidatedAnnotations,
    resolve_context,
)
from .errors import PlanError
from .model import Column, ForeignKey, Table
from .policy import RoleBasedModel

RANGE_TYPES = ("int", "float", "date", "timestamp")

ENTRY_FAMILY = ("entry", "entry/create", "entry/edit")


@dataclass(frozen=True)
class PropertySpec:
    kind: str  # scalar | entity_ref | pseudo | asset
    source: ResolvedSource
    display_name: str
    tooltip: Optional[str] = None
    input_disabled: bool = False
    required: bool = False
    display: Optional[str] = None  # markdown_pattern
    asset_map: Optional[dict[str, str]] = None
    fkey: Optional[tuple[str, str]] = None  # backing constraint for entity_ref


@dataclass(frozen=True)
class RelationshipSpec:
    name: str
    via: ResolvedSource
    association: Optional[tuple[str, str]] = None  # middle table of a many-to-many


@dataclass(frozen=True)
class FacetSpec:
    source: ResolvedSource
    display_name: str
    kind: str  # choice | range | text_search
    preselected: tuple = ()


@dataclass(frozen=True)
class TablePlan:
    table: tuple[str, str]
    context: str
    properties: tuple[PropertySpec, ...]
    relationships: tuple[RelationshipSpec, ...]
    facets: tuple[FacetSpec, ...]
    row_name: str
    sort: tuple[tuple[str, bool], ...]  # (column, descending)


def display_name(name: str, override: Optional[str] = None) -> str:
    """Explicit overrides are verbatim; otherwise underscores read as spaces."""
    if override is not None:
        return override
    return name.replace("_", " ")


def _table_display_name(anns: TableAnnotations, table: Table) -> str:
    return display_name(table.name, anns.display_names.get(None))


def _column_display_name(anns: TableAnnotations, col: Column) -> str:
    return display_name(col.name, anns.display_names.get(col.name))


def row_name_template(table: Table, anns: TableAnnotations) -> str:
    td = resolve_context(anns.table_display, "row_name")
    if td is not None and td.row_markdown_pattern:
        return td.row_markdown_pattern
    lowered = {c.name.lower(): c.name for c in table.columns}
    for candidate in ("title", "name", "accession_number"):
        if candidate in lowered:
            return "{{{%s}}}" % lowered[candidate]
    key = table.shortest_key()
    return ":".join("{{{%s}}}" % c for c in key.columns)


def is_binary_association(model: RoleBasedModel, table: Table) -> Optional[tuple[ForeignKey, ForeignKey]]:
    """A table whose only user columns make up exactly two outbound
    foreign keys models a many-to-many link between its two targets."""
    if len(table.foreign_keys) != 2:
        return None
    fk1, fk2 = table.foreign_keys
    members = set(fk1.from_columns) | set(fk2.from_columns)
    if set(fk1.from_columns) & set(fk2.from_columns):
        return None
    user = {c.name for c in table.user_columns()}
    if members != user or not user:
        return None
    return fk1, fk2


def _bare_source(table: Table, col: Column) -> ResolvedSource:
    return ResolvedSource(
        base_schema=table.schema,
        base_table=table.name,
        hops=(),
        end_column=col.name,
        end_type=col.type,
        entity_mode=any(col.name in k.columns for k in table.keys),
        multivalued=False,
    )


def _fkey_ref_source(model: RoleBasedModel, table: Table, fk: ForeignKey) -> ResolvedSource:
    target = model.get_table(fk.to_schema, fk.to_table)
    hop = ResolvedHop(
        direction="outbound",
        fkey_name=fk.name,
        table_schema=fk.to_schema,
        table_name=fk.to_table,
        left_columns=fk.from_columns,
        right_columns=fk.to_columns,
    )
    return ResolvedSource(
        base_schema=table.schema,
        base_table=table.name,
        hops=(hop,),
        end_column="RID",
        end_type="text",
        entity_mode=True,
        multivalued=False,
    )


def _inbound_source(table: Table, owner: Table, fk: ForeignKey, extend: Optional[ForeignKey] = None) -> ResolvedSource:
    hops = [
        ResolvedHop(
            direction="inbound",
            fkey_name=fk.name,
            table_schema=owner.schema,
            table_name=owner.name,
            left_columns=fk.to_columns,
            right_columns=fk.from_columns,
        )
    ]
    if extend is not None:
        hops.append(
            ResolvedHop(
                direction="outbound",
                fkey_name=extend.name,
                table_schema=extend.to_schema,
                table_name=extend.to_table,
                left_columns=extend.from_columns,
                right_columns=extend.to_columns,
            )
        )
    last = hops[-1]
    return ResolvedSource(
        base_schema=table.schema,
        base_table=table.name,
        hops=tuple(hops),
        end_column="RID",
        end_type="text",
        entity_mode=True,
        multivalued=True,
    )


class _Planner:
    def __init__(self, model: RoleBasedModel, va: ValidatedAnnotations):
        self.model = model
        self.va = va

    def anns(self, table: Table) -> TableAnnotations:
        return self.va.tables.get((table.schema, table.name)) or TableAnnotations()

    # -- properties ---------------------------------------------------------

    def properties(self, table: Table, context: str) -> tuple[PropertySpec, ...]:
        anns = self.anns(table)
        entries = resolve_context(anns.visible_columns, context)
        if entries is not None:
            return tuple(self._property_from_entry(table, anns, context, e) for e in entries)
        return self._heuristic_properties(table, anns, context)

    def _heuristic_properties(self, table: Table, anns, context: str) -> tuple[PropertySpec, ...]:
        entry_ctx = context in ENTRY_FAMILY
        user_cols = list(table.user_columns())
        index = {c.name: i for i, c in enumerate(user_cols)}
        consumed: set[str] = set()
        ref_at: dict[int, list[ForeignKey]] = {}
        for fk in table.foreign_keys:
            positions = [index[c] for c in fk.from_columns if c in index]
            if not positions:
                continue
            ref_at.setdefault(min(positions), []).append(fk)
            consumed.update(fk.from_columns)

        props: list[PropertySpec] = []
        if not entry_ctx:
            rid = table.column("RID")
            props.append(self._scalar_property(table, anns, context, rid))
        for i, col in enumerate(user_cols):
            for fk in ref_at.get(i, ()):
                props.append(self._entity_ref_property(table, anns, context, fk))
            if col.name not in consumed:
                props.append(self._scalar_property(table, anns, context, col))
        if not entry_ctx:
            for name in ("RCT", "RMT", "RCB", "RMB"):
                props.append(self._scalar_property(table, anns, context, table.column(name)))
        return tuple(props)

    def _scalar_property(self, table: Table, anns, context: str, col: Column) -> PropertySpec:
        source = _bare_source(table, col)
        asset_map = anns.assets.get(col.name)
        kind = "asset" if asset_map else "scalar"
        pattern = None
        per_col = anns.column_display.get(col.name)
        if per_col:
            pattern = resolve_context(per_col, context)
        return PropertySpec(
            kind=kind,
            source=source,
            display_name=_column_display_name(anns, col),
            tooltip=anns.comments.get(col.name) or col.comment,
            input_disabled=self._disabled(table, anns, context, (col.name,)),
            required=(not col.nullable or col.name in anns.required) and not col.is_system,
            display=pattern,
            asset_map=asset_map,
        )

    def _entity_ref_property(self, table: Table, anns, context: str, fk: ForeignKey) -> PropertySpec:
        source = _fkey_ref_source(self.model, table, fk)
        fkd = self.va.fkeys.get(fk.name)
        target = self.model.get_table(fk.to_schema, fk.to_table)
        target_anns = self.anns(target) if target else TableAnnotations()
        name = fkd.to_name if fkd and fkd.to_name else (
            _table_display_name(target_anns, target) if target else display_name(fk.to_table)
        )
        cols = [table.column(c) for c in fk.from_columns]
        return PropertySpec(
            kind="entity_ref",
            source=source,
            display_name=name,
            input_disabled=self._disabled(table, anns, context, fk.from_columns),
            required=any(c is not None and not c.nullable for c in cols),
            fkey=fk.name,
        )

    def _property_from_entry(
        self, table: Table, anns, context: str, entry: PseudoColumnEntry
    ) -> PropertySpec:
        src = entry.resolved
        if not src.hops:
            col = table.column(src.end_column)
            prop = self._scalar_property(table, anns, context, col)
            display = entry.display_pattern or prop.display
            return PropertySpec(
                kind=prop.kind,
                source=src,
                display_name=entry.markdown_name or prop.display_name,
                tooltip=entry.comment or prop.tooltip,
                input_disabled=prop.input_disabled,
                required=prop.required,
                display=display,
                asset_map=prop.asset_map,
            )
        if (
            len(src.hops) == 1
            and src.hops[0].direction == "outbound"
            and src.entity_mode
            and not src.multivalued
            and src.aggregate is None
        ):
            found = self.model.find_fkey(src.hops[0].fkey_name)
            if found is not None:
                prop = self._entity_ref_property(table, anns, context, found[1])
                return PropertySpec(
                    kind="entity_ref",
                    source=src,
                    display_name=entry.markdown_name or prop.display_name,
                    tooltip=entry.comment or prop.tooltip,
                    input_disabled=prop.input_disabled,
                    required=prop.required,
                    display=entry.display_pattern,
                    fkey=prop.fkey,
                )
        return PropertySpec(
            kind="pseudo",
            source=src,
            display_name=entry.markdown_name or self._path_display_name(src),
            tooltip=entry.comment,
            display=entry.display_pattern,
        )

    def _path_display_name(self, src: ResolvedSource) -> str:
        final = self.model.get_table(*src.final_table)
        if src.entity_mode and final is not None:
            return _table_display_name(self.anns(final), final)
        return display_name(src.end_column)

    def _disabled(self, table: Table, anns, context: str, columns) -> bool:
        if context not in ENTRY_FAMILY:
            return False
        if anns.generated_table or any(c in anns.generated for c in columns):
            return True
        if context == "entry/edit":
            if anns.immutable_table or any(c in anns.immutable for c in columns):
                return True
            right = "update"
        else:  # entry and entry/create share create semantics
            right = "insert"
        for c in columns:
            rights = self.model.column_rights.get((table.schema, table.name, c))
            if rights is not None and not getattr(rights, right):
                return True
        return not getattr(self.model.rights_of(table), right)

    # -- relationships ------------------------------------------------------

    def relationships(self, table: Table) -> tuple[RelationshipSpec, ...]:
        anns = self.anns(table)
        entries = resolve_context(anns.visible_fkeys, "detailed")
        if entries is not None:
            return tuple(self._relationship_from_entry(table, e) for e in entries)
        out: list[RelationshipSpec] = []
        for owner, fk in self._inbound_fkeys(table):
            assoc = is_binary_association(self.model, owner)
            if assoc is not None:
                other = assoc[0] if assoc[1].name == fk.name else assoc[1]
                if other.name != fk.name:
                    peer = self.model.get_table(other.to_schema, other.to_table)
                    if peer is not None:
                        out.append(
                            RelationshipSpec(
                                name=self._rel_name(fk, peer),
                                via=_inbound_source(table, owner, fk, extend=other),
                                association=(owner.schema, owner.name),
                            )
                        )
                        continue
            out.append(
                RelationshipSpec(name=self._rel_name(fk, owner), via=_inbound_source(table, owner, fk))
            )
        return tuple(out)

    def _rel_name(self, fk: ForeignKey, shown: Table) -> str:
        fkd = self.va.fkeys.get(fk.name)
        if fkd and fkd.from_name:
            return fkd.from_name
        return _table_display_name(self.anns(shown), shown)

    def _relationship_from_entry(self, table: Table, entry: PseudoColumnEntry) -> RelationshipSpec:
        src = entry.resolved
        association = None
        if len(src.hops) >= 2 and src.hops[0].direction == "inbound" and src.hops[1].direction == "outbound":
            middle = self.model.get_table(src.hops[0].table_schema, src.hops[0].table_name)
            if middle is not None and is_binary_association(self.model, middle) is not None:
                association = (middle.schema, middle.name)
        name = entry.markdown_name
        if name is None:
            final = self.model.get_table(*src.final_table)
            first = self.model.find_fkey(src.hops[0].fkey_name)
            fkd = self.va.fkeys.get(src.hops[0].fkey_name) if len(src.hops) == 1 else None
            if fkd and fkd.from_name:
                name = fkd.from_name
            elif final is not None:
                name = _table_display_name(self.anns(final), final)
            else:
                name = display_name(src.final_table[1])
        return RelationshipSpec(name=name, via=src, association=association)

    def _inbound_fkeys(self, table: Table):
        for other in self.model.catalog.tables():
            for fk in other.foreign_keys:
                if (fk.to_schema, fk.to_table) == (table.schema, table.name):
                    yield other, fk

    # -- facets -------------------------------------------------------------

    def facets(self, table: Table, properties, relationships) -> tuple[FacetSpec, ...]:
        anns = self.anns(table)
        entries = resolve_context(anns.visible_columns, "filter")
        if entries is not None:
            return tuple(self._facet_from_entry(e) for e in entries)
        out: list[FacetSpec] = []
        for prop in properties:
            if prop.kind == "asset":
                continue
            src = prop.source
            if src.aggregate is not None:
                src = ResolvedSource(
                    base_schema=src.base_schema, base_table=src.base_table, hops=src.hops,
                    end_column=src.end_column, end_type=src.end_type,
                    entity_mode=src.entity_mode, multivalued=src.multivalued,
                )
            out.append(FacetSpec(source=src, display_name=prop.display_name, kind=_facet_kind(src)))
        for rel in relationships:
            out.append(FacetSpec(source=rel.via, display_name=rel.name, kind="choice"))
        return tuple(out)

    def _facet_from_entry(self, entry: PseudoColumnEntry) -> FacetSpec:
        src = entry.resolved
        if src.aggregate is not None:
            src = ResolvedSource(
                base_schema=src.base_schema, base_table=src.base_table, hops=src.hops,
                end_column=src.end_column, end_type=src.end_type,
                entity_mode=src.entity_mode, multivalued=src.multivalued,
            )
        kind = entry.facet_kind or _facet_kind(src)
        if kind == "range" and src.end_type not in RANGE_TYPES:
            kind = _facet_kind(src)
        return FacetSpec(
            source=src,
            display_name=entry.markdown_name or self._path_display_name(src),
            kind=kind,
            preselected=entry.preselected,
        )

    # -- whole plan ---------------------------------------------------------

    def plan(self, table: Table, context: str) -> TablePlan:
        anns = self.anns(table)
        props = self.properties(table, context)
        rels = self.relationships(table) if context == "detailed" else ()
        facets: tuple[FacetSpec, ...] = ()
        if context == "filter":
            facets = self.facets(table, props, self.relationships(table))
        td = resolve_context(anns.table_display, context)
        if td is not None and td.row_order:
            sort = td.row_order
        else:
            sort = tuple((c, False) for c in table.shortest_key().columns)
        return TablePlan(
            table=(table.schema, table.name),
            context=context,
            properties=props,
            relationships=rels,
            facets=facets,
            row_name=row_name_template(table, anns),
            sort=sort,
        )


def _facet_kind(src: ResolvedSource) -> str:
    if src.entity_mode:
        return "choice"
    if src.end_type in RANGE_TYPES:
        return "range"
    return "choice"


def plan(
    table_ref: tuple[str, str] | Table,
    context: str,
    model: RoleBasedModel,
    va: ValidatedAnnotations,
) -> TablePlan:
    if isinstance(table_ref, Table):
        table = model.get_table(table_ref.schema, table_ref.name)
    else:
        table = model.get_table(*table_ref)
    if table is None:
        raise PlanError("table is not visible in this model")
    from .annotations import is_context_name

    if not is_context_name(context):
        raise PlanError(f"invalid context {context!r}")
    return _Planner(model, va).plan(table, context)


# ---------------------------------------------------------------------------
# JSON serialization (shapes are part of the HTTP contract)


def source_to_doc(src: ResolvedSource) -> dict:
    return {
        "base_schema": src.base_schema,
        "base_table": src.base_table,
        "hops": [
            {
                "direction": h.direction,
                "fkey": list(h.fkey_name),
                "table": [h.table_schema, h.table_name],
            }
            for h in src.hops
        ],
        "end_column": src.end_column,
        "end_type": src.end_type,
        "entity_mode": src.entity_mode,
        "multivalued": src.multivalued,
        "aggregate": src.aggregate,
        "spec": source_to_spec(src),
    }


def source_to_spec(src: ResolvedSource) -> Any:
    """The re-submittable wire form of a source (used by facet filters)."""
    if not src.hops:
        return src.end_column
    return [{h.direction: list(h.fkey_name)} for h in src.hops] + [src.end_column]


def plan_to_doc(p: TablePlan) -> dict:
    return {
        "table": list(p.table),
        "context": p.context,
        "properties": [
            {
                "kind": x.kind,
                "source": source_to_doc(x.source),
                "display_name": x.display_name,
                "tooltip": x.tooltip,
                "input_disabled": x.input_disabled,
                "required": x.required,
                "display": x.display,
                "asset_map": x.asset_map,
                "fkey": list(x.fkey) if x.fkey else None,
            }
            for x in p.properties
        ],
        "relationships": [
            {
                "name": x.name,
                "via": source_to_doc(x.via),
                "association": list(x.association) if x.association else None,
            }
            for x in p.relationships
        ],
        "facets": [
            {
                "source": source_to_doc(x.source),
                "display_name": x.display_name,
                "kind": x.kind,
                "preselected": list(x.preselected),
            }
            for x in p.facets
        ],
        "row_name": p.row_name,
        "sort": [{"column": c, "descending": d} for c, d in p.sort],
    }
