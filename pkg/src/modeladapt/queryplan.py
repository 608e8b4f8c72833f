"""Compile presentation-level requests into executable query plans.

Every plan carries the row-visibility predicate of every table instance
it touches, so policy is enforced before any joining, counting, or
aggregation can leak a hidden row's existence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Optional

from .annotations import (
    Diagnostic,
    ResolvedSource,
    ValidatedAnnotations,
    parse_source_spec,
    resolve_source,
)
from .errors import ConstraintError, NotFound, PlanError, ResolutionError
from .interpret import PropertySpec, TablePlan, plan as build_plan
from .model import Table
from .policy import RoleBasedModel, row_predicate
from .render import parse_template, render_template
from .storage import (
    Aggregate,
    Atom,
    BASE_ALIAS,
    JoinStep,
    PredicateGroup,
    QueryPlan,
    coerce_value,
)

DEFAULT_PAGE_SIZE = 25
RELATED_PAGE_SIZE = 10
FACET_PAGE_SIZE = 10

TEXT_TYPES = ("text", "markdown", "longtext")


@dataclass(frozen=True)
class FacetFilter:
    source: ResolvedSource
    choices: Optional[tuple] = None
    range: Optional[tuple] = None  # (min, max)
    search: Optional[str] = None


@dataclass(frozen=True)
class RecordPart:
    kind: str  # property | relationship
    index: int  # position in the detailed plan's list
    plan: QueryPlan
    value_key: Optional[str] = None  # projected key for single-valued parts
    related: Optional[tuple[str, str]] = None


@dataclass(frozen=True)
class RecordPlans:
    table_plan: TablePlan
    core: QueryPlan
    parts: tuple[RecordPart, ...]


@dataclass(frozen=True)
class PickerPlan:
    plan: QueryPlan
    target: tuple[str, str]
    diagnostics: tuple[Diagnostic, ...] = ()


# ---------------------------------------------------------------------------
# Filter parsing


def parse_filters(
    model: RoleBasedModel, va: ValidatedAnnotations, table: Table, raw: Any
) -> list[FacetFilter]:
    """Parse the wire-format filter list and resolve each source."""
    if raw is None:
        return []
    if not isinstance(raw, list):
        raise PlanError("filters must be a list")
    defs = va.tables.get((table.schema, table.name))
    sources = defs.sources if defs else None
    out: list[FacetFilter] = []
    for item in raw:
        if not isinstance(item, dict) or "source" not in item and "sourcekey" not in item:
            raise PlanError("each filter needs a 'source'")
        try:
            spec = parse_source_spec(item)
            resolved = resolve_source(model, table, spec, sources)
        except ResolutionError as exc:
            raise PlanError(f"unknown facet source: {exc}") from None
        choices = item.get("choices")
        rng = item.get("range")
        search = item.get("search")
        if choices is not None:
            if not isinstance(choices, list) or not choices:
                raise PlanError("'choices' must be a non-empty list")
            coerced = tuple(_coerce(v, resolved) for v in choices)
            out.append(FacetFilter(source=resolved, choices=coerced))
        elif rng is not None:
            if not isinstance(rng, dict) or ("min" not in rng and "max" not in rng):
                raise PlanError("'range' needs min and/or max")
            low = _coerce(rng.get("min"), resolved)
            high = _coerce(rng.get("max"), resolved)
            out.append(FacetFilter(source=resolved, range=(low, high)))
        elif search is not None:
            if not isinstance(search, str) or not search:
                raise PlanError("'search' must be non-empty text")
            out.append(FacetFilter(source=resolved, search=search))
        else:
            raise PlanError("filter needs one of 'choices', 'range', 'search'")
    return out


def _coerce(value: Any, source: ResolvedSource):
    if value is None:
        return None
    try:
        return coerce_value(value, source.end_type, source.end_column)
    except ConstraintError as exc:
        raise PlanError(str(exc)) from None


# ---------------------------------------------------------------------------
# Shared plan assembly


class _Assembler:
    def __init__(self, model: RoleBasedModel, base: Table):
        self.model = model
        self.base = base
        self.joins: list[JoinStep] = []
        self.predicates: list[PredicateGroup] = []

    def chain(self, source: ResolvedSource, prefix: str, optional: bool = False) -> str:
        prev = BASE_ALIAS
        for j, hop in enumerate(source.hops):
            alias = f"{prefix}h{j}"
            table = self.model.get_table(hop.table_schema, hop.table_name)
            if table is None:
                raise PlanError(f"path reaches invisible table {hop.table_schema}:{hop.table_name}")
            self.joins.append(
                JoinStep(
                    alias=alias,
                    from_alias=prev,
                    left_columns=hop.left_columns,
                    table=(hop.table_schema, hop.table_name),
                    right_columns=hop.right_columns,
                    row_predicate=row_predicate(table, self.model.client),
                    optional=optional,
                )
            )
            prev = alias
        return prev

    def add_filter(self, f: FacetFilter, prefix: str) -> None:
        wants_null = f.choices is not None and None in f.choices
        alias = self.chain(f.source, prefix, optional=wants_null)
        column = f.source.end_column
        if f.choices is not None:
            self.predicates.append(
                PredicateGroup(atoms=(Atom(alias, column, "in", tuple(f.choices)),))
            )
        elif f.range is not None:
            self.predicates.append(
                PredicateGroup(atoms=(Atom(alias, column, "between", f.range),))
            )
        elif f.search is not None:
            self.predicates.append(
                PredicateGroup(atoms=(Atom(alias, column, "ilike", (f.search,)),))
            )

    def add_search(self, text: str) -> None:
        atoms = tuple(
            Atom(BASE_ALIAS, col.name, "ilike", (text,))
            for col in self.base.columns
            if col.type in TEXT_TYPES
        )
        if atoms:
            self.predicates.append(PredicateGroup(atoms=atoms))


def _entity_plan(
    model: RoleBasedModel,
    base: Table,
    filters: Iterable[FacetFilter],
    search_text: Optional[str],
    sort: tuple[tuple[str, bool], ...],
    page: tuple[Optional[int], int],
) -> QueryPlan:
    asm = _Assembler(model, base)
    for i, f in enumerate(filters):
        asm.add_filter(f, f"f{i}")
    if search_text:
        asm.add_search(search_text)
    if not any(c == "RID" for c, _ in sort):
        sort = sort + (("RID", False),)  # total order for stable paging
    return QueryPlan(
        base=(base.schema, base.name),
        base_predicate=row_predicate(base, model.client),
        joins=tuple(asm.joins),
        predicates=tuple(asm.predicates),
        mode="entity",
        projection=tuple(base.column_names()),
        sort=sort,
        page=page,
    )


def _default_sort(model: RoleBasedModel, va: ValidatedAnnotations, table: Table, context: str):
    return build_plan(table, context, model, va).sort


def _visible_table(model: RoleBasedModel, schema: str, name: str) -> Table:
    table = model.get_table(schema, name)
    if table is None:
        raise NotFound(f"no table {schema}:{name}")
    return table


# ---------------------------------------------------------------------------
# Compilers


def compile_entity_set(
    model: RoleBasedModel,
    va: ValidatedAnnotations,
    schema: str,
    name: str,
    filters: Any = None,
    search_text: Optional[str] = None,
    sort: Optional[list[tuple[str, bool]]] = None,
    limit: Optional[int] = DEFAULT_PAGE_SIZE,
    offset: int = 0,
) -> QueryPlan:
    table = _visible_table(model, schema, name)
    parsed = filters if isinstance(filters, list) and all(
        isinstance(f, FacetFilter) for f in filters
    ) else parse_filters(model, va, table, filters)
    allowed = {f.source.key() for f in build_plan(table, "filter", model, va).facets}
    for f in parsed:
        if f.source.key() not in allowed:
            raise PlanError(f"unknown facet source {f.source.key()!r}")
    if sort:
        names = set(table.column_names())
        for col, _ in sort:
            if col not in names:
                raise PlanError(f"cannot sort by unknown column {col!r}")
        order = tuple(sort)
    else:
        order = _default_sort(model, va, table, "compact")
    return _entity_plan(model, table, parsed, search_text, order, (limit, offset))


def compile_record(
    model: RoleBasedModel,
    va: ValidatedAnnotations,
    schema: str,
    name: str,
    rid: str,
) -> RecordPlans:
    table = _visible_table(model, schema, name)
    table_plan = build_plan(table, "detailed", model, va)
    core = QueryPlan(
        base=(schema, name),
        base_predicate=row_predicate(table, model.client),
        predicates=(PredicateGroup(atoms=(Atom(BASE_ALIAS, "RID", "eq", (rid,)),)),),
        mode="entity",
        projection=tuple(table.column_names()),
        page=(1, 0),
    )
    parts: list[RecordPart] = []
    for idx, prop in enumerate(table_plan.properties):
        src = prop.source
        if not src.hops or prop.kind == "entity_ref":
            continue  # served by the core row (entity refs resolve from it)
        asm = _Assembler(model, table)
        final = asm.chain(src, f"p{idx}")
        base_pred = row_predicate(table, model.client)
        rid_group = PredicateGroup(atoms=(Atom(BASE_ALIAS, "RID", "eq", (rid,)),))
        if src.multivalued or src.aggregate is not None:
            parts.append(
                RecordPart(
                    kind="property",
                    index=idx,
                    plan=QueryPlan(
                        base=(schema, name),
                        base_predicate=base_pred,
                        joins=tuple(asm.joins),
                        predicates=(rid_group,),
                        mode="aggregate",
                        aggregate=Aggregate(
                            func=src.aggregate or "array_d", alias=final, column=src.end_column
                        ),
                    ),
                )
            )
        else:
            value_key = f"{final}.{src.end_column}" if final != BASE_ALIAS else src.end_column
            parts.append(
                RecordPart(
                    kind="property",
                    index=idx,
                    plan=QueryPlan(
                        base=(schema, name),
                        base_predicate=base_pred,
                        joins=tuple(asm.joins),
                        predicates=(rid_group,),
                        mode="attributes",
                        projection=((final, src.end_column),),
                        page=(1, 0),
                    ),
                    value_key=value_key,
                )
            )
    for idx, rel in enumerate(table_plan.relationships):
        related = rel.via.final_table
        related_table = model.get_table(*related)
        if related_table is None:
            continue
        parts.append(
            RecordPart(
                kind="relationship",
                index=idx,
                plan=_related_plan(model, va, table, related_table, rel.via, rid),
                related=related,
            )
        )
    return RecordPlans(table_plan=table_plan, core=core, parts=tuple(parts))


def _related_plan(
    model: RoleBasedModel,
    va: ValidatedAnnotations,
    focal: Table,
    related: Table,
    via: ResolvedSource,
    rid: str,
) -> QueryPlan:
    """Entity listing of the related table: walk the via path backwards
    from the related side to the focal row."""
    hops = list(via.hops)
    stations = [(via.base_schema, via.base_table)] + [
        (h.table_schema, h.table_name) for h in hops
    ]
    joins: list[JoinStep] = []
    prev = BASE_ALIAS
    for j in range(len(hops) - 1, -1, -1):
        hop = hops[j]
        target = stations[j]
        target_table = model.get_table(*target)
        if target_table is None:
            raise PlanError(f"path reaches invisible table {target[0]}:{target[1]}")
        joins.append(
            JoinStep(
                alias=f"r{j}",
                from_alias=prev,
                left_columns=hop.right_columns,
                table=target,
                right_columns=hop.left_columns,
                row_predicate=row_predicate(target_table, model.client),
            )
        )
        prev = f"r{j}"
    return QueryPlan(
        base=(related.schema, related.name),
        base_predicate=row_predicate(related, model.client),
        joins=tuple(joins),
        predicates=(PredicateGroup(atoms=(Atom(prev, "RID", "eq", (rid,)),)),),
        mode="entity",
        projection=tuple(related.column_names()),
        sort=_default_sort(model, va, related, "compact/brief"),
        page=(RELATED_PAGE_SIZE, 0),
    )


def compile_facet_values(
    model: RoleBasedModel,
    va: ValidatedAnnotations,
    schema: str,
    name: str,
    facet_source: Any,
    other_filters: Any = None,
    search_text: Optional[str] = None,
    limit: Optional[int] = FACET_PAGE_SIZE,
    offset: int = 0,
) -> QueryPlan:
    table = _visible_table(model, schema, name)
    defs = va.tables.get((schema, name))
    try:
        spec = parse_source_spec(
            facet_source if isinstance(facet_source, dict) else {"source": facet_source}
        )
        target = resolve_source(model, table, spec, defs.sources if defs else None)
    except ResolutionError as exc:
        raise PlanError(f"unknown facet source: {exc}") from None
    facets = {f.source.key() for f in build_plan(table, "filter", model, va).facets}
    if target.key() not in facets:
        raise PlanError(f"facet {target.key()!r} is not part of the filter plan")
    parsed = parse_filters(model, va, table, other_filters)
    asm = _Assembler(model, table)
    skipped_own = False
    for i, f in enumerate(parsed):
        if f.source.key() == target.key() and not skipped_own:
            skipped_own = True  # the target facet never constrains its own values
            continue
        asm.add_filter(f, f"f{i}")
    if search_text:
        asm.add_search(search_text)
    value_alias = asm.chain(target, "v", optional=True)
    return QueryPlan(
        base=(schema, name),
        base_predicate=row_predicate(table, model.client),
        joins=tuple(asm.joins),
        predicates=tuple(asm.predicates),
        mode="value_counts",
        value_target=(value_alias, target.end_column),
        page=(limit, offset),
    )


def compile_picker(
    model: RoleBasedModel,
    va: ValidatedAnnotations,
    fkey_name: tuple[str, str],
    form_values: Optional[dict] = None,
    search_text: Optional[str] = None,
    limit: Optional[int] = DEFAULT_PAGE_SIZE,
    offset: int = 0,
) -> PickerPlan:
    found = model.find_fkey(fkey_name)
    if found is None:
        raise NotFound(f"no foreign key {list(fkey_name)}")
    _, fk = found
    target = _visible_table(model, fk.to_schema, fk.to_table)
    diagnostics: list[Diagnostic] = []
    filters: list[FacetFilter] = []
    fkd = va.fkeys.get(fk.name)
    for idx, raw in enumerate(fkd.selection_filter if fkd else ()):
        try:
            resolved = resolve_source(model, target, parse_source_spec(raw), None)
        except ResolutionError as exc:
            diagnostics.append(
                Diagnostic(
                    "warning",
                    table=f"{target.schema}:{target.name}",
                    tag="selection_filter",
                    index=idx,
                    message=f"filter pruned: {exc}",
                )
            )
            continue
        f = _interpolated_filter(resolved, raw, form_values or {})
        if f is not None:
            filters.append(f)
    plan = _entity_plan(
        model,
        target,
        filters,
        search_text,
        _default_sort(model, va, target, "compact"),
        (limit, offset),
    )
    return PickerPlan(plan=plan, target=(target.schema, target.name), diagnostics=tuple(diagnostics))


def _interpolated_filter(
    source: ResolvedSource, raw: dict, form_values: dict
) -> Optional[FacetFilter]:
    def fill(value):
        if isinstance(value, str) and "{{" in value:
            try:
                rendered = render_template(parse_template(value), form_values)
            except Exception:
                return None
            return rendered or None
        return value

    if "choices" in raw:
        kept = []
        for c in raw["choices"]:
            if c is None:
                kept.append(None)  # an explicit null choice selects the empty bucket
                continue
            v = fill(c)
            if v is not None:
                kept.append(_coerce(v, source))
        if not kept:
            return None
        return FacetFilter(source=source, choices=tuple(kept))
    if "range" in raw and isinstance(raw["range"], dict):
        low = _coerce(fill(raw["range"].get("min")), source)
        high = _coerce(fill(raw["range"].get("max")), source)
        if low is None and high is None:
            return None
        return FacetFilter(source=source, range=(low, high))
    if "search" in raw:
        text = fill(raw["search"])
        if not text:
            return None
        return FacetFilter(source=source, search=text)
    return None


def aggregate_page_plan(
    model: RoleBasedModel,
    table: Table,
    prop: PropertySpec,
    rids: list[str],
) -> QueryPlan:
    """Batch plan computing one pseudo property for a page of entities."""
    src = prop.source
    asm = _Assembler(model, table)
    final = asm.chain(src, "p")
    return QueryPlan(
        base=(table.schema, table.name),
        base_predicate=row_predicate(table, model.client),
        joins=tuple(asm.joins),
        predicates=(PredicateGroup(atoms=(Atom(BASE_ALIAS, "RID", "in", tuple(rids)),)),),
        mode="aggregate",
        aggregate=Aggregate(func=src.aggregate or "array_d", alias=final, column=src.end_column),
    )
