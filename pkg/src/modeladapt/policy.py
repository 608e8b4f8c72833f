"""Access rights, model pruning, and row-visibility predicates.

Rights are computed per element from ACLs with inheritance
(column -> table -> catalog default), then closed so that any of
insert/update/delete implies select, and select implies visibility.
The catalog-wide default is owner-only: a right whose ACL is absent
everywhere is granted to the catalog owner roles alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import Catalog, Column, ForeignKey, Table

TABLE_RIGHTS = ("enumerate", "select", "insert", "update", "delete")
COLUMN_RIGHTS = ("enumerate", "select", "insert", "update")


@dataclass(frozen=True)
class ClientContext:
    id: str = "anonymous"
    roles: frozenset[str] = frozenset({"*"})

    def __post_init__(self):
        object.__setattr__(self, "roles", frozenset(self.roles) | {"*"})

    @classmethod
    def anonymous(cls) -> "ClientContext":
        return cls()


ANONYMOUS = ClientContext.anonymous()


@dataclass(frozen=True)
class AccessRights:
    visible: bool = False
    select: bool = False
    insert: bool = False
    update: bool = False
    delete: bool = False

    def as_dict(self) -> dict:
        return {
            "select": self.select,
            "insert": self.insert,
            "update": self.update,
            "delete": self.delete,
        }


@dataclass(frozen=True)
class RowPredicate:
    """Disjunction of (column in values) terms; an empty disjunction
    matches no rows."""

    terms: tuple[tuple[str, frozenset], ...]

    def matches(self, row: dict) -> bool:
        return any(row.get(col) in values for col, values in self.terms)


@dataclass(frozen=True)
class RoleBasedModel:
    """Catalog pruned to the client's visible elements, with computed
    rights attached to every surviving table and column."""

    catalog: Catalog
    client: ClientContext
    table_rights: dict[tuple[str, str], AccessRights] = field(default_factory=dict)
    column_rights: dict[tuple[str, str, str], AccessRights] = field(default_factory=dict)

    def get_table(self, schema: str, name: str) -> Table | None:
        return self.catalog.get_table(schema, name)

    def find_fkey(self, name: tuple[str, str]) -> tuple[Table, ForeignKey] | None:
        return self.catalog.find_fkey(name)

    def rights_of(self, table: Table, column: str | None = None) -> AccessRights:
        if column is None:
            return self.table_rights[(table.schema, table.name)]
        return self.column_rights[(table.schema, table.name, column)]


def _granted(roles_with_right, client: ClientContext) -> bool:
    return any(role in client.roles for role in roles_with_right)


def _resolve_right(right: str, *acl_chain: dict, owners: tuple[str, ...], client: ClientContext) -> bool:
    """Walk the ACL chain (most specific first); absent everywhere means
    owner-only."""
    for acls in acl_chain:
        if right in acls:
            return _granted(acls[right], client)
    return _granted(owners, client)


def _table_access(catalog: Catalog, table: Table, client: ClientContext) -> AccessRights:
    raw = {
        right: _resolve_right(right, table.acls, catalog.acls, owners=catalog.owners, client=client)
        for right in TABLE_RIGHTS
    }
    select = raw["select"] or raw["insert"] or raw["update"] or raw["delete"]
    return AccessRights(
        visible=raw["enumerate"] or select,
        select=select,
        insert=raw["insert"],
        update=raw["update"],
        delete=raw["delete"],
    )


def _column_access(
    catalog: Catalog, table: Table, column: Column, table_rights: AccessRights, client: ClientContext
) -> AccessRights:
    raw = {
        right: _resolve_right(
            right, column.acls, table.acls, catalog.acls, owners=catalog.owners, client=client
        )
        for right in COLUMN_RIGHTS
    }
    select = raw["select"] or raw["insert"] or raw["update"]
    return AccessRights(
        visible=(raw["enumerate"] or select) and table_rights.visible,
        select=select and table_rights.select,
        insert=raw["insert"] and table_rights.insert,
        update=raw["update"] and table_rights.update,
        delete=False,
    )


def prune_model(catalog: Catalog, client: ClientContext) -> RoleBasedModel:
    """Produce the role-based model: hidden tables and columns removed,
    foreign keys with any hidden endpoint removed, rights attached."""
    table_rights: dict[tuple[str, str], AccessRights] = {}
    column_rights: dict[tuple[str, str, str], AccessRights] = {}
    kept_columns: dict[tuple[str, str], set[str]] = {}
    pruned_schemas: dict[str, list[Table]] = {}

    for schema_name, tables in catalog.schemas.items():
        kept_tables = []
        for table in tables:
            t_rights = _table_access(catalog, table, client)
            if not t_rights.visible:
                continue
            visible_cols = []
            for col in table.columns:
                c_rights = _column_access(catalog, table, col, t_rights, client)
                if not c_rights.visible:
                    continue
                visible_cols.append(col)
                column_rights[(schema_name, table.name, col.name)] = c_rights
            keys = tuple(
                k for k in table.keys if all(any(c.name == kc for c in visible_cols) for kc in k.columns)
            )
            kept = replace(table, columns=tuple(visible_cols), keys=keys)
            kept_tables.append(kept)
            kept_columns[(schema_name, table.name)] = {c.name for c in visible_cols}
            table_rights[(schema_name, table.name)] = t_rights
        if kept_tables:
            pruned_schemas[schema_name] = kept_tables

    # Second pass: drop fkeys whose endpoints are not both fully visible.
    final_schemas: dict[str, tuple[Table, ...]] = {}
    for schema_name, tables in pruned_schemas.items():
        out = []
        for table in tables:
            fkeys = tuple(
                fk
                for fk in table.foreign_keys
                if (fk.to_schema, fk.to_table) in kept_columns
                and set(fk.from_columns) <= kept_columns[(schema_name, table.name)]
                and set(fk.to_columns) <= kept_columns[(fk.to_schema, fk.to_table)]
            )
            out.append(replace(table, foreign_keys=fkeys))
        final_schemas[schema_name] = tuple(out)

    pruned = Catalog(
        schemas=final_schemas,
        version=catalog.version,
        owners=catalog.owners,
        acls=catalog.acls,
    )
    return RoleBasedModel(
        catalog=pruned, client=client, table_rights=table_rights, column_rights=column_rights
    )


def row_predicate(table: Table, client: ClientContext) -> RowPredicate | None:
    """Row-visibility predicate for one table instance.

    None means all rows are visible.  With a row policy present, the
    matching rules' predicates are OR-ed together; a matching rule with
    no predicate opens the whole table.  No matching rule fails closed
    (empty disjunction).
    """
    if table.row_policy is None:
        return None
    terms: list[tuple[str, frozenset]] = []
    for rule in table.row_policy.get("rules", []):
        if not any(role in client.roles for role in rule.get("roles", [])):
            continue
        pred = rule.get("predicate")
        if pred is None:
            return None
        terms.append((pred["column"], frozenset(pred["in"])))
    return RowPredicate(terms=tuple(terms))
