"""Embedded relational store: typed rows, constraint enforcement,
system-column maintenance, and a query executor for compiled plans.

Reads run against an immutable snapshot; writes serialize through a
single lock and publish a new snapshot, so a request never observes a
half-applied mutation.  Durability is an append-only JSONL change log
replayed at startup, compacted into a snapshot file on clean shutdown.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Iterable, Optional

from .annotations import TAG_GENERATED, TAG_IMMUTABLE
from .errors import ConstraintError, NotFound, ParseError, PlanError, RightsError
from .model import Catalog, SYSTEM_COLUMN_NAMES, Table, catalog_to_document
from .policy import ClientContext, RowPredicate, prune_model, row_predicate

BASE_ALIAS = "base"

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"
RID_SEED = 32 ** 4  # RIDs start at "1-0001"


def encode_rid(counter: int) -> str:
    digits = ""
    n = counter
    while n:
        digits = _CROCKFORD[n % 32] + digits
        n //= 32
    digits = digits or "0"
    groups = []
    while len(digits) > 4:
        groups.insert(0, digits[-4:])
        digits = digits[:-4]
    groups.insert(0, digits)
    return "-".join(groups)


# ---------------------------------------------------------------------------
# Values


def coerce_value(value: Any, type_: str, where: str) -> Any:
    """Coerce one user-supplied value to canonical storage form.

    Temporal values canonicalize to ISO text whose lexicographic order is
    chronological, so the executor can compare them as plain strings.
    """
    if value is None:
        return None
    try:
        if type_ in ("text", "markdown", "longtext"):
            if not isinstance(value, str):
                raise ValueError("expected text")
            return value
        if type_ == "int":
            if isinstance(value, bool):
                raise ValueError("expected int")
            if isinstance(value, int):
                return value
            if isinstance(value, str):
                return int(value.replace(",", ""))
            raise ValueError("expected int")
        if type_ == "float":
            if isinstance(value, bool):
                raise ValueError("expected float")
            if isinstance(value, (int, float)):
                return float(value)
            if isinstance(value, str):
                return float(value)
            raise ValueError("expected float")
        if type_ == "boolean":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false"):
                return value.lower() == "true"
            raise ValueError("expected boolean")
        if type_ == "date":
            if isinstance(value, str):
                return date.fromisoformat(value).isoformat()
            raise ValueError("expected YYYY-MM-DD date")
        if type_ == "timestamp":
            if isinstance(value, str):
                return canonical_timestamp(parse_timestamp(value))
            raise ValueError("expected ISO timestamp")
    except (ValueError, TypeError) as exc:
        raise ConstraintError(f"bad {type_} value for {where}: {exc}", kind="type") from None
    raise ConstraintError(f"unknown type {type_!r} for {where}", kind="type")


def parse_timestamp(text: str) -> datetime:
    cleaned = text.replace("Z", "+00:00")
    dt = datetime.fromisoformat(cleaned)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def canonical_timestamp(dt: datetime) -> str:
    # microseconds always emitted so string order stays chronological
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


# ---------------------------------------------------------------------------
# Query plans


@dataclass(frozen=True)
class JoinStep:
    alias: str
    from_alias: str
    left_columns: tuple[str, ...]
    table: tuple[str, str]
    right_columns: tuple[str, ...]
    row_predicate: Optional[RowPredicate] = None
    optional: bool = False


@dataclass(frozen=True)
class Atom:
    alias: str
    column: str
    op: str  # eq | in | between | ilike
    values: tuple = ()


@dataclass(frozen=True)
class PredicateGroup:
    atoms: tuple[Atom, ...]  # disjunction


@dataclass(frozen=True)
class Aggregate:
    func: str  # array_d | cnt_d | cnt | min | max | sum
    alias: str
    column: str
    group_by_base: bool = True


@dataclass(frozen=True)
class QueryPlan:
    base: tuple[str, str]
    base_predicate: Optional[RowPredicate] = None
    joins: tuple[JoinStep, ...] = ()
    predicates: tuple[PredicateGroup, ...] = ()  # conjunction of disjunctions
    mode: str = "entity"  # entity | attributes | aggregate | value_counts
    projection: tuple = ()  # entity: base column names; attributes: (alias, column)
    aggregate: Optional[Aggregate] = None
    value_target: Optional[tuple[str, str]] = None
    sort: tuple[tuple[str, bool], ...] = ()  # (projected name, descending)
    page: tuple[Optional[int], int] = (None, 0)


@dataclass
class ResultSet:
    rows: list[dict]
    total: Optional[int] = None


class _Desc:
    """Ordering adapter that inverts comparisons for descending sort keys."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __lt__(self, other):
        return other.value < self.value

    def __eq__(self, other):
        return other.value == self.value


def _sort_rows(rows: list[dict], sort: Iterable[tuple[str, bool]]) -> list[dict]:
    out = list(rows)
    for column, descending in reversed(list(sort)):
        def key(row, c=column, d=descending):
            v = row.get(c)
            if v is None:
                return (1, 0)  # nulls last regardless of direction
            return (0, _Desc(v) if d else v)

        out.sort(key=key)
    return out


# ---------------------------------------------------------------------------
# Store


@dataclass(frozen=True)
class Snapshot:
    tables: dict[tuple[str, str], dict[str, dict]]
    version: int


class Database:
    """Single-writer store bound to one catalog.

    All mutation methods take the writer lock, validate against the
    current snapshot, and publish a fresh one; readers hold a snapshot
    reference for the duration of a request.
    """

    def __init__(self, catalog: Catalog, data_dir: str | Path | None = None):
        self.catalog = catalog
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self._lock = threading.Lock()
        self._counter = RID_SEED
        self._write_floor: datetime | None = None
        self._snapshot = Snapshot(tables={t_key(t): {} for t in catalog.tables()}, version=0)
        self._log_handle = None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._recover()
            self._log_handle = open(self.data_dir / "log.jsonl", "a", encoding="utf-8")
            catalog_path = self.data_dir / "catalog.json"
            if not catalog_path.exists():
                catalog_path.write_text(
                    json.dumps(catalog_to_document(catalog), indent=2), encoding="utf-8"
                )

    # -- snapshots ----------------------------------------------------------

    @property
    def snapshot(self) -> Snapshot:
        return self._snapshot

    def _publish(self, tables: dict) -> None:
        self._snapshot = Snapshot(tables=tables, version=self._snapshot.version + 1)

    def _mutable_tables(self, *keys: tuple[str, str]) -> dict:
        tables = dict(self._snapshot.tables)
        for key in keys:
            tables[key] = dict(tables[key])
        return tables

    # -- persistence --------------------------------------------------------

    def _recover(self) -> None:
        snap_path = self.data_dir / "snapshot.json"
        tables = {t_key(t): {} for t in self.catalog.tables()}
        if snap_path.exists():
            doc = json.loads(snap_path.read_text(encoding="utf-8"))
            self._counter = doc.get("counter", RID_SEED)
            for name, rows in doc.get("tables", {}).items():
                schema, table = name.split(":", 1)
                if (schema, table) in tables:
                    tables[(schema, table)] = {r["RID"]: r for r in rows}
        log_path = self.data_dir / "log.jsonl"
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._replay(tables, json.loads(line))
        latest = None
        for store in tables.values():
            for row in store.values():
                for col in ("RCT", "RMT"):
                    value = row.get(col)
                    if isinstance(value, str) and (latest is None or value > latest):
                        latest = value
        if latest is not None:
            self._write_floor = parse_timestamp(latest)
        self._snapshot = Snapshot(tables=tables, version=0)

    def _replay(self, tables: dict, entry: dict) -> None:
        op = entry.get("op")
        if op in ("insert", "update"):
            key = tuple(entry["table"])
            if key not in tables:
                return
            store = tables[key]
            for row in entry["rows"]:
                store[row["RID"]] = row
            self._counter = max(self._counter, entry.get("counter", self._counter))
        elif op == "delete":
            key = tuple(entry["table"])
            store = tables.get(key, {})
            for rid in entry["rids"]:
                store.pop(rid, None)

    def _log(self, entry: dict) -> None:
        if self._log_handle is not None:
            self._log_handle.write(json.dumps(entry) + "\n")
            self._log_handle.flush()

    def save(self) -> None:
        """Compact state into snapshot.json and truncate the change log."""
        if self.data_dir is None:
            return
        with self._lock:
            doc = {
                "counter": self._counter,
                "tables": {
                    f"{s}:{t}": list(rows.values())
                    for (s, t), rows in self._snapshot.tables.items()
                },
            }
            tmp = self.data_dir / "snapshot.json.tmp"
            tmp.write_text(json.dumps(doc), encoding="utf-8")
            tmp.replace(self.data_dir / "snapshot.json")
            if self._log_handle is not None:
                self._log_handle.close()
                self._log_handle = open(self.data_dir / "log.jsonl", "w", encoding="utf-8")

    def close(self) -> None:
        self.save()
        if self._log_handle is not None:
            self._log_handle.close()
            self._log_handle = None

    # -- catalog evolution --------------------------------------------------

    def replace_catalog(self, catalog: Catalog) -> None:
        """Swap in an evolved catalog; existing rows of surviving tables
        are kept, dropped tables lose their rows, new tables start empty."""
        with self._lock:
            tables = {}
            for t in catalog.tables():
                tables[t_key(t)] = self._snapshot.tables.get(t_key(t), {})
            self.catalog = catalog
            self._publish(tables)
            if self.data_dir is not None:
                path = self.data_dir / "catalog.json"
                path.write_text(json.dumps(catalog_to_document(catalog), indent=2), encoding="utf-8")

    # -- helpers ------------------------------------------------------------

    def _table(self, schema: str, name: str) -> Table:
        table = self.catalog.get_table(schema, name)
        if table is None:
            raise NotFound(f"no table {schema}:{name}")
        return table

    def _now(self) -> datetime:
        # Monotonic write clock: successive mutation calls always get
        # distinct, increasing timestamps even inside one microsecond.
        now = datetime.now(timezone.utc)
        if self._write_floor is not None and now <= self._write_floor:
            now = self._write_floor + timedelta(microseconds=1)
        self._write_floor = now
        return now

    def _advance_floor(self, dt: datetime) -> None:
        if self._write_floor is None or dt > self._write_floor:
            self._write_floor = dt

    def _frozen_columns(self, table: Table) -> set[str]:
        out = set()
        if TAG_GENERATED in table.annotations:
            out.update(c.name for c in table.user_columns())
        for col in table.columns:
            if TAG_GENERATED in col.annotations:
                out.add(col.name)
        return out

    def _immutable_columns(self, table: Table) -> set[str]:
        out = set()
        if TAG_IMMUTABLE in table.annotations:
            out.update(c.name for c in table.user_columns())
        for col in table.columns:
            if TAG_IMMUTABLE in col.annotations:
                out.add(col.name)
        return out

    def _rights(self, table: Table, client: ClientContext):
        model = prune_model(self.catalog, client)
        visible = model.get_table(table.schema, table.name)
        if visible is None:
            raise NotFound(f"no table {table.schema}:{table.name}")
        return model

    def _check_unique(self, table: Table, store: dict, row: dict, ignore_rid: str | None = None) -> None:
        for key in table.keys:
            values = tuple(row.get(c) for c in key.columns)
            if any(v is None for v in values):
                continue
            for other_rid, other in store.items():
                if other_rid == (ignore_rid or row.get("RID")):
                    continue
                if tuple(other.get(c) for c in key.columns) == values:
                    raise ConstraintError(
                        f"duplicate value for key {key.name} in {table.schema}:{table.name}",
                        kind="unique",
                        location={"table": f"{table.schema}:{table.name}", "key": key.name},
                    )

    def _check_fkeys(self, table: Table, tables: dict, row: dict) -> None:
        for fk in table.foreign_keys:
            values = tuple(row.get(c) for c in fk.from_columns)
            if any(v is None for v in values):
                continue
            target = tables.get((fk.to_schema, fk.to_table), {})
            if not any(
                tuple(other.get(c) for c in fk.to_columns) == values for other in target.values()
            ):
                raise ConstraintError(
                    f"{fk.name[1]}: no {fk.to_schema}:{fk.to_table} row with "
                    f"{dict(zip(fk.to_columns, values))}",
                    kind="fkey",
                    location={"fkey": list(fk.name)},
                )

    def _coerce_row(self, table: Table, raw: dict, *, partial: bool) -> dict:
        out = {}
        names = set(table.column_names())
        for key in raw:
            if key not in names:
                raise ConstraintError(
                    f"unknown column {key!r} in {table.schema}:{table.name}", kind="type"
                )
        for col in table.user_columns():
            if partial and col.name not in raw:
                continue
            out[col.name] = coerce_value(
                raw.get(col.name), col.type, f"{table.schema}:{table.name}.{col.name}"
            )
        return out

    def _check_not_null(self, table: Table, row: dict) -> None:
        for col in table.user_columns():
            if not col.nullable and row.get(col.name) is None:
                raise ConstraintError(
                    f"{table.schema}:{table.name}.{col.name} may not be null",
                    kind="not_null",
                    location={"column": col.name},
                )

    # -- mutations ----------------------------------------------------------

    def insert(self, schema: str, name: str, rows: list[dict], client: ClientContext) -> list[dict]:
        table = self._table(schema, name)
        model = self._rights(table, client)
        visible = model.get_table(schema, name)
        if not model.rights_of(visible).insert:
            raise RightsError(f"{client.id or 'anonymous'} may not insert into {schema}:{name}")
        frozen = self._frozen_columns(table)
        with self._lock:
            now = canonical_timestamp(self._now())
            tables = self._mutable_tables((schema, name))
            store = tables[(schema, name)]
            created: list[dict] = []
            for raw in rows:
                if not isinstance(raw, dict):
                    raise ParseError("each row must be an object")
                for sys_col in SYSTEM_COLUMN_NAMES:
                    if sys_col in raw:
                        raise RightsError(f"system column {sys_col} may not be written")
                for col_name in raw:
                    if col_name in frozen:
                        raise RightsError(f"column {col_name} is generated and may not be written")
                    rights = model.column_rights.get((schema, name, col_name))
                    if rights is not None and not rights.insert:
                        raise RightsError(f"{client.id or 'anonymous'} may not set {col_name}")
                row = self._coerce_row(table, raw, partial=False)
                self._counter += 1
                row["RID"] = encode_rid(self._counter)
                row["RCT"] = row["RMT"] = now
                row["RCB"] = row["RMB"] = client.id or "anonymous"
                ordered = {c: row.get(c) for c in table.column_names()}
                self._check_not_null(table, ordered)
                self._check_unique(table, store, ordered)
                self._check_fkeys(table, tables, ordered)
                store[ordered["RID"]] = ordered
                created.append(ordered)
            self._publish(tables)
            self._log({"op": "insert", "table": [schema, name], "rows": created, "counter": self._counter})
            return [dict(r) for r in created]

    def update(
        self, schema: str, name: str, rids: list[str], patch: dict, client: ClientContext
    ) -> list[dict]:
        table = self._table(schema, name)
        model = self._rights(table, client)
        visible = model.get_table(schema, name)
        if not model.rights_of(visible).update:
            raise RightsError(f"{client.id or 'anonymous'} may not update {schema}:{name}")
        frozen = self._frozen_columns(table) | self._immutable_columns(table)
        for col_name in patch:
            if col_name in SYSTEM_COLUMN_NAMES:
                raise RightsError(f"system column {col_name} may not be written")
            if col_name in frozen:
                raise RightsError(f"column {col_name} may not be edited")
            rights = model.column_rights.get((schema, name, col_name))
            if rights is not None and not rights.update:
                raise RightsError(f"{client.id or 'anonymous'} may not update {col_name}")
        predicate = row_predicate(table, client)
        changes = self._coerce_row(table, patch, partial=True)
        with self._lock:
            tables = self._mutable_tables((schema, name))
            store = tables[(schema, name)]
            updated: list[dict] = []
            for rid in rids:
                old = store.get(rid)
                if old is None or (predicate is not None and not predicate.matches(old)):
                    raise NotFound(f"no row {rid} in {schema}:{name}")
                row = dict(old)
                row.update(changes)
                # RMT never runs backwards, even across clock skew
                floor = parse_timestamp(old["RMT"]) + timedelta(microseconds=1)
                stamp = max(self._now(), floor)
                self._advance_floor(stamp)
                row["RMT"] = canonical_timestamp(stamp)
                row["RMB"] = client.id or "anonymous"
                self._check_not_null(table, row)
                self._check_unique(table, store, row, ignore_rid=rid)
                self._check_fkeys(table, tables, row)
                store[rid] = row
                updated.append(row)
            self._publish(tables)
            self._log({"op": "update", "table": [schema, name], "rows": updated, "counter": self._counter})
            return [dict(r) for r in updated]

    def delete(self, schema: str, name: str, rids: list[str], client: ClientContext) -> int:
        table = self._table(schema, name)
        model = self._rights(table, client)
        visible = model.get_table(schema, name)
        if not model.rights_of(visible).delete:
            raise RightsError(f"{client.id or 'anonymous'} may not delete from {schema}:{name}")
        if not rids:
            return 0
        predicate = row_predicate(table, client)
        with self._lock:
            tables = self._mutable_tables((schema, name))
            store = tables[(schema, name)]
            doomed: dict[str, dict] = {}
            for rid in rids:
                row = store.get(rid)
                if row is None or (predicate is not None and not predicate.matches(row)):
                    raise NotFound(f"no row {rid} in {schema}:{name}")
                doomed[rid] = row
            self._check_restrict(table, tables, doomed)
            for rid in doomed:
                del store[rid]
            self._publish(tables)
            self._log({"op": "delete", "table": [schema, name], "rids": list(doomed)})
            return len(doomed)

    def _check_restrict(self, table: Table, tables: dict, doomed: dict[str, dict]) -> None:
        victim_key = (table.schema, table.name)
        for other in self.catalog.tables():
            for fk in other.foreign_keys:
                if (fk.to_schema, fk.to_table) != victim_key:
                    continue
                targets = {
                    tuple(row.get(c) for c in fk.to_columns) for row in doomed.values()
                }
                for rid, row in tables.get((other.schema, other.name), {}).items():
                    if other.schema == table.schema and other.name == table.name and rid in doomed:
                        continue
                    values = tuple(row.get(c) for c in fk.from_columns)
                    if any(v is None for v in values):
                        continue
                    if values in targets:
                        raise ConstraintError(
                            f"row is referenced by {other.schema}:{other.name} via {fk.name[1]}",
                            kind="fkey_restrict",
                            location={"fkey": list(fk.name)},
                        )

    # -- query execution ----------------------------------------------------

    def execute(self, plan: QueryPlan, snapshot: Snapshot | None = None) -> ResultSet:
        snap = snapshot or self._snapshot
        if plan.base not in snap.tables:
            raise PlanError(f"unknown table {plan.base[0]}:{plan.base[1]}")
        envs = self._join(plan, snap)
        envs = [e for e in envs if _satisfies(e, plan.predicates)]
        if plan.mode == "entity":
            return self._project_entity(plan, envs)
        if plan.mode == "attributes":
            return self._project_attributes(plan, envs)
        if plan.mode == "aggregate":
            return self._project_aggregate(plan, envs)
        if plan.mode == "value_counts":
            return self._project_value_counts(plan, envs)
        raise PlanError(f"unknown plan mode {plan.mode!r}")

    def _join(self, plan: QueryPlan, snap: Snapshot) -> list[dict]:
        base_rows = snap.tables[plan.base].values()
        if plan.base_predicate is not None:
            base_rows = [r for r in base_rows if plan.base_predicate.matches(r)]
        envs = [{BASE_ALIAS: row} for row in base_rows]
        for step in plan.joins:
            if step.table not in snap.tables:
                raise PlanError(f"unknown table {step.table[0]}:{step.table[1]}")
            right_rows = snap.tables[step.table].values()
            if step.row_predicate is not None:
                right_rows = [r for r in right_rows if step.row_predicate.matches(r)]
            index: dict[tuple, list[dict]] = {}
            for row in right_rows:
                key = tuple(row.get(c) for c in step.right_columns)
                if any(v is None for v in key):
                    continue
                index.setdefault(key, []).append(row)
            nxt: list[dict] = []
            for env in envs:
                left = env.get(step.from_alias)
                matches: list[dict] = []
                if left is not None:
                    key = tuple(left.get(c) for c in step.left_columns)
                    if not any(v is None for v in key):
                        matches = index.get(key, [])
                if matches:
                    for row in matches:
                        child = dict(env)
                        child[step.alias] = row
                        nxt.append(child)
                elif step.optional:
                    child = dict(env)
                    child[step.alias] = None
                    nxt.append(child)
            envs = nxt
        return envs

    def _project_entity(self, plan: QueryPlan, envs: list[dict]) -> ResultSet:
        seen: dict[str, dict] = {}
        for env in envs:
            row = env[BASE_ALIAS]
            seen.setdefault(row["RID"], row)
        columns = plan.projection or None
        rows = list(seen.values())
        rows = _sort_rows(rows, plan.sort)
        total = len(rows)
        rows = _page(rows, plan.page)
        if columns:
            rows = [{c: r.get(c) for c in columns} for r in rows]
        else:
            rows = [dict(r) for r in rows]
        return ResultSet(rows=rows, total=total)

    def _project_attributes(self, plan: QueryPlan, envs: list[dict]) -> ResultSet:
        rows = []
        for env in envs:
            out = {}
            for alias, column in plan.projection:
                row = env.get(alias)
                key = column if alias == BASE_ALIAS else f"{alias}.{column}"
                out[key] = None if row is None else row.get(column)
            rows.append(out)
        rows = _sort_rows(rows, plan.sort)
        total = len(rows)
        return ResultSet(rows=_page(rows, plan.page), total=total)

    def _project_aggregate(self, plan: QueryPlan, envs: list[dict]) -> ResultSet:
        agg = plan.aggregate
        if agg is None:
            raise PlanError("aggregate plan lacks an aggregate")
        if agg.group_by_base:
            groups: dict[str, list] = {}
            order: list[str] = []
            for env in envs:
                rid = env[BASE_ALIAS]["RID"]
                if rid not in groups:
                    groups[rid] = []
                    order.append(rid)
                row = env.get(agg.alias)
                if row is not None and row.get(agg.column) is not None:
                    groups[rid].append(row[agg.column])
            rows = [{"RID": rid, "value": _aggregate(agg.func, groups[rid])} for rid in order]
            return ResultSet(rows=rows, total=len(rows))
        values = [
            env[agg.alias][agg.column]
            for env in envs
            if env.get(agg.alias) is not None and env[agg.alias].get(agg.column) is not None
        ]
        return ResultSet(rows=[{"value": _aggregate(agg.func, values)}], total=1)

    def _project_value_counts(self, plan: QueryPlan, envs: list[dict]) -> ResultSet:
        if plan.value_target is None:
            raise PlanError("value_counts plan lacks a target")
        alias, column = plan.value_target
        buckets: dict[Any, set[str]] = {}
        for env in envs:
            row = env.get(alias)
            value = None if row is None else row.get(column)
            buckets.setdefault(value, set()).add(env[BASE_ALIAS]["RID"])
        rows = [{"value": v, "count": len(rids)} for v, rids in buckets.items()]
        rows = _sort_rows(rows, (("value", False),))
        rows.sort(key=lambda r: -r["count"])  # stable: count desc, then value asc
        total = len(rows)
        return ResultSet(rows=_page(rows, plan.page), total=total)


def t_key(table: Table) -> tuple[str, str]:
    return (table.schema, table.name)


def _page(rows: list, page: tuple[Optional[int], int]) -> list:
    limit, offset = page
    rows = rows[offset:]
    if limit is not None:
        rows = rows[:limit]
    return rows


def _satisfies(env: dict, groups: Iterable[PredicateGroup]) -> bool:
    return all(any(_atom(env, a) for a in g.atoms) for g in groups)


def _atom(env: dict, atom: Atom) -> bool:
    row = env.get(atom.alias)
    value = None if row is None else row.get(atom.column)
    if atom.op == "eq":
        return value == atom.values[0]
    if atom.op == "in":
        return value in atom.values
    if atom.op == "between":
        if value is None:
            return False
        low, high = atom.values
        return (low is None or not value < low) and (high is None or not high < value)
    if atom.op == "ilike":
        if value is None:
            return False
        return str(atom.values[0]).lower() in str(value).lower()
    raise PlanError(f"unknown predicate op {atom.op!r}")


def _aggregate(func: str, values: list):
    if func == "array_d":
        distinct = list(dict.fromkeys(values))
        try:
            return sorted(distinct)
        except TypeError:
            return sorted(distinct, key=str)
    if func == "cnt_d":
        return len(set(values))
    if func == "cnt":
        return len(values)
    if func == "min":
        return min(values) if values else None
    if func == "max":
        return max(values) if values else None
    if func == "sum":
        return sum(values) if values else None
    raise PlanError(f"unknown aggregate {func!r}")


# ---------------------------------------------------------------------------
# Bulk load file formats


def read_rows(path: str | Path) -> list[dict]:
    """Read a CSV (header row = column names, empty cell = null) or a
    JSON-lines file into row dicts ready for insert()."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            return [
                {k: (None if v == "" else v) for k, v in row.items()}
                for row in csv.DictReader(fh)
            ]
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    for row in rows:
        if not isinstance(row, dict):
            raise ParseError("JSON lines must hold one object per line")
    return rows
