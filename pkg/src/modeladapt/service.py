"""HTTP facade: identity, introspection, presentation planning, retrieval,
and presentation in one request cycle.

Every response carries raw values together with formatted and rendered
forms, so clients can display data without reimplementing any
formatting, templating, or markdown logic.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import queryplan as qp
from .annotations import Diagnostic, ValidatedAnnotations, validate_annotations
from .errors import (
    ConstraintError,
    ModelAdaptError,
    ModelError,
    NotFound,
    ParseError,
    PlanError,
    ResolutionError,
    RightsError,
)
from .interpret import PropertySpec, TablePlan, plan as build_plan, plan_to_doc
from .model import apply_model_change, model_change_from_json
from .policy import ClientContext, RoleBasedModel, prune_model, row_predicate
from .render import format_value, markdown_to_html, parse_template, render_template
from .storage import Database, ResultSet, Snapshot

_HEADER_RE = re.compile(r"^[\x20-\x7e]*$")

_STATUS = {
    ParseError: 400,
    PlanError: 400,
    ResolutionError: 400,
    ModelError: 400,
    RightsError: 403,
    NotFound: 404,
    ConstraintError: 409,
}


class BadIdentity(ModelAdaptError):
    code = "bad_identity"


def _status_for(exc: ModelAdaptError) -> int:
    if isinstance(exc, BadIdentity):
        return 401
    for cls, status in _STATUS.items():
        if isinstance(exc, cls):
            return status
    return 500


def parse_identity(request: Request, tokens: Optional[dict]) -> ClientContext:
    auth = request.headers.get("Authorization", "")
    if auth.startswith("Bearer ") and tokens is not None:
        entry = tokens.get(auth[len("Bearer "):].strip())
        if entry is None:
            raise BadIdentity("unknown token")
        return ClientContext(
            id=entry.get("id"), roles=frozenset(entry.get("roles", []))
        )
    cid = request.headers.get("X-Client-Id")
    roles_header = request.headers.get("X-Client-Roles", "")
    if cid is not None and not _HEADER_RE.match(cid):
        raise BadIdentity("malformed X-Client-Id")
    if not _HEADER_RE.match(roles_header):
        raise BadIdentity("malformed X-Client-Roles")
    roles = frozenset(part.strip() for part in roles_header.split(",") if part.strip())
    return ClientContext(id=cid, roles=roles)


class View:
    """Everything one request needs, bound to one catalog and one data
    snapshot for its whole lifetime."""

    def __init__(
        self,
        db: Database,
        snapshot: Snapshot,
        client: ClientContext,
        model: RoleBasedModel,
        va: ValidatedAnnotations,
        diagnostics: list[Diagnostic],
    ):
        self.db = db
        self.snapshot = snapshot
        self.client = client
        self.model = model
        self.va = va
        self.diagnostics = diagnostics
        self._ref_indexes: dict = {}
        self._plan_cache: dict = {}

    def table(self, schema: str, name: str):
        table = self.model.get_table(schema, name)
        if table is None:
            raise NotFound(f"no table {schema}:{name}")
        return table

    def plan(self, table, context: str) -> TablePlan:
        key = (table.schema, table.name, context)
        if key not in self._plan_cache:
            self._plan_cache[key] = build_plan(table, context, self.model, self.va)
        return self._plan_cache[key]

    def execute(self, plan) -> ResultSet:
        return self.db.execute(plan, self.snapshot)

    # -- row presentation ---------------------------------------------------

    def row_name(self, table, row: dict) -> tuple[str, str]:
        tpl = self.plan(table, "compact").row_name
        md = render_template(parse_template(tpl), row)
        return md, markdown_to_html(md)

    def _ref_index(self, fkey_name: tuple) -> Optional[dict]:
        if fkey_name in self._ref_indexes:
            return self._ref_indexes[fkey_name]
        found = self.model.find_fkey(fkey_name)
        index = None
        if found is not None:
            _, fk = found
            target = self.model.get_table(fk.to_schema, fk.to_table)
            if target is not None:
                predicate = row_predicate(target, self.client)
                index = {"table": target, "rows": {}}
                for row in self.snapshot.tables.get((fk.to_schema, fk.to_table), {}).values():
                    if predicate is not None and not predicate.matches(row):
                        continue
                    index["rows"][tuple(row.get(c) for c in fk.to_columns)] = row
        self._ref_indexes[fkey_name] = index
        return index

    def resolve_ref(self, fk_name: tuple, from_values: tuple) -> Optional[dict]:
        index = self._ref_index(fk_name)
        if index is None or any(v is None for v in from_values):
            return None
        row = index["rows"].get(from_values)
        if row is None:
            return None
        name_md, name_html = self.row_name(index["table"], row)
        return {"rid": row["RID"], "row_name": name_md, "row_name_html": name_html}

    def entity_doc(
        self,
        table,
        plan: TablePlan,
        row: dict,
        pseudo_values: Optional[dict[int, Any]] = None,
    ) -> dict:
        values = dict(row)
        formatted = {}
        for col in table.columns:
            if col.name in values:
                formatted[col.name] = format_value(values[col.name], col.type)
        rendered: dict[str, Optional[str]] = {}
        refs: dict[str, Optional[dict]] = {}
        pseudo: dict[str, dict] = {}
        for idx, prop in enumerate(plan.properties):
            if prop.kind in ("scalar", "asset") and not prop.source.hops:
                col = prop.source.end_column
                if prop.display is not None and values.get(col) is not None:
                    bindings = dict(values)
                    bindings["$self"] = values.get(col)
                    md = render_template(parse_template(prop.display), bindings)
                    rendered[col] = markdown_to_html(md)
                elif values.get(col) is not None and _column_type(table, col) == "markdown":
                    rendered[col] = markdown_to_html(str(values[col]))
            elif prop.kind == "entity_ref" and prop.fkey is not None:
                found = self.model.find_fkey(prop.fkey)
                if found is not None:
                    _, fk = found
                    key = tuple(values.get(c) for c in fk.from_columns)
                    refs[str(idx)] = self.resolve_ref(prop.fkey, key)
            elif prop.kind == "pseudo" and pseudo_values is not None and idx in pseudo_values:
                value = pseudo_values[idx]
                entry: dict[str, Any] = {"value": value}
                if prop.display is not None:
                    bindings = dict(values)
                    bindings["$self"] = value
                    md = render_template(parse_template(prop.display), bindings)
                    entry["rendered"] = markdown_to_html(md)
                else:
                    entry["rendered"] = None
                pseudo[str(idx)] = entry
        name_md, name_html = self.row_name(table, row)
        return {
            "rid": row.get("RID"),
            "values": values,
            "formatted": formatted,
            "rendered": rendered,
            "refs": refs,
            "pseudo": pseudo,
            "row_name": name_md,
            "row_name_html": name_html,
        }

    def pseudo_values_for_page(self, table, plan: TablePlan, rows: list[dict]) -> dict[int, dict]:
        """One batched aggregate execution per pseudo property per page."""
        rids = [r["RID"] for r in rows]
        out: dict[int, dict] = {}
        if not rids:
            return out
        for idx, prop in enumerate(plan.properties):
            if prop.kind != "pseudo" or not prop.source.hops:
                continue
            agg_plan = qp.aggregate_page_plan(self.model, table, prop, rids)
            values = {r["RID"]: r["value"] for r in self.execute(agg_plan).rows}
            empty = [] if (prop.source.aggregate or "array_d") == "array_d" else 0
            out[idx] = {rid: values.get(rid, empty) for rid in rids}
        return out


def _column_type(table, name: str) -> Optional[str]:
    col = table.column(name)
    return col.type if col else None


# ---------------------------------------------------------------------------
# Model document


def model_doc(view: View) -> dict:
    model = view.model
    schemas: dict[str, Any] = {}
    for table in model.catalog.tables():
        rights = model.rights_of(table)
        tdoc = {
            "columns": [
                {
                    "name": c.name,
                    "type": c.type,
                    "nullable": c.nullable,
                    "is_system": c.is_system,
                    "comment": c.comment,
                    "annotations": c.annotations,
                    "rights": model.rights_of(table, c.name).as_dict(),
                }
                for c in table.columns
            ],
            "keys": [{"name": k.name, "columns": list(k.columns)} for k in table.keys],
            "foreign_keys": [
                {
                    "name": list(fk.name),
                    "from_columns": list(fk.from_columns),
                    "to": {
                        "schema": fk.to_schema,
                        "table": fk.to_table,
                        "columns": list(fk.to_columns),
                    },
                    "annotations": fk.annotations,
                }
                for fk in table.foreign_keys
            ],
            "annotations": table.annotations,
            "rights": rights.as_dict(),
        }
        schemas.setdefault(table.schema, {"tables": {}})["tables"][table.name] = tdoc
    return {
        "version": model.catalog.version,
        "client": {"id": view.client.id, "roles": sorted(view.client.roles)},
        "schemas": schemas,
        "diagnostics": [
            {
                "severity": d.severity,
                "table": d.table,
                "tag": d.tag,
                "context": d.context,
                "index": d.index,
                "message": d.message,
            }
            for d in view.diagnostics
        ],
    }


# ---------------------------------------------------------------------------
# App


def create_app(db: Database, tokens: Optional[dict] = None) -> FastAPI:
    app = FastAPI(title="modeladapt", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.db = db
    app.state.tokens = tokens
    app.state.view_cache = {}
    app.state.assets = {}

    @app.exception_handler(ModelAdaptError)
    async def handle_domain_error(request: Request, exc: ModelAdaptError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={
                "code": getattr(exc, "code", "error"),
                "message": exc.message,
                "location": exc.location,
            },
        )

    def view_for(request: Request) -> View:
        client = parse_identity(request, app.state.tokens)
        catalog = db.catalog
        key = (catalog.version, client.id, client.roles)
        cached = app.state.view_cache.get(key)
        if cached is None or cached[0] is not catalog:
            model = prune_model(catalog, client)
            va, diagnostics = validate_annotations(model)
            if len(app.state.view_cache) > 64:
                app.state.view_cache.clear()
            app.state.view_cache[key] = cached = (catalog, model, va, diagnostics)
        _, model, va, diagnostics = cached
        return View(db, db.snapshot, client, model, va, diagnostics)

    # -- introspection ------------------------------------------------------

    @app.get("/model")
    def get_model(request: Request):
        return model_doc(view_for(request))

    @app.get("/plan/{schema}/{table}")
    def get_plan(schema: str, table: str, request: Request, context: str = "detailed"):
        view = view_for(request)
        t = view.table(schema, table)
        doc = plan_to_doc(view.plan(t, context))
        doc["rights"] = view.model.rights_of(t).as_dict()
        return doc

    # -- retrieval ----------------------------------------------------------

    def _common_args(request: Request):
        params = request.query_params
        filters = params.get("filters")
        parsed_filters = None
        if filters:
            try:
                parsed_filters = json.loads(filters)
            except json.JSONDecodeError:
                raise PlanError("filters is not valid JSON")
        q = params.get("q") or None
        limit = _int_param(params, "limit", qp.DEFAULT_PAGE_SIZE)
        offset = _int_param(params, "offset", 0)
        return parsed_filters, q, limit, offset

    @app.get("/entity/{schema}/{table}")
    def get_entities(schema: str, table: str, request: Request):
        view = view_for(request)
        t = view.table(schema, table)
        filters, q, limit, offset = _common_args(request)
        sort = _parse_sort(request.query_params.get("sort"))
        plan = qp.compile_entity_set(
            view.model, view.va, schema, table,
            filters=filters, search_text=q, sort=sort, limit=limit, offset=offset,
        )
        result = view.execute(plan)
        compact = view.plan(t, "compact")
        pseudo = view.pseudo_values_for_page(t, compact, result.rows)
        rows = [
            view.entity_doc(t, compact, row, {i: vals[row["RID"]] for i, vals in pseudo.items()})
            for row in result.rows
        ]
        return {
            "rows": rows,
            "total": result.total,
            "limit": limit,
            "offset": offset,
            "rights": view.model.rights_of(t).as_dict(),
        }

    @app.get("/record/{schema}/{table}/{rid}")
    def get_record(schema: str, table: str, rid: str, request: Request):
        view = view_for(request)
        t = view.table(schema, table)
        plans = qp.compile_record(view.model, view.va, schema, table, rid)
        core = view.execute(plans.core)
        if not core.rows:
            raise NotFound(f"no row {rid} in {schema}:{table}")
        row = core.rows[0]
        detailed = plans.table_plan
        properties = []
        related = []
        for part in plans.parts:
            result = view.execute(part.plan)
            if part.kind == "property":
                prop = detailed.properties[part.index]
                if part.value_key is not None:
                    value = result.rows[0][part.value_key] if result.rows else None
                else:
                    value = result.rows[0]["value"] if result.rows else (
                        [] if (prop.source.aggregate or "array_d") == "array_d" else 0
                    )
                entry = {"index": part.index, "value": value, "rendered": None}
                if prop.display is not None:
                    bindings = dict(row)
                    bindings["$self"] = value
                    md = render_template(parse_template(prop.display), bindings)
                    entry["rendered"] = markdown_to_html(md)
                properties.append(entry)
            else:
                rel = detailed.relationships[part.index]
                rt = view.table(*part.related)
                rel_plan = view.plan(rt, "compact")
                rel_pseudo = view.pseudo_values_for_page(rt, rel_plan, result.rows)
                related.append(
                    {
                        "index": part.index,
                        "name": rel.name,
                        "table": list(part.related),
                        "rows": [
                            view.entity_doc(
                                rt, rel_plan, r,
                                {i: vals[r["RID"]] for i, vals in rel_pseudo.items()},
                            )
                            for r in result.rows
                        ],
                        "total": result.total,
                        "rights": view.model.rights_of(rt).as_dict(),
                        "lazy": False,
                    }
                )
        return {
            "entity": view.entity_doc(t, detailed, row),
            "properties": properties,
            "related": related,
            "plan": plan_to_doc(detailed),
            "rights": view.model.rights_of(t).as_dict(),
        }

    @app.get("/facet/{schema}/{table}/values")
    def get_facet_values(schema: str, table: str, request: Request):
        view = view_for(request)
        t = view.table(schema, table)
        params = request.query_params
        raw_source = params.get("source")
        if not raw_source:
            raise PlanError("missing facet source")
        try:
            source = json.loads(raw_source)
        except json.JSONDecodeError:
            raise PlanError("facet source is not valid JSON")
        filters, q, _, offset = _common_args(request)
        limit = _int_param(params, "limit", qp.FACET_PAGE_SIZE)
        plan = qp.compile_facet_values(
            view.model, view.va, schema, table, source,
            other_filters=filters, search_text=q, limit=limit, offset=offset,
        )
        result = view.execute(plan)
        end_type = _facet_end_type(view, t, source)
        values = [
            {
                "value": r["value"],
                "count": r["count"],
                "formatted": format_value(r["value"], end_type) if end_type else str(r["value"]),
            }
            for r in result.rows
        ]
        return {"values": values, "total": result.total}

    def _facet_end_type(view: View, table, source) -> Optional[str]:
        from .annotations import parse_source_spec, resolve_source

        try:
            spec = parse_source_spec(source if isinstance(source, dict) else {"source": source})
            defs = view.va.tables.get((table.schema, table.name))
            resolved = resolve_source(view.model, table, spec, defs.sources if defs else None)
            return resolved.end_type
        except ResolutionError:
            return None

    @app.get("/picker/{schema}/{constraint}")
    def get_picker(schema: str, constraint: str, request: Request):
        view = view_for(request)
        params = request.query_params
        form = {}
        if params.get("form"):
            try:
                form = json.loads(params["form"])
            except json.JSONDecodeError:
                raise PlanError("form is not valid JSON")
        _, q, limit, offset = _common_args(request)
        picker = qp.compile_picker(
            view.model, view.va, (schema, constraint),
            form_values=form, search_text=q, limit=limit, offset=offset,
        )
        result = view.execute(picker.plan)
        target = view.table(*picker.target)
        compact = view.plan(target, "compact")
        pseudo = view.pseudo_values_for_page(target, compact, result.rows)
        return {
            "target": list(picker.target),
            "rows": [
                view.entity_doc(target, compact, r, {i: v[r["RID"]] for i, v in pseudo.items()})
                for r in result.rows
            ],
            "total": result.total,
            "diagnostics": [d.format_line() for d in picker.diagnostics],
        }

    # -- mutation -----------------------------------------------------------

    @app.post("/entity/{schema}/{table}", status_code=201)
    async def post_entities(schema: str, table: str, request: Request):
        view = view_for(request)
        body = await _json_body(request)
        if not isinstance(body, list):
            raise ParseError("body must be a list of row objects")
        rows = db.insert(schema, table, body, view.client)
        return {"rows": rows}

    @app.put("/entity/{schema}/{table}")
    async def put_entities(schema: str, table: str, request: Request):
        view = view_for(request)
        body = await _json_body(request)
        if not isinstance(body, dict) or "rids" not in body or "patch" not in body:
            raise ParseError("body must be {\"rids\": [...], \"patch\": {...}}")
        rows = db.update(schema, table, body["rids"], body["patch"], view.client)
        return {"rows": rows}

    @app.delete("/entity/{schema}/{table}")
    async def delete_entities(schema: str, table: str, request: Request):
        view = view_for(request)
        body = await _json_body(request)
        if not isinstance(body, dict) or not isinstance(body.get("rids"), list):
            raise ParseError("body must be {\"rids\": [...]}")
        count = db.delete(schema, table, body["rids"], view.client)
        return {"deleted": count}

    @app.delete("/attribute/{schema}/{table}")
    def delete_by_filter(schema: str, table: str, request: Request):
        view = view_for(request)
        view.table(schema, table)
        filters, q, _, _ = _common_args(request)
        if not filters and not q:
            raise PlanError("refusing an unfiltered bulk delete")
        plan = qp.compile_entity_set(
            view.model, view.va, schema, table,
            filters=filters, search_text=q, limit=None, offset=0,
        )
        rids = [r["RID"] for r in view.execute(plan).rows]
        count = db.delete(schema, table, rids, view.client)
        return {"deleted": count}

    # -- evolution ----------------------------------------------------------

    @app.post("/model/change")
    async def post_model_change(request: Request):
        view = view_for(request)
        if not any(role in db.catalog.owners for role in view.client.roles):
            raise RightsError("only catalog owners may change the model")
        body = await _json_body(request)
        change = model_change_from_json(body)
        db.replace_catalog(apply_model_change(db.catalog, change))
        return {"version": db.catalog.version}

    # -- assets -------------------------------------------------------------

    @app.post("/assets", status_code=201)
    async def post_asset(request: Request):
        view = view_for(request)
        if view.client.id is None:
            raise RightsError("anonymous clients may not upload")
        data = await request.body()
        digest = hashlib.sha256(data).hexdigest()
        if db.data_dir is not None:
            asset_dir = db.data_dir / "assets"
            asset_dir.mkdir(exist_ok=True)
            (asset_dir / digest).write_bytes(data)
        else:
            app.state.assets[digest] = data
        return {"sha256": digest, "url": f"/assets/{digest}", "bytes": len(data)}

    @app.get("/assets/{sha256}")
    def get_asset(sha256: str):
        if not re.fullmatch(r"[0-9a-f]{64}", sha256):
            raise NotFound("no such asset")
        if db.data_dir is not None:
            path = db.data_dir / "assets" / sha256
            if path.exists():
                return Response(content=path.read_bytes(), media_type="application/octet-stream")
        data = app.state.assets.get(sha256)
        if data is None:
            raise NotFound("no such asset")
        return Response(content=data, media_type="application/octet-stream")

    return app


async def _json_body(request: Request):
    try:
        return json.loads(await request.body())
    except json.JSONDecodeError:
        raise ParseError("request body is not valid JSON")


def _int_param(params, name: str, default: Optional[int]) -> Optional[int]:
    raw = params.get(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise PlanError(f"{name} must be an integer")
    if value < 0 or value > 100000:
        raise PlanError(f"{name} out of range")
    return value


def _parse_sort(raw: Optional[str]) -> Optional[list[tuple[str, bool]]]:
    if not raw:
        return None
    out = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if part.startswith("-"):
            out.append((part[1:], True))
        else:
            out.append((part, False))
    return out or None
