/**
 * Typed client for the catalog service JSON API.
 *
 * Every method corresponds to one published endpoint; the acting identity's
 * headers are attached to each request via the injected store.
 */

import type {
  EntityDoc,
  EntityPage,
  ErrorBody,
  FacetValuesDoc,
  FilterEntry,
  ModelDoc,
  PickerDoc,
  PlanDoc,
  RecordDoc,
} from "./types.js";
import type { IdentityStore } from "./identity.js";

export class ApiError extends Error {
  status: number;
  code: string;
  location: string | null;

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.location = body.location ?? null;
  }
}

export interface EntityQuery {
  filters?: FilterEntry[];
  q?: string;
  sort?: string;
  limit?: number;
  offset?: number;
}

export interface ApiClient {
  base: string;
  getModel: () => Promise<ModelDoc>;
  getPlan: (schema: string, table: string, context: string) => Promise<PlanDoc>;
  getEntities: (schema: string, table: string, query?: EntityQuery) => Promise<EntityPage>;
  getRecord: (schema: string, table: string, rid: string) => Promise<RecordDoc>;
  getFacetValues: (
    schema: string,
    table: string,
    source: unknown,
    query?: EntityQuery
  ) => Promise<FacetValuesDoc>;
  getPicker: (
    schema: string,
    constraint: string,
    form: Record<string, unknown>,
    q?: string
  ) => Promise<PickerDoc>;
  createRows: (schema: string, table: string, rows: Record<string, unknown>[]) => Promise<EntityDoc["values"][]>;
  updateRows: (
    schema: string,
    table: string,
    rids: string[],
    patch: Record<string, unknown>
  ) => Promise<EntityDoc["values"][]>;
  deleteRows: (schema: string, table: string, rids: string[]) => Promise<number>;
  uploadAsset: (data: Blob | ArrayBuffer) => Promise<{ sha256: string; url: string; bytes: number }>;
}

let query = (params: Record<string, string | number | undefined>): string => {
  let parts: string[] = [];
  for (let [key, value] of Object.entries(params)) {
    if (value === undefined || value === "") continue;
    parts.push(`${encodeURIComponent(key)}=${encodeURIComponent(String(value))}`);
  }
  return parts.length ? `?${parts.join("&")}` : "";
};

let entityParams = (q?: EntityQuery): Record<string, string | number | undefined> => ({
  filters: q?.filters && q.filters.length ? JSON.stringify(q.filters) : undefined,
  q: q?.q,
  sort: q?.sort,
  limit: q?.limit,
  offset: q?.offset,
});

export let createApiClient = (base: string, identity: IdentityStore): ApiClient => {
  let trimmed = base.replace(/\/+$/, "");

  let request = async <T>(method: string, path: string, body?: unknown): Promise<T> => {
    let headers: Record<string, string> = { ...identity.headers() };
    let init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    let response = await fetch(`${trimmed}${path}`, init);
    if (!response.ok) {
      let parsed: ErrorBody;
      try {
        parsed = (await response.json()) as ErrorBody;
      } catch {
        parsed = { code: "http_error", message: `HTTP ${response.status}`, location: path };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  };

  let seg = encodeURIComponent;

  return {
    base: trimmed,

    getModel: () => request<ModelDoc>("GET", "/model"),

    getPlan: (schema, table, context) =>
      request<PlanDoc>("GET", `/plan/${seg(schema)}/${seg(table)}${query({ context })}`),

    getEntities: (schema, table, q) =>
      request<EntityPage>("GET", `/entity/${seg(schema)}/${seg(table)}${query(entityParams(q))}`),

    getRecord: (schema, table, rid) =>
      request<RecordDoc>("GET", `/record/${seg(schema)}/${seg(table)}/${seg(rid)}`),

    getFacetValues: (schema, table, source, q) =>
      request<FacetValuesDoc>(
        "GET",
        `/facet/${seg(schema)}/${seg(table)}/values${query({
          source: JSON.stringify(source),
          ...entityParams(q),
        })}`
      ),

    getPicker: (schema, constraint, form, q) =>
      request<PickerDoc>(
        "GET",
        `/picker/${seg(schema)}/${seg(constraint)}${query({
          form: Object.keys(form).length ? JSON.stringify(form) : undefined,
          q,
        })}`
      ),

    createRows: async (schema, table, rows) => {
      let out = await request<{ rows: EntityDoc["values"][] }>(
        "POST",
        `/entity/${seg(schema)}/${seg(table)}`,
        rows
      );
      return out.rows;
    },

    updateRows: async (schema, table, rids, patch) => {
      let out = await request<{ rows: EntityDoc["values"][] }>(
        "PUT",
        `/entity/${seg(schema)}/${seg(table)}`,
        { rids, patch }
      );
      return out.rows;
    },

    deleteRows: async (schema, table, rids) => {
      let out = await request<{ deleted: number }>("DELETE", `/entity/${seg(schema)}/${seg(table)}`, {
        rids,
      });
      return out.deleted;
    },

    uploadAsset: async (data) => {
      let response = await fetch(`${trimmed}/assets`, {
        method: "POST",
        headers: { ...identity.headers(), "Content-Type": "application/octet-stream" },
        body: data,
      });
      if (!response.ok) {
        let parsed = (await response.json().catch(() => null)) as ErrorBody | null;
        throw new ApiError(
          response.status,
          parsed ?? { code: "http_error", message: `HTTP ${response.status}`, location: "/assets" }
        );
      }
      return (await response.json()) as { sha256: string; url: string; bytes: number };
    },
  };
};
