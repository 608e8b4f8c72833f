/**
 * Hash-based routing: `#/{app}/{schema}:{table}[/{rid}]?filters=...`.
 *
 * Routes are bookmarkable; the `filters` query parameter carries the exact
 * JSON list the service's data endpoints accept, so a filter state pasted
 * from the URL bar round-trips unchanged.
 */

import type { FilterEntry } from "./types.js";

export type AppName = "home" | "recordset" | "record" | "recordedit";

/** Foreign-key prefill carried from a record page "Add" into recordedit. */
export interface Prefill {
  fkey: [string, string];
  rid: string;
}

export interface AppRoute {
  app: AppName;
  schema?: string;
  table?: string;
  rid?: string;
  filters?: FilterEntry[];
  q?: string;
  sort?: string;
  offset?: number;
  prefill?: Prefill;
}

let APPS: AppName[] = ["recordset", "record", "recordedit"];

export let parseHash = (hash: string): AppRoute => {
  let raw = hash.startsWith("#") ? hash.slice(1) : hash;
  let [path, search] = splitOnce(raw, "?");
  let segments = path.split("/").filter((s) => s.length > 0);
  if (segments.length === 0) return { app: "home" };

  let app = segments[0] as AppName;
  if (!APPS.includes(app)) return { app: "home" };

  let route: AppRoute = { app };
  if (segments.length > 1) {
    let [schema, table] = splitOnce(segments[1], ":");
    route.schema = decodeURIComponent(schema);
    route.table = decodeURIComponent(table ?? "");
  }
  if (segments.length > 2) route.rid = decodeURIComponent(segments[2]);

  if (search) {
    let params = new URLSearchParams(search);
    let filters = params.get("filters");
    if (filters) {
      try {
        let parsed = JSON.parse(filters);
        if (Array.isArray(parsed)) route.filters = parsed as FilterEntry[];
      } catch {
        // Unreadable filters are dropped rather than breaking navigation.
      }
    }
    let q = params.get("q");
    if (q) route.q = q;
    let sort = params.get("sort");
    if (sort) route.sort = sort;
    let offset = params.get("offset");
    if (offset && /^\d+$/.test(offset)) route.offset = parseInt(offset, 10);
    let prefill = params.get("prefill");
    if (prefill) {
      try {
        let parsed = JSON.parse(prefill);
        if (parsed && Array.isArray(parsed.fkey) && typeof parsed.rid === "string") {
          route.prefill = { fkey: [parsed.fkey[0], parsed.fkey[1]], rid: parsed.rid };
        }
      } catch {
        // Ignore malformed prefill.
      }
    }
  }
  return route;
};

export let formatHash = (route: AppRoute): string => {
  if (route.app === "home") return "#/";
  let parts: string[] = [route.app];
  if (route.schema !== undefined && route.table !== undefined) {
    parts.push(`${encodeURIComponent(route.schema)}:${encodeURIComponent(route.table)}`);
  }
  if (route.rid !== undefined) parts.push(encodeURIComponent(route.rid));

  let params = new URLSearchParams();
  if (route.filters && route.filters.length) params.set("filters", JSON.stringify(route.filters));
  if (route.q) params.set("q", route.q);
  if (route.sort) params.set("sort", route.sort);
  if (route.offset) params.set("offset", String(route.offset));
  if (route.prefill) params.set("prefill", JSON.stringify(route.prefill));

  let search = params.toString();
  return `#/${parts.join("/")}${search ? `?${search}` : ""}`;
};

let splitOnce = (value: string, sep: string): [string, string | undefined] => {
  let at = value.indexOf(sep);
  if (at < 0) return [value, undefined];
  return [value.slice(0, at), value.slice(at + 1)];
};
