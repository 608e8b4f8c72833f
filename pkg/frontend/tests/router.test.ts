import { describe, expect, it } from "vitest";
import { formatHash, parseHash } from "../src/router.js";
import type { AppRoute } from "../src/router.js";

describe("hash routes", () => {
  it("parses the three app forms", () => {
    expect(parseHash("#/recordset/S:T")).toEqual({ app: "recordset", schema: "S", table: "T" });
    expect(parseHash("#/record/S:T/1-abc")).toEqual({
      app: "record",
      schema: "S",
      table: "T",
      rid: "1-abc",
    });
    expect(parseHash("#/recordedit/S:T")).toEqual({ app: "recordedit", schema: "S", table: "T" });
  });

  it("falls back to home for empty or unknown apps", () => {
    expect(parseHash("")).toEqual({ app: "home" });
    expect(parseHash("#/")).toEqual({ app: "home" });
    expect(parseHash("#/nonsense/S:T")).toEqual({ app: "home" });
  });

  it("round-trips filters through the URL filters format", () => {
    let route: AppRoute = {
      app: "recordset",
      schema: "S",
      table: "T",
      filters: [
        { source: [{ inbound: ["S", "a_fkey"] }, "Name"], choices: ["x", null] },
        { source: "Created", range: { min: "2020-01-01" } },
        { source: "Notes", search: "word" },
      ],
      q: "needle",
      sort: "-Name",
      offset: 50,
    };
    let parsed = parseHash(formatHash(route));
    expect(parsed).toEqual(route);
  });

  it("keeps the filters parameter as the service wire format", () => {
    let hash = formatHash({
      app: "recordset",
      schema: "S",
      table: "T",
      filters: [{ source: "Name", choices: ["a"] }],
    });
    let search = hash.slice(hash.indexOf("?") + 1);
    let raw = new URLSearchParams(search).get("filters");
    expect(JSON.parse(raw!)).toEqual([{ source: "Name", choices: ["a"] }]);
  });

  it("escapes separators inside names", () => {
    let route: AppRoute = { app: "record", schema: "a:b", table: "c/d", rid: "r?x" };
    expect(parseHash(formatHash(route))).toEqual(route);
  });

  it("round-trips a prefill", () => {
    let route: AppRoute = {
      app: "recordedit",
      schema: "S",
      table: "T",
      prefill: { fkey: ["S", "T_parent_fkey"], rid: "1-0001" },
    };
    expect(parseHash(formatHash(route))).toEqual(route);
  });

  it("drops malformed filters instead of failing", () => {
    expect(parseHash("#/recordset/S:T?filters=%7Bnot-json")).toEqual({
      app: "recordset",
      schema: "S",
      table: "T",
    });
  });
});
