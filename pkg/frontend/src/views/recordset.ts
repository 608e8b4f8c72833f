/**
 * Faceted search over one table: facet panel with live value counts, text
 * search, sortable paged results, and rights-gated create/edit/delete.
 *
 * Every interaction navigates to a new route, so the full filter state
 * stays in the URL and deselecting updates results and sibling facets.
 */

import { clear, el } from "../dom.js";
import { entityTable, plainValue, rowNameLink } from "../render.js";
import { formatHash, parseHash } from "../router.js";
import type { AppContext } from "../app.js";
import type { AppRoute } from "../router.js";
import type {
  EntityPage,
  FacetDoc,
  FilterEntry,
  PlanDoc,
  PropertyDoc,
} from "../types.js";

const PAGE_SIZE = 25;
const FACET_PAGE = 10;

/** Identity of a filter entry, for matching it to its facet. */
let filterKey = (entry: FilterEntry): string =>
  entry.sourcekey !== undefined ? `key:${entry.sourcekey}` : JSON.stringify(entry.source);

let facetKey = (facet: FacetDoc): string => JSON.stringify(facet.source.spec);

let sameValue = (a: unknown, b: unknown): boolean =>
  a === b || JSON.stringify(a) === JSON.stringify(b);

/** Initial filter state for a first visit: any preselected facet choices. */
let preselectedFilters = (plan: PlanDoc): FilterEntry[] => {
  let out: FilterEntry[] = [];
  for (let facet of plan.facets) {
    if (facet.preselected.length) {
      out.push({ source: facet.source.spec, choices: [...facet.preselected] });
    }
  }
  return out;
};

let toggleChoice = (filters: FilterEntry[], facet: FacetDoc, value: unknown): FilterEntry[] => {
  let key = facetKey(facet);
  let out = filters.map((f) => ({ ...f }));
  let entry = out.find((f) => f.choices !== undefined && filterKey(f) === key);
  if (!entry) {
    out.push({ source: facet.source.spec, choices: [value] });
    return out;
  }
  let choices = entry.choices!.filter((v) => !sameValue(v, value));
  if (choices.length === entry.choices!.length) choices = [...entry.choices!, value];
  if (!choices.length) return out.filter((f) => f !== entry);
  entry.choices = choices;
  return out;
};

export let renderRecordset = async (ctx: AppContext, route: AppRoute): Promise<void> => {
  let schema = route.schema ?? "";
  let table = route.table ?? "";
  let [filterPlan, compactPlan] = await Promise.all([
    ctx.api.getPlan(schema, table, "filter"),
    ctx.api.getPlan(schema, table, "compact"),
  ]);

  let filters = route.filters ?? preselectedFilters(filterPlan);
  let offset = route.offset ?? 0;
  let query = { filters, q: route.q, sort: route.sort, limit: PAGE_SIZE, offset };
  let page = await ctx.api.getEntities(schema, table, query);

  let here: AppRoute = { ...route, filters };
  let refresh = (changes: Partial<AppRoute>) => ctx.goTo({ ...here, ...changes });
  // Handlers may fire twice before a re-render; read filters at run time so
  // the second action builds on the first one's route, not a stale capture.
  let liveFilters = () => parseHash(window.location.hash).filters ?? filters;

  let root = el("div", { className: "recordset" });
  ctx.view.append(root);

  // -- header and toolbar ---------------------------------------------------

  let header = el("div", { className: "rs-header" }, [el("h2", { text: table })]);
  if (page.rights.insert) {
    header.append(
      el("a", {
        className: "btn btn-create",
        href: formatHash({ app: "recordedit", schema, table }),
        text: "Create",
      })
    );
  }
  root.append(header);

  let searchInput = el("input", {
    className: "rs-search",
    type: "search",
    value: route.q ?? "",
    placeholder: "Search",
  });
  let searchButton = el("button", { className: "rs-search-btn", type: "button", text: "Search" });
  let doSearch = () =>
    ctx.run(() => refresh({ q: searchInput.value || undefined, offset: undefined }));
  searchButton.addEventListener("click", () => void doSearch());
  searchInput.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") void doSearch();
  });
  root.append(el("div", { className: "rs-toolbar" }, [searchInput, searchButton]));

  // -- active filter chips --------------------------------------------------

  if (filters.length) {
    let chips = el("div", { className: "rs-chips" });
    filters.forEach((entry, index) => {
      let facet = filterPlan.facets.find((f) => facetKey(f) === filterKey(entry));
      let label = facet?.display_name ?? entry.sourcekey ?? plainValue(entry.source);
      let detail = "";
      if (entry.choices) {
        detail = entry.choices.map((v) => (v === null ? "(no value)" : plainValue(v))).join(", ");
      } else if (entry.range) {
        detail = `${plainValue(entry.range.min)} .. ${plainValue(entry.range.max)}`;
      } else if (entry.search !== undefined) {
        detail = `~ ${entry.search}`;
      }
      let remove = el("button", { className: "chip-remove", type: "button", text: "x" });
      remove.addEventListener("click", () => {
        void ctx.run(() =>
          refresh({ filters: liveFilters().filter((_, i) => i !== index), offset: undefined })
        );
      });
      chips.append(
        el("span", { className: "chip" }, [
          el("span", { className: "chip-label", text: `${label}: ${detail}` }),
          remove,
        ])
      );
    });
    root.append(chips);
  }

  // -- body: facets beside results ------------------------------------------

  let facetsPanel = el("aside", { className: "rs-facets" });
  let results = el("section", { className: "rs-results" });
  root.append(el("div", { className: "rs-body" }, [facetsPanel, results]));

  let facetJobs = filterPlan.facets.map((facet, index) => {
    let panel = el("div", { className: "facet", dataset: { facet: String(index) } });
    facetsPanel.append(panel);
    return renderFacet(ctx, panel, facet, {
      schema,
      table,
      filters,
      liveFilters,
      q: route.q,
      refresh,
    });
  });

  renderResults(ctx, results, compactPlan, page, { schema, table, route: here, refresh });

  await Promise.all(facetJobs);
};

// -- facet panels -----------------------------------------------------------

interface FacetEnv {
  schema: string;
  table: string;
  /** Filter state this panel was rendered from. */
  filters: FilterEntry[];
  /** Filter state right now, for handlers that fire after later changes. */
  liveFilters: () => FilterEntry[];
  q?: string;
  refresh: (changes: Partial<AppRoute>) => Promise<void>;
}

let renderFacet = async (
  ctx: AppContext,
  panel: HTMLElement,
  facet: FacetDoc,
  env: FacetEnv
): Promise<void> => {
  panel.append(el("h4", { className: "facet-name", text: facet.display_name }));
  let key = facetKey(facet);
  let own = env.filters.filter((f) => filterKey(f) === key);

  if (facet.kind === "range") {
    renderRangeFacet(ctx, panel, facet, env, own);
    return;
  }
  if (facet.kind === "text_search") {
    renderSearchFacet(ctx, panel, facet, env, own);
    return;
  }
  await renderChoiceFacet(ctx, panel, facet, env, own, FACET_PAGE);
};

let renderChoiceFacet = async (
  ctx: AppContext,
  panel: HTMLElement,
  facet: FacetDoc,
  env: FacetEnv,
  own: FilterEntry[],
  limit: number
): Promise<void> => {
  let selected = own.find((f) => f.choices !== undefined)?.choices ?? [];
  let doc;
  try {
    doc = await ctx.api.getFacetValues(env.schema, env.table, facet.source.spec, {
      filters: env.filters,
      q: env.q,
      limit,
    });
  } catch (error) {
    panel.append(el("div", { className: "facet-error", text: String(error) }));
    return;
  }

  let list = el("ul", { className: "facet-values" });
  for (let item of doc.values) {
    let box = el("input", { type: "checkbox", checked: selected.some((v) => sameValue(v, item.value)) });
    box.addEventListener("change", () => {
      void ctx.run(() =>
        env.refresh({ filters: toggleChoice(env.liveFilters(), facet, item.value), offset: undefined })
      );
    });
    let label = item.value === null ? "(no value)" : item.formatted || plainValue(item.value);
    list.append(
      el("li", { className: "facet-value" }, [
        el("label", {}, [
          box,
          el("span", { className: "facet-label", text: label }),
          el("span", { className: "facet-count", text: ` (${item.count})` }),
        ]),
      ])
    );
  }
  panel.append(list);

  if (doc.total > doc.values.length) {
    let more = el("button", { className: "facet-more", type: "button", text: "More" });
    more.addEventListener("click", () => {
      void ctx.run(async () => {
        clear(panel);
        panel.append(el("h4", { className: "facet-name", text: facet.display_name }));
        await renderChoiceFacet(ctx, panel, facet, env, own, limit + FACET_PAGE);
      });
    });
    panel.append(more);
  }
};

let rangeInputType = (endType: string | null): string => {
  if (endType === "int" || endType === "float") return "number";
  if (endType === "date") return "date";
  if (endType === "timestamp") return "datetime-local";
  return "text";
};

let renderRangeFacet = (
  ctx: AppContext,
  panel: HTMLElement,
  facet: FacetDoc,
  env: FacetEnv,
  own: FilterEntry[]
): void => {
  let current = own.find((f) => f.range !== undefined)?.range;
  let type = rangeInputType(facet.source.end_type);
  let min = el("input", { className: "facet-min", type, value: plainValue(current?.min) });
  let max = el("input", { className: "facet-max", type, value: plainValue(current?.max) });
  let apply = el("button", { className: "facet-apply", type: "button", text: "Apply" });
  apply.addEventListener("click", () => {
    void ctx.run(() => {
      let key = facetKey(facet);
      let rest = env.liveFilters().filter((f) => !(filterKey(f) === key && f.range !== undefined));
      if (min.value !== "" || max.value !== "") {
        let range: { min?: unknown; max?: unknown } = {};
        if (min.value !== "") range.min = min.value;
        if (max.value !== "") range.max = max.value;
        rest = [...rest, { source: facet.source.spec, range }];
      }
      return env.refresh({ filters: rest, offset: undefined });
    });
  });
  panel.append(el("div", { className: "facet-range" }, [min, max, apply]));
};

let renderSearchFacet = (
  ctx: AppContext,
  panel: HTMLElement,
  facet: FacetDoc,
  env: FacetEnv,
  own: FilterEntry[]
): void => {
  let current = own.find((f) => f.search !== undefined)?.search ?? "";
  let input = el("input", { className: "facet-search", type: "search", value: current });
  let apply = el("button", { className: "facet-apply", type: "button", text: "Apply" });
  apply.addEventListener("click", () => {
    void ctx.run(() => {
      let key = facetKey(facet);
      let rest = env.liveFilters().filter((f) => !(filterKey(f) === key && f.search !== undefined));
      if (input.value !== "") rest = [...rest, { source: facet.source.spec, search: input.value }];
      return env.refresh({ filters: rest, offset: undefined });
    });
  });
  panel.append(el("div", { className: "facet-text" }, [input, apply]));
};

// -- result table -----------------------------------------------------------

interface ResultEnv {
  schema: string;
  table: string;
  route: AppRoute;
  refresh: (changes: Partial<AppRoute>) => Promise<void>;
}

let nextSort = (current: string | undefined, column: string): string | undefined => {
  if (current === column) return `-${column}`;
  if (current === `-${column}`) return undefined;
  return column;
};

let sortMarkerFor =
  (current: string | undefined) =>
  (prop: PropertyDoc): string => {
    if (prop.source.hops.length) return "";
    let column = prop.source.end_column;
    if (current === column) return " ▲";
    if (current === `-${column}`) return " ▼";
    return "";
  };

let renderResults = (
  ctx: AppContext,
  container: HTMLElement,
  plan: PlanDoc,
  page: EntityPage,
  env: ResultEnv
): void => {
  let canEdit = page.rights.update;
  let canDelete = page.rights.delete;
  let selected = new Set<string>();

  let count = el("div", {
    className: "rs-count",
    text: page.rows.length
      ? `${page.offset + 1}-${page.offset + page.rows.length} of ${page.total}`
      : `0 of ${page.total}`,
  });
  container.append(count);

  if (canEdit || canDelete) {
    let bulk = el("div", { className: "rs-bulk" });
    if (canDelete) {
      let remove = el("button", { className: "btn btn-delete", type: "button", text: "Delete selected" });
      remove.addEventListener("click", () => {
        void ctx.run(async () => {
          if (!selected.size) return;
          await ctx.api.deleteRows(env.schema, env.table, [...selected]);
          await env.refresh({});
        });
      });
      bulk.append(remove);
    }
    if (canEdit) {
      let edit = el("button", { className: "btn btn-edit", type: "button", text: "Edit selected" });
      let panel = el("div", { className: "bulk-edit hidden" });
      edit.addEventListener("click", () => {
        void ctx.run(async () => {
          if (!panel.classList.contains("hidden")) {
            panel.classList.add("hidden");
            return;
          }
          clear(panel);
          let entryPlan = await ctx.api.getPlan(env.schema, env.table, "entry/edit");
          let picker = el("select", { className: "bulk-column" });
          for (let prop of entryPlan.properties) {
            if (prop.kind === "entity_ref" || prop.kind === "pseudo" || prop.input_disabled) continue;
            if (prop.source.hops.length) continue;
            picker.append(
              el("option", { value: prop.source.end_column, text: prop.display_name })
            );
          }
          let value = el("input", { className: "bulk-value", type: "text" });
          let apply = el("button", { className: "bulk-apply", type: "button", text: "Apply to selected" });
          apply.addEventListener("click", () => {
            void ctx.run(async () => {
              if (!selected.size || !picker.value) return;
              await ctx.api.updateRows(env.schema, env.table, [...selected], {
                [picker.value]: value.value === "" ? null : value.value,
              });
              await env.refresh({});
            });
          });
          panel.append(picker, value, apply);
          panel.classList.remove("hidden");
        });
      });
      bulk.append(edit, panel);
    }
    container.append(bulk);
  }

  if (!page.rows.length) {
    container.append(el("div", { className: "empty-state", text: "No matching rows." }));
    return;
  }

  let leadCell = (entity: { rid: string } & Parameters<typeof rowNameLink>[2]) => {
    let cell = el("span", { className: "lead-cell" });
    if (canEdit || canDelete) {
      let box = el("input", { className: "row-select", type: "checkbox", dataset: { rid: entity.rid } });
      box.addEventListener("change", () => {
        if (box.checked) selected.add(entity.rid);
        else selected.delete(entity.rid);
      });
      cell.append(box);
    }
    cell.append(rowNameLink(env.schema, env.table, entity));
    if (canEdit) {
      cell.append(
        el("a", {
          className: "row-edit",
          href: formatHash({ app: "recordedit", schema: env.schema, table: env.table, rid: entity.rid }),
          text: "edit",
        })
      );
    }
    return cell;
  };

  container.append(
    entityTable(plan, page.rows, {
      leadCell,
      leadHeader: "",
      sortMarker: sortMarkerFor(env.route.sort),
      onHeaderClick: (prop) => {
        void ctx.run(() =>
          env.refresh({ sort: nextSort(env.route.sort, prop.source.end_column), offset: undefined })
        );
      },
    })
  );

  let pager = el("div", { className: "rs-pager" });
  let prev = el("button", {
    className: "rs-prev",
    type: "button",
    text: "Prev",
    disabled: page.offset === 0,
  });
  prev.addEventListener("click", () => {
    void ctx.run(() =>
      env.refresh({ offset: Math.max(0, page.offset - page.limit) || undefined })
    );
  });
  let next = el("button", {
    className: "rs-next",
    type: "button",
    text: "Next",
    disabled: page.offset + page.rows.length >= page.total,
  });
  next.addEventListener("click", () => {
    void ctx.run(() => env.refresh({ offset: page.offset + page.limit }));
  });
  pager.append(prev, next);
  container.append(pager);
};
