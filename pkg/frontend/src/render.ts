/**
 * Turns plan properties plus entity documents into display nodes.
 *
 * Values are shown exactly as the service formatted or rendered them; the
 * only client-side step is choosing which server field to display.
 */

import { el, html } from "./dom.js";
import { formatHash } from "./router.js";
import type { EntityDoc, PlanDoc, PropertyDoc } from "./types.js";

/** Raw fallback for values the server had no formatting rule for. */
export let plainValue = (value: unknown): string => {
  if (value === null || value === undefined) return "";
  if (Array.isArray(value)) return value.map((x) => plainValue(x)).join(", ");
  return String(value);
};

export let recordHref = (schema: string, table: string, rid: string): string =>
  formatHash({ app: "record", schema, table, rid });

/** The table a reference property points at, from its resolved source. */
export let refTarget = (prop: PropertyDoc): [string, string] | null => {
  let hops = prop.source.hops;
  if (!hops.length) return null;
  return hops[hops.length - 1].table;
};

export let rowNameLink = (schema: string, table: string, entity: EntityDoc): HTMLElement => {
  let link = el("a", { className: "row-link", href: recordHref(schema, table, entity.rid) });
  link.innerHTML = entity.row_name_html;
  return link;
};

/**
 * Display node for property `index` of `entity`, resolved against the same
 * plan the server built the document with.
 */
export let cellContent = (plan: PlanDoc, index: number, entity: EntityDoc): HTMLElement => {
  let prop = plan.properties[index];
  let key = String(index);

  if (prop.kind === "entity_ref") {
    let ref = entity.refs[key];
    if (!ref) return el("span", { className: "cell-empty" });
    let target = refTarget(prop);
    if (!target) return html(ref.row_name_html, "cell-ref");
    let link = el("a", { className: "cell-ref", href: recordHref(target[0], target[1], ref.rid) });
    link.innerHTML = ref.row_name_html;
    return link;
  }

  if (prop.kind === "pseudo") {
    let pseudo = entity.pseudo[key];
    if (!pseudo) return el("span", { className: "cell-empty" });
    if (pseudo.rendered !== null) return html(pseudo.rendered, "cell-rendered");
    return el("span", { className: "cell-plain", text: plainValue(pseudo.value) });
  }

  let column = prop.source.end_column;
  let rendered = entity.rendered[column];
  if (rendered !== undefined && rendered !== null) return html(rendered, "cell-rendered");

  let text = entity.formatted[column] ?? plainValue(entity.values[column]);
  if (prop.kind === "asset" && entity.values[column]) {
    return el("a", { className: "cell-asset", href: String(entity.values[column]), text });
  }
  return el("span", { className: "cell-plain", text });
};

/** Result table over entity docs, one column per plan property. */
export let entityTable = (
  plan: PlanDoc,
  rows: EntityDoc[],
  options: {
    onHeaderClick?: (prop: PropertyDoc) => void;
    sortMarker?: (prop: PropertyDoc) => string;
    leadCell?: (entity: EntityDoc) => HTMLElement;
    leadHeader?: string;
  } = {}
): HTMLTableElement => {
  let head = el("tr");
  if (options.leadCell) head.append(el("th", { className: "col-lead", text: options.leadHeader ?? "" }));
  for (let prop of plan.properties) {
    let label = prop.display_name + (options.sortMarker ? options.sortMarker(prop) : "");
    let th = el("th", { text: label, title: prop.tooltip ?? undefined });
    if (options.onHeaderClick && prop.kind !== "pseudo" && prop.source.hops.length === 0) {
      th.classList.add("sortable");
      th.addEventListener("click", () => options.onHeaderClick!(prop));
    }
    head.append(th);
  }

  let body = el("tbody");
  for (let entity of rows) {
    let tr = el("tr", { dataset: { rid: entity.rid } });
    if (options.leadCell) tr.append(el("td", { className: "col-lead" }, [options.leadCell(entity)]));
    for (let index = 0; index < plan.properties.length; index += 1) {
      tr.append(el("td", {}, [cellContent(plan, index, entity)]));
    }
    body.append(tr);
  }

  return el("table", { className: "entity-table" }, [el("thead", {}, [head]), body]);
};
