/**
 * Detailed view of one entity: property table in plan order with
 * server-rendered HTML shown verbatim, related-entity sections with
 * rights-gated "Add", and a section navigation panel.
 */

import { el, html } from "../dom.js";
import { cellContent, entityTable, plainValue, rowNameLink } from "../render.js";
import { formatHash } from "../router.js";
import type { AppContext } from "../app.js";
import type { AppRoute, Prefill } from "../router.js";
import type { PlanDoc, RecordDoc, RelatedSection } from "../types.js";

export let renderRecord = async (ctx: AppContext, route: AppRoute): Promise<void> => {
  let schema = route.schema ?? "";
  let table = route.table ?? "";
  let rid = route.rid ?? "";
  let doc = await ctx.api.getRecord(schema, table, rid);

  // Compact plans for related tables and for "Add" targets, fetched once each.
  let planCache = new Map<string, Promise<PlanDoc>>();
  let compactPlan = (s: string, t: string): Promise<PlanDoc> => {
    let key = `${s}:${t}`;
    let hit = planCache.get(key);
    if (hit) return hit;
    let job = ctx.api.getPlan(s, t, "compact");
    planCache.set(key, job);
    return job;
  };

  let sectionPlans = await Promise.all(
    doc.related.map(async (section) => {
      let addTarget = addTableOf(doc, section);
      let [rowsPlan, addPlan] = await Promise.all([
        compactPlan(section.table[0], section.table[1]),
        addTarget ? compactPlan(addTarget[0], addTarget[1]) : Promise.resolve(null),
      ]);
      return { rowsPlan, addPlan };
    })
  );

  let root = el("div", { className: "record" });
  ctx.view.append(root);

  let nav = el("aside", { className: "rec-nav" });
  let main = el("section", { className: "rec-main" });
  root.append(nav, main);

  // -- header ---------------------------------------------------------------

  let title = el("h2", { className: "rec-title" });
  title.innerHTML = doc.entity.row_name_html;
  let actions = el("div", { className: "rec-actions" });
  if (doc.rights.update) {
    actions.append(
      el("a", {
        className: "btn btn-edit",
        href: formatHash({ app: "recordedit", schema, table, rid }),
        text: "Edit",
      })
    );
  }
  if (doc.rights.delete) {
    let remove = el("button", { className: "btn btn-delete", type: "button", text: "Delete" });
    remove.addEventListener("click", () => {
      void ctx.run(async () => {
        await ctx.api.deleteRows(schema, table, [rid]);
        await ctx.goTo({ app: "recordset", schema, table });
      });
    });
    actions.append(remove);
  }
  main.append(el("div", { className: "rec-header" }, [title, actions]));

  // -- property section -----------------------------------------------------

  let partByIndex = new Map(doc.properties.map((p) => [p.index, p]));
  let props = el("table", { className: "rec-props", id: "section-properties" });
  doc.plan.properties.forEach((prop, index) => {
    let cell: HTMLElement;
    let part = partByIndex.get(index);
    if (part) {
      cell =
        part.rendered !== null
          ? html(part.rendered, "cell-rendered")
          : el("span", { className: "cell-plain", text: plainValue(part.value) });
    } else {
      cell = cellContent(doc.plan, index, doc.entity);
    }
    props.append(
      el("tr", {}, [
        el("th", { text: prop.display_name, title: prop.tooltip ?? undefined }),
        el("td", {}, [cell]),
      ])
    );
  });
  main.append(props);

  // -- related sections -----------------------------------------------------

  nav.append(el("a", { className: "nav-link", href: "#section-properties", text: "Properties" }));

  doc.related.forEach((section, at) => {
    let id = `section-related-${section.index}`;
    nav.append(el("a", { className: "nav-link", href: `#${id}`, text: section.name }));

    let { rowsPlan, addPlan } = sectionPlans[at];
    let head = el("div", { className: "related-header" }, [
      el("h3", { text: `${section.name} (${section.total})` }),
    ]);

    let addTarget = addTableOf(doc, section);
    if (addTarget && addPlan && addPlan.rights?.insert) {
      let prefill: Prefill = { fkey: addFkeyOf(doc, section)!, rid };
      head.append(
        el("a", {
          className: "btn btn-add",
          href: formatHash({
            app: "recordedit",
            schema: addTarget[0],
            table: addTarget[1],
            prefill,
          }),
          text: "Add",
        })
      );
    }

    let body: HTMLElement;
    if (section.rows.length) {
      body = entityTable(rowsPlan, section.rows, {
        leadCell: (entity) => rowNameLink(section.table[0], section.table[1], entity),
      });
    } else {
      body = el("div", { className: "empty-state", text: "None." });
    }

    main.append(el("section", { className: "related-section", id }, [head, body]));
  });
};

/** First hop of the relationship path: the table holding the inbound fkey. */
let addFkeyOf = (doc: RecordDoc, section: RelatedSection): [string, string] | null => {
  let rel = doc.plan.relationships[section.index];
  let hop = rel?.via.hops[0];
  return hop && hop.direction === "inbound" ? hop.fkey : null;
};

/**
 * Where "Add" creates a row: the inbound-fkey table, which for an
 * association path is the link table rather than the far entity.
 */
let addTableOf = (doc: RecordDoc, section: RelatedSection): [string, string] | null => {
  let rel = doc.plan.relationships[section.index];
  let hop = rel?.via.hops[0];
  return hop && hop.direction === "inbound" ? hop.table : null;
};
