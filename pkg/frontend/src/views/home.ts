/** Catalog landing page: every visible table, grouped by schema. */

import { el } from "../dom.js";
import { formatHash } from "../router.js";
import type { AppContext } from "../app.js";

export let renderHome = async (ctx: AppContext): Promise<void> => {
  let model = await ctx.model();

  let header = el("div", { className: "home-header" }, [
    el("h2", { text: "Catalog" }),
    el("span", { className: "model-version", text: `model version ${model.version}` }),
  ]);
  ctx.view.append(header);

  for (let [schemaName, schema] of Object.entries(model.schemas)) {
    let tables = Object.keys(schema.tables);
    if (!tables.length) continue;
    let list = el("ul", { className: "table-list" });
    for (let tableName of tables) {
      let href = formatHash({ app: "recordset", schema: schemaName, table: tableName });
      list.append(el("li", {}, [el("a", { href, text: tableName })]));
    }
    ctx.view.append(
      el("section", { className: "schema-section" }, [
        el("h3", { text: schemaName }),
        list,
      ])
    );
  }

  if (model.diagnostics.length) {
    let list = el("ul", { className: "diagnostic-list" });
    for (let line of model.diagnostics) list.append(el("li", { text: line }));
    ctx.view.append(
      el("section", { className: "diagnostics" }, [
        el("h3", { text: "Annotation diagnostics" }),
        list,
      ])
    );
  }
};
