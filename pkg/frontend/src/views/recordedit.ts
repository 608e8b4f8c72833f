/**
 * Data entry generated from the entry-context plan: typed inputs with
 * required and disabled markers, foreign-key pickers, multi-form bulk
 * create, and client-side pre-validation mirroring the plan's rules.
 */

import { clear, el } from "../dom.js";
import { entityTable, plainValue } from "../render.js";
import { formatHash } from "../router.js";
import type { AppContext } from "../app.js";
import type { AppRoute } from "../router.js";
import type { EntityDoc, FkeyDoc, ModelDoc, PlanDoc, PropertyDoc } from "../types.js";

interface RefState {
  values: Record<string, unknown> | null;
  label: string;
  /** from_columns of the backing constraint, for clearing in patch mode. */
  columns: string[];
}

interface FormState {
  root: HTMLElement;
  scalars: Map<string, HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement>;
  refs: Map<number, RefState>;
  refLabels: Map<number, HTMLElement>;
  errors: Map<string, HTMLElement>;
}

let findFkey = (model: ModelDoc, name: [string, string]): FkeyDoc | null => {
  for (let schema of Object.values(model.schemas)) {
    for (let table of Object.values(schema.tables)) {
      for (let fk of table.foreign_keys) {
        if (fk.name[0] === name[0] && fk.name[1] === name[1]) return fk;
      }
    }
  }
  return null;
};

let scalarInput = (
  prop: PropertyDoc,
  initial: unknown
): HTMLInputElement | HTMLTextAreaElement | HTMLSelectElement => {
  let type = prop.source.end_type;
  if (type === "boolean") {
    let select = el("select", { disabled: prop.input_disabled });
    select.append(el("option", { value: "", text: "" }));
    select.append(el("option", { value: "true", text: "true" }));
    select.append(el("option", { value: "false", text: "false" }));
    if (initial === true) select.value = "true";
    if (initial === false) select.value = "false";
    return select;
  }
  if (type === "markdown" || type === "longtext") {
    let area = el("textarea", { disabled: prop.input_disabled });
    area.value = initial === null || initial === undefined ? "" : String(initial);
    return area;
  }
  let inputType = "text";
  if (type === "int" || type === "float") inputType = "number";
  if (type === "date") inputType = "date";
  let input = el("input", {
    type: inputType,
    disabled: prop.input_disabled,
    value: initial === null || initial === undefined ? "" : String(initial),
  });
  if (type === "float") input.step = "any";
  if (type === "timestamp") input.placeholder = "YYYY-MM-DD HH:MM";
  return input;
};

let isNumberType = (prop: PropertyDoc): boolean =>
  prop.source.end_type === "int" || prop.source.end_type === "float";

let badNumber = (prop: PropertyDoc, raw: string): boolean => {
  if (!isNumberType(prop) || raw.trim() === "") return false;
  return Number.isNaN(Number(raw.replace(/,/g, "")));
};

export let renderRecordedit = async (ctx: AppContext, route: AppRoute): Promise<void> => {
  let schema = route.schema ?? "";
  let table = route.table ?? "";
  let rid = route.rid;
  let editing = rid !== undefined;
  let context = editing ? "entry/edit" : "entry/create";

  let [plan, model] = await Promise.all([ctx.api.getPlan(schema, table, context), ctx.model()]);

  let allowed = editing ? plan.rights?.update : plan.rights?.insert;
  if (!allowed) {
    ctx.view.append(
      el("div", {
        className: "no-rights",
        text: "The current identity has no permission for this form.",
      })
    );
    return;
  }

  let initialValues: Record<string, unknown> = {};
  if (editing) {
    let record = await ctx.api.getRecord(schema, table, rid!);
    initialValues = record.entity.values;
  }

  // A prefilled parent arrives as a constraint name plus the parent RID; the
  // referenced key values come from fetching that row.
  let prefillState: { fkey: [string, string]; values: Record<string, unknown>; label: string } | null =
    null;
  if (route.prefill) {
    let fk = findFkey(model, route.prefill.fkey);
    if (fk) {
      let parentDoc = await ctx.api.getRecord(fk.to.schema, fk.to.table, route.prefill.rid);
      let parent = parentDoc.entity;
      let values: Record<string, unknown> = {};
      fk.from_columns.forEach((from, i) => {
        values[from] = parent.values[fk.to.columns[i]];
      });
      prefillState = { fkey: route.prefill.fkey, values, label: parent.row_name };
    }
  }

  let root = el("div", { className: "recordedit" });
  ctx.view.append(root);
  root.append(
    el("div", { className: "re-header" }, [
      el("h2", { text: `${editing ? "Edit" : "Create"} ${table}` }),
    ])
  );

  let formsHost = el("div", { className: "re-forms" });
  root.append(formsHost);
  let forms: FormState[] = [];

  let planCache = new Map<string, Promise<PlanDoc>>();
  let compactPlan = (s: string, t: string): Promise<PlanDoc> => {
    let key = `${s}:${t}`;
    let hit = planCache.get(key);
    if (hit) return hit;
    let job = ctx.api.getPlan(s, t, "compact");
    planCache.set(key, job);
    return job;
  };

  // -- one form -------------------------------------------------------------

  let buildForm = (): FormState => {
    let form: FormState = {
      root: el("div", { className: "re-form" }),
      scalars: new Map(),
      refs: new Map(),
      refLabels: new Map(),
      errors: new Map(),
    };

    plan.properties.forEach((prop, index) => {
      if (prop.kind === "pseudo") return;
      let field = el("div", { className: "field", dataset: { name: prop.display_name } });
      let label = el("label", {}, [el("span", { text: prop.display_name })]);
      if (prop.required) label.append(el("span", { className: "required-marker", text: " *" }));
      field.append(label);

      if (prop.kind === "entity_ref") {
        let fk = prop.fkey ? findFkey(model, prop.fkey) : null;
        let columns = fk ? fk.from_columns : [];
        let initial: RefState = { values: null, label: "", columns };
        if (editing && fk) {
          let current: Record<string, unknown> = {};
          let any = false;
          for (let from of fk.from_columns) {
            current[from] = initialValues[from] ?? null;
            if (current[from] !== null && current[from] !== undefined) any = true;
          }
          if (any) initial = { values: current, label: plainValue(Object.values(current)), columns };
        }
        if (
          prefillState &&
          prop.fkey &&
          prop.fkey[0] === prefillState.fkey[0] &&
          prop.fkey[1] === prefillState.fkey[1]
        ) {
          initial = { values: prefillState.values, label: prefillState.label, columns };
        }
        form.refs.set(index, initial);

        let shown = el("span", { className: "ref-label", text: initial.label });
        form.refLabels.set(index, shown);
        let select = el("button", {
          className: "ref-select",
          type: "button",
          text: "Select...",
          disabled: prop.input_disabled,
        });
        select.addEventListener("click", () => {
          void ctx.run(() => openPicker(ctx, root, form, prop, index, model, compactPlan));
        });
        field.append(el("div", { className: "ref-field" }, [shown, select]));
        if (!prop.required && !prop.input_disabled) {
          let clearBtn = el("button", { className: "ref-clear", type: "button", text: "Clear" });
          clearBtn.addEventListener("click", () => {
            form.refs.set(index, { values: null, label: "", columns });
            shown.textContent = "";
          });
          field.append(clearBtn);
        }
      } else {
        let column = prop.source.end_column;
        let input = scalarInput(prop, initialValues[column]);
        input.classList.add("field-input");
        form.scalars.set(column, input);
        field.append(input);
        if (prop.kind === "asset" && !prop.input_disabled) {
          let upload = el("input", { className: "asset-file", type: "file" });
          upload.addEventListener("change", () => {
            let file = upload.files?.[0];
            if (!file) return;
            void ctx.run(async () => {
              let stored = await ctx.api.uploadAsset(file);
              (input as HTMLInputElement).value = stored.url;
            });
          });
          field.append(upload);
        }
      }

      let error = el("div", { className: "field-error hidden" });
      form.errors.set(String(index), error);
      field.append(error);
      form.root.append(field);
    });

    return form;
  };

  let addForm = () => {
    let form = buildForm();
    forms.push(form);
    if (!editing && forms.length > 1) {
      let remove = el("button", { className: "re-remove-form", type: "button", text: "Remove" });
      remove.addEventListener("click", () => {
        forms = forms.filter((f) => f !== form);
        form.root.remove();
      });
      form.root.prepend(remove);
    }
    formsHost.append(form.root);
  };

  addForm();

  // -- controls -------------------------------------------------------------

  let controls = el("div", { className: "re-controls" });
  if (!editing) {
    let more = el("button", { className: "re-add-form", type: "button", text: "Add another" });
    more.addEventListener("click", () => addForm());
    controls.append(more);
  }

  let submit = el("button", { className: "re-submit", type: "button", text: "Save" });
  submit.addEventListener("click", () => {
    void ctx.run(async () => {
      if (!validateAll(plan, forms)) return;
      if (editing) {
        let patch = collectRow(plan, forms[0], true);
        await ctx.api.updateRows(schema, table, [rid!], patch);
        await ctx.goTo({ app: "record", schema, table, rid });
        return;
      }
      let rows = forms.map((form) => collectRow(plan, form, false));
      let created = await ctx.api.createRows(schema, table, rows);
      if (created.length === 1) {
        await ctx.goTo({ app: "record", schema, table, rid: String(created[0].RID) });
      } else {
        await ctx.goTo({ app: "recordset", schema, table });
      }
    });
  });
  controls.append(submit);

  let cancel = el("a", {
    className: "re-cancel",
    text: "Cancel",
    href: editing
      ? formatHash({ app: "record", schema, table, rid })
      : formatHash({ app: "recordset", schema, table }),
  });
  controls.append(cancel);
  root.append(controls);
};

// -- validation and collection ----------------------------------------------

let setFieldError = (form: FormState, index: number, message: string | null) => {
  let node = form.errors.get(String(index));
  if (!node) return;
  if (message === null) {
    node.classList.add("hidden");
    node.textContent = "";
  } else {
    node.classList.remove("hidden");
    node.textContent = message;
  }
};

let validateAll = (plan: PlanDoc, forms: FormState[]): boolean => {
  let ok = true;
  for (let form of forms) {
    plan.properties.forEach((prop, index) => {
      if (prop.kind === "pseudo" || prop.input_disabled) return;
      setFieldError(form, index, null);
      if (prop.kind === "entity_ref") {
        if (prop.required && form.refs.get(index)?.values === null) {
          setFieldError(form, index, "required");
          ok = false;
        }
        return;
      }
      let input = form.scalars.get(prop.source.end_column);
      if (!input) return;
      let raw = input.value;
      if (prop.required && raw.trim() === "") {
        setFieldError(form, index, "required");
        ok = false;
      } else if (badNumber(prop, raw)) {
        setFieldError(form, index, "not a number");
        ok = false;
      }
    });
  }
  return ok;
};

/** Gather one row; in patch mode empty inputs become explicit nulls. */
let collectRow = (plan: PlanDoc, form: FormState, patchMode: boolean): Record<string, unknown> => {
  let row: Record<string, unknown> = {};
  plan.properties.forEach((prop, index) => {
    if (prop.kind === "pseudo" || prop.input_disabled) return;
    if (prop.kind === "entity_ref") {
      let state = form.refs.get(index);
      if (state?.values) Object.assign(row, state.values);
      else if (patchMode && state) {
        for (let column of state.columns) row[column] = null;
      }
      return;
    }
    let column = prop.source.end_column;
    let input = form.scalars.get(column);
    if (!input) return;
    let raw = input.value;
    if (raw === "") {
      if (patchMode) row[column] = null;
      return;
    }
    if (prop.source.end_type === "boolean") row[column] = raw === "true";
    else row[column] = raw;
  });
  return row;
};

// -- foreign key picker -----------------------------------------------------

/** Current raw form values, used to interpolate picker selection filters. */
let formValues = (form: FormState): Record<string, unknown> => {
  let out: Record<string, unknown> = {};
  for (let [column, input] of form.scalars) {
    if (input.value !== "") out[column] = input.value;
  }
  for (let state of form.refs.values()) {
    if (state.values) Object.assign(out, state.values);
  }
  return out;
};

let openPicker = async (
  ctx: AppContext,
  host: HTMLElement,
  form: FormState,
  prop: PropertyDoc,
  index: number,
  model: ModelDoc,
  compactPlan: (s: string, t: string) => Promise<PlanDoc>
): Promise<void> => {
  if (!prop.fkey) return;
  let fkey = prop.fkey;
  let modal = el("div", { className: "picker-modal" });
  let box = el("div", { className: "picker-box" });
  modal.append(box);
  host.append(modal);

  let close = el("button", { className: "picker-close", type: "button", text: "Close" });
  close.addEventListener("click", () => modal.remove());

  let search = el("input", { className: "picker-search", type: "search", placeholder: "Search" });
  let searchBtn = el("button", { className: "picker-search-btn", type: "button", text: "Search" });

  let rowsHost = el("div", { className: "picker-rows" });

  let load = async (q?: string) => {
    clear(rowsHost);
    let doc = await ctx.api.getPicker(fkey[0], fkey[1], formValues(form), q);
    let targetPlan = await compactPlan(doc.target[0], doc.target[1]);
    if (doc.diagnostics.length) {
      let list = el("ul", { className: "picker-diagnostics" });
      for (let line of doc.diagnostics) list.append(el("li", { text: line }));
      rowsHost.append(list);
    }
    let choose = (entity: EntityDoc) => {
      let fk = findFkey(model, fkey);
      if (!fk) return;
      let values: Record<string, unknown> = {};
      fk.from_columns.forEach((from, i) => {
        values[from] = entity.values[fk.to.columns[i]];
      });
      form.refs.set(index, { values, label: entity.row_name, columns: fk.from_columns });
      let shown = form.refLabels.get(index);
      if (shown) shown.textContent = entity.row_name;
      modal.remove();
    };
    if (!doc.rows.length) {
      rowsHost.append(el("div", { className: "empty-state", text: "No rows to choose from." }));
    } else {
      rowsHost.append(
        entityTable(targetPlan, doc.rows, {
          leadCell: (entity) => {
            let btn = el("button", {
              className: "picker-choose",
              type: "button",
              text: "Choose",
              dataset: { rid: entity.rid },
            });
            btn.addEventListener("click", () => choose(entity));
            return el("span", {}, [btn]);
          },
        })
      );
    }
    let createHref = formatHash({ app: "recordedit", schema: doc.target[0], table: doc.target[1] });
    rowsHost.append(
      el("a", { className: "picker-create", href: createHref, target: "_blank", text: "Create new" })
    );
  };

  searchBtn.addEventListener("click", () => {
    void ctx.run(() => load(search.value || undefined));
  });

  box.append(
    el("div", { className: "picker-header" }, [
      el("h3", { text: `Select ${prop.display_name}` }),
      close,
    ]),
    el("div", { className: "picker-toolbar" }, [search, searchBtn]),
    rowsHost
  );

  await load();
};
