/**
 * Wire types for the catalog service JSON API.
 *
 * These mirror the published HTTP contract; the client treats every name
 * (schemas, tables, columns, constraints) as opaque data from /model and
 * /plan, never as compile-time knowledge.
 */

export interface Rights {
  select: boolean;
  insert: boolean;
  update: boolean;
  delete: boolean;
}

export interface ColumnDoc {
  name: string;
  type: string;
  nullable: boolean;
  is_system: boolean;
  comment: string | null;
  annotations: Record<string, unknown>;
  rights: Rights;
}

export interface KeyDoc {
  name: string | null;
  columns: string[];
}

export interface FkeyDoc {
  name: [string, string];
  from_columns: string[];
  to: { schema: string; table: string; columns: string[] };
  annotations: Record<string, unknown>;
}

export interface TableDoc {
  columns: ColumnDoc[];
  keys: KeyDoc[];
  foreign_keys: FkeyDoc[];
  annotations: Record<string, unknown>;
  rights: Rights;
}

export interface ModelDoc {
  version: number;
  client: { id: string | null; roles: string[] };
  schemas: Record<string, { tables: Record<string, TableDoc> }>;
  diagnostics: string[];
}

// -- plans ------------------------------------------------------------------

export interface HopDoc {
  direction: "inbound" | "outbound";
  fkey: [string, string];
  table: [string, string];
}

export interface SourceDoc {
  base_schema: string;
  base_table: string;
  hops: HopDoc[];
  end_column: string;
  end_type: string | null;
  entity_mode: boolean;
  multivalued: boolean;
  aggregate: string | null;
  spec: unknown;
}

export interface PropertyDoc {
  kind: "scalar" | "entity_ref" | "pseudo" | "asset";
  source: SourceDoc;
  display_name: string;
  tooltip: string | null;
  input_disabled: boolean;
  required: boolean;
  display: string | null;
  asset_map: Record<string, string> | null;
  fkey: [string, string] | null;
}

export interface RelationshipDoc {
  name: string;
  via: SourceDoc;
  association: [string, string] | null;
}

export interface FacetDoc {
  source: SourceDoc;
  display_name: string;
  kind: "choice" | "range" | "text_search";
  preselected: unknown[];
}

export interface PlanDoc {
  table: [string, string];
  context: string;
  properties: PropertyDoc[];
  relationships: RelationshipDoc[];
  facets: FacetDoc[];
  row_name: string;
  sort: { column: string; descending: boolean }[];
  rights?: Rights;
}

// -- data -------------------------------------------------------------------

export interface RefDoc {
  rid: string;
  row_name: string;
  row_name_html: string;
}

export interface EntityDoc {
  rid: string;
  values: Record<string, unknown>;
  formatted: Record<string, string>;
  rendered: Record<string, string | null>;
  refs: Record<string, RefDoc | null>;
  pseudo: Record<string, { value: unknown; rendered: string | null }>;
  row_name: string;
  row_name_html: string;
}

export interface EntityPage {
  rows: EntityDoc[];
  total: number;
  limit: number;
  offset: number;
  rights: Rights;
}

export interface RecordPropertyDoc {
  index: number;
  value: unknown;
  rendered: string | null;
}

export interface RelatedSection {
  index: number;
  name: string;
  table: [string, string];
  rows: EntityDoc[];
  total: number;
  rights: Rights;
  lazy: boolean;
}

export interface RecordDoc {
  entity: EntityDoc;
  properties: RecordPropertyDoc[];
  related: RelatedSection[];
  plan: PlanDoc;
  rights: Rights;
}

export interface FacetValue {
  value: unknown;
  count: number;
  formatted: string;
}

export interface FacetValuesDoc {
  values: FacetValue[];
  total: number;
}

export interface PickerDoc {
  target: [string, string];
  rows: EntityDoc[];
  total: number;
  diagnostics: string[];
}

export interface ErrorBody {
  code: string;
  message: string;
  location: string | null;
}

// -- filter wire format -----------------------------------------------------

/** One entry of the `filters` query parameter, as the service accepts it. */
export interface FilterEntry {
  source?: unknown;
  sourcekey?: string;
  choices?: unknown[];
  range?: { min?: unknown; max?: unknown };
  search?: string;
}
