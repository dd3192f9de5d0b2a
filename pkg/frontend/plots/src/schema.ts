// Input loading: the experiments results.csv and its summary.json.
// Validation failures throw SchemaError with column-level detail so the
// CLI can exit nonzero with a usable message.

import fs from "node:fs";
import Papa from "papaparse";

export const KINDS = ["scaling", "contraction", "moments"] as const;
export type Kind = (typeof KINDS)[number];

export class SchemaError extends Error {}

// Columns each figure kind reads. The CSV carries more; extras are ignored.
const NUMERIC_COLUMNS: Record<Kind, string[]> = {
  scaling: ["N", "replication", "t", "mean_f_distance", "bound_theorem"],
  contraction: ["N", "replication", "t", "mean_f_distance", "bound_theorem"],
  moments: [
    "N",
    "replication",
    "t",
    "second_moment_particles",
    "second_moment_nonlinear",
  ],
};

// bound_theorem is written as nan when no moment bound exists for the
// model; that is data, not a parse failure.
const NAN_OK = new Set(["bound_theorem"]);
const SPECIAL_FLOAT = /^-?(nan|inf(inity)?)$/i;

export interface Row {
  [column: string]: number;
}

export function requiredColumns(kind: Kind): string[] {
  return [...NUMERIC_COLUMNS[kind]];
}

export function loadRows(csvPath: string, kind: Kind): Row[] {
  const text = fs.readFileSync(csvPath, "utf8");
  if (text.trim() === "") {
    throw new SchemaError(`results CSV is empty: ${csvPath}`);
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  const missing = NUMERIC_COLUMNS[kind].filter((c) => !fields.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `results CSV lacks column(s) required for kind "${kind}": ` +
        `${missing.join(", ")} (file has: ${fields.join(", ")})`,
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(
      `results CSV has a header but no data rows: ${csvPath}`,
    );
  }

  const rows: Row[] = [];
  parsed.data.forEach((raw, i) => {
    const row: Row = {};
    for (const col of NUMERIC_COLUMNS[kind]) {
      const cell = raw[col];
      const value = Number(cell);
      if (!Number.isFinite(value)) {
        const special =
          typeof cell === "string" && SPECIAL_FLOAT.test(cell.trim());
        if (!(NAN_OK.has(col) && special)) {
          throw new SchemaError(
            `column "${col}", data row ${i + 1}: ` +
              `cannot read ${JSON.stringify(cell ?? "")} as a number`,
          );
        }
      }
      row[col] = value;
    }
    rows.push(row);
  });
  return rows;
}

export interface SummaryConstants {
  c: number;
  eta: number;
  decay_rate: number;
  c_moment: number | null;
  discretization_allowance: number | null;
  [key: string]: number | null;
}

export interface ContractionSection {
  n: number;
  replications: number;
  times: number[];
  mean_f: number[];
  std_error: (number | null)[];
  envelope: number[];
  plateau_term: number;
  w_f_initial: number;
  envelope_ok: boolean;
}

export interface ScalingSection {
  n_values: number[];
  replications: number;
  plateau_fraction: number;
  plateaus: Record<
    string,
    { mean: number; std_error: number | null; bound_theorem: number | null }
  >;
  slope: number | null;
  intercept: number | null;
}

export interface MomentsSection {
  n: number;
  replications: number;
  times: number[];
  second_moment_nonlinear: number[];
  second_moment_particles: number[];
  bound: number;
  passed: boolean;
}

export interface Summary {
  schema_version: number;
  experiment: string;
  constants: SummaryConstants;
  config: { t_end: number; [key: string]: unknown };
  contraction?: ContractionSection;
  poc_scaling?: ScalingSection;
  moments?: MomentsSection;
}

export function loadSummary(path: string): Summary {
  const text = fs.readFileSync(path, "utf8");
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    // The producer serializes IEEE specials as bare NaN/Infinity tokens,
    // which strict JSON rejects. Read them as null.
    obj = JSON.parse(text.replace(/\b(?:NaN|-?Infinity)\b/g, "null"));
  }
  if (typeof obj !== "object" || obj === null) {
    throw new SchemaError(`summary is not a JSON object: ${path}`);
  }
  const summary = obj as Summary;
  if (summary.schema_version !== 1) {
    throw new SchemaError(
      `unsupported summary schema_version ${summary.schema_version} in ${path}`,
    );
  }
  if (typeof summary.constants !== "object" || summary.constants === null) {
    throw new SchemaError(`summary has no "constants" object: ${path}`);
  }
  for (const key of ["c", "eta"]) {
    if (typeof summary.constants[key] !== "number") {
      throw new SchemaError(`summary constants lack numeric "${key}": ${path}`);
    }
  }
  if (typeof summary.config !== "object" || summary.config === null) {
    throw new SchemaError(`summary has no "config" object: ${path}`);
  }
  return summary;
}
