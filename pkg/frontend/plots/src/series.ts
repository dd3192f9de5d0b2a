// Series assembly. Everything numeric that appears in a figure is built
// here and written verbatim to the sidecar; the SVG is drawn from the
// same arrays.

import { Row, SchemaError, Summary } from "./schema.js";

export interface Series {
  name: string;
  x: number[];
  y: number[];
  // one standard error per point, or null for exact curves
  err: (number | null)[] | null;
}

export interface FitLine {
  slope: number;
  intercept: number;
}

export function mean(values: number[]): number {
  let s = 0;
  for (const v of values) s += v;
  return s / values.length;
}

export function stdError(values: number[]): number | null {
  const n = values.length;
  if (n < 2) return null;
  const m = mean(values);
  let ss = 0;
  for (const v of values) ss += (v - m) * (v - m);
  return Math.sqrt(ss / (n - 1)) / Math.sqrt(n);
}

export function olsFit(x: number[], y: number[]): FitLine {
  const xm = mean(x);
  const ym = mean(y);
  let num = 0;
  let den = 0;
  for (let i = 0; i < x.length; i++) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  const slope = num / den;
  return { slope, intercept: ym - slope * xm };
}

function groupBy(rows: Row[], key: string): Map<number, Row[]> {
  // float keys are safe here: every row at the same grid point carries a
  // bit-identical value because the producer prints full precision
  const groups = new Map<number, Row[]>();
  for (const row of rows) {
    const bucket = groups.get(row[key]);
    if (bucket) {
      bucket.push(row);
    } else {
      groups.set(row[key], [row]);
    }
  }
  return groups;
}

function sortedKeys(groups: Map<number, Row[]>): number[] {
  return [...groups.keys()].sort((a, b) => a - b);
}

function requireSingleN(rows: Row[], kind: string): void {
  const seen = sortedKeys(groupBy(rows, "N"));
  if (seen.length !== 1) {
    throw new SchemaError(
      `${kind} figure expects a single particle count; ` +
        `CSV has N = ${seen.join(", ")}`,
    );
  }
}

// Per-replication time means at each output time, in replication order.
function timeProfile(
  rows: Row[],
  column: string,
): { times: number[]; y: number[]; err: (number | null)[] } {
  const byTime = groupBy(rows, "t");
  const times = sortedKeys(byTime);
  const y: number[] = [];
  const err: (number | null)[] = [];
  for (const t of times) {
    const values = byTime.get(t)!.map((r) => r[column]);
    y.push(mean(values));
    err.push(stdError(values));
  }
  return { times, y, err };
}

export function contractionSeries(rows: Row[], summary: Summary): Series[] {
  const section = summary.contraction;
  if (!section) {
    throw new SchemaError(
      'summary.json has no "contraction" section; pass the summary written ' +
        "next to the contraction results.csv",
    );
  }
  requireSingleN(rows, "contraction");
  const decay = 2 * (summary.constants.c - summary.constants.eta);
  const w0 = section.w_f_initial;

  const profile = timeProfile(rows, "mean_f_distance");
  const series: Series[] = [
    { name: "empirical", x: profile.times, y: profile.y, err: profile.err },
    {
      name: "envelope",
      x: profile.times,
      y: profile.times.map((t) => Math.exp(-decay * t) * w0),
      err: null,
    },
  ];

  const byTime = groupBy(rows, "t");
  const bound = profile.times.map((t) => byTime.get(t)![0].bound_theorem);
  if (bound.some((v) => Number.isFinite(v))) {
    series.push({ name: "bound", x: profile.times, y: bound, err: null });
  }
  return series;
}

export interface ScalingBuild {
  series: Series[];
  fit: FitLine | null;
}

export function scalingSeries(
  rows: Row[],
  summary: Summary,
  guide: boolean,
): ScalingBuild {
  const section = summary.poc_scaling;
  if (!section) {
    throw new SchemaError(
      'summary.json has no "poc_scaling" section; pass the summary written ' +
        "next to the scaling results.csv",
    );
  }
  const tEnd = summary.config.t_end;
  if (typeof tEnd !== "number") {
    throw new SchemaError('summary config lacks numeric "t_end"');
  }
  // same plateau window rule as the producer: the trailing fraction of the
  // horizon, with a tiny tolerance so the cut time itself is included
  const cut = (1 - section.plateau_fraction) * tEnd - 1e-12;
  const windowOf = (repRows: Row[]): Row[] => {
    const inWindow = repRows.filter((r) => r.t >= cut);
    return inWindow.length > 0 ? inWindow : [repRows[repRows.length - 1]];
  };

  const byN = groupBy(rows, "N");
  const nValues = sortedKeys(byN);
  const plateau: Series = { name: "plateau", x: nValues, y: [], err: [] };
  const boundY: number[] = [];
  for (const n of nValues) {
    const byRep = groupBy(byN.get(n)!, "replication");
    const perRep: number[] = [];
    for (const rep of sortedKeys(byRep)) {
      const repRows = byRep.get(rep)!.slice().sort((a, b) => a.t - b.t);
      perRep.push(mean(windowOf(repRows).map((r) => r.mean_f_distance)));
    }
    plateau.y.push(mean(perRep));
    plateau.err!.push(stdError(perRep));
    // the bound depends only on N and t, so one replication suffices
    const first = byRep.get(sortedKeys(byRep)[0])!.slice()
      .sort((a, b) => a.t - b.t);
    boundY.push(mean(windowOf(first).map((r) => r.bound_theorem)));
  }

  const series: Series[] = [plateau];
  let fit: FitLine | null = null;
  if (plateau.y.every((v) => v > 0)) {
    fit = olsFit(nValues.map(Math.log), plateau.y.map(Math.log));
    const line = (n: number) =>
      Math.exp(fit!.intercept + fit!.slope * Math.log(n));
    const nLo = nValues[0];
    const nHi = nValues[nValues.length - 1];
    series.push({
      name: "fit",
      x: [nLo, nHi],
      y: [line(nLo), line(nHi)],
      err: null,
    });
  }
  if (boundY.some((v) => Number.isFinite(v))) {
    series.push({ name: "bound", x: nValues, y: boundY, err: null });
  }
  if (guide && plateau.y[0] > 0) {
    const nLo = nValues[0];
    const nHi = nValues[nValues.length - 1];
    series.push({
      name: "guide",
      x: [nLo, nHi],
      y: [plateau.y[0], plateau.y[0] * Math.sqrt(nLo / nHi)],
      err: null,
    });
  }
  return { series, fit };
}

export function momentsSeries(rows: Row[], summary: Summary): Series[] {
  requireSingleN(rows, "moments");
  const nonlinear = timeProfile(rows, "second_moment_nonlinear");
  const particles = timeProfile(rows, "second_moment_particles");
  const series: Series[] = [
    {
      name: "nonlinear",
      x: nonlinear.times,
      y: nonlinear.y,
      err: nonlinear.err,
    },
    {
      name: "particles",
      x: particles.times,
      y: particles.y,
      err: particles.err,
    },
  ];
  const bound = summary.constants.c_moment;
  if (typeof bound === "number" && Number.isFinite(bound)) {
    const times = nonlinear.times;
    series.push({
      name: "bound",
      x: [times[0], times[times.length - 1]],
      y: [bound, bound],
      err: null,
    });
  }
  return series;
}
