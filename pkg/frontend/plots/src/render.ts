// One PlotSpec in, one figure plus one numeric sidecar out. All inputs
// are validated before anything is written, so a bad CSV never leaves a
// half-finished file pair behind.

import fs from "node:fs";
import path from "node:path";

import { Kind, loadRows, loadSummary } from "./schema.js";
import {
  FitLine,
  Series,
  contractionSeries,
  momentsSeries,
  scalingSeries,
} from "./series.js";
import { Axes, renderSvg } from "./svg.js";

export interface PlotSpec {
  csvPath: string;
  summaryPath: string;
  kind: Kind;
  outPath: string;
  // reference-slope -1/2 line on the scaling figure
  guide?: boolean;
}

export interface Sidecar {
  schema_version: 1;
  kind: Kind;
  experiment: string;
  source: { csv: string; summary: string };
  series: Series[];
  fit: FitLine | null;
}

export interface RenderResult {
  figurePath: string;
  sidecarPath: string;
  sidecar: Sidecar;
  notes: string[];
}

export function sidecarPathFor(outPath: string): string {
  const ext = path.extname(outPath);
  const stem = ext === "" ? outPath : outPath.slice(0, -ext.length);
  return stem + ".sidecar.json";
}

const allPositive = (series: Series[]): boolean =>
  series.every((s) => s.y.every((v) => !Number.isFinite(v) || v > 0));

export function render(spec: PlotSpec): RenderResult {
  const summary = loadSummary(spec.summaryPath);
  const rows = loadRows(spec.csvPath, spec.kind);

  let series: Series[];
  let fit: FitLine | null = null;
  let axes: Axes;
  let title: string;
  if (spec.kind === "scaling") {
    const built = scalingSeries(rows, summary, spec.guide ?? false);
    series = built.series;
    fit = built.fit;
    axes = {
      xLabel: "N (particles)",
      yLabel: "plateau of mean f-distance",
      xLog: true,
      yLog: allPositive(series),
      xTicks: series[0].x,
    };
    title = `coupling distance plateau vs N, ${summary.experiment}`;
    if (fit) title += ` (fitted slope ${fit.slope.toFixed(3)})`;
  } else if (spec.kind === "contraction") {
    series = contractionSeries(rows, summary);
    axes = {
      xLabel: "t",
      yLabel: "mean f-distance",
      xLog: false,
      yLog: allPositive(series),
    };
    title = `contraction of the coupled pair, ${summary.experiment}`;
  } else {
    series = momentsSeries(rows, summary);
    axes = {
      xLabel: "t",
      yLabel: "mean second moment",
      xLog: false,
      yLog: false,
    };
    title = `second moments vs uniform bound, ${summary.experiment}`;
  }

  const notes: string[] = [];
  let figurePath = spec.outPath;
  if (figurePath.toLowerCase().endsWith(".png")) {
    // no raster backend in a bare node runtime; the sidecar carries the
    // semantics either way
    figurePath = figurePath.slice(0, -4) + ".svg";
    notes.push(`png output unavailable, writing ${figurePath} instead`);
  }

  const sidecar: Sidecar = {
    schema_version: 1,
    kind: spec.kind,
    experiment: summary.experiment,
    source: {
      csv: path.basename(spec.csvPath),
      summary: path.basename(spec.summaryPath),
    },
    series,
    fit,
  };

  const svg = renderSvg(title, axes, series);
  const dir = path.dirname(path.resolve(figurePath));
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(figurePath, svg);
  const sidecarPath = sidecarPathFor(figurePath);
  // JSON.stringify turns non-finite numbers into null, which is what the
  // sidecar schema wants
  fs.writeFileSync(sidecarPath, JSON.stringify(sidecar, null, 2) + "\n");
  return { figurePath, sidecarPath, sidecar, notes };
}
