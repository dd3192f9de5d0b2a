// Small SVG renderer: lines, markers, error bars, log or linear axes.
// The image is a convenience; every number it draws also lands in the
// sidecar, so nothing downstream should parse the SVG.

import { Series } from "./series.js";

export interface Axes {
  xLabel: string;
  yLabel: string;
  xLog: boolean;
  yLog: boolean;
  // explicit x tick values (used for the N axis where decades are too coarse)
  xTicks?: number[];
}

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 44, right: 168, bottom: 56, left: 76 };

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
const DASHES: Record<string, string> = {
  envelope: "7 4",
  fit: "7 4",
  bound: "2 3",
  guide: "1 3",
};
const MARKED = new Set(["empirical", "plateau", "nonlinear", "particles"]);

interface Scale {
  (value: number): number;
  ticks: number[];
}

function niceStep(rough: number): number {
  const power = Math.pow(10, Math.floor(Math.log10(rough)));
  for (const m of [1, 2, 5]) {
    if (rough <= m * power) return m * power;
  }
  return 10 * power;
}

function linearTicks(lo: number, hi: number): number[] {
  const step = niceStep((hi - lo) / 5);
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, e);
      if (v >= lo * 0.999 && v <= hi * 1.001) out.push(v);
    }
  }
  // decades only when 1-2-5 gets crowded
  if (out.length > 9) {
    return out.filter((v) => {
      const e = Math.log10(v);
      return Math.abs(e - Math.round(e)) < 1e-9;
    });
  }
  return out;
}

function makeScale(
  values: number[],
  log: boolean,
  outLo: number,
  outHi: number,
  tickOverride?: number[],
): Scale {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v) || (log && v <= 0)) continue;
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  if (!(lo < Infinity)) {
    lo = log ? 0.1 : 0;
    hi = 1;
  }
  if (lo === hi) {
    lo = log ? lo / 2 : lo - 0.5;
    hi = log ? hi * 2 : hi + 0.5;
  }
  let map: (v: number) => number;
  let ticks: number[];
  if (log) {
    const a = Math.log10(lo) - 0.05 * (Math.log10(hi) - Math.log10(lo) || 1);
    const b = Math.log10(hi) + 0.05 * (Math.log10(hi) - Math.log10(lo) || 1);
    map = (v) => outLo + ((Math.log10(v) - a) / (b - a)) * (outHi - outLo);
    ticks = tickOverride ?? logTicks(lo, hi);
  } else {
    const pad = 0.05 * (hi - lo);
    const a = lo - pad;
    const b = hi + pad;
    map = (v) => outLo + ((v - a) / (b - a)) * (outHi - outLo);
    ticks = tickOverride ?? linearTicks(a, b);
  }
  const scale = map as Scale;
  scale.ticks = ticks;
  return scale;
}

function formatTick(v: number): string {
  if (v === 0) return "0";
  const magnitude = Math.abs(v);
  if (magnitude >= 1e4 || magnitude < 1e-3) {
    return v.toExponential(0).replace("e+", "e");
  }
  return String(parseFloat(v.toPrecision(6)));
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

function pathFor(
  series: Series,
  sx: Scale,
  sy: Scale,
  yLog: boolean,
): string {
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < series.x.length; i++) {
    const y = series.y[i];
    if (!Number.isFinite(y) || (yLog && y <= 0)) {
      pen = false;
      continue;
    }
    const px = sx(series.x[i]).toFixed(2);
    const py = sy(y).toFixed(2);
    parts.push(`${pen ? "L" : "M"}${px} ${py}`);
    pen = true;
  }
  return parts.join(" ");
}

export function renderSvg(title: string, axes: Axes, series: Series[]): string {
  const plotL = MARGIN.left;
  const plotR = WIDTH - MARGIN.right;
  const plotT = MARGIN.top;
  const plotB = HEIGHT - MARGIN.bottom;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of series) {
    xs.push(...s.x);
    for (let i = 0; i < s.y.length; i++) {
      ys.push(s.y[i]);
      const e = s.err?.[i];
      if (typeof e === "number" && Number.isFinite(e)) {
        ys.push(s.y[i] + e, s.y[i] - e);
      }
    }
  }
  const sx = makeScale(xs, axes.xLog, plotL, plotR, axes.xTicks);
  const sy = makeScale(ys, axes.yLog, plotB, plotT);

  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
      `font-family="sans-serif" font-size="12">`,
  );
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  out.push(
    `<text x="${(plotL + plotR) / 2}" y="24" text-anchor="middle" ` +
      `font-size="15">${escapeXml(title)}</text>`,
  );

  // grid and ticks
  for (const t of sx.ticks) {
    const px = sx(t).toFixed(2);
    out.push(
      `<line x1="${px}" y1="${plotT}" x2="${px}" y2="${plotB}" ` +
        `stroke="#e0e0e0"/>`,
      `<text x="${px}" y="${plotB + 18}" text-anchor="middle">` +
        `${escapeXml(formatTick(t))}</text>`,
    );
  }
  for (const t of sy.ticks) {
    const py = sy(t).toFixed(2);
    out.push(
      `<line x1="${plotL}" y1="${py}" x2="${plotR}" y2="${py}" ` +
        `stroke="#e0e0e0"/>`,
      `<text x="${plotL - 8}" y="${py}" text-anchor="end" ` +
        `dominant-baseline="middle">${escapeXml(formatTick(t))}</text>`,
    );
  }
  out.push(
    `<rect x="${plotL}" y="${plotT}" width="${plotR - plotL}" ` +
      `height="${plotB - plotT}" fill="none" stroke="#333"/>`,
  );
  out.push(
    `<text x="${(plotL + plotR) / 2}" y="${HEIGHT - 14}" ` +
      `text-anchor="middle">${escapeXml(axes.xLabel)}</text>`,
  );
  out.push(
    `<text x="20" y="${(plotT + plotB) / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 20 ${(plotT + plotB) / 2})">` +
      `${escapeXml(axes.yLabel)}</text>`,
  );

  // series: line, then error bars, then markers
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const dash = DASHES[s.name] ? ` stroke-dasharray="${DASHES[s.name]}"` : "";
    const d = pathFor(s, sx, sy, axes.yLog);
    if (d.length > 0) {
      out.push(
        `<path d="${d}" fill="none" stroke="${color}" ` +
          `stroke-width="1.6"${dash}/>`,
      );
    }
    if (!MARKED.has(s.name)) return;
    for (let i = 0; i < s.x.length; i++) {
      const y = s.y[i];
      if (!Number.isFinite(y) || (axes.yLog && y <= 0)) continue;
      const px = sx(s.x[i]);
      const py = sy(y);
      const e = s.err?.[i];
      if (typeof e === "number" && Number.isFinite(e) && e > 0) {
        let hiY = y + e;
        let loY = y - e;
        if (axes.yLog && loY <= 0) loY = y; // cannot draw below zero on log
        const pHi = sy(hiY);
        const pLo = sy(loY);
        out.push(
          `<line x1="${px.toFixed(2)}" y1="${pLo.toFixed(2)}" ` +
            `x2="${px.toFixed(2)}" y2="${pHi.toFixed(2)}" stroke="${color}"/>`,
          `<line x1="${(px - 3).toFixed(2)}" y1="${pHi.toFixed(2)}" ` +
            `x2="${(px + 3).toFixed(2)}" y2="${pHi.toFixed(2)}" ` +
            `stroke="${color}"/>`,
          `<line x1="${(px - 3).toFixed(2)}" y1="${pLo.toFixed(2)}" ` +
            `x2="${(px + 3).toFixed(2)}" y2="${pLo.toFixed(2)}" ` +
            `stroke="${color}"/>`,
        );
      }
      out.push(
        `<circle cx="${px.toFixed(2)}" cy="${py.toFixed(2)}" r="3" ` +
          `fill="${color}"/>`,
      );
    }
  });

  // legend in the right margin
  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const y = plotT + 10 + idx * 20;
    const x = plotR + 14;
    const dash = DASHES[s.name] ? ` stroke-dasharray="${DASHES[s.name]}"` : "";
    out.push(
      `<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" ` +
        `stroke="${color}" stroke-width="1.6"${dash}/>`,
    );
    if (MARKED.has(s.name)) {
      out.push(`<circle cx="${x + 11}" cy="${y}" r="3" fill="${color}"/>`);
    }
    out.push(
      `<text x="${x + 28}" y="${y}" dominant-baseline="middle">` +
        `${escapeXml(s.name)}</text>`,
    );
  });

  out.push("</svg>");
  return out.join("\n") + "\n";
}
