import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";

const FIXTURES = fileURLToPath(new URL("../fixtures", import.meta.url));

let logs: string[];
let errors: string[];

beforeEach(() => {
  logs = [];
  errors = [];
  vi.spyOn(console, "log").mockImplementation((...a: unknown[]) => {
    logs.push(a.join(" "));
  });
  vi.spyOn(console, "error").mockImplementation((...a: unknown[]) => {
    errors.push(a.join(" "));
  });
});

afterEach(() => {
  vi.restoreAllMocks();
});

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "plots-cli-"));
}

function fixtureArgs(kind: string, out: string): string[] {
  return [
    "--kind", kind,
    "--in", path.join(FIXTURES, kind, "results.csv"),
    "--summary", path.join(FIXTURES, kind, "summary.json"),
    "--out", out,
  ];
}

describe("plots CLI", () => {
  it("renders each fixture kind with exit 0", () => {
    for (const kind of ["scaling", "contraction", "moments"]) {
      const out = path.join(tmpDir(), `${kind}.svg`);
      expect(main(fixtureArgs(kind, out))).toBe(0);
      expect(fs.existsSync(out)).toBe(true);
      expect(fs.existsSync(out.replace(/\.svg$/, ".sidecar.json"))).toBe(true);
    }
    expect(logs.filter((l) => l.startsWith("wrote "))).toHaveLength(6);
  });

  it("exits 2 with column diagnostics on schema mismatch", () => {
    const dir = tmpDir();
    const bad = path.join(dir, "results.csv");
    fs.writeFileSync(bad, "run_id,seed,t\nx,1,0.0\n");
    const code = main([
      "--kind", "moments",
      "--in", bad,
      "--summary", path.join(FIXTURES, "moments", "summary.json"),
      "--out", path.join(dir, "fig.svg"),
    ]);
    expect(code).toBe(2);
    const combined = errors.join("\n");
    expect(combined).toContain("second_moment_particles");
    expect(combined).toContain("second_moment_nonlinear");
    expect(fs.existsSync(path.join(dir, "fig.svg"))).toBe(false);
  });

  it("exits 2 on an empty CSV without writing output", () => {
    const dir = tmpDir();
    const empty = path.join(dir, "results.csv");
    fs.writeFileSync(empty, "");
    const out = path.join(dir, "fig.svg");
    const code = main([
      "--kind", "contraction",
      "--in", empty,
      "--summary", path.join(FIXTURES, "contraction", "summary.json"),
      "--out", out,
    ]);
    expect(code).toBe(2);
    expect(errors.join("\n")).toContain("empty");
    expect(fs.existsSync(out)).toBe(false);
  });

  it("exits 2 on a missing input file", () => {
    const dir = tmpDir();
    const code = main([
      "--kind", "contraction",
      "--in", path.join(dir, "nope.csv"),
      "--summary", path.join(FIXTURES, "contraction", "summary.json"),
      "--out", path.join(dir, "fig.svg"),
    ]);
    expect(code).toBe(2);
  });

  it("rejects an unknown kind and a missing flag", () => {
    expect(main(fixtureArgs("histogram", "/tmp/x.svg"))).toBe(2);
    expect(main(["--kind", "scaling"])).toBe(2);
    expect(errors.length).toBeGreaterThan(0);
  });

  it("notes the svg fallback when asked for png", () => {
    const out = path.join(tmpDir(), "fig.png");
    const code = main(fixtureArgs("moments", out));
    expect(code).toBe(0);
    expect(errors.join("\n")).toContain("png output unavailable");
    expect(fs.existsSync(out.replace(/\.png$/, ".svg"))).toBe(true);
  });
});
