// plots --kind <scaling|contraction|moments> --in results.csv
//       --summary summary.json --out fig.svg [--guide]

import yargs from "yargs";

import { render } from "./render.js";
import { KINDS, Kind, SchemaError } from "./schema.js";

function messageOf(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

export function main(argv: string[]): number {
  let args: {
    kind: string;
    in: string;
    summary: string;
    out: string;
    guide: boolean;
  };
  try {
    args = yargs(argv)
      .scriptName("plots")
      .usage(
        "$0 --kind <kind> --in results.csv --summary summary.json --out fig.svg",
      )
      .option("kind", {
        type: "string",
        choices: KINDS,
        demandOption: true,
        describe: "figure kind",
      })
      .option("in", {
        type: "string",
        demandOption: true,
        describe: "results CSV written by the experiments CLI",
      })
      .option("summary", {
        type: "string",
        demandOption: true,
        describe: "summary.json written next to the CSV",
      })
      .option("out", {
        type: "string",
        demandOption: true,
        describe: "output image path (.svg; a .png request falls back to svg)",
      })
      .option("guide", {
        type: "boolean",
        default: false,
        describe: "add a reference slope -1/2 line (scaling only)",
      })
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync();
  } catch (err) {
    console.error(`plots: ${messageOf(err)}`);
    return 2;
  }

  try {
    const result = render({
      csvPath: args.in,
      summaryPath: args.summary,
      kind: args.kind as Kind,
      outPath: args.out,
      guide: args.guide,
    });
    for (const note of result.notes) {
      console.error(`plots: note: ${note}`);
    }
    console.log(`wrote ${result.figurePath}`);
    console.log(`wrote ${result.sidecarPath}`);
    return 0;
  } catch (err) {
    console.error(`plots: ${messageOf(err)}`);
    const missingInput =
      (err as NodeJS.ErrnoException).code === "ENOENT";
    return err instanceof SchemaError || missingInput ? 2 : 1;
  }
}
