#!/usr/bin/env node
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { loadBundle } from "./bundle.js";
import { BundleError } from "./csv.js";
import { energyFigure, errorFigure, trackingFigure, widthFigure } from "./figures.js";

async function main(): Promise<number> {
  const args = await yargs(hideBin(process.argv))
    .usage("$0 --duffing <dir> --rotor <dir> --out <dir>")
    .option("duffing", {
      type: "string",
      demandOption: true,
      describe: "double-well experiment bundle directory",
    })
    .option("rotor", {
      type: "string",
      demandOption: true,
      describe: "kicked-rotor experiment bundle directory",
    })
    .option("out", {
      type: "string",
      default: "figures-out",
      describe: "directory to write SVG files into",
    })
    .strict()
    .help()
    .parse();

  try {
    const duffing = loadBundle(args.duffing);
    const rotor = loadBundle(args.rotor);
    mkdirSync(args.out, { recursive: true });

    const outputs: Record<string, string> = {
      "duffing-tracking.svg": trackingFigure(duffing),
      "duffing-width.svg": widthFigure(duffing),
      "duffing-error.svg": errorFigure(duffing),
      "rotor-energy.svg": energyFigure(rotor),
    };
    const manifest: Record<string, string> = {};
    for (const [name, svg] of Object.entries(outputs)) {
      const path = join(args.out, name);
      writeFileSync(path, svg, "utf8");
      manifest[name.replace(".svg", "")] = path;
    }
    process.stdout.write(JSON.stringify({ out: args.out, figures: manifest }, null, 2) + "\n");
    return 0;
  } catch (err) {
    const error = err instanceof BundleError ? "BundleError" : (err as Error).name;
    process.stderr.write(
      JSON.stringify({ error, message: (err as Error).message }) + "\n"
    );
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
