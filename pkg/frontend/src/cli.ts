#!/usr/bin/env node
/**
 * featext: batch image feature extraction to SAFV files.
 *
 *   featext extract --images DIR --out PREFIX [--model DIR] [--batch N]
 *   featext synth --count N --dim D --seed S --out PREFIX
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { extract, loadLocalModel } from "./extract";
import { synth } from "./synth";

async function main() {
  await yargs(hideBin(process.argv))
    .command(
      "extract",
      "extract pooled deep features from a directory of images",
      (y) =>
        y
          .option("images", { type: "string", demandOption: true, describe: "image directory" })
          .option("out", { type: "string", demandOption: true, describe: "output prefix" })
          .option("model", { type: "string", demandOption: true, describe: "local tfjs model directory" })
          .option("input-size", { type: "number", default: 224 })
          .option("dim", { type: "number", default: 2048 })
          .option("batch", { type: "number", default: 8 }),
      async (args) => {
        const model = await loadLocalModel(args.model, args["input-size"], args.dim);
        const result = await extract(args.images, args.out, model, args.batch);
        console.log(
          `extracted ${result.extracted.length} images (dim ${args.dim})` +
            (result.missing.length ? `, skipped ${result.missing.length}` : "") +
            ` -> ${result.featurePath}`,
        );
      },
    )
    .command(
      "synth",
      "write seeded synthetic feature vectors",
      (y) =>
        y
          .option("count", { type: "number", demandOption: true })
          .option("dim", { type: "number", demandOption: true })
          .option("seed", { type: "number", default: 0 })
          .option("out", { type: "string", demandOption: true }),
      async (args) => {
        const { featurePath } = await synth(args.out, args.count, args.dim, args.seed);
        console.log(`wrote ${args.count} x ${args.dim} synthetic features -> ${featurePath}`);
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${msg ?? err?.message}`);
      process.exit(err ? 1 : 2);
    })
    .parseAsync();
}

main().catch((err) => {
  console.error(`error: ${err?.message ?? err}`);
  process.exit(1);
});
