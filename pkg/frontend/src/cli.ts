#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { loadProvider, ModelLoadError } from "./metrics.js";
import { runHttp, runStdio } from "./serve.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option("metric", {
      choices: ["dummy-length", "qe", "semantic-similarity"] as const,
      default: "dummy-length",
      describe: "Scoring metric to serve",
    })
    .option("transport", {
      choices: ["subprocess", "http"] as const,
      default: "subprocess",
      describe: "subprocess speaks NDJSON on stdio; http serves POST /score",
    })
    .option("port", {
      type: "number",
      default: 8787,
      describe: "Listen port for the http transport",
    })
    .option("batch-size", {
      type: "number",
      default: 32,
      describe: "Max items scored per internal batch",
    })
    .strict()
    .parse();

  const provider = await loadProvider(argv.metric);
  if (argv.transport === "http") {
    await runHttp(provider, argv.port, Math.max(1, argv.batchSize));
    console.error(`scorer-bridge: ${argv.metric} on :${argv.port}/score`);
    return;
  }
  await runStdio(provider);
}

main().catch((err) => {
  const fatal = err instanceof ModelLoadError;
  console.error(`scorer-bridge: ${err instanceof Error ? err.message : err}`);
  process.exit(fatal ? 1 : 2);
});
