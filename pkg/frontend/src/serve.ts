import { readFileSync } from "node:fs";
import { createInterface } from "node:readline";
import type { Server } from "node:http";
import express from "express";

import { MetricProvider } from "./metrics.js";
import {
  Handshake,
  PROTOCOL,
  ScoreResponse,
  scoreRequestSchema,
} from "./protocol.js";

export function bridgeVersion(): string {
  const raw = readFileSync(new URL("../package.json", import.meta.url), "utf8");
  return (JSON.parse(raw) as { version: string }).version;
}

export function handshake(provider: MetricProvider): Handshake {
  return { protocol: PROTOCOL, metric: provider.name, version: bridgeVersion() };
}

/** Score one already-parsed JSON value; never throws. */
export async function scoreValue(
  provider: MetricProvider,
  value: unknown,
): Promise<ScoreResponse> {
  const parsed = scoreRequestSchema.safeParse(value);
  if (!parsed.success) {
    const id =
      typeof value === "object" && value !== null && "id" in value &&
      typeof (value as { id: unknown }).id === "number"
        ? (value as { id: number }).id
        : null;
    return { id, error: `bad request: ${parsed.error.issues[0]?.message}` };
  }
  const request = parsed.data;
  try {
    const score = await provider.score(request);
    if (!Number.isFinite(score)) {
      return { id: request.id, error: `non-finite score ${score}` };
    }
    return { id: request.id, score };
  } catch (err) {
    return { id: request.id, error: String(err instanceof Error ? err.message : err) };
  }
}

/**
 * Stdio transport: handshake line first, then one response line per
 * request line. Lines are answered strictly in arrival order so a
 * client that writes n requests can read exactly n responses.
 */
export function runStdio(provider: MetricProvider): Promise<void> {
  process.stdout.write(JSON.stringify(handshake(provider)) + "\n");
  const lines = createInterface({ input: process.stdin, terminal: false });
  let chain = Promise.resolve();
  lines.on("line", (line) => {
    chain = chain.then(async () => {
      let value: unknown;
      try {
        value = JSON.parse(line);
      } catch {
        process.stdout.write(
          JSON.stringify({ id: null, error: "request is not JSON" }) + "\n",
        );
        return;
      }
      const response = await scoreValue(provider, value);
      process.stdout.write(JSON.stringify(response) + "\n");
    });
  });
  return new Promise((resolve) => {
    lines.on("close", () => {
      chain.then(resolve);
    });
  });
}

/** HTTP transport: POST /score with a JSON array, array back. */
export function makeApp(provider: MetricProvider, batchSize: number) {
  const app = express();
  app.use(express.json({ limit: "8mb" }));
  app.get("/handshake", (_req, res) => {
    res.json(handshake(provider));
  });
  app.post("/score", async (req, res) => {
    const body: unknown = req.body;
    if (!Array.isArray(body)) {
      res.status(400).json({ error: "expected a JSON array of requests" });
      return;
    }
    const responses: ScoreResponse[] = [];
    for (let start = 0; start < body.length; start += batchSize) {
      const chunk = body.slice(start, start + batchSize);
      const scored = await Promise.all(
        chunk.map((value) => scoreValue(provider, value)),
      );
      responses.push(...scored);
    }
    res.json(responses);
  });
  return app;
}

export function runHttp(
  provider: MetricProvider,
  port: number,
  batchSize: number,
): Promise<Server> {
  const app = makeApp(provider, batchSize);
  return new Promise((resolve, reject) => {
    const server = app.listen(port, () => resolve(server));
    server.on("error", reject);
  });
}
