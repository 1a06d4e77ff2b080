import { charCount, ScoreRequest } from "./protocol.js";

export interface MetricProvider {
  readonly name: string;
  /** Score one request. Throw to produce a per-item error response. */
  score(request: ScoreRequest): Promise<number> | number;
}

/** Raised when a metric's model cannot be loaded; fatal at startup. */
export class ModelLoadError extends Error {}

/**
 * Length scorer: -|ratio - 1| with ratio = stripped code-point count of
 * the hypothesis over the source. Matches the toolkit's built-in
 * fallback scorer bit for bit, which the cross-component parity test
 * relies on.
 */
export const dummyLength: MetricProvider = {
  name: "dummy-length",
  score(request) {
    const src = charCount(request.source);
    const ratio = src ? charCount(request.hypothesis) / src : 0.0;
    return -Math.abs(ratio - 1.0);
  },
};

export type Embedder = (text: string) => Promise<number[]>;

function cosine(a: number[], b: number[]): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    const x = a[i] ?? 0;
    const y = b[i] ?? 0;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  const denom = Math.sqrt(na) * Math.sqrt(nb);
  if (denom === 0) throw new Error("zero-norm embedding");
  return dot / denom;
}

/** Reference-free quality estimate: source/hypothesis similarity. */
export function qeProvider(embed: Embedder): MetricProvider {
  return {
    name: "qe",
    async score(request) {
      const [s, h] = await Promise.all([
        embed(request.source),
        embed(request.hypothesis),
      ]);
      return cosine(s, h);
    },
  };
}

/** Reference-based similarity; the reference field is mandatory. */
export function semanticSimilarityProvider(embed: Embedder): MetricProvider {
  return {
    name: "semantic-similarity",
    async score(request) {
      if (request.reference == null) {
        throw new Error("semantic-similarity needs a reference");
      }
      const [h, r] = await Promise.all([
        embed(request.hypothesis),
        embed(request.reference),
      ]);
      return cosine(h, r);
    },
  };
}

const EMBEDDING_MODEL = "Xenova/all-MiniLM-L6-v2";

async function loadEmbedder(): Promise<Embedder> {
  let pipeline;
  try {
    // optional dependency; resolved only when a neural metric is asked for
    ({ pipeline } = await import("@xenova/transformers" as string));
  } catch (err) {
    throw new ModelLoadError(
      `embedding backend unavailable (npm install @xenova/transformers): ${err}`,
    );
  }
  try {
    const extract = await pipeline("feature-extraction", EMBEDDING_MODEL);
    return async (text: string) => {
      const out = await extract(text, { pooling: "mean", normalize: true });
      return Array.from(out.data as Float32Array);
    };
  } catch (err) {
    throw new ModelLoadError(`cannot load ${EMBEDDING_MODEL}: ${err}`);
  }
}

export async function loadProvider(metric: string): Promise<MetricProvider> {
  switch (metric) {
    case "dummy-length":
      return dummyLength;
    case "qe":
      return qeProvider(await loadEmbedder());
    case "semantic-similarity":
      return semanticSimilarityProvider(await loadEmbedder());
    default:
      throw new ModelLoadError(`unknown metric ${JSON.stringify(metric)}`);
  }
}
