import { z } from "zod";

export const PROTOCOL = "isoforge-scorer/1";

export const scoreRequestSchema = z.object({
  id: z.number().int(),
  source: z.string(),
  hypothesis: z.string(),
  reference: z.string().nullish(),
});

export type ScoreRequest = z.infer<typeof scoreRequestSchema>;

export type ScoreResponse =
  | { id: number; score: number }
  | { id: number | null; error: string };

export interface Handshake {
  protocol: string;
  metric: string;
  version: string;
}

// The toolkit counts len(text.strip()) in Python, whose whitespace set
// differs from both String.trim() and /\s/ (it includes U+001C-001F and
// U+0085 but not U+FEFF). Mirror it exactly or length ratios drift.
const PY_SPACE =
  "\\t\\n\\x0b\\f\\r\\x1c-\\x1f \\x85\\xa0\\u1680\\u2000-\\u200a" +
  "\\u2028\\u2029\\u202f\\u205f\\u3000";
const EDGE_SPACE = new RegExp(`^[${PY_SPACE}]+|[${PY_SPACE}]+$`, "gu");

export function pyStrip(text: string): string {
  return text.replace(EDGE_SPACE, "");
}

/** Stripped length in Unicode code points, not UTF-16 units. */
export function charCount(text: string): number {
  let n = 0;
  for (const _ of pyStrip(text)) n += 1;
  return n;
}
