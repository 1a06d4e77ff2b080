import { describe, expect, it } from "vitest";

import {
  dummyLength,
  qeProvider,
  semanticSimilarityProvider,
  Embedder,
} from "../src/metrics.js";
import { scoreValue } from "../src/serve.js";
import { charCount, pyStrip } from "../src/protocol.js";

function req(id: number, source: string, hypothesis: string, reference?: string) {
  return { id, source, hypothesis, reference: reference ?? null };
}

describe("charCount", () => {
  it("counts code points after stripping", () => {
    expect(charCount("  Hallo Welt.  ")).toBe(11);
    expect(charCount("\u{1F44D}\u{1F44D}")).toBe(2); // astral, not UTF-16 units
    expect(charCount("")).toBe(0);
  });

  it("matches the Python whitespace set, not String.trim", () => {
    // U+0085 and U+001C-001F strip in Python but not under String.trim
    expect(pyStrip("abc")).toBe("abc");
    expect(charCount("abc")).toBe(3);
    // U+FEFF is NOT whitespace to Python and must be counted
    expect(charCount("﻿abc")).toBe(4);
    expect(charCount(" x　")).toBe(1);
  });
});

describe("dummy-length", () => {
  it("scores -|ratio - 1|", () => {
    // -abs(...) gives -0 here; JSON serializes it as plain 0
    expect(dummyLength.score(req(0, "abcdefghij", "abcdefghij"))).toBe(-0);
    expect(dummyLength.score(req(1, "abcdefghij", "abcde"))).toBe(-0.5);
    expect(dummyLength.score(req(2, "abcdefghij", ""))).toBe(-1);
  });

  it("treats a blank source as ratio 0", () => {
    expect(dummyLength.score(req(3, "   ", "abc"))).toBe(-1);
  });
});

// letter-frequency profile: deterministic, no model download
const toyEmbed: Embedder = async (text) => {
  const vec = new Array<number>(26).fill(0);
  for (const ch of text.toLowerCase()) {
    const k = ch.codePointAt(0)! - 97;
    if (k >= 0 && k < 26) vec[k] += 1;
  }
  return vec;
};

describe("embedding providers", () => {
  it("semantic-similarity ranks the reference itself above unrelated text", async () => {
    const provider = semanticSimilarityProvider(toyEmbed);
    const reference = "the quick brown fox jumps";
    const same = await provider.score(req(0, "src", reference, reference));
    const other = await provider.score(req(1, "src", "zzz qqq vvv", reference));
    expect(same).toBeGreaterThanOrEqual(other);
    expect(same).toBeCloseTo(1.0, 12);
  });

  it("semantic-similarity demands a reference", async () => {
    const provider = semanticSimilarityProvider(toyEmbed);
    await expect(() =>
      Promise.resolve(provider.score(req(0, "src", "hyp"))),
    ).rejects.toThrow(/reference/);
  });

  it("qe compares source against hypothesis without a reference", async () => {
    const provider = qeProvider(toyEmbed);
    const close = await provider.score(req(0, "abba", "abab"));
    const far = await provider.score(req(1, "abba", "xyz"));
    expect(close).toBeGreaterThan(far);
  });
});

describe("scoreValue", () => {
  it("maps provider throws to per-item error objects", async () => {
    const provider = semanticSimilarityProvider(toyEmbed);
    const out = await scoreValue(provider, req(7, "src", "hyp"));
    expect(out).toMatchObject({ id: 7 });
    expect("error" in out && out.error).toMatch(/reference/);
  });

  it("rejects non-finite scores", async () => {
    const broken = { name: "nan", score: () => Number.NaN };
    const out = await scoreValue(broken, req(1, "a", "b"));
    expect(out).toMatchObject({ id: 1 });
    expect("score" in out).toBe(false);
  });

  it("flags malformed requests, keeping a numeric id when present", async () => {
    const missing = await scoreValue(dummyLength, { id: 4, source: "x" });
    expect(missing).toMatchObject({ id: 4 });
    const garbage = await scoreValue(dummyLength, "nope");
    expect(garbage).toMatchObject({ id: null });
  });
});
