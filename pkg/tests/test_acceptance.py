"""Acceptance criteria, one test per criterion.

Each test carries an `acceptance` marker; conftest prints one
ACCEPTANCE: <criterion>: PASS/FAIL line per marker in the summary.
"""
import json
import os
import random
import time
from pathlib import Path

import pytest

from isoforge import analysis
from isoforge.config import load_config
from isoforge.corpus import char_count, load_parallel, make_sample
from isoforge.gateway import (GenerationRequest, MockBackend,
                              SamplingParams)
from isoforge.metrics import (corpus_bleu, length_metrics, sentence_bleu,
                              tokenize_13a)
from isoforge.pools import PoolType, build_pool
from isoforge.postprocess import truncate_output
from isoforge.prompts import PromptConfig, PromptSpec, render
from isoforge.runner import make_backend, make_gateway, run_matrix
from isoforge.scoring import NativeDummyScorer
from isoforge.selection import (escalating_policy,
                                generate_until_compliant,
                                make_candidate_set, oracle_bleu_select,
                                select_best)
from conftest import CONFIG_TEMPLATE, filler, write_corpus

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


# --- pool construction ------------------------------------------------

def _scripted_500():
    """500 samples over exact dyadic ratios, with many deliberate ties."""
    ratio_pairs = [(20, 10), (40, 20), (16, 12), (32, 24), (20, 20),
                   (40, 40), (16, 20), (32, 40), (20, 30), (24, 12),
                   (40, 44), (50, 52), (60, 50), (80, 44), (30, 60)]
    samples = []
    for i in range(500):
        src_len, tgt_len = ratio_pairs[i % len(ratio_pairs)]
        samples.append(make_sample(i, filler(src_len, f"s{i} "),
                                   filler(tgt_len, f"t{i} ")))
    return samples


@pytest.mark.acceptance("pool-construction-oracle")
def test_pool_construction_oracle():
    samples = _scripted_500()

    def brute(pool_type):
        if pool_type is PoolType.RANDOM:
            return [s.id for s in samples]
        if pool_type is PoolType.ISOMETRIC:
            return [s.id for s in samples if 0.90 <= s.ratio <= 1.10]
        if pool_type is PoolType.SHORT:
            return [s.id for s in samples if s.ratio <= 1.0]
        if pool_type is PoolType.SAME:
            ranked = sorted(samples,
                            key=lambda s: (abs(s.ratio - 1.0), s.id))
            return [s.id for s in ranked[:50]]
        ranked = sorted(samples, key=lambda s: (s.ratio, s.id))
        return [s.id for s in ranked[:50]]

    start = time.perf_counter()
    pools = {pt: build_pool(samples, pt, 50) for pt in PoolType}
    elapsed = time.perf_counter() - start
    for pt in PoolType:
        assert list(pools[pt].members) == brute(pt), pt
    assert pools[PoolType.SAME].size == 50
    assert pools[PoolType.TINY].size == 50
    # ties resolve by ascending id: ratio 0.5 repeats every 15 ids
    tiny = list(pools[PoolType.TINY].members)
    halves = [i for i in tiny if samples[i].ratio == 0.5]
    assert halves == sorted(halves) and len(halves) >= 2
    assert elapsed < 1.0


# --- prompt goldens ---------------------------------------------------

@pytest.mark.acceptance("prompt-golden-suite")
def test_prompt_golden_suite(golden_dir):
    demos = [make_sample(0, "The cat sleeps here.",
                         "Die Katze ruht hier."),
             make_sample(5, "I like strong black coffee.",
                         "Ich mag Kaffee.")]
    cases = 0
    for regime, shots in [("zeroshot", 0), ("fewshot", 2)]:
        for tname, pt in [("random", PoolType.RANDOM),
                          ("isometric", PoolType.ISOMETRIC),
                          ("same", PoolType.SAME),
                          ("short", PoolType.SHORT)]:
            for rname, restricted in [("restricted", True),
                                      ("unrestricted", False)]:
                for mname, matched in [("matched", True),
                                       ("mismatched", False)]:
                    config = PromptConfig("English", "German", pt, shots,
                                          restricted=restricted,
                                          matched=matched)
                    text = render(config, demos if shots else [],
                                  "Hello.").text
                    fname = f"{regime}_{tname}_{rname}_{mname}.txt"
                    want = (golden_dir / fname).read_bytes()
                    assert text.encode("utf-8") == want, fname
                    cases += 1
    assert cases == 32


# --- BLEU oracle ------------------------------------------------------

@pytest.mark.acceptance("bleu-oracle")
def test_bleu_oracle(fixtures_dir):
    with open(fixtures_dir / "tok13a_fixture.json",
              encoding="utf-8") as f:
        tok = json.load(f)
    assert len(tok) == 50
    for entry in tok:
        assert " ".join(tokenize_13a(entry["input"])) == \
            entry["tokenized"], entry["input"]

    with open(fixtures_dir / "bleu_fixture.json", encoding="utf-8") as f:
        ref = json.load(f)
    hyps = [p["hypothesis"] for p in ref["pairs"]]
    refs = [p["reference"] for p in ref["pairs"]]
    assert abs(corpus_bleu(hyps, refs) - ref["corpus_bleu"]) < 1e-4
    for hyp, r, want in zip(hyps, refs, ref["sentence_bleu"]):
        assert abs(sentence_bleu(hyp, r) - want) < 1e-4
    st = ref["single_token"]
    assert abs(sentence_bleu(st["hypothesis"], st["reference"])
               - st["score"]) < 1e-4
    assert corpus_bleu(refs, refs) == 100.0


# --- length metrics ---------------------------------------------------

@pytest.mark.acceptance("length-metrics")
def test_length_metrics_criterion():
    rng = random.Random(2024)
    pairs = [(filler(rng.randint(10, 120), f"s{i} "),
              filler(rng.randint(4, 150), f"o{i} "))
             for i in range(1000)]
    lr, lr_std, lc = length_metrics(pairs)
    ratios = [len(o.strip()) / len(s.strip()) for s, o in pairs]
    mean = sum(ratios) / len(ratios)
    var = sum((r - mean) ** 2 for r in ratios) / len(ratios)
    hits = sum(1 for r in ratios if 0.90 <= r <= 1.10)
    assert abs(lr - mean) < 1e-12
    assert abs(lr_std - var ** 0.5) < 1e-12
    assert abs(lc - 100.0 * hits / len(ratios)) < 1e-12
    _, _, lc_edges = length_metrics([(filler(100), filler(90)),
                                     (filler(100), filler(110))])
    assert lc_edges == 100.0


# --- truncation -------------------------------------------------------

@pytest.mark.acceptance("truncation-properties")
def test_truncation_properties():
    rng = random.Random(31)
    alphabet = "ab cd\n\n\teéd \n x.!?"
    checked = 0
    for _ in range(10_000):
        raw = "".join(rng.choice(alphabet)
                      for _ in range(rng.randint(0, 60)))
        for strict in (False, True):
            clean, over = truncate_output(raw, strict=strict)
            assert "\n" not in clean
            assert clean == clean.strip()
            again, again_over = truncate_output(clean, strict=strict)
            assert again == clean
            assert not again_over
        nl = raw.find("\n")
        assert truncate_output(raw)[1] == (
            nl != -1 and raw[nl + 1:].strip() != "")
        checked += 1
    assert checked == 10_000


# --- selection --------------------------------------------------------

def _random_cset(rng, sid):
    # power-of-two source lengths keep length ratios exact in binary,
    # so score ties are exact ties rather than 1-ulp accidents
    src_len = rng.choice((16, 32, 64))
    source = filler(src_len, f"s{sid} ")
    outs = [(i, filler(rng.randint(5, int(src_len * 1.6)), f"c{i} "))
            for i in range(rng.randint(1, 8))]
    return make_candidate_set(sid, source, outs, filler(src_len, "r "))


def _brute_choice(cset, score_of):
    pool = [c for c in cset.candidates if 0.90 <= c.ratio <= 1.10]
    fallback = not pool
    if fallback:
        pool = list(cset.candidates)
    best = max(pool, key=lambda c: (score_of(c), -c.run_index))
    return best, fallback


class _Affine:
    def __init__(self, a, b):
        self.a, self.b = a, b
        self._inner = NativeDummyScorer()

    def score_batch(self, items):
        return {k: self.a * v + self.b
                for k, v in self._inner.score_batch(items).items()}


@pytest.mark.acceptance("selection-brute-force")
def test_selection_brute_force():
    rng = random.Random(77)
    scorer = NativeDummyScorer()
    for sid in range(1000):
        cset = _random_cset(rng, sid)
        src = char_count(cset.source)

        got = select_best(cset, scorer)
        want, want_fb = _brute_choice(
            cset, lambda c: -abs(char_count(c.text) / src - 1.0))
        assert got.chosen == want and got.used_fallback == want_fb

        got_oracle = oracle_bleu_select(cset)
        want_o, want_o_fb = _brute_choice(
            cset, lambda c: sentence_bleu(c.text, cset.reference))
        assert got_oracle.chosen == want_o
        assert got_oracle.used_fallback == want_o_fb

        for a, b in ((3.0, 1.0), (0.25, -7.0)):
            scaled = select_best(cset, _Affine(a, b))
            assert scaled.chosen == got.chosen


# --- escalation -------------------------------------------------------

_PCONF = PromptConfig("English", "German", PoolType.RANDOM, 0)


def _backend_attempt(backend, source, sid, model="sim"):
    def attempt(i):
        prompt = PromptSpec(_PCONF, (), f"English: {source}\nGerman:")
        req = GenerationRequest("mock", model, prompt, SamplingParams(),
                                run_index=i, sentence_id=sid)
        return backend.complete(req)
    return attempt


@pytest.mark.acceptance("escalation-simulation")
def test_escalation_simulation():
    default_backend = MockBackend(mode="ratio", seed=501,
                                  compliance_rate=0.5)
    tiny_backend = MockBackend(mode="ratio", seed=502,
                               compliance_rate=0.8)
    rng = random.Random(6)
    sources = [filler(rng.randint(20, 80), f"s{i} ") for i in range(500)]

    budget = 2
    default_only = 0
    composite = 0
    for sid, src in enumerate(sources):
        _, ok = generate_until_compliant(
            src, _backend_attempt(default_backend, src, sid), budget)
        default_only += ok
        res = escalating_policy(
            src, _backend_attempt(default_backend, src, sid, "again"),
            _backend_attempt(tiny_backend, src, sid), budget, budget)
        composite += res.success
    analytic_default = 1 - 0.5 ** budget
    analytic_composite = 1 - (0.5 ** budget) * (0.2 ** budget)
    assert abs(default_only / 500 - analytic_default) < 0.03
    assert abs(composite / 500 - analytic_composite) < 0.03

    # failure-set rescue proportion at a 0.15 per-attempt rate
    alt_backend = MockBackend(mode="ratio", seed=503,
                              compliance_rate=0.15)
    default_groups = {}
    alt_groups = {}
    for sid, src in enumerate(sources):
        default_groups[sid] = (src, [filler(
            max(1, int(char_count(src) * 1.5)))])
        attempt = _backend_attempt(alt_backend, src, sid)
        alt_groups[sid] = (src, [attempt(i) for i in range(10)])
    prop = analysis.compliance_proportion(default_groups, alt_groups,
                                          attempts=10)
    assert prop.failure_count == 500
    assert abs(prop.percent - 80.3) <= 5.0


# --- significance -----------------------------------------------------

@pytest.mark.acceptance("significance-machinery")
def test_significance_machinery():
    rng = random.Random(88)
    a = [rng.uniform(0.8, 1.3) for _ in range(10)]
    b = [rng.uniform(0.8, 1.3) for _ in range(10)]
    res = analysis.paired_permutation_test(a, b)
    assert res.exhaustive
    diffs = [x - y for x, y in zip(a, b)]
    observed = abs(sum(diffs) / 10)
    hits = 0
    for mask in range(2 ** 10):
        total = 0.0
        for i in range(10):
            total += diffs[i] if mask >> i & 1 else -diffs[i]
        if abs(total / 10) >= observed:
            hits += 1
    assert abs(res.p_value - hits / 2 ** 10) < 1e-12

    ident = [rng.uniform(0.9, 1.1) for _ in range(64)]
    assert analysis.paired_permutation_test(ident,
                                            list(ident)).p_value > 0.5

    base = [rng.uniform(0.9, 1.1) for _ in range(200)]
    shifted = [x - 0.1 for x in base]
    assert analysis.paired_permutation_test(shifted,
                                            base).p_value < 0.001


# --- end-to-end mock matrix -------------------------------------------

@pytest.mark.acceptance("e2e-mock-matrix")
def test_e2e_mock_matrix(tmp_path):
    write_corpus(tmp_path / "demo.en", tmp_path / "demo.de", 120)
    write_corpus(tmp_path / "test.en", tmp_path / "test.de", 20,
                 start_len=30, span=30)
    config_path = tmp_path / "experiment.toml"
    config_path.write_text(CONFIG_TEMPLATE.format(
        name="e2e", models='"mock-a", "mock-b"',
        pools='"Random", "Isometric", "Same", "Short", "Tiny"',
        shots="0, 5", runs=10, seed=13, n_cap=50, mock_mode="ratio",
        mock_extra="compliance_rate = 0.65\novergen_prob = 0.1"),
        encoding="utf-8")
    cfg = load_config(config_path)

    backend = make_backend(cfg)
    start = time.perf_counter()
    cold = run_matrix(cfg, make_gateway(cfg, backend))
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    assert len(cold.rows) == 20
    assert cold.error_count == 0
    assert len(cold.records) == 2 * 5 * 2 * 10 * 20
    assert all(row["lr"] is not None for row in cold.rows)
    cold_csv = analysis.render_report(cold.rows, "csv")

    calls_before = backend.calls
    warm = run_matrix(cfg, make_gateway(cfg, backend))
    assert backend.calls == calls_before
    assert all(r.from_cache for r in warm.records)
    warm_csv = analysis.render_report(warm.rows, "csv")
    assert warm_csv.encode("utf-8") == cold_csv.encode("utf-8")


# --- optional devset check --------------------------------------------

@pytest.mark.acceptance("devset-pool-stats (optional)")
def test_devset_pool_stats():
    root = os.environ.get("ISOFORGE_MUSTC_DIR")
    if not root:
        pytest.skip("set ISOFORGE_MUSTC_DIR to run the devset check")
    root = Path(root)
    src = root / "dev.en"
    tgt = root / "dev.de"
    if not (src.is_file() and tgt.is_file()):
        pytest.skip(f"expected {src} and {tgt}")
    samples = load_parallel(src, tgt)
    want_counts = {PoolType.RANDOM: 1415, PoolType.ISOMETRIC: 537,
                   PoolType.SAME: 50, PoolType.SHORT: 343,
                   PoolType.TINY: 50}
    by_id = {s.id: s for s in samples}
    for pt, want in want_counts.items():
        pool = build_pool(samples, pt, 50)
        assert pool.size == want, pt
        if pt is PoolType.TINY:
            ratios = [by_id[i].ratio for i in pool.members]
            assert abs(min(ratios) - 0.43) <= 0.01
            assert abs(max(ratios) - 0.81) <= 0.01
            assert abs(sum(ratios) / len(ratios) - 0.68) <= 0.01
