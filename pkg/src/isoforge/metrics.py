"""Length metrics and BLEU.

BLEU follows the mteval-v13a tokenization rules and NIST exponential
smoothing, configured to match the signature string

    nrefs:1|case:mixed|eff:no|tok:13a|smooth:exp

Corpus scoring keeps the full n-gram order (effective order off);
sentence scoring enables effective order so short segments are not
zeroed out by missing 4-gram totals. Scores are on the 0..100 scale.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import char_count, is_compliant
from .errors import EmptySet, LengthMismatch, NoRecords

# 13a tokenizer, language-independent part then Western-language part.
_RE_SYMBOLS = re.compile(r'([\{-\~\[-\` -\&\(-\+\:-\@\/])')
_RE_PUNCT_BEFORE = re.compile(r'([^0-9])([\.,])')
_RE_PUNCT_AFTER = re.compile(r'([\.,])([^0-9])')
_RE_DIGIT_DASH = re.compile(r'([0-9])(-)')
_RE_SPACES = re.compile(r'\s+')


def tokenize_13a(text: str) -> list[str]:
    """Tokenize one segment with the mteval-v13a rules.

    Unescapes a handful of XML entities, separates punctuation and
    symbols from words, and splits period/comma/dash around digits.
    Returns the token list; joining with single spaces reproduces the
    canonical tokenized string.
    """
    norm = text
    norm = norm.replace('<skipped>', '')
    norm = norm.replace('-\n', '')
    norm = norm.replace('\n', ' ')
    norm = norm.replace('&quot;', '"')
    norm = norm.replace('&amp;', '&')
    norm = norm.replace('&lt;', '<')
    norm = norm.replace('&gt;', '>')

    norm = f" {norm} "
    norm = _RE_SYMBOLS.sub(r' \1 ', norm)
    norm = _RE_PUNCT_BEFORE.sub(r'\1 \2 ', norm)
    norm = _RE_PUNCT_AFTER.sub(r' \1 \2', norm)
    norm = _RE_DIGIT_DASH.sub(r'\1 \2 ', norm)
    norm = _RE_SPACES.sub(' ', norm)
    return norm.strip().split(' ') if norm.strip() else []


@dataclass(frozen=True)
class BleuConfig:
    max_order: int = 4
    tokenizer: str = "13a"
    smoothing: str = "exp"  # "exp" or "none"
    case: str = "mixed"

    def signature(self) -> str:
        return (f"nrefs:1|case:{self.case}|eff:no|tok:{self.tokenizer}"
                f"|smooth:{self.smoothing}")


DEFAULT_BLEU = BleuConfig()


def _ngram_counts(tokens: Sequence[str], max_order: int) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_order + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i:i + n])] += 1
    return counts


def _accumulate(hypothesis: str, reference: str, config: BleuConfig,
                correct: list[int], total: list[int]) -> tuple[int, int]:
    hyp_tokens = tokenize_13a(hypothesis.rstrip())
    ref_tokens = tokenize_13a(reference.rstrip())
    ref_counts = _ngram_counts(ref_tokens, config.max_order)
    hyp_counts = _ngram_counts(hyp_tokens, config.max_order)
    for ngram, cnt in hyp_counts.items():
        n = len(ngram)
        correct[n - 1] += min(cnt, ref_counts.get(ngram, 0))
        total[n - 1] += cnt
    return len(hyp_tokens), len(ref_tokens)


def _score_from_stats(correct: Sequence[int], total: Sequence[int],
                      sys_len: int, ref_len: int, config: BleuConfig,
                      effective_order: bool) -> float:
    if correct[0] == 0:
        return 0.0  # no matches at any order
    precisions = [0.0] * config.max_order
    smooth = 1.0
    order = config.max_order
    for n in range(1, config.max_order + 1):
        if total[n - 1] == 0:
            break
        if effective_order:
            order = n
        if correct[n - 1] == 0:
            if config.smoothing == "exp":
                smooth *= 2.0
                precisions[n - 1] = 100.0 / (smooth * total[n - 1])
        else:
            precisions[n - 1] = 100.0 * correct[n - 1] / total[n - 1]

    bp = 1.0
    if sys_len < ref_len:
        bp = math.exp(1 - ref_len / sys_len) if sys_len > 0 else 0.0

    used = precisions[:order]
    if any(p == 0.0 for p in used):
        return 0.0
    # factoring out the 100 keeps the identity corpus at exactly 100.0
    log_mean = sum(math.log(p / 100.0) for p in used) / order
    return bp * 100.0 * math.exp(log_mean)


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str],
                config: BleuConfig = DEFAULT_BLEU) -> float:
    """Corpus-level BLEU with a single reference per hypothesis."""
    if len(hypotheses) != len(references):
        raise LengthMismatch(len(hypotheses), len(references))
    if not hypotheses:
        raise LengthMismatch(0, 0)
    correct = [0] * config.max_order
    total = [0] * config.max_order
    sys_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = _accumulate(hyp, ref, config, correct, total)
        sys_len += h
        ref_len += r
    return _score_from_stats(correct, total, sys_len, ref_len, config,
                             effective_order=False)


def sentence_bleu(hypothesis: str, reference: str,
                  config: BleuConfig = DEFAULT_BLEU) -> float:
    """Sentence-level BLEU with effective order and exp smoothing."""
    correct = [0] * config.max_order
    total = [0] * config.max_order
    sys_len, ref_len = _accumulate(hypothesis, reference, config,
                                   correct, total)
    return _score_from_stats(correct, total, sys_len, ref_len, config,
                             effective_order=True)


def length_metrics(pairs: Sequence[tuple[str, str]]
                   ) -> tuple[float, float, float]:
    """(lr, lr_std, lc) over (source, output) text pairs.

    Per-pair ratio is output chars over source chars; an output that is
    empty after stripping gets ratio 0.0 and counts as non-compliant.
    lr_std is the population standard deviation.
    """
    if not pairs:
        raise EmptySet("no pairs")
    ratios = [char_count(out) / char_count(src) for src, out in pairs]
    n = len(ratios)
    mean = sum(ratios) / n
    std = math.sqrt(sum((r - mean) ** 2 for r in ratios) / n)
    lc = 100.0 * sum(1 for r in ratios if is_compliant(r)) / n
    return mean, std, lc


@dataclass
class RunAverage:
    """Result of averaging target lengths across runs, per sentence."""
    per_sentence: dict[int, float]
    pool_value: float
    missing: dict[int, int] = field(default_factory=dict)


def average_over_runs(groups: Mapping[int, tuple[str, Sequence[str]]],
                      expected_runs: int | None = None) -> RunAverage:
    """Average target length per sentence across runs, then ratio.

    `groups` maps sentence id to (source text, outputs across runs).
    Per sentence: mean output char count over its runs, divided by the
    source char count. The pool value is the mean of those per-sentence
    ratios. Sentences with fewer than `expected_runs` outputs are kept
    and their shortfall recorded in `missing`.
    """
    if not groups:
        raise NoRecords("no record groups")
    per_sentence: dict[int, float] = {}
    missing: dict[int, int] = {}
    for sid, (source, outputs) in groups.items():
        if not outputs:
            raise NoRecords(f"sentence {sid} has no records")
        mean_len = sum(char_count(o) for o in outputs) / len(outputs)
        per_sentence[sid] = mean_len / char_count(source)
        if expected_runs is not None and len(outputs) < expected_runs:
            missing[sid] = expected_runs - len(outputs)
    pool_value = sum(per_sentence.values()) / len(per_sentence)
    return RunAverage(per_sentence, pool_value, missing)


@dataclass
class CellReport:
    """Aggregated metrics for one (model, pool, shots) cell.

    Per-run lr/lc/bleu are computed over the test set and averaged
    across runs; lr_std is the population std of per-pair ratios pooled
    over all runs; n is the sentence count, runs the run count.
    """
    model: str
    pool_type: str
    shots: int
    lr: float
    lr_std: float
    lc: float
    bleu: float
    n: int
    runs: int
    qe_score: float | None = None


def cell_report(model: str, pool_type: str, shots: int,
                per_run: Sequence[Sequence[tuple[str, str, str]]],
                config: BleuConfig = DEFAULT_BLEU) -> CellReport:
    """Build a CellReport from per-run (source, output, reference) triples."""
    if not per_run or not per_run[0]:
        raise EmptySet("no runs")
    lrs, lcs, bleus = [], [], []
    pooled: list[float] = []
    for run_pairs in per_run:
        lr, _, lc = length_metrics([(s, o) for s, o, _ in run_pairs])
        bleu = corpus_bleu([o for _, o, _ in run_pairs],
                           [r for _, _, r in run_pairs], config)
        lrs.append(lr)
        lcs.append(lc)
        bleus.append(bleu)
        pooled.extend(char_count(o) / char_count(s) for s, o, _ in run_pairs)
    mean_pooled = sum(pooled) / len(pooled)
    lr_std = math.sqrt(sum((r - mean_pooled) ** 2 for r in pooled)
                       / len(pooled))
    return CellReport(
        model, pool_type, shots,
        lr=sum(lrs) / len(lrs),
        lr_std=lr_std,
        lc=sum(lcs) / len(lcs),
        bleu=sum(bleus) / len(bleus),
        n=len(per_run[0]),
        runs=len(per_run),
    )
