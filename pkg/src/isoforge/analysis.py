"""Significance testing, failure-set compliance analysis, and report
table emission.

The significance test is a paired two-sided sign-flip permutation test
on per-sentence mean ratios. When 2^n fits inside the resample budget
the full flip set is enumerated and the p-value is exact; otherwise a
fixed-seed Monte Carlo estimate with the add-one correction is used.
A paired t-test is available as an alternative.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import char_count, is_compliant
from .errors import EmptyFailureSet, SentenceSetMismatch
from .metrics import average_over_runs

DEFAULT_RESAMPLES = 10_000
DEFAULT_SEED = 12_345
REPORT_COLUMNS = ("model", "pool_type", "shots", "lr", "lc", "bleu",
                  "qe_score")


@dataclass
class TestResult:
    mean_diff: float
    p_value: float
    exhaustive: bool


def paired_permutation_test(a: Sequence[float], b: Sequence[float],
                            resamples: int = DEFAULT_RESAMPLES,
                            seed: int = DEFAULT_SEED) -> TestResult:
    """Two-sided sign-flip permutation test on paired values."""
    if len(a) != len(b) or not a:
        raise SentenceSetMismatch(
            f"paired test needs equal non-empty sequences, "
            f"got {len(a)} and {len(b)}")
    n = len(a)
    diffs = [x - y for x, y in zip(a, b)]
    observed = sum(diffs) / n
    if 2 ** n <= resamples:
        hits = 0
        for mask in range(2 ** n):
            total = 0.0
            for i in range(n):
                total += diffs[i] if mask >> i & 1 else -diffs[i]
            if abs(total / n) >= abs(observed):
                hits += 1
        return TestResult(observed, hits / 2 ** n, True)
    rng = np.random.default_rng(seed)
    d = np.asarray(diffs)
    signs = rng.integers(0, 2, size=(resamples, n)) * 2 - 1
    perm_means = np.abs((signs * d).mean(axis=1))
    hits = int(np.sum(perm_means >= abs(observed)))
    return TestResult(observed, (hits + 1) / (resamples + 1), False)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Paired two-sided t-test alternative (--test=t)."""
    from scipy import stats
    if len(a) != len(b) or not a:
        raise SentenceSetMismatch(
            f"paired test needs equal non-empty sequences, "
            f"got {len(a)} and {len(b)}")
    diffs = np.asarray(a) - np.asarray(b)
    res = stats.ttest_rel(a, b)
    return TestResult(float(diffs.mean()), float(res.pvalue), False)


@dataclass
class MatchMismatchRow:
    model: str
    pool_type: str
    mean_match: float
    mean_mismatch: float
    diff: float
    p_value: float
    significant: bool
    n: int


Groups = Mapping[int, tuple[str, Sequence[str]]]


def match_mismatch_row(model: str, pool_type: str,
                       groups_match: Groups, groups_mismatch: Groups,
                       alpha: float = 0.1, test: str = "permutation",
                       resamples: int = DEFAULT_RESAMPLES,
                       seed: int = DEFAULT_SEED) -> MatchMismatchRow:
    """Compare matched and mismatched instruction wording on one
    (model, pool) condition.

    Both inputs map sentence id to (source, outputs across runs). The
    sentence sets must coincide; callers drop unpaired sentences first.
    """
    if set(groups_match) != set(groups_mismatch):
        raise SentenceSetMismatch(
            "match and mismatch conditions cover different sentences")
    avg_match = average_over_runs(groups_match)
    avg_mismatch = average_over_runs(groups_mismatch)
    sids = sorted(groups_match)
    a = [avg_match.per_sentence[s] for s in sids]
    b = [avg_mismatch.per_sentence[s] for s in sids]
    if test == "t":
        result = paired_t_test(a, b)
    else:
        result = paired_permutation_test(a, b, resamples, seed)
    return MatchMismatchRow(
        model=model, pool_type=pool_type,
        mean_match=avg_match.pool_value,
        mean_mismatch=avg_mismatch.pool_value,
        diff=result.mean_diff, p_value=result.p_value,
        significant=result.p_value < alpha, n=len(sids))


def _ratio(source: str, output: str) -> float:
    src = char_count(source)
    return char_count(output) / src if src else 0.0


@dataclass
class ComplianceProportion:
    percent: float
    failure_count: int
    total: int


def compliance_proportion(default_groups: Groups, alt_groups: Groups,
                          attempts: int) -> ComplianceProportion:
    """Share of default-condition failures rescued by an alternative.

    The failure set F holds sentences with zero compliant outputs
    across all default runs. For each member, the first `attempts`
    alternative outputs are checked for at least one compliant result.
    Raises EmptyFailureSet when F is empty (callers report and move on).
    """
    if attempts < 1:
        raise ValueError("attempts must be >= 1")
    failures = [
        sid for sid, (src, outs) in default_groups.items()
        if not any(is_compliant(_ratio(src, o)) for o in outs)
    ]
    if not failures:
        raise EmptyFailureSet(
            "every sentence already met the constraint under the "
            "default condition")
    missing = [sid for sid in failures if sid not in alt_groups]
    if missing:
        raise SentenceSetMismatch(
            f"alternative condition lacks sentences {missing[:5]}")
    rescued = 0
    for sid in failures:
        src, outs = alt_groups[sid]
        if any(is_compliant(_ratio(src, o)) for o in outs[:attempts]):
            rescued += 1
    return ComplianceProportion(100.0 * rescued / len(failures),
                                len(failures), len(default_groups))


# report emission

_FORMATS = {"lr": "{:.4f}", "lc": "{:.2f}", "bleu": "{:.2f}",
            "qe_score": "{:.4f}"}


def _fmt(column: str, value) -> str:
    if value is None or value == "":
        return ""
    if column in _FORMATS:
        return _FORMATS[column].format(value)
    return str(value)


def _best_by_column(rows: Sequence[Mapping]) -> dict[str, set[int]]:
    """Row indices holding the best value per numeric column; for lr
    the best is the value closest to 1.0, elsewhere the maximum."""
    best: dict[str, set[int]] = {}
    for col in ("lr", "lc", "bleu", "qe_score"):
        keyed = [(i, r[col]) for i, r in enumerate(rows)
                 if r.get(col) not in (None, "")]
        if not keyed:
            continue
        if col == "lr":
            target = min(abs(v - 1.0) for _, v in keyed)
            best[col] = {i for i, v in keyed if abs(v - 1.0) == target}
        else:
            target = max(v for _, v in keyed)
            best[col] = {i for i, v in keyed if v == target}
    return best


def render_report(rows: Sequence[Mapping], fmt: str) -> str:
    """Render the report grid as CSV or markdown text.

    Column order is fixed. Rows with missing metrics keep their place
    with empty fields. The markdown variant bolds each column's best
    value.
    """
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(c, row.get(c)) for c in REPORT_COLUMNS])
        return buf.getvalue()
    if fmt == "markdown":
        best = _best_by_column(rows)
        lines = ["| " + " | ".join(REPORT_COLUMNS) + " |",
                 "|" + "|".join(" --- " for _ in REPORT_COLUMNS) + "|"]
        for i, row in enumerate(rows):
            cells = []
            for col in REPORT_COLUMNS:
                text = _fmt(col, row.get(col))
                if text and i in best.get(col, ()):
                    text = f"**{text}**"
                cells.append(text)
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(rows: Sequence[Mapping], fmt: str,
                path: str | Path) -> Path:
    """Write the rendered report to `path` and return it."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_report(rows, fmt), encoding="utf-8")
    return out
