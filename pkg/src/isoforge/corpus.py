"""Line-aligned parallel corpus ingestion and length statistics.

Character counting rule, used everywhere a length or ratio appears:
the number of Unicode scalar values after stripping leading and trailing
whitespace. Internal whitespace counts. No Unicode normalization is
applied. The compliance band is the closed interval [0.90, 1.10].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (EmptyDataset, EmptySource, EmptyTarget, InvalidEncoding,
                     LineCountMismatch)

COMPLIANCE_MIN = 0.90
COMPLIANCE_MAX = 1.10


def char_count(text: str) -> int:
    """Number of Unicode scalar values in `text` after stripping
    leading/trailing whitespace."""
    return len(text.strip())


def is_compliant(ratio: float) -> bool:
    """True if `ratio` lies in the closed band [0.90, 1.10].

    Endpoints are inclusive; this is the single compliance rule used by
    pools, metrics, and selection alike.
    """
    return COMPLIANCE_MIN <= ratio <= COMPLIANCE_MAX


@dataclass(frozen=True)
class ParallelSample:
    """One aligned source/target sentence pair.

    `ratio` is target chars over source chars, the per-sample
    target-to-source length ratio r.
    """
    id: int
    source: str
    target: str
    src_chars: int
    tgt_chars: int
    ratio: float


def make_sample(idx: int, source: str, target: str) -> ParallelSample:
    sc = char_count(source)
    tc = char_count(target)
    if sc == 0:
        raise EmptySource(idx + 1)
    if tc == 0:
        raise EmptyTarget(idx + 1)
    return ParallelSample(idx, source, target, sc, tc, tc / sc)


@dataclass(frozen=True)
class DatasetStats:
    """Aggregate length statistics over a sample collection.

    lr_std is the population (N-divisor) standard deviation. lc is the
    percentage of samples whose ratio falls in the compliance band.
    """
    n: int
    lr_mean: float
    lr_std: float
    lc: float


def _read_lines(path: str | Path) -> list[str]:
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise InvalidEncoding(str(path), str(e)) from None
    text = text.replace("\r\n", "\n")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline at EOF
    return lines


def load_parallel(src_path: str | Path,
                  tgt_path: str | Path) -> list[ParallelSample]:
    """Load two line-aligned UTF-8 files into ParallelSamples.

    Line i of each file pairs into sample i; ids are zero-based file
    order. CRLF endings are normalized to LF. Raises LineCountMismatch
    when the files disagree in length, EmptySource/EmptyTarget when a
    line strips to nothing, InvalidEncoding on non-UTF-8 bytes.
    """
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatch(len(src_lines), len(tgt_lines))
    return [make_sample(i, s, t)
            for i, (s, t) in enumerate(zip(src_lines, tgt_lines))]


def serialize_side(samples: Sequence[ParallelSample], side: str) -> str:
    """Re-serialize one side of a loaded corpus ('source' or 'target').

    Inverse of load_parallel up to the trailing newline at EOF.
    """
    texts = [getattr(s, side) for s in samples]
    return "\n".join(texts) + "\n" if texts else ""


def ratio_stats(ratios: Sequence[float]) -> DatasetStats:
    if not ratios:
        raise EmptyDataset("no samples")
    n = len(ratios)
    mean = sum(ratios) / n
    var = sum((r - mean) ** 2 for r in ratios) / n
    compliant = sum(1 for r in ratios if is_compliant(r))
    return DatasetStats(n, mean, math.sqrt(var), 100.0 * compliant / n)


def dataset_stats(samples: Iterable[ParallelSample]) -> DatasetStats:
    """Mean/std of per-sample ratios plus length compliance percentage."""
    return ratio_stats([s.ratio for s in samples])
