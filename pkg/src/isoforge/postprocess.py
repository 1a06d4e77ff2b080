"""Overgeneration handling for raw model output.

Models frequently continue past the translation with explanations or a
second translation. The cleanup rule is: keep only the text before the
first newline. One documented deviation: when the output *starts* with
blank lines, the default mode skips to the first non-empty line instead
of returning an empty hypothesis, and flags the record as overgenerated.
strict=True restores the literal first-newline rule.
"""
from __future__ import annotations

from typing import Iterable

from .errors import EmptySet


def truncate_output(raw: str, strict: bool = False) -> tuple[str, bool]:
    """Return (clean, overgenerated) for one raw model output.

    clean is whitespace-stripped and contains no newline. overgenerated
    is true iff `raw` contains a newline with non-whitespace content
    somewhere after it.
    """
    nl = raw.find("\n")
    overgenerated = nl != -1 and raw[nl + 1:].strip() != ""
    if strict:
        clean = raw[:nl] if nl != -1 else raw
        return clean.strip(), overgenerated
    for line in raw.split("\n"):
        line = line.strip()
        if line:
            return line, overgenerated
    return "", overgenerated


def overgeneration_rate(raw_outputs: Iterable[str]) -> float:
    """Percentage of outputs flagged overgenerated. Raises EmptySet."""
    outputs = list(raw_outputs)
    if not outputs:
        raise EmptySet("no outputs to rate")
    hits = sum(1 for r in outputs if truncate_output(r)[1])
    return 100.0 * hits / len(outputs)
