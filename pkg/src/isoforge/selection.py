"""Best-of-k candidate selection and regeneration policies.

Selection shape, shared by the QE and oracle variants: filter the
candidates to the compliance band; if nothing survives, fall back to
the full set; score the survivors; return the argmax, breaking ties by
the lowest run index. Because the filter runs first, a compliant
candidate always beats a non-compliant one regardless of score.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import char_count, is_compliant
from .errors import EmptySet
from .metrics import BleuConfig, DEFAULT_BLEU, sentence_bleu
from .scoring import ScoreItem


@dataclass(frozen=True)
class Candidate:
    run_index: int
    text: str
    ratio: float


@dataclass(frozen=True)
class CandidateSet:
    sentence_id: int
    source: str
    candidates: tuple[Candidate, ...]
    reference: str | None = None


def make_candidate_set(sentence_id: int, source: str,
                       outputs: Sequence[tuple[int, str]],
                       reference: str | None = None) -> CandidateSet:
    """Build a CandidateSet, recomputing every ratio from the texts."""
    if not outputs:
        raise EmptySet(f"sentence {sentence_id} has no candidates")
    src = char_count(source)
    cands = tuple(
        Candidate(run_index, text,
                  char_count(text) / src if src else 0.0)
        for run_index, text in outputs)
    return CandidateSet(sentence_id, source, cands, reference)


@dataclass
class SelectionResult:
    chosen: Candidate
    used_fallback: bool      # no candidate was compliant
    scores: dict[int, float]  # run_index -> score over the scored pool


def _compliant_or_all(cset: CandidateSet
                      ) -> tuple[list[Candidate], bool]:
    compliant = [c for c in cset.candidates if is_compliant(c.ratio)]
    if compliant:
        return compliant, False
    return list(cset.candidates), True


def _argmax(pool: Sequence[Candidate],
            scores: dict[int, float]) -> Candidate:
    return max(pool, key=lambda c: (scores[c.run_index], -c.run_index))


def select_best(cset: CandidateSet, scorer) -> SelectionResult:
    """Pick the best candidate with a reference-free QE scorer.

    `scorer` is any client with score_batch (see scoring module).
    Raises ScorerUnavailable/ScorerProtocolViolation from the client.
    """
    if not cset.candidates:
        raise EmptySet(f"sentence {cset.sentence_id} has no candidates")
    pool, fallback = _compliant_or_all(cset)
    items = [ScoreItem(id=c.run_index, source=cset.source,
                       hypothesis=c.text, reference=None) for c in pool]
    raw = scorer.score_batch(items)
    scores = {c.run_index: raw[c.run_index] for c in pool}
    return SelectionResult(_argmax(pool, scores), fallback, scores)


def oracle_bleu_select(cset: CandidateSet,
                       reference: str | None = None,
                       config: BleuConfig = DEFAULT_BLEU
                       ) -> SelectionResult:
    """Upper-bound selector: sentence BLEU against the reference.

    Mirrors select_best exactly, including the fall-back to the full
    set when no candidate is compliant; such sentences should be
    flagged downstream.
    """
    if not cset.candidates:
        raise EmptySet(f"sentence {cset.sentence_id} has no candidates")
    ref = reference if reference is not None else cset.reference
    if ref is None:
        raise EmptySet(f"sentence {cset.sentence_id} has no reference")
    pool, fallback = _compliant_or_all(cset)
    scores = {c.run_index: sentence_bleu(c.text, ref, config) for c in pool}
    return SelectionResult(_argmax(pool, scores), fallback, scores)


def _clean_text(result) -> str:
    if isinstance(result, str):
        return result
    return result.truncated_output


def generate_until_compliant(source: str,
                             attempt: Callable[[int], object],
                             budget: int) -> tuple[list, bool]:
    """Issue attempts one at a time until one is length-compliant.

    attempt(i) performs the i-th generation (fresh run index, fresh
    demonstration sample) and returns either a GenerationRecord or the
    cleaned output text. All attempts are kept; success says whether
    the last one was compliant. Backend errors propagate; records
    already produced stay persisted in the gateway cache.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    src = char_count(source)
    records: list = []
    for i in range(budget):
        result = attempt(i)
        records.append(result)
        ratio = char_count(_clean_text(result)) / src if src else 0.0
        if is_compliant(ratio):
            return records, True
    return records, False


@dataclass
class EscalationResult:
    records: list
    success: bool
    escalated: bool
    attempts_default: int
    attempts_alt: int


def escalating_policy(source: str,
                      attempt_default: Callable[[int], object],
                      attempt_alt: Callable[[int], object],
                      budget_default: int,
                      budget_alt: int) -> EscalationResult:
    """Default-prompt regeneration, then switch to the aggressive
    (Tiny-pool, shorter-instruction) configuration on failure."""
    records, ok = generate_until_compliant(source, attempt_default,
                                           budget_default)
    if ok:
        return EscalationResult(records, True, False, len(records), 0)
    alt_records, ok = generate_until_compliant(source, attempt_alt,
                                               budget_alt)
    return EscalationResult(records + alt_records, ok, True,
                            len(records), len(alt_records))
