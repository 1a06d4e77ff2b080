"""Tools for length-controlled machine translation with prompted LLMs.

Builds demonstration pools from a parallel corpus, renders the prompt
matrix, drives a generation backend with a persistent cache, scores
outputs for length compliance and BLEU, and runs best-of-k selection
plus the usual significance tests.
"""
from .corpus import (COMPLIANCE_MAX, COMPLIANCE_MIN, DatasetStats,
                     ParallelSample, char_count, dataset_stats,
                     is_compliant, load_parallel, make_sample,
                     serialize_side)
from .errors import (BackendError, BackendUnreachable, ConfigError,
                     EmptyDataset, EmptyFailureSet, EmptyPool, EmptySet,
                     IsoforgeError, LengthMismatch, LineCountMismatch,
                     PoolTooSmall, ScorerProtocolViolation,
                     ScorerUnavailable, SentenceSetMismatch,
                     ShotCountMismatch, Timeout)
from .gateway import (Gateway, GenerationRecord, GenerationRequest,
                      HttpBackend, MockBackend, RecordCache,
                      SamplingParams)
from .metrics import (DEFAULT_BLEU, BleuConfig, CellReport, cell_report,
                      corpus_bleu, length_metrics, sentence_bleu,
                      tokenize_13a)
from .pools import (DEFAULT_POOL_CAP, DemonstrationPool, PoolType,
                    build_all_pools, build_pool, sample_shots)
from .postprocess import overgeneration_rate, truncate_output
from .prompts import PromptConfig, PromptSpec, render
from .scoring import (NativeDummyScorer, ScoreItem, ScorerHandle,
                      open_scorer)
from .selection import (Candidate, CandidateSet, EscalationResult,
                        SelectionResult, escalating_policy,
                        generate_until_compliant, make_candidate_set,
                        oracle_bleu_select, select_best)

__version__ = "0.1.0"

__all__ = [
    "COMPLIANCE_MAX", "COMPLIANCE_MIN", "DatasetStats", "ParallelSample",
    "char_count", "dataset_stats", "is_compliant", "load_parallel",
    "make_sample", "serialize_side",
    "BackendError", "BackendUnreachable", "ConfigError", "EmptyDataset",
    "EmptyFailureSet", "EmptyPool", "EmptySet", "IsoforgeError",
    "LengthMismatch", "LineCountMismatch", "PoolTooSmall",
    "ScorerProtocolViolation", "ScorerUnavailable", "SentenceSetMismatch",
    "ShotCountMismatch", "Timeout",
    "Gateway", "GenerationRecord", "GenerationRequest", "HttpBackend",
    "MockBackend", "RecordCache", "SamplingParams",
    "DEFAULT_BLEU", "BleuConfig", "CellReport", "cell_report",
    "corpus_bleu", "length_metrics", "sentence_bleu", "tokenize_13a",
    "DEFAULT_POOL_CAP", "DemonstrationPool", "PoolType",
    "build_all_pools", "build_pool", "sample_shots",
    "overgeneration_rate", "truncate_output",
    "PromptConfig", "PromptSpec", "render",
    "NativeDummyScorer", "ScoreItem", "ScorerHandle", "open_scorer",
    "Candidate", "CandidateSet", "EscalationResult", "SelectionResult",
    "escalating_policy", "generate_until_compliant", "make_candidate_set",
    "oracle_bleu_select", "select_best",
    "__version__",
]
