"""Experiment matrix orchestration.

A matrix cell is one (model, pool type, shot count). For every cell and
run index the same demonstration draw and prompt text are used for all
models, because the shot sampler is seeded by (seed, pool, k, run) and
never by the model. Records land in the gateway cache; the grid can be
recomputed from the cache alone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .config import ExperimentConfig, require_run_inputs
from .corpus import ParallelSample, load_parallel
from .errors import ConfigError
from .gateway import (Gateway, GenerationRecord, GenerationRequest,
                      HttpBackend, MockBackend, RecordCache)
from .metrics import CellReport, cell_report
from .pools import DemonstrationPool, PoolType, build_pool, sample_shots
from .prompts import PromptConfig, render
from .selection import (CandidateSet, EscalationResult, escalating_policy,
                        make_candidate_set)

PHASE_MATRIX = "matrix"
PHASE_ESCALATE = "escalate"
_ESCALATE_RUN_BASE = {PoolType.RANDOM: 100_000, PoolType.TINY: 200_000}


@dataclass(frozen=True)
class CellKey:
    model: str
    pool_type: PoolType
    shots: int


@dataclass
class MatrixResult:
    records: list[GenerationRecord]
    rows: list[dict]
    error_count: int


def make_backend(cfg: ExperimentConfig):
    if cfg.backend.kind == "mock":
        opts = dict(cfg.backend.mock)
        opts.setdefault("seed", cfg.seed)
        if "table" in opts:
            opts["table"] = {int(k): v for k, v in opts["table"].items()}
        return MockBackend(**opts)
    return HttpBackend(cfg.backend.url, timeout_s=cfg.backend.timeout_s)


def make_gateway(cfg: ExperimentConfig, backend=None) -> Gateway:
    backend = backend or make_backend(cfg)
    cache = RecordCache(cfg.cache_dir)
    return Gateway(backend, cache,
                   strict_truncation=cfg.strict_truncation)


def plan_cells(cfg: ExperimentConfig) -> list[CellKey]:
    return [CellKey(m, p, s)
            for m in cfg.models
            for p in cfg.pool_types
            for s in cfg.shots]


def _build_pools(cfg: ExperimentConfig,
                 demos: Sequence[ParallelSample]
                 ) -> dict[PoolType, DemonstrationPool]:
    return {pt: build_pool(demos, pt, cfg.n_cap) for pt in set(cfg.pool_types)
            | {PoolType.RANDOM, PoolType.TINY}}


def _demo_lookup(demos: Sequence[ParallelSample]
                 ) -> dict[int, ParallelSample]:
    return {d.id: d for d in demos}


def _cell_prompt_config(cfg: ExperimentConfig, cell: CellKey) -> PromptConfig:
    return PromptConfig(
        src_lang=cfg.src_lang, tgt_lang=cfg.tgt_lang,
        pool_type=cell.pool_type, shots=cell.shots,
        restricted=cfg.restricted, matched=cfg.matched)


def run_matrix(cfg: ExperimentConfig,
               gateway: Gateway | None = None) -> MatrixResult:
    """Generate every (cell, run, sentence) record and compute the grid.

    A warm cache turns every generation into a hit, so re-running is a
    no-op on the record store and reproduces the grid exactly.
    """
    require_run_inputs(cfg)
    gateway = gateway or make_gateway(cfg)
    demos = load_parallel(cfg.demo_src, cfg.demo_tgt)
    test = load_parallel(cfg.test_src, cfg.test_ref)
    pools = _build_pools(cfg, demos)
    by_id = _demo_lookup(demos)

    requests: list[GenerationRequest] = []
    metas: list[dict] = []
    for cell in plan_cells(cfg):
        pconfig = _cell_prompt_config(cfg, cell)
        pool = pools[cell.pool_type]
        for run in range(cfg.runs):
            if cell.shots > 0:
                demo_ids = sample_shots(pool, cell.shots, run, cfg.seed)
                drawn = [by_id[i] for i in demo_ids]
            else:
                drawn = []
            for sample in test:
                prompt = render(pconfig, drawn, sample.source)
                requests.append(GenerationRequest(
                    backend_id=gateway.backend.backend_id,
                    model=cell.model, prompt=prompt, params=cfg.sampling,
                    run_index=run, sentence_id=sample.id))
                metas.append({
                    "phase": PHASE_MATRIX, "experiment": cfg.name,
                    "seed": cfg.seed, "source": sample.source,
                    "reference": sample.target,
                })
    records = gateway.generate_batch(
        requests, cfg.backend.max_in_flight, metas)
    rows = grid_rows(cfg, records)
    errors = sum(1 for r in records if r.error)
    return MatrixResult(records, rows, errors)


def _matches_config(cfg: ExperimentConfig, record: GenerationRecord) -> bool:
    pc = record.request.prompt.config
    return (record.meta.get("phase") == PHASE_MATRIX
            and record.meta.get("seed") == cfg.seed
            and pc.matched == cfg.matched
            and pc.restricted == cfg.restricted
            and record.request.run_index < cfg.runs)


def grid_rows(cfg: ExperimentConfig,
              records: Iterable[GenerationRecord]) -> list[dict]:
    """Aggregate records into report rows, one per planned cell.

    Cells with no usable records are kept as rows with empty metric
    fields. Errored records are excluded from metrics.
    """
    grouped: dict[CellKey, dict[int, dict[int, GenerationRecord]]] = {}
    for rec in records:
        if rec.error or not _matches_config(cfg, rec):
            continue
        pc = rec.request.prompt.config
        key = CellKey(rec.request.model, pc.pool_type, pc.shots)
        grouped.setdefault(key, {}) \
            .setdefault(rec.request.run_index, {})[
                rec.request.sentence_id] = rec

    rows = []
    for cell in plan_cells(cfg):
        runs = grouped.get(cell, {})
        per_run = []
        for run_index in sorted(runs):
            triples = [
                (r.meta["source"], r.truncated_output,
                 r.meta.get("reference", ""))
                for _, r in sorted(runs[run_index].items())
            ]
            if triples:
                per_run.append(triples)
        row = {"model": cell.model, "pool_type": cell.pool_type.value,
               "shots": cell.shots, "lr": None, "lr_std": None,
               "lc": None, "bleu": None, "qe_score": None,
               "n": 0, "runs": 0}
        if per_run:
            report = cell_report(cell.model, cell.pool_type.value,
                                 cell.shots, per_run)
            row.update(lr=report.lr, lr_std=report.lr_std, lc=report.lc,
                       bleu=report.bleu, n=report.n, runs=report.runs)
        rows.append(row)
    return rows


def cached_records(cfg: ExperimentConfig,
                   cache: RecordCache | None = None
                   ) -> list[GenerationRecord]:
    cache = cache or RecordCache(cfg.cache_dir)
    backend_id = "mock" if cfg.backend.kind == "mock" else "http"
    out: list[GenerationRecord] = []
    for model in cfg.models:
        out.extend(cache.all_records(backend_id, model))
    return out


def grid_from_cache(cfg: ExperimentConfig,
                    cache: RecordCache | None = None) -> list[dict]:
    """Recompute the report grid purely from the persisted records."""
    return grid_rows(cfg, cached_records(cfg, cache))


def cell_groups(cfg: ExperimentConfig, records: Iterable[GenerationRecord],
                model: str, pool_type: PoolType, shots: int,
                matched: bool | None = None,
                max_runs: int | None = None
                ) -> dict[int, tuple[str, list[str]]]:
    """Group one cell's outputs per sentence, ordered by run index.

    Returns {sentence_id: (source, outputs)} for analysis functions.
    """
    if matched is None:
        matched = cfg.matched
    runs_cap = cfg.runs if max_runs is None else max_runs
    per_sentence: dict[int, dict[int, GenerationRecord]] = {}
    for rec in records:
        pc = rec.request.prompt.config
        if (rec.error or rec.meta.get("phase") != PHASE_MATRIX
                or rec.meta.get("seed") != cfg.seed
                or rec.request.model != model
                or pc.pool_type is not pool_type or pc.shots != shots
                or pc.matched != matched
                or pc.restricted != cfg.restricted
                or rec.request.run_index >= runs_cap):
            continue
        per_sentence.setdefault(rec.request.sentence_id, {})[
            rec.request.run_index] = rec
    groups = {}
    for sid, by_run in per_sentence.items():
        ordered = [by_run[r] for r in sorted(by_run)]
        groups[sid] = (ordered[0].meta["source"],
                       [r.truncated_output for r in ordered])
    return groups


def candidate_sets(cfg: ExperimentConfig,
                   records: Iterable[GenerationRecord], model: str,
                   pool_type: PoolType, shots: int,
                   k: int | None = None) -> list[CandidateSet]:
    """Build per-sentence candidate sets from one cell's records.

    k limits the candidates to the first k run indices (a nested
    prefix of the full run set); default uses every run.
    """
    records = list(records)
    groups = cell_groups(cfg, records, model, pool_type, shots,
                         max_runs=k)
    refs: dict[int, str] = {}
    for rec in records:
        if rec.request.model == model and not rec.error:
            refs.setdefault(rec.request.sentence_id,
                            rec.meta.get("reference", ""))
    sets = []
    for sid in sorted(groups):
        source, outputs = groups[sid]
        sets.append(make_candidate_set(
            sid, source, list(enumerate(outputs)), refs.get(sid)))
    return sets


def escalate_sentence(cfg: ExperimentConfig, gateway: Gateway,
                      pools: Mapping[PoolType, DemonstrationPool],
                      by_id: Mapping[int, ParallelSample], model: str,
                      sample: ParallelSample) -> EscalationResult:
    """Run the regenerate-until-compliant policy for one sentence:
    default (Random) attempts first, then the Tiny configuration."""

    def attempt_for(pool_type: PoolType):
        base = _ESCALATE_RUN_BASE[pool_type]
        pconfig = PromptConfig(
            src_lang=cfg.src_lang, tgt_lang=cfg.tgt_lang,
            pool_type=pool_type, shots=cfg.escalate.shots,
            restricted=cfg.restricted, matched=True)

        def attempt(i: int):
            run_index = base + i
            if pconfig.shots > 0:
                ids = sample_shots(pools[pool_type], pconfig.shots,
                                   run_index, cfg.seed)
                drawn = [by_id[d] for d in ids]
            else:
                drawn = []
            prompt = render(pconfig, drawn, sample.source)
            request = GenerationRequest(
                backend_id=gateway.backend.backend_id, model=model,
                prompt=prompt, params=cfg.sampling, run_index=run_index,
                sentence_id=sample.id)
            return gateway.generate(request, meta={
                "phase": PHASE_ESCALATE, "experiment": cfg.name,
                "seed": cfg.seed, "source": sample.source,
                "reference": sample.target})

        return attempt

    return escalating_policy(
        sample.source, attempt_for(PoolType.RANDOM),
        attempt_for(PoolType.TINY), cfg.escalate.budget_default,
        cfg.escalate.budget_tiny)


def escalate_run(cfg: ExperimentConfig, model: str,
                 gateway: Gateway | None = None
                 ) -> list[tuple[ParallelSample, EscalationResult]]:
    require_run_inputs(cfg)
    if model not in cfg.models:
        raise ConfigError([f"model {model!r} is not in experiment.models"])
    gateway = gateway or make_gateway(cfg)
    demos = load_parallel(cfg.demo_src, cfg.demo_tgt)
    test = load_parallel(cfg.test_src, cfg.test_ref)
    pools = _build_pools(cfg, demos)
    by_id = _demo_lookup(demos)
    return [(sample,
             escalate_sentence(cfg, gateway, pools, by_id, model, sample))
            for sample in test]
