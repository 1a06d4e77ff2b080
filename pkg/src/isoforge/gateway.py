"""Generation backends, request cache, and the driver that ties them.

The wire protocol is a minimal JSON completion exchange modeled on
Ollama-style generate endpoints:

    request  {"model": ..., "prompt": ..., "options": {"top_k": ...,
              "temperature": ..., "num_predict": ...}, "stream": false}
    response {"response": <text>}

Alternate response shapes can be reached by configuring the dot-path of
the text field. Every completed request is appended to a JSON-lines
cache keyed by a content hash, so repeating an experiment with a warm
cache issues no backend calls at all.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import requests

from .corpus import char_count
from .errors import BackendError, BackendUnreachable, Timeout
from .pools import PoolType
from .postprocess import truncate_output
from .prompts import PromptConfig, PromptSpec

RETRY_SLEEPS = (1.0, 4.0, 16.0)


@dataclass(frozen=True)
class SamplingParams:
    """Decoding configuration passed to the backend."""
    top_k: int = 40
    temperature: float = 0.8
    max_tokens: int = 512
    stop_on_eot: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def as_dict(self) -> dict:
        return {"top_k": self.top_k, "temperature": self.temperature,
                "max_tokens": self.max_tokens,
                "stop_on_eot": self.stop_on_eot}


@dataclass(frozen=True)
class GenerationRequest:
    backend_id: str
    model: str
    prompt: PromptSpec
    params: SamplingParams
    run_index: int
    sentence_id: int

    def cache_key(self) -> str:
        payload = json.dumps(
            [self.backend_id, self.model, self.prompt.text,
             self.params.as_dict(), self.run_index],
            sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class GenerationRecord:
    request: GenerationRequest
    raw_output: str
    truncated_output: str
    overgenerated: bool
    latency_ms: int
    from_cache: bool
    meta: dict
    error: str | None = None


class _Transient(Exception):
    """Internal marker for retriable backend failures."""

    def __init__(self, kind: str, detail: str):
        super().__init__(detail)
        self.kind = kind  # "unreachable" or "timeout"


class HttpBackend:
    """JSON completion client for one HTTP endpoint."""

    def __init__(self, url: str, timeout_s: float = 120.0,
                 response_path: str = "response",
                 session: requests.Session | None = None):
        self.backend_id = "http"
        self.url = url
        self.timeout_s = timeout_s
        self.response_path = response_path
        self._session = session or requests.Session()

    def complete(self, request: GenerationRequest) -> str:
        payload = {
            "model": request.model,
            "prompt": request.prompt.text,
            "options": {
                "top_k": request.params.top_k,
                "temperature": request.params.temperature,
                "num_predict": request.params.max_tokens,
            },
            "stream": False,
        }
        try:
            resp = self._session.post(self.url, json=payload,
                                      timeout=self.timeout_s)
        except requests.exceptions.Timeout as e:
            raise _Transient("timeout", str(e)) from None
        except requests.exceptions.RequestException as e:
            raise _Transient("unreachable", str(e)) from None
        if resp.status_code != 200:
            raise BackendError(resp.status_code, resp.text)
        body = resp.json()
        for key in self.response_path.split("."):
            body = body[key]
        return body


def _source_from_prompt(prompt_text: str) -> str:
    """Recover the sentence under translation from the final cue block.

    Prompts end with "<src lang>: <sentence>\\n<tgt lang>:"; the mock
    backends parse that instead of receiving the source out of band.
    """
    lines = prompt_text.rstrip("\n").split("\n")
    if len(lines) < 2:
        return ""
    source_line = lines[-2]
    if ": " in source_line:
        return source_line.split(": ", 1)[1]
    return source_line


_LEXICON = (
    "ein", "das", "und", "mit", "nicht", "sie", "wir", "haben", "sein",
    "wird", "auch", "nach", "bei", "aus", "zeit", "tag", "haus", "wasser",
    "licht", "stadt", "weg", "jahr", "welt", "immer", "gegen", "leben",
)


def _filler_text(length: int, rng: random.Random) -> str:
    """Deterministic word salad with char_count exactly `length`."""
    if length <= 0:
        return ""
    parts: list[str] = []
    size = -1  # joining adds one separator per word
    while size < length:
        word = rng.choice(_LEXICON)
        parts.append(word)
        size += len(word) + 1
    salad = " ".join(parts)[:length]
    trimmed = salad.rstrip()
    return trimmed + "x" * (length - len(trimmed))


class MockBackend:
    """Deterministic stand-in backend; no network involved.

    Modes:
      echo   return the source sentence parsed from the prompt cue
      fixed  canned outputs keyed by sentence id
      ratio  filler text whose length tracks the source length

    In ratio mode, `compliance_rate` switches to a two-regime draw: with
    that probability the output length lands strictly inside the
    compliance band, otherwise inside `noncompliant_band`. Without it
    the length is target_ratio +/- uniform noise. `overgen_prob` appends
    a second paragraph to exercise truncation. All draws derive from
    (seed, model, prompt text, run index), so repeated calls agree.
    """

    def __init__(self, mode: str = "echo", seed: int = 0,
                 table: Mapping[int, str] | None = None,
                 target_ratio: float = 1.0, noise: float = 0.0,
                 compliance_rate: float | None = None,
                 compliant_band: tuple[float, float] = (0.92, 1.08),
                 noncompliant_band: tuple[float, float] = (1.2, 1.6),
                 overgen_prob: float = 0.0,
                 latency_jitter_ms: int = 0,
                 fail_first: int = 0,
                 backend_id: str = "mock"):
        if mode not in ("echo", "fixed", "ratio"):
            raise ValueError(f"unknown mock mode {mode!r}")
        self.backend_id = backend_id
        self.mode = mode
        self.seed = seed
        self.table = dict(table or {})
        self.target_ratio = target_ratio
        self.noise = noise
        self.compliance_rate = compliance_rate
        self.compliant_band = compliant_band
        self.noncompliant_band = noncompliant_band
        self.overgen_prob = overgen_prob
        self.latency_jitter_ms = latency_jitter_ms
        self.fail_first = fail_first
        self.calls = 0
        self._lock = threading.Lock()

    def _rng(self, request: GenerationRequest) -> random.Random:
        key = (f"{self.seed}|{request.model}|{request.prompt.text}"
               f"|{request.run_index}").encode("utf-8")
        return random.Random(
            int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))

    def complete(self, request: GenerationRequest) -> str:
        with self._lock:
            self.calls += 1
            if self.fail_first > 0:
                self.fail_first -= 1
                raise _Transient("unreachable", "mock failure injection")
        rng = self._rng(request)
        if self.latency_jitter_ms:
            time.sleep(rng.uniform(0, self.latency_jitter_ms) / 1000.0)
        source = _source_from_prompt(request.prompt.text)
        if self.mode == "echo":
            out = source
        elif self.mode == "fixed":
            out = self.table.get(request.sentence_id,
                                 f"[no canned output for "
                                 f"{request.sentence_id}]")
        else:
            src_chars = max(1, char_count(source))
            if self.compliance_rate is not None:
                if rng.random() < self.compliance_rate:
                    lo, hi = self.compliant_band
                else:
                    lo, hi = self.noncompliant_band
                # integer length bounds keep the ratio strictly in band
                lo_n = max(1, math.ceil(lo * src_chars))
                hi_n = max(lo_n, math.floor(hi * src_chars))
                length = rng.randint(lo_n, hi_n)
            else:
                ratio = self.target_ratio + rng.uniform(-self.noise,
                                                        self.noise)
                length = max(1, round(src_chars * ratio))
            out = _filler_text(length, rng)
        if self.overgen_prob and rng.random() < self.overgen_prob:
            out += "\n\nNote: " + _filler_text(24, rng)
        return out


@dataclass(frozen=True)
class _CacheSlot:
    index: dict
    lock: threading.Lock
    path: Path


class RecordCache:
    """Append-only JSON-lines record store, one file per backend/model."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._slots: dict[tuple[str, str], _CacheSlot] = {}
        self._lock = threading.Lock()

    def path_for(self, backend_id: str, model: str) -> Path:
        safe_model = model.replace("/", "_")
        return self.root / backend_id / f"{safe_model}.jsonl"

    def _slot(self, backend_id: str, model: str) -> _CacheSlot:
        with self._lock:
            key = (backend_id, model)
            slot = self._slots.get(key)
            if slot is None:
                path = self.path_for(backend_id, model)
                index: dict = {}
                if path.exists():
                    with path.open("r", encoding="utf-8") as fh:
                        for line in fh:
                            line = line.strip()
                            if not line:
                                continue
                            entry = json.loads(line)
                            index[entry["key"]] = entry
                slot = _CacheSlot(index, threading.Lock(), path)
                self._slots[key] = slot
            return slot

    def get(self, request: GenerationRequest) -> GenerationRecord | None:
        slot = self._slot(request.backend_id, request.model)
        entry = slot.index.get(request.cache_key())
        if entry is None:
            return None
        return _record_from_entry(entry, request=request, from_cache=True)

    def put(self, record: GenerationRecord) -> None:
        req = record.request
        slot = self._slot(req.backend_id, req.model)
        entry = _entry_from_record(record)
        with slot.lock:
            slot.path.parent.mkdir(parents=True, exist_ok=True)
            with slot.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False,
                                    sort_keys=True) + "\n")
            slot.index[entry["key"]] = entry

    def all_records(self, backend_id: str,
                    model: str) -> list[GenerationRecord]:
        slot = self._slot(backend_id, model)
        return [_record_from_entry(e, request=None, from_cache=True)
                for e in slot.index.values()]


def _entry_from_record(record: GenerationRecord) -> dict:
    req = record.request
    cfg = req.prompt.config
    return {
        "key": req.cache_key(),
        "backend_id": req.backend_id,
        "model": req.model,
        "run_index": req.run_index,
        "sentence_id": req.sentence_id,
        "params": req.params.as_dict(),
        "prompt": {
            "text": req.prompt.text,
            "demo_ids": list(req.prompt.demo_ids),
            "config": {
                "src_lang": cfg.src_lang,
                "tgt_lang": cfg.tgt_lang,
                "pool_type": cfg.pool_type.value,
                "shots": cfg.shots,
                "restricted": cfg.restricted,
                "matched": cfg.matched,
            },
        },
        "raw_output": record.raw_output,
        "truncated_output": record.truncated_output,
        "overgenerated": record.overgenerated,
        "latency_ms": record.latency_ms,
        "meta": record.meta,
    }


def _record_from_entry(entry: dict, request: GenerationRequest | None,
                       from_cache: bool) -> GenerationRecord:
    if request is None:
        p = entry["prompt"]
        c = p["config"]
        config = PromptConfig(
            src_lang=c["src_lang"], tgt_lang=c["tgt_lang"],
            pool_type=PoolType.parse(c["pool_type"]), shots=c["shots"],
            restricted=c["restricted"], matched=c["matched"])
        prompt = PromptSpec(config, tuple(p["demo_ids"]), p["text"])
        request = GenerationRequest(
            backend_id=entry["backend_id"], model=entry["model"],
            prompt=prompt, params=SamplingParams(**entry["params"]),
            run_index=entry["run_index"], sentence_id=entry["sentence_id"])
    return GenerationRecord(
        request=request,
        raw_output=entry["raw_output"],
        truncated_output=entry["truncated_output"],
        overgenerated=entry["overgenerated"],
        latency_ms=entry["latency_ms"],
        from_cache=from_cache,
        meta=dict(entry.get("meta", {})),
    )


class Gateway:
    """Cache-aware generation driver with bounded parallelism."""

    def __init__(self, backend, cache: RecordCache,
                 retry_sleeps: Sequence[float] = RETRY_SLEEPS,
                 sleep: Callable[[float], None] = time.sleep,
                 strict_truncation: bool = False):
        self.backend = backend
        self.cache = cache
        self.retry_sleeps = tuple(retry_sleeps)
        self._sleep = sleep
        self.strict_truncation = strict_truncation

    def _call_backend(self, request: GenerationRequest) -> str:
        last: _Transient | None = None
        for delay in (None,) + self.retry_sleeps:
            if delay is not None:
                self._sleep(delay)
            try:
                return self.backend.complete(request)
            except _Transient as e:
                last = e
        assert last is not None
        if last.kind == "timeout":
            raise Timeout(str(last))
        raise BackendUnreachable(str(last))

    def generate(self, request: GenerationRequest,
                 meta: dict | None = None) -> GenerationRecord:
        """Return the cached record for this request, or perform one
        backend call and persist the result before returning it."""
        cached = self.cache.get(request)
        if cached is not None:
            return cached
        start = time.perf_counter()
        raw = self._call_backend(request)
        latency_ms = int((time.perf_counter() - start) * 1000)
        clean, overgen = truncate_output(raw, strict=self.strict_truncation)
        record = GenerationRecord(
            request=request, raw_output=raw, truncated_output=clean,
            overgenerated=overgen, latency_ms=latency_ms, from_cache=False,
            meta=dict(meta or {}))
        self.cache.put(record)
        return record

    def generate_batch(self, requests_: Sequence[GenerationRequest],
                       max_in_flight: int = 4,
                       metas: Sequence[dict] | None = None
                       ) -> list[GenerationRecord]:
        """Run many requests with at most max_in_flight outstanding.

        Results come back in request order. A failed request yields a
        record with `error` set instead of aborting the batch.
        """
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        metas = metas or [{}] * len(requests_)

        def one(pair):
            request, meta = pair
            try:
                return self.generate(request, meta)
            except Exception as e:  # surfaced per record
                return GenerationRecord(
                    request=request, raw_output="", truncated_output="",
                    overgenerated=False, latency_ms=0, from_cache=False,
                    meta=dict(meta or {}), error=f"{type(e).__name__}: {e}")

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, zip(requests_, metas)))
