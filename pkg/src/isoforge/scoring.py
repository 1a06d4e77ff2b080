"""Quality-estimation scorer clients.

Wire protocol, newline-delimited JSON on both transports:

    request   {"id": <int>, "source": <text>, "hypothesis": <text>,
               "reference": <text or null>}
    response  {"id": <int>, "score": <float>}
    error     {"id": <int>, "error": <text>}

A subprocess scorer reads requests on stdin and answers on stdout,
announcing itself first with the handshake line

    {"protocol": "isoforge-scorer/1", "metric": <name>}

The HTTP transport POSTs a JSON array of requests to /score and gets an
array back. Response order is irrelevant on either transport; ids are
authoritative. Requests go out in batches of `batch_size`.

The native dummy scorer keeps the selection pipeline runnable with no
external process: score = -|ratio - 1| from the toolkit's own character
counts, so a perfectly length-matched hypothesis scores 0 and everything
else is negative.
"""
from __future__ import annotations

import json
import math
import shlex
import subprocess
from dataclasses import dataclass
from typing import Sequence

import requests

from .corpus import char_count
from .errors import ScorerProtocolViolation, ScorerUnavailable

PROTOCOL = "isoforge-scorer/1"


@dataclass(frozen=True)
class ScoreItem:
    id: int
    source: str
    hypothesis: str
    reference: str | None = None

    def as_dict(self) -> dict:
        return {"id": self.id, "source": self.source,
                "hypothesis": self.hypothesis, "reference": self.reference}


@dataclass(frozen=True)
class ScorerHandle:
    """Where and how to reach a scorer.

    transport "native" needs no endpoint; "subprocess" takes a command
    line; "http" takes a base URL.
    """
    transport: str = "native"
    endpoint: str = ""
    batch_size: int = 32


def _validate_responses(items: Sequence[ScoreItem],
                        responses: Sequence[dict]) -> dict[int, float]:
    want = {item.id for item in items}
    scores: dict[int, float] = {}
    for resp in responses:
        if not isinstance(resp, dict) or "id" not in resp:
            raise ScorerProtocolViolation(f"malformed response: {resp!r}")
        rid = resp["id"]
        if rid not in want:
            raise ScorerProtocolViolation(f"unrequested id {rid!r}")
        if rid in scores:
            raise ScorerProtocolViolation(f"duplicate id {rid!r}")
        if "error" in resp:
            raise ScorerUnavailable(
                f"scorer failed on id {rid}: {resp['error']}")
        score = resp.get("score")
        if not isinstance(score, (int, float)) or not math.isfinite(score):
            raise ScorerProtocolViolation(
                f"non-finite score for id {rid}: {score!r}")
        scores[rid] = float(score)
    missing = want - scores.keys()
    if missing:
        raise ScorerProtocolViolation(f"missing ids {sorted(missing)}")
    return scores


class NativeDummyScorer:
    """Reference-free length scorer built into the toolkit."""

    metric = "dummy-length"

    def score_batch(self, items: Sequence[ScoreItem]) -> dict[int, float]:
        scores = {}
        for item in items:
            src = char_count(item.source)
            ratio = char_count(item.hypothesis) / src if src else 0.0
            scores[item.id] = -abs(ratio - 1.0)
        return scores

    def close(self):
        pass


class SubprocessScorer:
    """Line-protocol client around a scorer child process."""

    def __init__(self, command: str | Sequence[str], batch_size: int = 32):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.batch_size = max(1, batch_size)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1)
        except OSError as e:
            raise ScorerUnavailable(f"cannot start scorer {argv!r}: {e}")
        handshake = self._read_line()
        try:
            head = json.loads(handshake)
        except json.JSONDecodeError:
            raise ScorerProtocolViolation(
                f"bad handshake line: {handshake!r}")
        if head.get("protocol") != PROTOCOL:
            raise ScorerProtocolViolation(
                f"unsupported protocol: {head.get('protocol')!r}")
        self.metric = head.get("metric", "unknown")

    def _read_line(self) -> str:
        line = self._proc.stdout.readline()
        if line == "":
            code = self._proc.poll()
            raise ScorerUnavailable(
                f"scorer closed its stdout (exit code {code})")
        return line.rstrip("\n")

    def score_batch(self, items: Sequence[ScoreItem]) -> dict[int, float]:
        scores: dict[int, float] = {}
        for start in range(0, len(items), self.batch_size):
            chunk = items[start:start + self.batch_size]
            try:
                for item in chunk:
                    self._proc.stdin.write(
                        json.dumps(item.as_dict(), ensure_ascii=False) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise ScorerUnavailable(f"scorer pipe broke: {e}")
            responses = []
            for _ in chunk:
                line = self._read_line()
                try:
                    responses.append(json.loads(line))
                except json.JSONDecodeError:
                    raise ScorerProtocolViolation(
                        f"response is not JSON: {line!r}")
            scores.update(_validate_responses(chunk, responses))
        return scores

    def close(self):
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()
        if proc.stdout is not None:
            proc.stdout.close()


class HttpScorer:
    """POST /score client for a scorer service."""

    def __init__(self, base_url: str, batch_size: int = 32,
                 timeout_s: float = 60.0,
                 session: requests.Session | None = None):
        self.url = base_url.rstrip("/") + "/score"
        self.batch_size = max(1, batch_size)
        self.timeout_s = timeout_s
        self._session = session or requests.Session()
        self.metric = "remote"

    def score_batch(self, items: Sequence[ScoreItem]) -> dict[int, float]:
        scores: dict[int, float] = {}
        for start in range(0, len(items), self.batch_size):
            chunk = items[start:start + self.batch_size]
            try:
                resp = self._session.post(
                    self.url, json=[i.as_dict() for i in chunk],
                    timeout=self.timeout_s)
            except requests.exceptions.RequestException as e:
                raise ScorerUnavailable(f"scorer endpoint failed: {e}")
            if resp.status_code != 200:
                raise ScorerUnavailable(
                    f"scorer returned HTTP {resp.status_code}: "
                    f"{resp.text[:200]}")
            body = resp.json()
            if not isinstance(body, list):
                raise ScorerProtocolViolation(
                    f"expected a JSON array, got {type(body).__name__}")
            scores.update(_validate_responses(chunk, body))
        return scores

    def close(self):
        self._session.close()


def open_scorer(handle: ScorerHandle):
    """Instantiate the scorer client for a handle."""
    if handle.transport == "native":
        return NativeDummyScorer()
    if handle.transport == "subprocess":
        return SubprocessScorer(handle.endpoint, handle.batch_size)
    if handle.transport == "http":
        return HttpScorer(handle.endpoint, handle.batch_size)
    raise ScorerUnavailable(f"unknown transport {handle.transport!r}")
