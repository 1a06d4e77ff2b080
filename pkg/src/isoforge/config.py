"""Experiment configuration: TOML file plus flag overrides.

The environment variable ISOFORGE_BACKEND_URL overrides the configured
backend URL; --set key=value overrides take precedence over both.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .gateway import SamplingParams
from .pools import DEFAULT_POOL_CAP, PoolType
from .scoring import ScorerHandle

_LANG_NAMES = {"en": "English", "de": "German", "fr": "French",
               "es": "Spanish", "it": "Italian", "pt": "Portuguese"}


def _expand_lang(token: str) -> str:
    return _LANG_NAMES.get(token.strip().lower(), token.strip())


@dataclass
class BackendConfig:
    kind: str = "http"            # "http" or "mock"
    url: str = ""
    max_in_flight: int = 4
    timeout_s: float = 120.0
    mock: dict = field(default_factory=dict)


@dataclass
class EscalateConfig:
    budget_default: int = 10
    budget_tiny: int = 10
    shots: int = 5


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    src_lang: str = "English"
    tgt_lang: str = "German"
    demo_src: str = ""
    demo_tgt: str = ""
    test_src: str = ""
    test_ref: str = ""
    models: list[str] = field(default_factory=list)
    pool_types: list[PoolType] = field(
        default_factory=lambda: list(PoolType))
    shots: list[int] = field(default_factory=lambda: [0, 5])
    runs: int = 10
    matched: bool = True
    restricted: bool = True
    seed: int = 0
    n_cap: int = DEFAULT_POOL_CAP
    strict_truncation: bool = False
    cache_dir: str = "cache"
    reports_dir: str = "reports"
    sampling: SamplingParams = field(default_factory=SamplingParams)
    backend: BackendConfig = field(default_factory=BackendConfig)
    scorer: ScorerHandle = field(default_factory=ScorerHandle)
    escalate: EscalateConfig = field(default_factory=EscalateConfig)


def _apply_overrides(data: dict, overrides: Sequence[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not key=value"])
        key, value = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {key!r} crosses a scalar"])
        leaf = parts[-1]
        prior = node.get(leaf)
        if isinstance(prior, bool):
            node[leaf] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(prior, int):
            node[leaf] = int(value)
        elif isinstance(prior, float):
            node[leaf] = float(value)
        elif isinstance(prior, list):
            node[leaf] = [v.strip() for v in value.split(",")]
        else:
            # no prior to imitate: take the TOML reading of the literal
            try:
                node[leaf] = tomllib.loads(f"v = {value}")["v"]
            except tomllib.TOMLDecodeError:
                node[leaf] = value


def load_config(path: str | Path,
                overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Collects every problem before raising so the diagnostics name all
    offending fields at once.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"invalid TOML in {path}: {e}"])
    return parse_config(data, overrides, base_dir=Path(path).parent)


def parse_config(data: Mapping, overrides: Sequence[str] = (),
                 base_dir: Path | None = None) -> ExperimentConfig:
    data = {k: (dict(v) if isinstance(v, Mapping) else v)
            for k, v in data.items()}
    _apply_overrides(data, overrides)

    problems: list[str] = []
    exp = data.get("experiment", {})
    if not isinstance(exp, Mapping):
        raise ConfigError(["[experiment] must be a table"])

    cfg = ExperimentConfig()
    cfg.name = str(exp.get("name", cfg.name))

    pair = exp.get("language_pair")
    if pair:
        bits = str(pair).split("-")
        if len(bits) != 2:
            problems.append(
                f"experiment.language_pair: expected 'Source-Target', "
                f"got {pair!r}")
        else:
            cfg.src_lang = _expand_lang(bits[0])
            cfg.tgt_lang = _expand_lang(bits[1])
    cfg.src_lang = str(exp.get("src_lang", cfg.src_lang))
    cfg.tgt_lang = str(exp.get("tgt_lang", cfg.tgt_lang))

    def resolve(p: str) -> str:
        if not p or base_dir is None:
            return p
        q = Path(p)
        return str(q if q.is_absolute() else base_dir / q)

    for key in ("demo_src", "demo_tgt", "test_src", "test_ref"):
        setattr(cfg, key, resolve(str(exp.get(key, ""))))

    models = exp.get("models", [])
    if not isinstance(models, list) or not all(
            isinstance(m, str) for m in models):
        problems.append("experiment.models: must be a list of strings")
    else:
        cfg.models = list(models)

    raw_pools = exp.get("pool_types")
    if raw_pools is not None:
        pools = []
        for name in raw_pools:
            try:
                pools.append(PoolType.parse(str(name)))
            except ValueError as e:
                problems.append(f"experiment.pool_types: {e}")
        if pools:
            cfg.pool_types = pools

    shots = exp.get("shots", cfg.shots)
    if (not isinstance(shots, list)
            or not all(isinstance(s, int) and s >= 0 for s in shots)):
        problems.append("experiment.shots: must be a list of ints >= 0")
    else:
        cfg.shots = list(shots)

    for key, lower in (("runs", 1), ("seed", None), ("n_cap", 1)):
        if key in exp:
            value = exp[key]
            if not isinstance(value, int) or (
                    lower is not None and value < lower):
                problems.append(f"experiment.{key}: must be an int"
                                + (f" >= {lower}" if lower else ""))
            else:
                setattr(cfg, key, value)
    for key in ("matched", "restricted", "strict_truncation"):
        if key in exp:
            if not isinstance(exp[key], bool):
                problems.append(f"experiment.{key}: must be a boolean")
            else:
                setattr(cfg, key, exp[key])
    cfg.cache_dir = resolve(str(exp.get("cache_dir", cfg.cache_dir)))
    cfg.reports_dir = resolve(str(exp.get("reports_dir", cfg.reports_dir)))

    sampling = data.get("sampling", {})
    try:
        cfg.sampling = SamplingParams(
            top_k=int(sampling.get("top_k", 40)),
            temperature=float(sampling.get("temperature", 0.8)),
            max_tokens=int(sampling.get("max_tokens", 512)),
            stop_on_eot=bool(sampling.get("stop_on_eot", True)))
    except (ValueError, TypeError) as e:
        problems.append(f"sampling: {e}")

    backend = data.get("backend", {})
    kind = str(backend.get("kind", "http"))
    if kind not in ("http", "mock"):
        problems.append(f"backend.kind: expected http or mock, got {kind!r}")
    url = os.environ.get("ISOFORGE_BACKEND_URL",
                         str(backend.get("url", "")))
    cfg.backend = BackendConfig(
        kind=kind, url=url,
        max_in_flight=int(backend.get("max_in_flight", 4)),
        timeout_s=float(backend.get("timeout_s", 120.0)),
        mock=dict(backend.get("mock", {})))
    if cfg.backend.max_in_flight < 1:
        problems.append("backend.max_in_flight: must be >= 1")
    if kind == "http" and not url:
        problems.append("backend.url: required for the http backend "
                        "(or set ISOFORGE_BACKEND_URL)")

    scorer = data.get("scorer", {})
    transport = str(scorer.get("transport", "native"))
    if transport not in ("native", "subprocess", "http"):
        problems.append(f"scorer.transport: unknown transport {transport!r}")
    cfg.scorer = ScorerHandle(
        transport=transport,
        endpoint=str(scorer.get("endpoint", scorer.get("command", ""))),
        batch_size=int(scorer.get("batch_size", 32)))
    if transport != "native" and not cfg.scorer.endpoint:
        problems.append(f"scorer.endpoint: required for {transport!r}")

    esc = data.get("escalate", {})
    cfg.escalate = EscalateConfig(
        budget_default=int(esc.get("budget_default", 10)),
        budget_tiny=int(esc.get("budget_tiny", 10)),
        shots=int(esc.get("shots", 5)))
    if cfg.escalate.budget_default < 1 or cfg.escalate.budget_tiny < 1:
        problems.append("escalate budgets must be >= 1")

    if problems:
        raise ConfigError(problems)
    return cfg


def require_run_inputs(cfg: ExperimentConfig) -> None:
    """Validate the data-file fields needed by run/report commands."""
    problems = []
    if not cfg.models:
        problems.append("experiment.models: at least one model required")
    for key in ("demo_src", "demo_tgt", "test_src", "test_ref"):
        p = getattr(cfg, key)
        if not p:
            problems.append(f"experiment.{key}: path required")
        elif not Path(p).exists():
            problems.append(f"experiment.{key}: no such file: {p}")
    if problems:
        raise ConfigError(problems)
