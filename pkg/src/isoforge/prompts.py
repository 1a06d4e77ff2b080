"""Prompt assembly for zero-shot and few-shot translation requests.

Prompts are built by concatenating template parts. Joining rule: parts
are separated by a single space, with two exceptions that are frozen in
the golden files under golden/prompts/:

  * a part consisting of a lone period attaches with no preceding space
    (the uncontrolled zero-shot instruction is just ".")
  * a part that ends with a newline supplies the separator itself, so
    the next part attaches directly; likewise a part that begins with a
    newline suppresses the pending space

Language names appear in English ("English", "German", ...). The
rendered text always ends with the target cue "<tgt lang>:" and never
with a trailing newline.

The instruction wording is selected by the pool type. Short and Tiny
share one instruction ("shorter than the source"); only the pool they
draw demonstrations from differs. When `matched` is false the
instruction is forced to the uncontrolled (Random) wording regardless
of the pool the demonstrations came from.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import ParallelSample
from .errors import ShotCountMismatch
from .pools import PoolType

_ZERO_INSTRUCTION = {
    PoolType.RANDOM: ".",
    PoolType.ISOMETRIC: ("ensuring that it is within ±10% of the character "
                         "count of the source."),
    PoolType.SAME: "ensuring that it has the same length as the source.",
    PoolType.SHORT: "ensuring that it is shorter than the source.",
    PoolType.TINY: "ensuring that it is shorter than the source.",
}

_FEW_INSTRUCTION = {
    PoolType.RANDOM: "of the source in {src}:\n",
    PoolType.ISOMETRIC: ("that are within ±10% of the character count of "
                         "the source in {src}:\n"),
    PoolType.SAME: "that have the same length as the source in {src}:\n",
    PoolType.SHORT: "that are shorter than the source in {src}:\n",
    PoolType.TINY: "that are shorter than the source in {src}:\n",
}

_RESTRICTED = "Output only the translation.\n"


@dataclass(frozen=True)
class PromptConfig:
    """Everything that determines prompt text except the demonstrations
    themselves and the sentence being translated."""
    src_lang: str
    tgt_lang: str
    pool_type: PoolType
    shots: int = 0
    restricted: bool = True
    matched: bool = True


@dataclass(frozen=True)
class PromptSpec:
    """A fully rendered prompt plus the configuration that produced it."""
    config: PromptConfig
    demo_ids: tuple[int, ...]
    text: str


def _assemble(parts: Sequence[str]) -> str:
    text = ""
    for part in parts:
        if not part:
            continue
        if not text or text.endswith("\n") or part == "." \
                or part.startswith("\n"):
            text += part
        else:
            text += " " + part
    return text


def _instruction_pool(config: PromptConfig) -> PoolType:
    return config.pool_type if config.matched else PoolType.RANDOM


def render_zero_shot(config: PromptConfig, source_sentence: str) -> PromptSpec:
    """Render the zero-shot template for one source sentence."""
    if config.shots != 0:
        raise ShotCountMismatch(config.shots, 0)
    src, tgt = config.src_lang, config.tgt_lang
    parts = [
        f"Translate the following text from {src} into {tgt}",
        _ZERO_INSTRUCTION[_instruction_pool(config)],
        _RESTRICTED if config.restricted else "\n",
        f"{src}: {source_sentence.strip()}\n{tgt}:",
    ]
    return PromptSpec(config, (), _assemble(parts))


def render_few_shot(config: PromptConfig,
                    demos: Sequence[ParallelSample],
                    source_sentence: str) -> PromptSpec:
    """Render the few-shot template with the given demonstrations.

    The demonstration blocks appear in the order supplied. Raises
    ShotCountMismatch unless config.shots equals len(demos) >= 1.
    """
    if config.shots < 1 or config.shots != len(demos):
        raise ShotCountMismatch(config.shots, len(demos))
    src, tgt = config.src_lang, config.tgt_lang
    parts = [
        f"Here are examples of translations in {tgt}",
        _FEW_INSTRUCTION[_instruction_pool(config)].format(src=src),
    ]
    for d in demos:
        parts.append(f"{src}: {d.source.strip()}\n{tgt}: {d.target.strip()}\n")
    parts.extend([
        "Provide translation for the following sentence given the "
        "examples above.",
        _RESTRICTED if config.restricted else "\n",
        f"{src}: {source_sentence.strip()}\n{tgt}:",
    ])
    return PromptSpec(config, tuple(d.id for d in demos), _assemble(parts))


def render(config: PromptConfig,
           demos: Sequence[ParallelSample],
           source_sentence: str) -> PromptSpec:
    """Dispatch on shot count."""
    if config.shots == 0:
        if demos:
            raise ShotCountMismatch(0, len(demos))
        return render_zero_shot(config, source_sentence)
    return render_few_shot(config, demos, source_sentence)
