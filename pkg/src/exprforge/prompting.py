"""Prompt assembly for the edit backend.

Prompts are flat comma-joined tag lists in the booru style the checkpoint
families are trained on. A LoRA can contribute trigger words, which are
appended after the user's tags so they never displace subject content.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParamOutOfRange

PROMPT_SEPARATOR = ", "

DEFAULT_NEGATIVE_PROMPT = (
    "lowres, bad anatomy, bad hands, text, error, missing fingers, "
    "extra digit, fewer digits, cropped, worst quality, low quality, "
    "normal quality, jpeg artifacts, signature, watermark, username, blurry"
)


@dataclass(frozen=True)
class LoRAConfig:
    """Identifier and prompt hooks for one LoRA adapter."""

    name: str
    trigger_words: tuple[str, ...] = ()
    weight: float = 1.0
    step_override: int | None = None
    cfg_override: float | None = None

    def __post_init__(self):
        if not self.name:
            raise ParamOutOfRange("name", "LoRA name must be non-empty")
        if not (0.0 < self.weight <= 2.0):
            raise ParamOutOfRange("weight", f"got {self.weight}, want 0 < w <= 2")
        if self.step_override is not None and self.step_override < 1:
            raise ParamOutOfRange("step_override", f"got {self.step_override}")
        if self.cfg_override is not None and self.cfg_override <= 0:
            raise ParamOutOfRange("cfg_override", f"got {self.cfg_override}")


def assemble_prompt(
    tags: list[str] | tuple[str, ...],
    prefix: str = "",
    suffix: str = "",
) -> str:
    """Join prefix, expression tags, and suffix with ", ", skipping empties."""
    parts = [p.strip() for p in [prefix, *tags, suffix]]
    return PROMPT_SEPARATOR.join(p for p in parts if p)


def inject_lora_triggers(prompt: str, lora: LoRAConfig | None) -> str:
    """Append a LoRA's trigger words to an assembled prompt."""
    if lora is None or not lora.trigger_words:
        return prompt
    triggers = [t.strip() for t in lora.trigger_words if t.strip()]
    if not triggers:
        return prompt
    if not prompt:
        return PROMPT_SEPARATOR.join(triggers)
    return prompt + PROMPT_SEPARATOR + PROMPT_SEPARATOR.join(triggers)


def build_edit_prompt(
    tags: list[str] | tuple[str, ...],
    prefix: str = "",
    suffix: str = "",
    lora: LoRAConfig | None = None,
) -> str:
    """Full prompt for one edit: assembled tag list plus LoRA triggers."""
    return inject_lora_triggers(assemble_prompt(tags, prefix, suffix), lora)
