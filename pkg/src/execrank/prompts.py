"""Prompt templates, stored as data files keyed by model family or benchmark style.

Generation templates differ per model family (instruction wrappers are
verbatim-sensitive); the reviewer and self-debug templates differ per
benchmark style (docstring examples vs. assert examples). Unknown generation
families fall back to a generic instruct template.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

GENERATION = "generation"
REVIEWER = "reviewer"
SELFDEBUG = "selfdebug"

GENERATION_FAMILIES = ("codellama", "deepseek", "generic")
STYLES = ("humaneval", "mbpp")

_SLOT_NAMES = ("prompt", "code", "instruction", "unit_test", "feedback")
_SLOT_RE = re.compile(r"\{(%s)\}" % "|".join(_SLOT_NAMES))


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    family: str
    text: str

    @property
    def slots(self) -> frozenset[str]:
        return frozenset(_SLOT_RE.findall(self.text))

    def render(self, **values: str) -> str:
        unknown = set(values) - self.slots
        if unknown:
            raise TemplateError(f"{self.name}/{self.family}: unknown slots {sorted(unknown)}")
        missing = self.slots - set(values)
        if missing:
            raise TemplateError(f"{self.name}/{self.family}: unbound slots {sorted(missing)}")
        text = self.text
        for slot, value in values.items():
            text = text.replace("{%s}" % slot, value)
        return text


def _read(filename: str) -> str | None:
    ref = resources.files("execrank").joinpath("templates", filename)
    if not ref.is_file():
        return None
    return ref.read_text(encoding="utf-8")


def load_template(name: str, family: str) -> PromptTemplate:
    text = _read(f"{name}_{family}.txt")
    if text is None and name == GENERATION:
        family = "generic"
        text = _read(f"{name}_{family}.txt")
    if text is None and name in (REVIEWER, SELFDEBUG):
        family = "mbpp"
        text = _read(f"{name}_{family}.txt")
    if text is None:
        raise TemplateError(f"no template for {name}/{family}")
    return PromptTemplate(name=name, family=family, text=text)


def family_for_model(model_id: str) -> str:
    lowered = model_id.lower()
    if "codellama" in lowered or "code-llama" in lowered:
        return "codellama"
    if "deepseek" in lowered:
        return "deepseek"
    return "generic"


def generation_prompt(task_prompt: str, family: str) -> str:
    return load_template(GENERATION, family).render(prompt=task_prompt)


def reviewer_scoring_parts(task_prompt: str, code: str, style: str) -> tuple[str, str]:
    """Split the reviewer prompt into (prefix, continuation-to-score).

    The continuation is the task description rendered as the code's
    docstring; scoring it against the prefix yields the reverse
    description-given-code log-likelihood.
    """
    template = load_template(REVIEWER, style)
    slot = "{prompt}"
    position = template.text.find(slot)
    if position < 0:
        raise TemplateError(f"reviewer template for {style} lacks a prompt slot")
    prefix = template.text[:position].replace("{code}", code)
    return prefix, task_prompt


def selfdebug_prompt(instruction: str, unit_test: str, code: str, feedback: str,
                     style: str) -> str:
    return load_template(SELFDEBUG, style).render(
        instruction=instruction, unit_test=unit_test, code=code, feedback=feedback
    )
