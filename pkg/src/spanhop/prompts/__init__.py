"""Prompt templates shipped as byte-stable text assets.

Five templates: three generation prompts (one per node attribute), the QA
filtration prompt, and the answer-grading prompt. Placeholders use
``{name}`` tokens substituted by literal replacement, never str.format,
because the bodies contain JSON braces.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ..errors import ValidationFailure

TEMPLATE_IDS = ("verb", "dobj", "pobj", "filter", "judge")

_PLACEHOLDERS = {
    "verb": ("rows",),
    "dobj": ("rows",),
    "pobj": ("rows",),
    "filter": ("qa",),
    "judge": ("question", "reference", "prediction"),
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    system_text: str
    body_text: str

    @property
    def placeholders(self) -> tuple[str, ...]:
        return _PLACEHOLDERS[self.template_id]

    def render(self, **subs: str) -> tuple[str, str]:
        """Substitute every placeholder; returns (system, user)."""
        missing = set(self.placeholders) - set(subs)
        if missing:
            raise ValidationFailure(f"template {self.template_id!r} missing {sorted(missing)}")
        unknown = set(subs) - set(self.placeholders)
        if unknown:
            raise ValidationFailure(f"template {self.template_id!r} got unknown keys {sorted(unknown)}")
        body = self.body_text
        for name, value in subs.items():
            body = body.replace("{" + name + "}", value)
        return self.system_text.rstrip("\n"), body.rstrip("\n")


def load_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise ValidationFailure(f"unknown template id {template_id!r}")
    root = resources.files(__package__) / "templates"
    system = (root / f"{template_id}.system.txt").read_text(encoding="utf-8")
    body = (root / f"{template_id}.user.txt").read_text(encoding="utf-8")
    for name in _PLACEHOLDERS[template_id]:
        token = "{" + name + "}"
        if token not in body:
            raise ValidationFailure(f"template asset {template_id!r} lost placeholder {token}")
    return PromptTemplate(template_id=template_id, system_text=system, body_text=body)
