"""Lenient parsing of model-emitted JSON-ish dicts.

The prompt examples mix quote styles (single quotes, backticks, fenced
blocks), so strict json.loads alone is not enough.
"""

from __future__ import annotations

import ast
import json
import re

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n?|```$")


def lenient_dict(raw: str) -> dict | None:
    """Best-effort dict extraction; returns None when nothing parses."""
    text = _FENCE_RE.sub("", raw.strip()).strip()
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        text = text[start : end + 1]
    for candidate in (text, text.replace("`", "'")):
        for loader in (json.loads, ast.literal_eval):
            try:
                value = loader(candidate)
            except (ValueError, SyntaxError):
                continue
            if isinstance(value, dict):
                return value
    return None
