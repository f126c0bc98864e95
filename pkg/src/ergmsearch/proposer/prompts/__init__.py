"""Versioned prompt templates with {{placeholder}} substitution."""

from __future__ import annotations

from importlib import resources

PROMPT_NAMES = ("term_nomination", "spec_proposal", "refinement_edit",
                "synthesis")


def load_template(name: str) -> str:
    if name not in PROMPT_NAMES:
        raise KeyError(f"unknown prompt {name!r}")
    return (resources.files(__package__) / f"{name}.txt").read_text()


def render(name: str, mapping: dict) -> str:
    """Deterministic template fill; unknown placeholders are an error."""
    text = load_template(name)
    for key, value in mapping.items():
        text = text.replace("{{" + key + "}}", str(value))
    if "{{" in text:
        start = text.index("{{")
        raise KeyError(f"unfilled placeholder near {text[start:start + 30]!r}")
    return text
