"""Declarative paragraph-cleaning rules for corpus normalization.

A rule set is an ordered list of pattern rules plus two built-in heuristics:
paragraphs shorter than ``min_paragraph_chars`` or with a non-word character
ratio above ``max_nonword_ratio`` are dropped. Rules are applied in listed
order and the whole pass is deterministic and idempotent (enforced by a lint
at load time: a replacement must not reintroduce its own pattern).
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ACTIONS = ("drop_span", "drop_block", "replace")

# Control characters other than newline/tab never survive into corpus text.
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")

_WORD_RE = re.compile(r"[A-Za-z0-9\s]")


class RuleSetError(ValueError):
    """Raised when a rule set fails validation at load time."""


@dataclass
class CleaningRule:
    pattern: str
    action: str
    replacement: str = ""

    def __post_init__(self) -> None:
        if self.action not in ACTIONS:
            raise RuleSetError(f"unknown action {self.action!r}")
        try:
            self._compiled = re.compile(self.pattern)
        except re.error as exc:
            raise RuleSetError(f"bad pattern {self.pattern!r}: {exc}") from exc
        if self.action == "replace" and self._compiled.search(self.replacement):
            raise RuleSetError(
                f"replacement {self.replacement!r} reintroduces pattern {self.pattern!r}"
            )

    def apply(self, text: str) -> str | None:
        """Return cleaned text, or None when the block must be dropped."""
        if self.action == "drop_block":
            return None if self._compiled.search(text) else text
        if self.action == "drop_span":
            return self._compiled.sub("", text)
        return self._compiled.sub(self.replacement, text)


@dataclass
class CleaningRuleSet:
    rules: list[CleaningRule] = field(default_factory=list)
    min_paragraph_chars: int = 30
    max_nonword_ratio: float = 0.4

    def __post_init__(self) -> None:
        if self.min_paragraph_chars < 0:
            raise RuleSetError("min_paragraph_chars must be >= 0")
        if not 0.0 <= self.max_nonword_ratio <= 1.0:
            raise RuleSetError("max_nonword_ratio must be in [0, 1]")

    def clean_paragraph(self, text: str) -> str | None:
        """Apply all rules; return None when the paragraph is dropped."""
        cleaned: str | None = sanitize_text(text)
        for rule in self.rules:
            cleaned = rule.apply(cleaned)
            if cleaned is None:
                return None
        if len(cleaned) < self.min_paragraph_chars:
            return None
        if nonword_ratio(cleaned) > self.max_nonword_ratio:
            return None
        return cleaned


def sanitize_text(text: str) -> str:
    """Strip disallowed control characters (everything but newline/tab)."""
    return _CONTROL_RE.sub("", text.replace("\r\n", "\n").replace("\r", "\n"))


def nonword_ratio(text: str) -> float:
    if not text:
        return 0.0
    words = len(_WORD_RE.findall(text))
    return (len(text) - words) / len(text)


def load_rules(path: str | Path) -> CleaningRuleSet:
    """Load a rule set from a TOML file.

    Schema::

        min_paragraph_chars = 30
        max_nonword_ratio = 0.4
        [[rule]]
        pattern = "Downloaded from .*"
        action = "drop_span"          # or drop_block / replace
        replacement = ""              # replace only
    """
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    rules = [
        CleaningRule(
            pattern=entry["pattern"],
            action=entry["action"],
            replacement=entry.get("replacement", ""),
        )
        for entry in data.get("rule", [])
    ]
    return CleaningRuleSet(
        rules=rules,
        min_paragraph_chars=data.get("min_paragraph_chars", 30),
        max_nonword_ratio=data.get("max_nonword_ratio", 0.4),
    )
