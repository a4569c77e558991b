"""Marker span validation for normalized corpus text.

Marker pairs must balance and never nest; violations are reported as data
(with byte offsets into the UTF-8 encoding), not raised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..model.tokenizer import DOC_BOUNDARY, END_MARKERS, MARKER_KINDS, START_MARKERS

_ALL_LITERALS = tuple(START_MARKERS.values()) + tuple(END_MARKERS.values()) + (DOC_BOUNDARY,)

_MARKER_BYTES_RE = re.compile(
    b"|".join(re.escape(m.encode("ascii")) for m in START_MARKERS.values())
    + b"|"
    + b"|".join(re.escape(m.encode("ascii")) for m in END_MARKERS.values())
)

_START_BYTES = {m.encode("ascii"): kind for kind, m in START_MARKERS.items()}
_END_BYTES = {m.encode("ascii"): kind for kind, m in END_MARKERS.items()}


@dataclass
class MarkerViolation:
    kind: str  # marker kind (FIGURE, TABLE, ...) involved
    problem: str  # "nested" | "unopened_end" | "mismatched_end" | "unclosed_start"
    byte_offset: int


@dataclass
class ValidationReport:
    ok: bool
    marker_counts: dict[str, int] = field(default_factory=dict)
    violations: list[MarkerViolation] = field(default_factory=list)


def validate_markers(text: str) -> ValidationReport:
    """Check balance and non-nesting of every marker pair in ``text``."""
    data = text.encode("utf-8")
    counts = {kind: 0 for kind in MARKER_KINDS}
    violations: list[MarkerViolation] = []
    open_kind: str | None = None
    open_offset = 0

    for match in _MARKER_BYTES_RE.finditer(data):
        token = match.group(0)
        offset = match.start()
        start_kind = _START_BYTES.get(token)
        if start_kind is not None:
            counts[start_kind] += 1
            if open_kind is not None:
                violations.append(MarkerViolation(start_kind, "nested", offset))
            else:
                open_kind = start_kind
                open_offset = offset
            continue
        end_kind = _END_BYTES[token]
        if open_kind is None:
            violations.append(MarkerViolation(end_kind, "unopened_end", offset))
        elif open_kind != end_kind:
            violations.append(MarkerViolation(end_kind, "mismatched_end", offset))
            open_kind = None
        else:
            open_kind = None

    if open_kind is not None:
        violations.append(MarkerViolation(open_kind, "unclosed_start", open_offset))

    return ValidationReport(ok=not violations, marker_counts=counts, violations=violations)


def strip_reserved_literals(text: str) -> str:
    """Remove marker/boundary literals embedded in raw input text.

    Raw fields may not inject control spans; literals are removed to a
    fixpoint because deleting one occurrence can splice a new one together.
    """
    while True:
        stripped = text
        for literal in _ALL_LITERALS:
            stripped = stripped.replace(literal, "")
        if stripped == text:
            return stripped
        text = stripped
