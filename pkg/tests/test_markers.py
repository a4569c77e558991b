from __future__ import annotations

from geolm.corpus.markers import strip_reserved_literals, validate_markers


def test_balanced_pair_ok() -> None:
    report = validate_markers("[START_TABLE]x[END_TABLE]")
    assert report.ok
    assert report.marker_counts["TABLE"] == 1


def test_empty_text_ok_zero_markers() -> None:
    report = validate_markers("")
    assert report.ok
    assert sum(report.marker_counts.values()) == 0


def test_nested_start_is_violation() -> None:
    report = validate_markers("[START_REF][START_REF]t[END_REF]")
    assert not report.ok
    kinds = [(v.kind, v.problem) for v in report.violations]
    assert ("REF", "nested") in kinds


def test_nested_violation_offset_points_at_inner_start() -> None:
    text = "[START_REF][START_REF]t[END_REF]"
    report = validate_markers(text)
    nested = [v for v in report.violations if v.problem == "nested"][0]
    assert nested.byte_offset == len("[START_REF]")


def test_unclosed_start_reported() -> None:
    report = validate_markers("a[START_FIGURE]caption")
    assert not report.ok
    assert report.violations[0].problem == "unclosed_start"


def test_unopened_end_reported() -> None:
    report = validate_markers("text[END_FORMULA]")
    assert not report.ok
    assert report.violations[0].problem == "unopened_end"


def test_mismatched_end_reported() -> None:
    report = validate_markers("[START_TABLE]x[END_REF]")
    assert not report.ok
    assert any(v.problem == "mismatched_end" for v in report.violations)


def test_cross_pair_nesting_is_violation() -> None:
    report = validate_markers("[START_TABLE][START_REF]t[END_REF][END_TABLE]")
    assert not report.ok


def test_sequential_pairs_ok() -> None:
    text = "[START_REF]a[END_REF] and [START_REF]b[END_REF]"
    report = validate_markers(text)
    assert report.ok
    assert report.marker_counts["REF"] == 2


def test_byte_offsets_use_utf8_encoding() -> None:
    text = "éé[END_REF]"  # two 2-byte chars before the marker
    report = validate_markers(text)
    assert report.violations[0].byte_offset == 4


def test_strip_reserved_literals_removes_markers() -> None:
    assert strip_reserved_literals("a[START_REF]b<|doc|>c") == "abc"


def test_strip_reserved_literals_reaches_fixpoint() -> None:
    # Removing the inner literal splices a new one together; both must go.
    tricky = "[START_[START_REF]REF]x"
    assert strip_reserved_literals(tricky) == "x"
