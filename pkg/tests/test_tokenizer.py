from __future__ import annotations

from hypothesis import given
from hypothesis import strategies as st

from geolm.model.tokenizer import (
    BOS_ID,
    DOC_BOUNDARY,
    DOC_ID,
    EOS_ID,
    MARKER_TOKENS,
    PAD_ID,
    TOKENIZER,
    VOCAB_SIZE,
)


def test_vocab_layout() -> None:
    assert VOCAB_SIZE == 268
    assert DOC_ID == 264
    assert BOS_ID == 265
    assert EOS_ID == 266
    assert PAD_ID == 267


def test_ascii_bytes_are_identity() -> None:
    assert TOKENIZER.encode("abc") == [97, 98, 99]
    assert TOKENIZER.decode([97, 98, 99]) == "abc"


def test_empty_string_round_trip() -> None:
    assert TOKENIZER.encode("") == []
    assert TOKENIZER.decode([]) == ""


def test_markers_are_single_reserved_ids() -> None:
    for index, literal in enumerate(MARKER_TOKENS):
        ids = TOKENIZER.encode(literal)
        assert ids == [256 + index]
        assert TOKENIZER.decode(ids) == literal


def test_doc_boundary_is_reserved() -> None:
    assert TOKENIZER.encode(DOC_BOUNDARY) == [DOC_ID]


def test_longest_match_beats_shared_prefixes() -> None:
    # [START_FIGURE] and [START_FORMULA] share a prefix; both stay atomic.
    ids = TOKENIZER.encode("[START_FIGURE][START_FORMULA]")
    assert ids == [256, 262]


def test_marker_embedded_in_text() -> None:
    ids = TOKENIZER.encode("x[START_TABLE]y")
    assert ids == [120, 258, 121]
    assert TOKENIZER.decode(ids) == "x[START_TABLE]y"


def test_partial_marker_text_falls_back_to_bytes() -> None:
    ids = TOKENIZER.encode("[START_TAB")
    assert all(i < 256 for i in ids)


def test_multibyte_utf8_round_trip() -> None:
    text = "géologie 地質 \U0001f30b"
    assert TOKENIZER.decode(TOKENIZER.encode(text)) == text


def test_control_ids_decode_to_empty() -> None:
    assert TOKENIZER.decode([BOS_ID, 104, 105, EOS_ID, PAD_ID]) == "hi"


def test_count_matches_encode_length() -> None:
    text = "a[START_REF]t[END_REF]"
    assert TOKENIZER.count(text) == len(TOKENIZER.encode(text))


@given(st.text(max_size=300))
def test_round_trip_arbitrary_text(text: str) -> None:
    assert TOKENIZER.decode(TOKENIZER.encode(text)) == text


@given(
    st.lists(
        st.sampled_from(MARKER_TOKENS + (DOC_BOUNDARY, "a", "N[", "]", "é", " ")),
        max_size=40,
    )
)
def test_round_trip_marker_soup(parts: list[str]) -> None:
    text = "".join(parts)
    assert TOKENIZER.decode(TOKENIZER.encode(text)) == text
