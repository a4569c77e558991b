"""Byte-level tokenizer with reserved control tokens.

Vocabulary layout (268 ids):
    0..255   raw bytes (UTF-8)
    256..263 corpus markers ([START_FIGURE] ... [END_FORMULA])
    264      document boundary <|doc|>
    265      BOS, 266 EOS, 267 PAD

Reserved literals always tokenize to their single id (longest match wins,
scanned before byte fallback), so marker spans stay atomic no matter what
surrounds them.
"""

from __future__ import annotations

import re

MARKER_KINDS = ("FIGURE", "TABLE", "REF", "FORMULA")

START_MARKERS = {kind: f"[START_{kind}]" for kind in MARKER_KINDS}
END_MARKERS = {kind: f"[END_{kind}]" for kind in MARKER_KINDS}

#: All eight marker literals in id order.
MARKER_TOKENS = (
    "[START_FIGURE]",
    "[END_FIGURE]",
    "[START_TABLE]",
    "[END_TABLE]",
    "[START_REF]",
    "[END_REF]",
    "[START_FORMULA]",
    "[END_FORMULA]",
)

DOC_BOUNDARY = "<|doc|>"

BYTE_VOCAB = 256
MARKER_BASE = BYTE_VOCAB
DOC_ID = MARKER_BASE + len(MARKER_TOKENS)  # 264
BOS_ID = DOC_ID + 1  # 265
EOS_ID = DOC_ID + 2  # 266
PAD_ID = DOC_ID + 3  # 267
VOCAB_SIZE = PAD_ID + 1  # 268

_RESERVED_TEXT = dict(
    {literal: MARKER_BASE + i for i, literal in enumerate(MARKER_TOKENS)},
    **{DOC_BOUNDARY: DOC_ID},
)

# Longest literal first so shared prefixes ([START_FIGURE] vs [START_FORMULA])
# cannot shadow each other.
_SPLIT_RE = re.compile(
    "(" + "|".join(re.escape(t) for t in sorted(_RESERVED_TEXT, key=len, reverse=True)) + ")"
)

_ID_TEXT = {tid: literal for literal, tid in _RESERVED_TEXT.items()}


class Tokenizer:
    """Reversible byte tokenizer; ``decode(encode(s)) == s`` for any string."""

    vocab_size = VOCAB_SIZE
    bos_id = BOS_ID
    eos_id = EOS_ID
    pad_id = PAD_ID
    doc_id = DOC_ID

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for part in _SPLIT_RE.split(text):
            if not part:
                continue
            reserved = _RESERVED_TEXT.get(part)
            if reserved is not None:
                ids.append(reserved)
            else:
                ids.extend(part.encode("utf-8"))
        return ids

    def decode(self, ids: list[int]) -> str:
        out: list[str] = []
        pending: list[int] = []

        def flush() -> None:
            if pending:
                # Sequences produced by encode() are always valid UTF-8; raw
                # generated bytes may not be, so decode leniently.
                out.append(bytes(pending).decode("utf-8", errors="replace"))
                pending.clear()

        for tid in ids:
            if 0 <= tid < BYTE_VOCAB:
                pending.append(tid)
            elif tid in _ID_TEXT:
                flush()
                out.append(_ID_TEXT[tid])
            elif tid in (BOS_ID, EOS_ID, PAD_ID):
                flush()
            else:
                raise ValueError(f"token id out of range: {tid}")
        flush()
        return "".join(out)

    def count(self, text: str) -> int:
        return len(self.encode(text))


#: Shared instance; the tokenizer is stateless.
TOKENIZER = Tokenizer()
