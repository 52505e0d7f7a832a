"""Rule-based sentence segmentation for clinical notes.

Splits on sentence-final punctuation followed by a capitalized or numeric
continuation, on blank lines, and before list-item lines. A configurable
abbreviation set protects the clinical shorthand ("Dr.", "q.d.", "b.i.d.")
that would otherwise trigger false breaks. Deterministic; the returned
sentences tile every non-whitespace character of the input.
"""

from __future__ import annotations

import re

from .schema import Sentence

DEFAULT_PROTECTED = frozenset(
    {
        "dr.", "mr.", "mrs.", "ms.", "st.", "jr.", "sr.", "vs.",
        "e.g.", "i.e.", "etc.",
        "q.d.", "q.h.s.", "b.i.d.", "t.i.d.", "q.i.d.", "p.r.n.",
        "p.o.", "i.v.", "i.m.", "s.l.", "s.c.",
        "mg.", "mcg.", "ml.", "cc.", "cm.", "mm.", "oz.",
        "approx.", "pt.", "hx.", "dx.", "tx.", "rx.", "fx.", "sx.",
    }
)

_FINAL_PUNCT = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")
_BLANK_LINE = re.compile(r"\n[ \t]*\n\s*")
_LIST_ITEM = re.compile(r"^[ \t]*(?:[-*•]|\d+[.)])[ \t]", re.MULTILINE)


def _protected_token(text: str, punct_start: int, punct_end: int,
                     protected: frozenset[str]) -> bool:
    j = punct_start
    while j > 0 and not text[j - 1].isspace():
        j -= 1
    token = text[j:punct_end]
    while token and not token[0].isalnum():
        token = token[1:]
    if not token:
        return False
    if token.casefold() in protected:
        return True
    # single-letter initials: "J. Smith"
    return len(token) == 2 and token[0].isalpha() and token[1] == "."


def segment(
    document_text: str,
    protected: frozenset[str] | None = None,
) -> list[Sentence]:
    """Sentence boundaries for `document_text`, as offsets into it."""
    text = document_text
    if not text.strip():
        return []
    abbrev = DEFAULT_PROTECTED if protected is None else protected

    starts: set[int] = {0}
    for m in _FINAL_PUNCT.finditer(text):
        if _protected_token(text, m.start(), m.end(), abbrev):
            continue
        k = m.end()
        while k < len(text) and text[k].isspace():
            k += 1
        starts.add(k)
    for m in _BLANK_LINE.finditer(text):
        starts.add(m.end())
    for m in _LIST_ITEM.finditer(text):
        starts.add(m.start())

    ordered = sorted(starts)
    sentences: list[Sentence] = []
    for idx, s in enumerate(ordered):
        e = ordered[idx + 1] if idx + 1 < len(ordered) else len(text)
        seg = text[s:e]
        lead = len(seg) - len(seg.lstrip())
        trail = len(seg) - len(seg.rstrip())
        if lead + trail >= len(seg):
            continue  # whitespace-only segment
        sentences.append(Sentence(s + lead, e - trail))
    return sentences
