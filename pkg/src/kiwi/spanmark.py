"""Span-tag markup: prompt construction and tolerant decoding.

The wire dialect is flat `<span class="CLASS">...</span>` markup inside
otherwise plain text. Encoding is strict (gold annotations must be
well-formed); decoding accepts arbitrary strings and reports every
malformed region as a diagnostic instead of failing.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources

from .schema import (
    EntityMention,
    MainEntityType,
    ModifierType,
    permitted_modifiers,
)

TaggedText = str

MAIN_CLASS_NAMES = frozenset(t.value for t in MainEntityType)
MODIFIER_CLASS_NAMES = frozenset(m.value for m in ModifierType)
ALL_CLASS_NAMES = MAIN_CLASS_NAMES | MODIFIER_CLASS_NAMES


class EmptyInputError(ValueError):
    pass


class NotMainEntityError(ValueError):
    pass


class MainOutsideSentenceError(ValueError):
    pass


class OverlappingMentionsError(ValueError):
    pass


_TEMPLATE_FILES = (
    "ner.txt",
    "re_problem.txt",
    "re_test.txt",
    "re_drug.txt",
    "re_treatment.txt",
)


def _load_asset(name: str) -> str:
    return (resources.files("kiwi") / "templates" / name).read_text(encoding="utf-8")


def _template_version() -> str:
    h = hashlib.sha256()
    for name in sorted(_TEMPLATE_FILES):
        h.update(name.encode())
        h.update(b"\0")
        h.update(_load_asset(name).encode())
    return h.hexdigest()[:12]


TEMPLATE_VERSION = _template_version()


@dataclass(frozen=True)
class PromptTemplate:
    """One instruction template, parsed from its shipped text asset.

    `raw` is the byte-exact asset content with an `{input}` placeholder;
    the other fields are views onto its blocks.
    """

    task: str
    header: str
    markup_guide: str
    definitions: str | None
    input_label: str
    output_label: str
    raw: str

    def render(self, input_text: str) -> str:
        # .replace, not .format: input text may contain braces
        return self.raw.replace("{input}", input_text)


def _parse_template(task: str, raw: str) -> PromptTemplate:
    blocks = raw.split("\n\n")
    header = blocks[0]
    markup_guide = blocks[1]
    definitions = None
    if blocks[2].startswith("### Entity Definitions:"):
        definitions = blocks[2]
    tail_lines = blocks[-1].split("\n")
    input_label = tail_lines[0][: tail_lines[0].index(":") + 1]
    output_label = tail_lines[1].rstrip()
    return PromptTemplate(
        task=task,
        header=header,
        markup_guide=markup_guide,
        definitions=definitions,
        input_label=input_label,
        output_label=output_label,
        raw=raw,
    )


NER_TEMPLATE = _parse_template("ner", _load_asset("ner.txt"))
RE_TEMPLATES: dict[MainEntityType, PromptTemplate] = {
    t: _parse_template(f"re:{t.value}", _load_asset(f"re_{t.value}.txt"))
    for t in MainEntityType
}


def build_ner_prompt(sentence_text: str) -> str:
    """Full NER instruction with `sentence_text` as the input line."""
    if not sentence_text.strip():
        raise EmptyInputError("sentence text is empty")
    return NER_TEMPLATE.render(sentence_text)


def build_re_prompt(
    sentence_text: str, main: EntityMention, sentence_start: int = 0
) -> str:
    """RE instruction for `main`'s type, with the main span tagged in the input.

    `main.start`/`main.end` index the document; `sentence_start` converts
    them to positions within `sentence_text`.
    """
    if not main.is_main:
        raise NotMainEntityError(f"{main.id}: {main.etype} is not a main entity type")
    if main.start < sentence_start or main.end > sentence_start + len(sentence_text):
        raise MainOutsideSentenceError(
            f"{main.id}: [{main.start}, {main.end}) outside sentence"
        )
    tagged = encode(sentence_text, [main], sentence_start)
    return RE_TEMPLATES[main.etype].render(tagged)


def encode(
    sentence_text: str,
    mentions: list[EntityMention],
    sentence_start: int = 0,
) -> TaggedText:
    """Insert span tags around each mention; inverse of a clean decode.

    Mentions must lie inside the sentence and be pairwise non-overlapping
    (flat markup cannot express overlap).
    """
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    prev_end = None
    for m in ordered:
        lo, hi = m.start - sentence_start, m.end - sentence_start
        if lo < 0 or hi > len(sentence_text):
            raise MainOutsideSentenceError(
                f"{m.id}: [{m.start}, {m.end}) outside sentence"
            )
        if prev_end is not None and lo < prev_end:
            raise OverlappingMentionsError(f"{m.id} overlaps previous mention")
        prev_end = hi
    out: list[str] = []
    cursor = 0
    for m in ordered:
        lo, hi = m.start - sentence_start, m.end - sentence_start
        out.append(sentence_text[cursor:lo])
        out.append(f'<span class="{m.etype.value}">')
        out.append(sentence_text[lo:hi])
        out.append("</span>")
        cursor = hi
    out.append(sentence_text[cursor:])
    return "".join(out)


@dataclass(frozen=True)
class ParseDiagnostic:
    kind: str  # UnknownClass | UnclosedTag | StrayCloseTag | NestedTag
    position: int  # char offset into the raw tagged string
    detail: str


# Tolerant of quote style and stray whitespace; strict on attribute layout.
_OPEN_RE = re.compile(
    r"<\s*span\s+class\s*=\s*(?:\"([^\"]*)\"|'([^']*)')\s*>",
    re.IGNORECASE,
)
_CLOSE_RE = re.compile(r"<\s*/\s*span\s*>", re.IGNORECASE)
_TAG_RE = re.compile(f"(?:{_OPEN_RE.pattern})|(?:{_CLOSE_RE.pattern})", re.IGNORECASE)


def decode(
    tagged: TaggedText,
    vocabulary: frozenset[str] | set[str] | None = None,
) -> tuple[str, list[tuple[str, int, int]], list[ParseDiagnostic]]:
    """Strip span tags from arbitrary model output.

    Returns (plain_text, spans, diagnostics) where each span is a
    (class_name, start, end) triple indexing plain_text. Never raises:
    unknown classes, nesting, unclosed tags, and stray closers are
    reported as diagnostics while the surrounding text is preserved.

    `vocabulary` restricts the accepted class names (main-entity names for
    NER output, the permitted modifier names for RE output); None accepts
    every schema class name.
    """
    vocab = ALL_CLASS_NAMES if vocabulary is None else vocabulary
    plain: list[str] = []
    plain_len = 0
    spans: list[tuple[str, int, int]] = []
    diagnostics: list[ParseDiagnostic] = []
    # Each stack frame is (class_name_or_None, plain_start, raw_pos);
    # a None class marks a rejected open whose closer must be swallowed.
    stack: list[tuple[str | None, int, int]] = []

    pos = 0
    for m in _TAG_RE.finditer(tagged):
        chunk = tagged[pos : m.start()]
        plain.append(chunk)
        plain_len += len(chunk)
        pos = m.end()

        group = m.group(1) if m.group(1) is not None else m.group(2)
        if group is not None:  # open tag
            name = group.strip().casefold()
            live = any(c is not None for c, _, _ in stack)
            if name not in vocab:
                diagnostics.append(
                    ParseDiagnostic("UnknownClass", m.start(), f"class {name!r}")
                )
                stack.append((None, plain_len, m.start()))
            elif live:
                diagnostics.append(
                    ParseDiagnostic("NestedTag", m.start(), f"nested {name!r}")
                )
                stack.append((None, plain_len, m.start()))
            else:
                stack.append((name, plain_len, m.start()))
        else:  # close tag
            if not stack:
                diagnostics.append(
                    ParseDiagnostic("StrayCloseTag", m.start(), "no open span")
                )
                continue
            name, start, _ = stack.pop()
            if name is not None and start < plain_len:
                spans.append((name, start, plain_len))

    chunk = tagged[pos:]
    plain.append(chunk)
    plain_len += len(chunk)

    while stack:
        name, start, raw_pos = stack.pop()
        if name is None:
            continue
        diagnostics.append(
            ParseDiagnostic("UnclosedTag", raw_pos, f"{name!r} never closed")
        )
        if start < plain_len:
            spans.append((name, start, plain_len))

    spans.sort(key=lambda s: (s[1], s[2]))
    return "".join(plain), spans, diagnostics


def ner_vocabulary() -> frozenset[str]:
    return MAIN_CLASS_NAMES


def re_vocabulary(main_type: MainEntityType) -> frozenset[str]:
    return frozenset(m.value for m in permitted_modifiers(main_type))
