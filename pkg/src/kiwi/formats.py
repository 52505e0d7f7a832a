"""Lossless interchange formats for annotation sets.

Three codecs: canonical JSON (`.kiwi.json`), T/R standoff lines (`.ann`)
for offset-release interchange, and BIO token tagging (`.bio.tsv`) for
sequence-labeling baselines. Each inverts exactly on its stated domain.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass

from .schema import (
    AnnotationSet,
    Document,
    EntityMention,
    MainEntityType,
    ModifierType,
    Relation,
    Sentence,
    parse_class_name,
)

SCHEMA_VERSION = 1

JSON_SUFFIX = ".kiwi.json"
STANDOFF_SUFFIX = ".ann"
BIO_SUFFIX = ".bio.tsv"


class MalformedJsonError(ValueError):
    pass


class SchemaVersionMismatchError(ValueError):
    pass


class DanglingReferenceError(ValueError):
    pass


class SurfaceMismatchError(ValueError):
    pass


class OverlappingMentionsError(ValueError):
    pass


class BioAlignmentWarning(UserWarning):
    """A span did not sit on token boundaries and was snapped outward."""


# ---------------------------------------------------------------- JSON

def to_json(annotation_set: AnnotationSet) -> bytes:
    """Canonical JSON: sorted keys, no insignificant whitespace, UTF-8,
    one trailing newline. Byte-stable for equal inputs."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "doc_id": annotation_set.doc_id,
        "mentions": [
            {
                "id": m.id,
                "kind": "main" if m.is_main else "modifier",
                "type": m.etype.value,
                "start": m.start,
                "end": m.end,
                "surface": m.surface,
            }
            for m in annotation_set.mentions
        ],
        "relations": [
            {"main": r.main, "modifier": r.modifier, "label": r.label.value}
            for r in annotation_set.relations
        ],
    }
    text = json.dumps(
        payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    )
    return (text + "\n").encode("utf-8")


def from_json(data: bytes | str) -> AnnotationSet:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(str(exc)) from exc
    if not isinstance(payload, dict):
        raise MalformedJsonError("top level must be an object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"schema_version {version!r}, expected {SCHEMA_VERSION}"
        )
    try:
        mentions = []
        for m in payload.get("mentions", []):
            etype = parse_class_name(m["type"])
            kind = "main" if isinstance(etype, MainEntityType) else "modifier"
            if m["kind"] != kind:
                raise MalformedJsonError(
                    f"mention {m['id']!r}: kind {m['kind']!r} does not fit type {m['type']!r}"
                )
            mentions.append(
                EntityMention(m["id"], etype, m["start"], m["end"], m["surface"])
            )
        relations = []
        for r in payload.get("relations", []):
            label = parse_class_name(r["label"])
            if not isinstance(label, ModifierType):
                raise MalformedJsonError(f"relation label {r['label']!r} is not a modifier")
            relations.append(Relation(r["main"], r["modifier"], label))
        return AnnotationSet(
            payload["doc_id"], tuple(mentions), tuple(relations)
        )
    except MalformedJsonError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedJsonError(str(exc)) from exc


# ------------------------------------------------------------ standoff

_T_ID = re.compile(r"^T\d+$")
_ARG = re.compile(r"^Arg([12]):(\S+)$")


def to_standoff(annotation_set: AnnotationSet) -> str:
    """T/R line rendering.

    Mention ids already shaped like T<number> are kept verbatim; any
    other id is renumbered into unused T slots (relations follow). Line
    grammar: ``T1<TAB>type start end<TAB>surface`` and
    ``R1<TAB>label Arg1:Tmain Arg2:Tmodifier``.
    """
    used = {
        int(m.id[1:]) for m in annotation_set.mentions if _T_ID.match(m.id)
    }
    next_free = max(used, default=0) + 1
    id_map: dict[str, str] = {}
    for m in annotation_set.mentions:
        if _T_ID.match(m.id):
            id_map[m.id] = m.id
        else:
            id_map[m.id] = f"T{next_free}"
            next_free += 1
    lines = []
    for m in annotation_set.mentions:
        if "\n" in m.surface or "\t" in m.surface:
            raise ValueError(
                f"mention {m.id!r}: standoff lines cannot carry newlines or tabs"
            )
        lines.append(
            f"{id_map[m.id]}\t{m.etype.value} {m.start} {m.end}\t{m.surface}"
        )
    for i, r in enumerate(annotation_set.relations, start=1):
        main = id_map.get(r.main, r.main)
        modifier = id_map.get(r.modifier, r.modifier)
        lines.append(f"R{i}\t{r.label.value} Arg1:{main} Arg2:{modifier}")
    return "\n".join(lines) + ("\n" if lines else "")


def from_standoff(text: str, document: Document) -> AnnotationSet:
    """Parse T/R lines; surfaces are verified against the document text.

    Lines with other leading types are ignored. R-line args must resolve
    to parsed T ids (DanglingReferenceError otherwise).
    """
    mentions: list[EntityMention] = []
    relations: list[Relation] = []
    t_ids: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line[0] == "T":
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: T-line needs id<TAB>type start end")
            head = parts[1].split()
            if len(head) != 3:
                raise ValueError(f"line {lineno}: expected 'type start end'")
            type_name, start_s, end_s = head
            try:
                etype = parse_class_name(type_name)
            except KeyError as exc:
                raise ValueError(f"line {lineno}: unknown type {type_name!r}") from exc
            start, end = int(start_s), int(end_s)
            surface = parts[2] if len(parts) > 2 else ""
            actual = document.text[start:end]
            if actual != surface:
                raise SurfaceMismatchError(
                    f"line {lineno}: surface {surface!r} != document slice {actual!r}"
                )
            mentions.append(EntityMention(parts[0], etype, start, end, surface))
            t_ids.add(parts[0])
        elif line[0] == "R":
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: R-line needs id<TAB>label args")
            head = parts[1].split()
            if len(head) != 3:
                raise ValueError(f"line {lineno}: expected 'label Arg1:.. Arg2:..'")
            label_name = head[0]
            try:
                label = parse_class_name(label_name)
            except KeyError as exc:
                raise ValueError(f"line {lineno}: unknown label {label_name!r}") from exc
            if not isinstance(label, ModifierType):
                raise ValueError(f"line {lineno}: label {label_name!r} is not a modifier")
            args: dict[str, str] = {}
            for token in head[1:]:
                m = _ARG.match(token)
                if not m:
                    raise ValueError(f"line {lineno}: bad argument {token!r}")
                args[m.group(1)] = m.group(2)
            if set(args) != {"1", "2"}:
                raise ValueError(f"line {lineno}: need exactly Arg1 and Arg2")
            relations.append(Relation(args["1"], args["2"], label))
        # other standoff line types (events, attributes, comments) ignored
    for r in relations:
        for endpoint in (r.main, r.modifier):
            if endpoint not in t_ids:
                raise DanglingReferenceError(
                    f"relation references unknown mention {endpoint!r}"
                )
    return AnnotationSet(document.id, tuple(mentions), tuple(relations))


# ----------------------------------------------------------------- BIO

@dataclass(frozen=True)
class BioSequence:
    tokens: tuple[tuple[str, int, int], ...]  # (surface, start, end)
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.tokens) != len(self.labels):
            raise ValueError("tokens and labels must have equal length")
        prev = "O"
        for lab in self.labels:
            if lab != "O" and not lab.startswith(("B-", "I-")):
                raise ValueError(f"bad label {lab!r}")
            if lab.startswith("I-"):
                if prev == "O" or prev[2:] != lab[2:]:
                    raise ValueError(f"I-label {lab!r} continues nothing")
            prev = lab


def tokenize(text: str, base_offset: int = 0) -> list[tuple[str, int, int]]:
    """Frozen tokenizer: whitespace-separated chunks; leading and trailing
    non-alphanumeric characters split off as single-character tokens;
    internal punctuation stays attached (so "10.6" is one token)."""
    tokens: list[tuple[str, int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        # chunk is [i, j)
        a = i
        while a < j and not text[a].isalnum():
            tokens.append((text[a], base_offset + a, base_offset + a + 1))
            a += 1
        b = j
        while b > a and not text[b - 1].isalnum():
            b -= 1
        if a < b:
            tokens.append((text[a:b], base_offset + a, base_offset + b))
        for k in range(b, j):
            tokens.append((text[k], base_offset + k, base_offset + k + 1))
        i = j
    return tokens


def spans_to_bio(
    document: Document,
    sentence: Sentence,
    mentions: list[EntityMention],
) -> BioSequence:
    """BIO labels over the sentence's tokens.

    Mentions must lie within the sentence and not overlap. A span that
    does not sit on token boundaries is snapped outward to the tokens it
    touches, with a BioAlignmentWarning.
    """
    ordered = sorted(mentions, key=lambda m: (m.start, m.end))
    prev_end = None
    for m in ordered:
        if m.start < sentence.start or m.end > sentence.end:
            raise ValueError(f"mention {m.id!r} outside sentence")
        if prev_end is not None and m.start < prev_end:
            raise OverlappingMentionsError(f"mention {m.id!r} overlaps previous")
        prev_end = m.end
    tokens = tokenize(document.sentence_text(sentence), sentence.start)
    labels = ["O"] * len(tokens)
    prev_tok_hi = -1
    for m in ordered:
        covered = [
            ti
            for ti, (_, ts, te) in enumerate(tokens)
            if ts < m.end and m.start < te
        ]
        if not covered:
            continue
        lo, hi = covered[0], covered[-1]
        if tokens[lo][1] != m.start or tokens[hi][2] != m.end:
            warnings.warn(
                f"span [{m.start}, {m.end}) snapped to token boundaries "
                f"[{tokens[lo][1]}, {tokens[hi][2]})",
                BioAlignmentWarning,
                stacklevel=2,
            )
        if lo <= prev_tok_hi:
            raise OverlappingMentionsError(
                f"mention {m.id!r} overlaps previous after token snapping"
            )
        labels[lo] = f"B-{m.etype.value}"
        for ti in range(lo + 1, hi + 1):
            labels[ti] = f"I-{m.etype.value}"
        prev_tok_hi = hi
    return BioSequence(tuple(tokens), tuple(labels))


def bio_to_spans(
    bio: BioSequence, document_text: str | None = None
) -> list[EntityMention]:
    """Spans back out of a BIO sequence; exact inverse of spans_to_bio on
    token-aligned input (mention ids are freshly numbered).

    Surfaces come from `document_text` when given; otherwise gaps between
    tokens are approximated with single spaces.
    """
    out: list[EntityMention] = []
    current: tuple[str, int, int, list[tuple[str, int, int]]] | None = None

    def flush() -> None:
        nonlocal current
        if current is None:
            return
        type_name, start, end, toks = current
        if document_text is not None:
            surface = document_text[start:end]
        else:
            surface = ""
            for idx, (tsurf, ts, _) in enumerate(toks):
                if idx:
                    gap = ts - toks[idx - 1][2]
                    surface += " " * max(gap, 0)
                surface += tsurf
        out.append(
            EntityMention(f"B{len(out) + 1}", parse_class_name(type_name),
                          start, end, surface)
        )
        current = None

    for (tsurf, ts, te), label in zip(bio.tokens, bio.labels):
        if label == "O":
            flush()
        elif label.startswith("B-"):
            flush()
            current = (label[2:], ts, te, [(tsurf, ts, te)])
        else:  # I-: BioSequence validation guarantees continuity
            type_name, start, _, toks = current  # type: ignore[misc]
            toks.append((tsurf, ts, te))
            current = (type_name, start, te, toks)
    flush()
    return out


def bio_to_tsv(sequences: list[BioSequence]) -> str:
    """token<TAB>start<TAB>end<TAB>label lines; blank line between
    sentences."""
    blocks = []
    for seq in sequences:
        blocks.append(
            "\n".join(
                f"{surf}\t{ts}\t{te}\t{lab}"
                for (surf, ts, te), lab in zip(seq.tokens, seq.labels)
            )
        )
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def tsv_to_bio(text: str) -> list[BioSequence]:
    sequences = []
    for block in text.split("\n\n"):
        if not block.strip():
            continue
        tokens = []
        labels = []
        for line in block.splitlines():
            if not line.strip():
                continue
            surf, ts, te, lab = line.split("\t")
            tokens.append((surf, int(ts), int(te)))
            labels.append(lab)
        sequences.append(BioSequence(tuple(tokens), tuple(labels)))
    return sequences
