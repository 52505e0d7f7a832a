"""Entity/modifier taxonomy and the core document/annotation data model.

Four main entity types, sixteen modifier types, and a fixed table of which
modifiers may attach to which main type. Everything here is immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class MainEntityType(enum.Enum):
    PROBLEM = "problem"
    TEST = "test"
    DRUG = "drug"
    TREATMENT = "treatment"

    def __str__(self) -> str:
        return self.value


class ModifierType(enum.Enum):
    NEGATION = "negation"
    TEMPORAL = "temporal"
    SEVERITY = "severity"
    CONDITION = "condition"
    UNCERTAIN = "uncertain"
    SUBJECT = "subject"
    BODYLOC = "bodyloc"
    COURSE = "course"
    LABVALUE = "labvalue"
    REFERENCE_RANGE = "reference_range"
    STRENGTH = "strength"
    DOSAGE = "dosage"
    DURATION = "duration"
    FORM = "form"
    FREQUENCY = "frequency"
    ROUTE = "route"

    def __str__(self) -> str:
        return self.value


EntityType = MainEntityType | ModifierType

# Which modifiers may attach to each main type, in prompt listing order.
# 8 + 4 + 8 + 2 = 22 permitted pairs.
RELATION_SCHEMA: dict[MainEntityType, tuple[ModifierType, ...]] = {
    MainEntityType.PROBLEM: (
        ModifierType.UNCERTAIN,
        ModifierType.CONDITION,
        ModifierType.SUBJECT,
        ModifierType.NEGATION,
        ModifierType.BODYLOC,
        ModifierType.SEVERITY,
        ModifierType.TEMPORAL,
        ModifierType.COURSE,
    ),
    MainEntityType.TEST: (
        ModifierType.LABVALUE,
        ModifierType.REFERENCE_RANGE,
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
    ),
    MainEntityType.DRUG: (
        ModifierType.FORM,
        ModifierType.FREQUENCY,
        ModifierType.DOSAGE,
        ModifierType.DURATION,
        ModifierType.STRENGTH,
        ModifierType.ROUTE,
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
    ),
    MainEntityType.TREATMENT: (
        ModifierType.TEMPORAL,
        ModifierType.NEGATION,
    ),
}

# Same pairs grouped for summary tables: negation and temporal first
# (they apply to every main type), then the type-specific modifiers.
REPORT_ORDER: dict[MainEntityType, tuple[ModifierType, ...]] = {
    MainEntityType.PROBLEM: (
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
        ModifierType.SEVERITY,
        ModifierType.CONDITION,
        ModifierType.UNCERTAIN,
        ModifierType.SUBJECT,
        ModifierType.BODYLOC,
        ModifierType.COURSE,
    ),
    MainEntityType.TEST: (
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
        ModifierType.LABVALUE,
        ModifierType.REFERENCE_RANGE,
    ),
    MainEntityType.DRUG: (
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
        ModifierType.STRENGTH,
        ModifierType.DOSAGE,
        ModifierType.DURATION,
        ModifierType.FORM,
        ModifierType.FREQUENCY,
        ModifierType.ROUTE,
    ),
    MainEntityType.TREATMENT: (
        ModifierType.NEGATION,
        ModifierType.TEMPORAL,
    ),
}


def permitted_modifiers(t: MainEntityType) -> tuple[ModifierType, ...]:
    """Modifiers that may attach to main type `t`, in prompt listing order."""
    return RELATION_SCHEMA[t]


_BY_NAME: dict[str, EntityType] = {
    **{t.value: t for t in MainEntityType},
    **{m.value: m for m in ModifierType},
}


def parse_class_name(name: str) -> EntityType:
    """Map a wire name ("problem", "labvalue", ...) to its enum value.

    Main and modifier names are disjoint, so one lookup serves both.
    Raises KeyError for unknown names.
    """
    return _BY_NAME[name]


@dataclass(frozen=True)
class Sentence:
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad sentence bounds [{self.start}, {self.end})")


@dataclass(frozen=True)
class Document:
    """A raw note plus its sentence segmentation.

    All offsets index `text` by Unicode scalar values (Python string
    indices), never bytes.
    """

    id: str
    text: str
    sentences: tuple[Sentence, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))
        prev_end = 0
        for s in self.sentences:
            if s.start < prev_end or s.end > len(self.text):
                raise ValueError(
                    f"sentence [{s.start}, {s.end}) overlaps or exceeds text"
                )
            prev_end = s.end

    def sentence_text(self, s: Sentence) -> str:
        return self.text[s.start : s.end]


@dataclass(frozen=True)
class EntityMention:
    """A typed span in a document: a main entity or a modifier."""

    id: str
    etype: EntityType
    start: int
    end: int
    surface: str

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError(f"empty mention [{self.start}, {self.end})")

    @property
    def is_main(self) -> bool:
        return isinstance(self.etype, MainEntityType)


@dataclass(frozen=True)
class Relation:
    """Links a main mention to a modifier mention, by mention id."""

    main: str
    modifier: str
    label: ModifierType


@dataclass(frozen=True)
class AnnotationSet:
    """All mentions and relations for one document.

    Construction rejects duplicate mention ids and duplicate relation
    triples outright (those indicate upstream parsing bugs). Softer
    problems such as dangling relation endpoints or offsets that do not
    match a document are representable and reported by `validate`.
    """

    doc_id: str
    mentions: tuple[EntityMention, ...] = ()
    relations: tuple[Relation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mentions", tuple(self.mentions))
        object.__setattr__(self, "relations", tuple(self.relations))
        seen_ids = set()
        for m in self.mentions:
            if m.id in seen_ids:
                raise ValueError(f"duplicate mention id {m.id!r}")
            seen_ids.add(m.id)
        seen_rel = set()
        for r in self.relations:
            key = (r.main, r.modifier, r.label)
            if key in seen_rel:
                raise ValueError(f"duplicate relation {key}")
            seen_rel.add(key)

    def mention_by_id(self, mid: str) -> EntityMention | None:
        for m in self.mentions:
            if m.id == mid:
                return m
        return None


class ViolationKind(enum.Enum):
    DANGLING_RELATION = "DanglingRelation"
    OFFSET_OUT_OF_RANGE = "OffsetOutOfRange"
    SURFACE_MISMATCH = "SurfaceMismatch"
    SCHEMA_FORBIDDEN_PAIR = "SchemaForbiddenPair"
    LABEL_MISMATCH = "LabelMismatch"
    ENDPOINT_KIND_MISMATCH = "EndpointKindMismatch"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: str
    detail: str


def validate(annotation_set: AnnotationSet, document: Document) -> list[Violation]:
    """Report every invariant violation in the set against the document.

    Returns an empty list iff the set is well-formed. Violations are data,
    not failures; order follows mention order then relation order, so the
    result is insensitive to how callers shuffled their inputs beforehand.
    """
    out: list[Violation] = []
    by_id = {m.id: m for m in annotation_set.mentions}

    for m in sorted(annotation_set.mentions, key=lambda m: (m.start, m.end, m.id)):
        if m.end > len(document.text):
            out.append(
                Violation(
                    ViolationKind.OFFSET_OUT_OF_RANGE,
                    m.id,
                    f"[{m.start}, {m.end}) exceeds text length {len(document.text)}",
                )
            )
            continue
        actual = document.text[m.start : m.end]
        if actual != m.surface:
            out.append(
                Violation(
                    ViolationKind.SURFACE_MISMATCH,
                    m.id,
                    f"surface {m.surface!r} != text slice {actual!r}",
                )
            )

    for r in sorted(
        annotation_set.relations, key=lambda r: (r.main, r.modifier, r.label.value)
    ):
        main = by_id.get(r.main)
        modifier = by_id.get(r.modifier)
        if main is None or modifier is None:
            missing = r.main if main is None else r.modifier
            out.append(
                Violation(
                    ViolationKind.DANGLING_RELATION,
                    missing,
                    f"relation ({r.main}, {r.modifier}, {r.label}) has no such mention",
                )
            )
            continue
        if not main.is_main or modifier.is_main:
            out.append(
                Violation(
                    ViolationKind.ENDPOINT_KIND_MISMATCH,
                    r.main if not main.is_main else r.modifier,
                    "relation endpoints must be (main, modifier)",
                )
            )
            continue
        if r.label is not modifier.etype:
            out.append(
                Violation(
                    ViolationKind.LABEL_MISMATCH,
                    r.modifier,
                    f"label {r.label} != modifier type {modifier.etype}",
                )
            )
        if r.label not in RELATION_SCHEMA[main.etype]:
            out.append(
                Violation(
                    ViolationKind.SCHEMA_FORBIDDEN_PAIR,
                    r.main,
                    f"{main.etype} does not permit {r.label}",
                )
            )
    return out
