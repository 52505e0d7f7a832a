import json
from pathlib import Path

import pytest

from kiwi.schema import (
    AnnotationSet,
    Document,
    EntityMention,
    Relation,
    parse_class_name,
)
from kiwi.segment import segment

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
CORPUS = FIXTURES / "corpus"


def mention(mention_id, class_name, start, end, surface):
    return EntityMention(mention_id, parse_class_name(class_name), start, end, surface)


def mention_set(doc_id, spans, relations=()):
    """spans: (class_name, start, end) triples; surfaces are synthesized."""
    mentions = tuple(
        EntityMention(f"T{i}", parse_class_name(c), s, e, "x" * (e - s))
        for i, (c, s, e) in enumerate(spans, start=1)
    )
    rels = tuple(
        Relation(main, mod, parse_class_name(label)) for main, mod, label in relations
    )
    return AnnotationSet(doc_id, mentions, rels)


def load_corpus():
    docs, gold = [], []
    for txt in sorted(CORPUS.glob("*.txt")):
        text = txt.read_text(encoding="utf-8")
        docs.append(Document(txt.stem, text, tuple(segment(text))))
    from kiwi.formats import from_json

    for doc in docs:
        gold.append(from_json((CORPUS / f"{doc.id}.kiwi.json").read_bytes()))
    return docs, gold


@pytest.fixture(scope="session")
def corpus_lexicon():
    return json.loads((CORPUS / "lexicon.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()
