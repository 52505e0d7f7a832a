#!/usr/bin/env python3
"""
Span markup: prompts, encoding, and tolerant decoding
=====================================================
"""

from kiwi.schema import EntityMention, MainEntityType
from kiwi.spanmark import (
    TEMPLATE_VERSION,
    build_ner_prompt,
    build_re_prompt,
    decode,
    encode,
    ner_vocabulary,
    re_vocabulary,
)

print(f"template version: {TEMPLATE_VERSION}\n")

# A sentence-level prompt asks the model for an HTML-ish rendition of the
# input, with <span class="..."> around each entity.
sentence = "Tylenol 500 MG PO q.i.d. for pain ."
print(build_ner_prompt(sentence))
print("=" * 72)

# Suppose the model answered with two tagged entities.
answer = (
    '<span class="drug">Tylenol</span> 500 MG PO q.i.d. for '
    '<span class="problem">pain</span> .'
)
plain, spans, diagnostics = decode(answer, ner_vocabulary())
print(f"plain text : {plain!r}")
print(f"spans      : {spans}")
print(f"diagnostics: {diagnostics}")

# encode() is the inverse direction: gold mentions back into markup.
mentions = [
    EntityMention("T1", MainEntityType.DRUG, 0, 7, "Tylenol"),
    EntityMention("T2", MainEntityType.PROBLEM, 29, 33, "pain"),
]
print(f"re-encoded : {encode(sentence, mentions)}\n")

# Stage two marks ONE main entity in the input and asks for its modifiers.
# Each main type gets its own template with the permitted modifier classes.
prompt = build_re_prompt(sentence, mentions[0])
print(prompt)
print("=" * 72)

answer = (
    'Tylenol <span class="strength">500 MG</span> '
    '<span class="route">PO</span> <span class="frequency">q.i.d.</span> '
    "for pain ."
)
plain, spans, _ = decode(answer, re_vocabulary(MainEntityType.DRUG))
print(f"modifiers of Tylenol: {spans}\n")

# The decoder is a total function: garbage never raises, it reports.
messy = (
    '<span class="banana">odd label</span> and '
    '<span class="problem">never closed'
)
plain, spans, diagnostics = decode(messy, ner_vocabulary())
print(f"messy input  : {messy!r}")
print(f"plain        : {plain!r}")
print(f"spans        : {spans}")
for d in diagnostics:
    print(f"diagnostic   : {d.kind} at {d.position}: {d.detail}")
