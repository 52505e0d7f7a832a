#!/usr/bin/env python3
"""
Re-anchoring spans onto the source text
=======================================

Generated text rarely echoes the input byte for byte. Spans decoded from
it carry offsets into the *generated* text; anchoring projects them back
onto the source via a character alignment that ignores case and
whitespace.
"""

from kiwi.align import AnchorConfig, align_texts, anchor_spans
from kiwi.spanmark import decode

source = "Patient denies fever or chills . Started Ortho Micronor 0.35 MG daily ."

# The model lowercased one word, doubled a space, and invented a word.
echoed = (
    'ient denies <span class="problem">Fever</span> or '
    '<span class="problem">chills</span> .  um, Started '
    '<span class="drug">Ortho  Micronor</span> 0.35 MG daily .'
)

plain, spans, _ = decode(echoed)
print(f"decoded spans (offsets into the echo): {spans}\n")

outcome = anchor_spans(source, (plain, spans))
for kept in outcome.kept:
    surface = source[kept.source_start:kept.source_end]
    print(f"kept   : {kept.class_name:8s} [{kept.source_start:3d},"
          f"{kept.source_end:3d})  {surface!r}  conf={kept.confidence:.2f}")
for dropped in outcome.dropped:
    print(f"dropped: {dropped.class_name:8s} reason={dropped.reason} "
          f"conf={dropped.confidence:.2f}")

# Hallucinated spans have nothing to attach to and get dropped.
print()
hallucinated = 'totally <span class="problem">unrelated text</span> here'
plain, spans, _ = decode(hallucinated)
outcome = anchor_spans(source, (plain, spans))
print(f"hallucination outcome: kept={len(outcome.kept)} "
      f"dropped={[d.reason for d in outcome.dropped]}\n")

# The underlying alignment is inspectable: monotone character pairs plus
# an edit cost over the normalized texts.
alignment = align_texts("Hgb  10.6", "hgb 10.7")
print(f"alignment cost {alignment.cost}, {len(alignment.pairs)} char pairs")

# A stricter confidence threshold trades recall for precision: here one
# letter inside the span was replaced, so only 4 of its 5 letters anchor.
garbled = source.replace("fever", '<span class="problem">fevur</span>')
plain, spans, _ = decode(garbled)
strict = AnchorConfig(confidence_threshold=0.95)
loose_out = anchor_spans(source, (plain, spans))
strict_out = anchor_spans(source, (plain, spans), strict)
print(f"garbled span: default keeps {len(loose_out.kept)} "
      f"(conf={loose_out.kept[0].confidence:.2f}), "
      f"strict keeps {len(strict_out.kept)} "
      f"(reason={strict_out.dropped[0].reason})")
