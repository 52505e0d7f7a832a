#!/usr/bin/env python3
"""
Cost accounting and annotation interchange
==========================================
"""

from kiwi.formats import (
    bio_to_tsv,
    from_json,
    spans_to_bio,
    to_json,
    to_standoff,
)
from kiwi.schema import (
    AnnotationSet,
    Document,
    EntityMention,
    MainEntityType,
    ModifierType,
    Relation,
    Sentence,
)
from kiwi.telemetry import (
    ResourceSample,
    RunLedger,
    cost_report,
    read_samples_csv,
    report_to_text,
)

# --- telemetry: from a power log to a cost report -----------------------------

# One sample per GPU every 15 minutes over a two-hour inference run.
CSV = "timestamp,gpu_id,power_w,mem_gb\n" + "\n".join(
    f"{t * 900.0},gpu{g},{280.0 + 40.0 * g},{38.5 + g}"
    for t in range(9) for g in range(2)
)

samples = read_samples_csv(CSV)
ledger = RunLedger(phase="inference", num_gpus=2, wall_seconds=7200.0,
                   notes_processed=100, samples=samples)
print(report_to_text(cost_report(ledger)))
print()

# Training runs amortize over epochs instead of notes.
train = RunLedger(phase="train", num_gpus=1, wall_seconds=41.7 * 3600,
                  notes_processed=0, epochs=2,
                  samples=(ResourceSample(0.0, "gpu0", 310.0, 44.0),))
print(report_to_text(cost_report(train)))
print()

# --- formats: one annotation, three representations ---------------------------

text = "Hgb 10.6 gm / dL was stable ."
doc = Document(id="note-1", text=text, sentences=(Sentence(0, len(text)),))
annotation = AnnotationSet(
    doc_id="note-1",
    mentions=(
        EntityMention("T1", MainEntityType.TEST, 0, 3, "Hgb"),
        EntityMention("T2", ModifierType.LABVALUE, 4, 16, "10.6 gm / dL"),
    ),
    relations=(Relation("T1", "T2", ModifierType.LABVALUE),),
)

payload = to_json(annotation)
print(payload.decode().rstrip())
assert from_json(payload) == annotation  # canonical bytes, exact inverse

print()
print(to_standoff(annotation).rstrip())

print()
mains = [m for m in annotation.mentions if m.is_main]
bio = spans_to_bio(doc, doc.sentences[0], mains)
print(bio_to_tsv([bio]).rstrip())
