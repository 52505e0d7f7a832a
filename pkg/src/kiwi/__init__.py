"""kiwi: clinical information extraction with span-tag prompting.

Sentence-level NER and RE over a pluggable text-generation backend, with
offset reconstruction, exact/relaxed evaluation, bootstrap significance
testing, interchange formats, and compute-cost accounting.
"""

from .align import (
    AnchorConfig,
    AnchoredSpan,
    AnchorOutcome,
    Alignment,
    align_texts,
    anchor_spans,
)
from .backend import (
    Backend,
    BackendConfig,
    BackendUnavailableError,
    GenerationResponse,
    HttpBackend,
    MockBackend,
    make_backend,
)
from .evaluation import (
    MatchMode,
    MetricReport,
    SignificanceReport,
    bootstrap_significance,
    categorize_errors,
    corpus_stats,
    match_mentions,
    match_relations,
    score_corpus,
)
from .formats import (
    BioSequence,
    bio_to_spans,
    from_json,
    from_standoff,
    spans_to_bio,
    to_json,
    to_standoff,
)
from .pipeline import PipelineRun, annotate_batch, run_ner, run_re
from .schema import (
    AnnotationSet,
    Document,
    EntityMention,
    MainEntityType,
    ModifierType,
    Relation,
    Sentence,
    permitted_modifiers,
    validate,
)
from .segment import segment
from .spanmark import (
    TEMPLATE_VERSION,
    build_ner_prompt,
    build_re_prompt,
    decode,
    encode,
)
from .telemetry import (
    CostReport,
    ResourceSample,
    RunLedger,
    carbon_kg,
    cost_report,
    energy_kwh,
    gpu_hours,
    seconds_per_note,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig",
    "AnchorOutcome",
    "AnchoredSpan",
    "Alignment",
    "AnnotationSet",
    "Backend",
    "BackendConfig",
    "BackendUnavailableError",
    "BioSequence",
    "CostReport",
    "Document",
    "EntityMention",
    "GenerationResponse",
    "HttpBackend",
    "MainEntityType",
    "MatchMode",
    "MetricReport",
    "MockBackend",
    "ModifierType",
    "PipelineRun",
    "Relation",
    "ResourceSample",
    "RunLedger",
    "Sentence",
    "SignificanceReport",
    "TEMPLATE_VERSION",
    "align_texts",
    "anchor_spans",
    "annotate_batch",
    "bio_to_spans",
    "bootstrap_significance",
    "build_ner_prompt",
    "build_re_prompt",
    "carbon_kg",
    "categorize_errors",
    "corpus_stats",
    "cost_report",
    "decode",
    "encode",
    "energy_kwh",
    "from_json",
    "from_standoff",
    "gpu_hours",
    "make_backend",
    "match_mentions",
    "match_relations",
    "permitted_modifiers",
    "run_ner",
    "run_re",
    "score_corpus",
    "seconds_per_note",
    "segment",
    "spans_to_bio",
    "to_json",
    "to_standoff",
    "validate",
]
