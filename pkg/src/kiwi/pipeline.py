"""Two-stage extraction: NER over sentences, then RE per recognized main.

Each sentence produces one NER generation request; each main entity found
(or supplied as gold) produces one RE request over its host sentence.
Requests run concurrently up to the configured batch size, but results
are assembled in input order, so a deterministic backend yields
byte-identical runs.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .align import AnchorConfig, anchor_spans
from .backend import (
    Backend,
    BackendConfig,
    BackendUnavailableError,
    TransportError,
)
from .schema import (
    AnnotationSet,
    Document,
    EntityMention,
    Relation,
    Sentence,
    parse_class_name,
)
from .segment import segment
from .spanmark import (
    build_ner_prompt,
    build_re_prompt,
    decode,
    ner_vocabulary,
    re_vocabulary,
)


@dataclass(frozen=True)
class StageDiagnostic:
    doc_id: str
    stage: str  # "ner" | "re"
    sentence_start: int
    kind: str  # decode diagnostic kind, or "Dropped:<reason>"
    detail: str


@dataclass
class PipelineRun:
    annotations: list[AnnotationSet]
    timings: dict[str, float]
    diagnostics: list[StageDiagnostic] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)
    retries: int = 0
    request_counts: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


class _RetryCounter:
    def __init__(self) -> None:
        self.value = 0
        self._lock = threading.Lock()

    def bump(self) -> None:
        with self._lock:
            self.value += 1


def _generate_with_retries(
    backend: Backend, prompt: str, cfg: BackendConfig, counter: _RetryCounter
):
    """One logical request: up to max_retries extra attempts on transport
    errors only, exponential backoff between attempts."""
    delay = cfg.retry_backoff_s
    for attempt in range(cfg.max_retries + 1):
        try:
            return backend.generate(prompt)
        except TransportError as exc:
            if attempt == cfg.max_retries:
                raise BackendUnavailableError(str(exc)) from exc
            counter.bump()
            time.sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


def _run_requests(
    prompts: list[str],
    backend: Backend,
    cfg: BackendConfig,
    counter: _RetryCounter,
) -> list:
    """Generate for every prompt, at most batch_size in flight.

    Returns one entry per prompt in order: a GenerationResponse, or the
    BackendUnavailableError that ended its retries.
    """

    def one(prompt: str):
        try:
            return _generate_with_retries(backend, prompt, cfg, counter)
        except BackendUnavailableError as exc:
            return exc

    if not prompts:
        return []
    workers = min(cfg.batch_size, len(prompts))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, prompts))


def _anchored_entities(
    doc: Document,
    sent: Sentence,
    response_text: str,
    vocabulary: frozenset[str],
    stage: str,
    anchor: AnchorConfig,
    diagnostics: list[StageDiagnostic],
) -> list[tuple]:
    """Decode + anchor one response; returns (etype, start, end, surface)
    tuples in document offsets, recording every diagnostic."""
    plain, spans, pdiags = decode(response_text, vocabulary)
    for d in pdiags:
        diagnostics.append(
            StageDiagnostic(doc.id, stage, sent.start, d.kind, d.detail)
        )
    outcome = anchor_spans(doc.sentence_text(sent), (plain, spans), anchor)
    for dropped in outcome.dropped:
        diagnostics.append(
            StageDiagnostic(
                doc.id,
                stage,
                sent.start,
                f"Dropped:{dropped.reason}",
                f"{dropped.class_name} [{dropped.hyp_start}, {dropped.hyp_end})",
            )
        )
    out = []
    for sp in outcome.kept:
        start = sent.start + sp.source_start
        end = sent.start + sp.source_end
        out.append((parse_class_name(sp.class_name), start, end, doc.text[start:end]))
    return out


def _ensure_segmented(doc: Document) -> Document:
    if doc.sentences or not doc.text.strip():
        return doc
    return Document(doc.id, doc.text, tuple(segment(doc.text)))


def _host_sentence(doc: Document, mention: EntityMention) -> Sentence | None:
    for s in doc.sentences:
        if s.start <= mention.start and mention.end <= s.end:
            return s
    return None


def run_ner(
    doc: Document,
    backend: Backend,
    config: BackendConfig | None = None,
    anchor: AnchorConfig | None = None,
    diagnostics: list[StageDiagnostic] | None = None,
) -> list[EntityMention]:
    """Main-entity mentions for one document, with document-level offsets.

    Decode problems and dropped spans degrade to diagnostics (appended to
    `diagnostics` when given); only a backend that stays unreachable
    through all retries raises.
    """
    cfg = config or BackendConfig()
    anchor_cfg = anchor or AnchorConfig()
    diags = diagnostics if diagnostics is not None else []
    doc = _ensure_segmented(doc)
    counter = _RetryCounter()
    mentions: list[EntityMention] = []
    k = 0
    for sent in doc.sentences:
        prompt = build_ner_prompt(doc.sentence_text(sent))
        resp = _generate_with_retries(backend, prompt, cfg, counter)
        for etype, start, end, surface in _anchored_entities(
            doc, sent, resp.text, ner_vocabulary(), "ner", anchor_cfg, diags
        ):
            k += 1
            mentions.append(EntityMention(f"N{k}", etype, start, end, surface))
    return mentions


def run_re(
    doc: Document,
    mains: list[EntityMention],
    backend: Backend,
    config: BackendConfig | None = None,
    anchor: AnchorConfig | None = None,
    diagnostics: list[StageDiagnostic] | None = None,
) -> tuple[list[EntityMention], list[Relation]]:
    """Modifier mentions and relations for the given main entities.

    One RE request per main over its host sentence. Modifier spans that
    coincide across requests (same type and offsets) merge into a single
    mention related to each contributing main.
    """
    cfg = config or BackendConfig()
    anchor_cfg = anchor or AnchorConfig()
    diags = diagnostics if diagnostics is not None else []
    doc = _ensure_segmented(doc)
    counter = _RetryCounter()

    merged: dict[tuple, EntityMention] = {}
    relations: list[Relation] = []
    seen_rel: set[tuple] = set()
    k = 0
    for main in mains:
        sent = _host_sentence(doc, main)
        if sent is None:
            diags.append(
                StageDiagnostic(
                    doc.id, "re", main.start, "NoHostSentence",
                    f"{main.id} [{main.start}, {main.end})",
                )
            )
            continue
        prompt = build_re_prompt(doc.sentence_text(sent), main, sent.start)
        resp = _generate_with_retries(backend, prompt, cfg, counter)
        found = _anchored_entities(
            doc, sent, resp.text, re_vocabulary(main.etype), "re",
            anchor_cfg, diags,
        )
        for etype, start, end, surface in found:
            key = (etype, start, end)
            if key not in merged:
                k += 1
                merged[key] = EntityMention(f"D{k}", etype, start, end, surface)
            mod = merged[key]
            rel_key = (main.id, mod.id, etype)
            if rel_key not in seen_rel:
                seen_rel.add(rel_key)
                relations.append(Relation(main.id, mod.id, etype))
    return list(merged.values()), relations


def _assemble(
    doc_id: str,
    mains: list[EntityMention],
    modifiers: list[EntityMention],
    relations: list[Relation],
) -> AnnotationSet:
    """Renumber mentions T1..Tn in (start, end, main-first) order and remap
    relation endpoints accordingly."""
    ordered = sorted(
        list(mains) + list(modifiers),
        key=lambda m: (m.start, m.end, 0 if m.is_main else 1, m.etype.value),
    )
    remap: dict[str, str] = {}
    renumbered: list[EntityMention] = []
    for i, m in enumerate(ordered, start=1):
        new_id = f"T{i}"
        remap[m.id] = new_id
        renumbered.append(EntityMention(new_id, m.etype, m.start, m.end, m.surface))
    index = {m.id: i for i, m in enumerate(renumbered)}
    rels = [
        Relation(remap[r.main], remap[r.modifier], r.label) for r in relations
    ]
    rels.sort(key=lambda r: (index[r.main], index[r.modifier]))
    return AnnotationSet(doc_id, tuple(renumbered), tuple(rels))


def annotate_batch(
    docs: list[Document],
    backend: Backend,
    config: BackendConfig | None = None,
    re_input: str = "pipeline",
    gold: list[AnnotationSet] | None = None,
    tasks: tuple[str, ...] = ("ner", "re"),
    anchor: AnchorConfig | None = None,
) -> PipelineRun:
    """Annotate a batch of documents; one AnnotationSet per input document.

    re_input="pipeline" feeds stage-one mentions into RE; "gold" skips
    the NER generation stage and conditions RE on the main entities of
    the matching `gold` set instead. Per-document failures are collected
    in the run's failure list; surviving documents still come back.
    """
    if re_input not in {"pipeline", "gold"}:
        raise ValueError(f"re_input must be 'pipeline' or 'gold', got {re_input!r}")
    if re_input == "gold" and gold is None:
        raise ValueError("re_input='gold' requires gold annotation sets")
    cfg = config or BackendConfig()
    anchor_cfg = anchor or AnchorConfig()
    counter = _RetryCounter()
    timings: dict[str, float] = {}
    diagnostics: list[StageDiagnostic] = []
    failures: dict[str, str] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    docs = [_ensure_segmented(d) for d in docs]
    timings["segment"] = time.perf_counter() - t0
    gold_by_id = {g.doc_id: g for g in gold} if gold else {}

    # stage one: recognize mains (or take them from gold)
    mains_by_doc: list[list[EntityMention]] = [[] for _ in docs]
    ner_requests = 0
    t0 = time.perf_counter()
    if re_input == "gold":
        for di, doc in enumerate(docs):
            g = gold_by_id.get(doc.id)
            if g is None:
                failures.setdefault(doc.id, "no gold annotations for document")
                continue
            mains = [m for m in g.mentions if m.is_main]
            mains_by_doc[di] = [
                EntityMention(f"M{di}.{j}", m.etype, m.start, m.end, m.surface)
                for j, m in enumerate(mains, start=1)
            ]
    elif "ner" in tasks:
        jobs: list[tuple[int, Sentence]] = []
        prompts: list[str] = []
        for di, doc in enumerate(docs):
            for sent in doc.sentences:
                jobs.append((di, sent))
                prompts.append(build_ner_prompt(doc.sentence_text(sent)))
        ner_requests = len(prompts)
        results = _run_requests(prompts, backend, cfg, counter)
        numbered = [0] * len(docs)
        for (di, sent), result in zip(jobs, results):
            doc = docs[di]
            if isinstance(result, BackendUnavailableError):
                failures.setdefault(doc.id, str(result))
                continue
            for etype, start, end, surface in _anchored_entities(
                doc, sent, result.text, ner_vocabulary(), "ner",
                anchor_cfg, diagnostics,
            ):
                numbered[di] += 1
                mains_by_doc[di].append(
                    EntityMention(
                        f"M{di}.{numbered[di]}", etype, start, end, surface
                    )
                )
    timings["ner"] = time.perf_counter() - t0

    # stage two: one RE request per main
    mods_by_doc: list[dict[tuple, EntityMention]] = [{} for _ in docs]
    rels_by_doc: list[list[Relation]] = [[] for _ in docs]
    re_requests = 0
    t0 = time.perf_counter()
    if "re" in tasks:
        jobs_re: list[tuple[int, EntityMention, Sentence]] = []
        prompts = []
        for di, doc in enumerate(docs):
            if doc.id in failures:
                continue
            for main in mains_by_doc[di]:
                sent = _host_sentence(doc, main)
                if sent is None:
                    diagnostics.append(
                        StageDiagnostic(
                            doc.id, "re", main.start, "NoHostSentence",
                            f"{main.id} [{main.start}, {main.end})",
                        )
                    )
                    continue
                jobs_re.append((di, main, sent))
                prompts.append(build_re_prompt(doc.sentence_text(sent), main, sent.start))
        re_requests = len(prompts)
        results = _run_requests(prompts, backend, cfg, counter)
        numbered = [0] * len(docs)
        seen_rel: set[tuple] = set()
        for (di, main, sent), result in zip(jobs_re, results):
            doc = docs[di]
            if isinstance(result, BackendUnavailableError):
                failures.setdefault(doc.id, str(result))
                continue
            found = _anchored_entities(
                doc, sent, result.text, re_vocabulary(main.etype), "re",
                anchor_cfg, diagnostics,
            )
            for etype, start, end, surface in found:
                key = (etype, start, end)
                if key not in mods_by_doc[di]:
                    numbered[di] += 1
                    mods_by_doc[di][key] = EntityMention(
                        f"D{di}.{numbered[di]}", etype, start, end, surface
                    )
                mod = mods_by_doc[di][key]
                rel_key = (di, main.id, mod.id, etype)
                if rel_key not in seen_rel:
                    seen_rel.add(rel_key)
                    rels_by_doc[di].append(Relation(main.id, mod.id, etype))
    timings["re"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    annotations = [
        _assemble(
            doc.id,
            mains_by_doc[di],
            list(mods_by_doc[di].values()),
            rels_by_doc[di],
        )
        for di, doc in enumerate(docs)
    ]
    timings["assemble"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_total

    return PipelineRun(
        annotations=annotations,
        timings=timings,
        diagnostics=diagnostics,
        failures=sorted(failures.items()),
        retries=counter.value,
        request_counts={"ner": ner_requests, "re": re_requests},
    )


def mock_corpus_lexicon(gold: list[AnnotationSet]) -> dict[str, str]:
    """surface→class lexicon from gold sets, for oracle mock backends."""
    lex: dict[str, str] = {}
    for g in gold:
        for m in g.mentions:
            lex[m.surface] = m.etype.value
    return lex


__all__ = [
    "PipelineRun",
    "StageDiagnostic",
    "annotate_batch",
    "mock_corpus_lexicon",
    "run_ner",
    "run_re",
]
