"""Scoring: exact/relaxed P-R-F1, bootstrap rank-sum significance, error
taxonomy, and corpus statistics.

Exact matching requires identical (type, start, end); relaxed matching
requires the same type and overlapping [start, end) ranges. Matching is
always one-to-one maximum-cardinality, so a single prediction can never
collect credit for two gold spans.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .schema import (
    AnnotationSet,
    EntityMention,
    MainEntityType,
    REPORT_ORDER,
)


class MatchMode(enum.Enum):
    EXACT = "exact"
    RELAXED = "relaxed"


@dataclass(frozen=True)
class MatchCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn
        )


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # zero-denominator convention: undefined ratios score 0
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def _overlap(a: EntityMention, b: EntityMention) -> int:
    return min(a.end, b.end) - max(a.start, b.start)


def _compatible(a: EntityMention, b: EntityMention, mode: MatchMode) -> bool:
    if a.etype is not b.etype:
        return False
    if mode is MatchMode.EXACT:
        return a.start == b.start and a.end == b.end
    return _overlap(a, b) > 0


def _maximum_matching(
    gold: list[EntityMention],
    pred: list[EntityMention],
    adjacency: list[list[int]],
) -> list[tuple[int, int]]:
    """Kuhn's augmenting-path maximum bipartite matching.

    `adjacency[gi]` lists compatible pred indices in preference order;
    golds are processed in list order, which together with the adjacency
    order fixes the tie-breaking deterministically.
    """
    match_of_pred: dict[int, int] = {}

    def try_assign(gi: int, banned: set[int]) -> bool:
        for pi in adjacency[gi]:
            if pi in banned:
                continue
            banned.add(pi)
            if pi not in match_of_pred or try_assign(match_of_pred[pi], banned):
                match_of_pred[pi] = gi
                return True
        return False

    for gi in range(len(gold)):
        try_assign(gi, set())
    pairs = sorted((gi, pi) for pi, gi in match_of_pred.items())
    return pairs


def match_mentions(
    gold: list[EntityMention],
    pred: list[EntityMention],
    mode: MatchMode,
) -> tuple[list[tuple[int, int]], MatchCounts]:
    """One-to-one maximum matching of pred against gold under `mode`.

    Returns ((gold_index, pred_index) pairs, counts). Ties prefer larger
    overlap, then earlier gold, then earlier pred.
    """
    if mode is MatchMode.EXACT:
        # grouping by identity key is already maximum; no search needed
        by_key: dict[tuple, list[int]] = {}
        for pi, m in enumerate(pred):
            by_key.setdefault((m.etype, m.start, m.end), []).append(pi)
        pairs = []
        for gi, m in enumerate(gold):
            bucket = by_key.get((m.etype, m.start, m.end))
            if bucket:
                pairs.append((gi, bucket.pop(0)))
        counts = MatchCounts(
            tp=len(pairs), fp=len(pred) - len(pairs), fn=len(gold) - len(pairs)
        )
        return pairs, counts

    adjacency = []
    for g in gold:
        cand = [
            (-_overlap(g, p), pi)
            for pi, p in enumerate(pred)
            if _compatible(g, p, mode)
        ]
        cand.sort()
        adjacency.append([pi for _, pi in cand])
    pairs = _maximum_matching(gold, pred, adjacency)
    counts = MatchCounts(
        tp=len(pairs), fp=len(pred) - len(pairs), fn=len(gold) - len(pairs)
    )
    return pairs, counts


def match_relations(
    gold_set: AnnotationSet, pred_set: AnnotationSet, mode: MatchMode
) -> MatchCounts:
    """Relation counts: a gold relation matches a pred relation iff the
    labels are equal and both endpoint mentions match under `mode`."""
    gold_mentions = list(gold_set.mentions)
    pred_mentions = list(pred_set.mentions)
    pairs, _ = match_mentions(gold_mentions, pred_mentions, mode)
    mapped = {
        gold_mentions[gi].id: pred_mentions[pi].id for gi, pi in pairs
    }
    pred_triples = {(r.main, r.modifier, r.label) for r in pred_set.relations}
    tp = 0
    for r in gold_set.relations:
        main = mapped.get(r.main)
        modifier = mapped.get(r.modifier)
        if main and modifier and (main, modifier, r.label) in pred_triples:
            tp += 1
    return MatchCounts(
        tp=tp, fp=len(pred_set.relations) - tp, fn=len(gold_set.relations) - tp
    )


@dataclass(frozen=True)
class TypeMetrics:
    counts: MatchCounts
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricReport:
    task: str  # "ner" | "re"
    mode: MatchMode
    counts: MatchCounts
    precision: float
    recall: float
    f1: float
    per_type: dict[str, TypeMetrics]


class DocIdMismatchError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


def _aligned(
    gold: list[AnnotationSet], pred: list[AnnotationSet]
) -> list[tuple[AnnotationSet, AnnotationSet]]:
    gold_sorted = sorted(gold, key=lambda s: s.doc_id)
    pred_sorted = sorted(pred, key=lambda s: s.doc_id)
    if [g.doc_id for g in gold_sorted] != [p.doc_id for p in pred_sorted]:
        raise DocIdMismatchError("gold and pred corpora cover different doc_ids")
    return list(zip(gold_sorted, pred_sorted))


def _mains(s: AnnotationSet) -> list[EntityMention]:
    return [m for m in s.mentions if m.is_main]


def _doc_counts(
    g: AnnotationSet, p: AnnotationSet, task: str, mode: MatchMode
) -> MatchCounts:
    if task == "ner":
        _, counts = match_mentions(_mains(g), _mains(p), mode)
        return counts
    return match_relations(g, p, mode)


def _relation_type_key(s: AnnotationSet, relation) -> str:
    main = s.mention_by_id(relation.main)
    main_name = main.etype.value if main else "?"
    return f"{main_name}/{relation.label.value}"


def score_corpus(
    gold: list[AnnotationSet],
    pred: list[AnnotationSet],
    task: str,
    mode: MatchMode,
) -> MetricReport:
    """Micro-averaged corpus scores with a per-type breakdown.

    task "ner" scores main-entity mentions; "re" scores relations, keyed
    per (main type)/(label) in the breakdown.
    """
    if task not in {"ner", "re"}:
        raise ValueError(f"task must be 'ner' or 're', got {task!r}")
    total = MatchCounts()
    per_type_counts: dict[str, MatchCounts] = {}

    for g, p in _aligned(gold, pred):
        if task == "ner":
            gold_mains, pred_mains = _mains(g), _mains(p)
            pairs, counts = match_mentions(gold_mains, pred_mains, mode)
            total = total + counts
            matched_g = {gi for gi, _ in pairs}
            matched_p = {pi for _, pi in pairs}
            for gi, m in enumerate(gold_mains):
                key = m.etype.value
                c = per_type_counts.get(key, MatchCounts())
                if gi in matched_g:
                    c = c + MatchCounts(tp=1)
                else:
                    c = c + MatchCounts(fn=1)
                per_type_counts[key] = c
            for pi, m in enumerate(pred_mains):
                if pi not in matched_p:
                    key = m.etype.value
                    per_type_counts[key] = per_type_counts.get(
                        key, MatchCounts()
                    ) + MatchCounts(fp=1)
        else:
            counts = match_relations(g, p, mode)
            total = total + counts
            gold_mentions = list(g.mentions)
            pred_mentions = list(p.mentions)
            pairs, _ = match_mentions(gold_mentions, pred_mentions, mode)
            mapped = {
                gold_mentions[gi].id: pred_mentions[pi].id for gi, pi in pairs
            }
            pred_triples = {(r.main, r.modifier, r.label) for r in p.relations}
            matched_pred_triples = set()
            for r in g.relations:
                key = _relation_type_key(g, r)
                c = per_type_counts.get(key, MatchCounts())
                main, modifier = mapped.get(r.main), mapped.get(r.modifier)
                triple = (main, modifier, r.label)
                if main and modifier and triple in pred_triples:
                    c = c + MatchCounts(tp=1)
                    matched_pred_triples.add(triple)
                else:
                    c = c + MatchCounts(fn=1)
                per_type_counts[key] = c
            for r in p.relations:
                if (r.main, r.modifier, r.label) not in matched_pred_triples:
                    key = _relation_type_key(p, r)
                    per_type_counts[key] = per_type_counts.get(
                        key, MatchCounts()
                    ) + MatchCounts(fp=1)

    p_, r_, f1 = _prf(total.tp, total.fp, total.fn)
    per_type = {
        key: TypeMetrics(c, *_prf(c.tp, c.fp, c.fn))
        for key, c in sorted(per_type_counts.items())
    }
    return MetricReport(
        task=task, mode=mode, counts=total,
        precision=p_, recall=r_, f1=f1, per_type=per_type,
    )


@dataclass(frozen=True)
class SignificanceReport:
    replicates: int
    statistic: float  # rank-sum U for system A
    p_value: float  # one-sided, H1: F1_a > F1_b
    ci95: tuple[float, float]  # percentile CI of F1_a - F1_b
    seed: int
    mean_f1_a: float
    mean_f1_b: float


def _replicate_f1(counts: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """F1 per bootstrap replicate. counts: (n_docs, 3) tp/fp/fn; idx:
    (replicates, n_docs) document indices."""
    sums = counts[idx].sum(axis=1).astype(float)  # (replicates, 3)
    tp, fp, fn = sums[:, 0], sums[:, 1], sums[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        r = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return f1


def bootstrap_significance(
    gold: list[AnnotationSet],
    pred_a: list[AnnotationSet],
    pred_b: list[AnnotationSet],
    task: str,
    mode: MatchMode,
    replicates: int = 1000,
    seed: int = 0,
) -> SignificanceReport:
    """Bootstrap rank-sum comparison of two systems against shared gold.

    Documents are resampled with replacement (sample size = corpus size,
    the same index vector applied to both systems per replicate), giving
    `replicates` F1 values per system; the one-sided rank-sum test asks
    whether system A's F1 distribution is shifted above system B's. The
    CI is the 2.5/97.5 percentile interval of the replicate F1
    differences. Deterministic given `seed` and invariant to document
    order.
    """
    aligned_a = _aligned(gold, pred_a)
    aligned_b = _aligned(gold, pred_b)
    n = len(aligned_a)
    if n < 2:
        raise InsufficientDataError("need at least 2 documents to resample")

    counts_a = np.array(
        [
            [c.tp, c.fp, c.fn]
            for c in (_doc_counts(g, p, task, mode) for g, p in aligned_a)
        ]
    )
    counts_b = np.array(
        [
            [c.tp, c.fp, c.fn]
            for c in (_doc_counts(g, p, task, mode) for g, p in aligned_b)
        ]
    )

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(replicates, n))
    f1_a = _replicate_f1(counts_a, idx)
    f1_b = _replicate_f1(counts_b, idx)
    diffs = f1_a - f1_b
    ci = tuple(float(x) for x in np.percentile(diffs, [2.5, 97.5]))

    pooled = np.concatenate([f1_a, f1_b])
    if np.ptp(pooled) == 0:
        # every replicate tied across both systems: no evidence either way
        u = replicates * replicates / 2.0
        p_value = 0.5
    else:
        ties = len(np.unique(pooled)) < len(pooled)
        method = "exact" if (replicates < 30 and not ties) else "asymptotic"
        result = _scipy_stats.mannwhitneyu(
            f1_a, f1_b, alternative="greater", method=method
        )
        u = float(result.statistic)
        p_value = float(result.pvalue)

    return SignificanceReport(
        replicates=replicates,
        statistic=u,
        p_value=p_value,
        ci95=(ci[0], ci[1]),
        seed=seed,
        mean_f1_a=float(f1_a.mean()),
        mean_f1_b=float(f1_b.mean()),
    )


@dataclass(frozen=True)
class ErrorExample:
    doc_id: str
    gold: str | None
    pred: str | None


@dataclass(frozen=True)
class ErrorBreakdown:
    misses: int
    spurious: int
    boundary_errors: int
    type_errors: int
    examples: dict[str, tuple[ErrorExample, ...]]


_EXAMPLE_CAP = 10


def categorize_errors(
    gold: list[AnnotationSet], pred: list[AnnotationSet], task: str
) -> ErrorBreakdown:
    """Partition non-TP mass into boundary errors, type errors, misses,
    and spurious predictions.

    Exact matches are removed first; leftovers are paired one-to-one by
    span overlap (largest overlap first). A pair with matching type (or
    relation label) is a boundary error, one with differing type a type
    error; unpaired gold items are misses, unpaired predictions spurious.
    """
    misses = spurious = boundary = wrong_type = 0
    examples: dict[str, list[ErrorExample]] = {
        "miss": [], "spurious": [], "boundary": [], "type": [],
    }

    def add_example(kind: str, doc_id: str, g: str | None, p: str | None) -> None:
        if len(examples[kind]) < _EXAMPLE_CAP:
            examples[kind].append(ErrorExample(doc_id, g, p))

    for g_set, p_set in _aligned(gold, pred):
        if task == "ner":
            gold_items = _mains(g_set)
            pred_items = _mains(p_set)
            exact_pairs, _ = match_mentions(gold_items, pred_items, MatchMode.EXACT)
            left_g = [m for i, m in enumerate(gold_items)
                      if i not in {gi for gi, _ in exact_pairs}]
            left_p = [m for i, m in enumerate(pred_items)
                      if i not in {pi for _, pi in exact_pairs}]
            adjacency = []
            for gm in left_g:
                cand = [
                    (-_overlap(gm, pm), pi)
                    for pi, pm in enumerate(left_p)
                    if _overlap(gm, pm) > 0
                ]
                cand.sort()
                adjacency.append([pi for _, pi in cand])
            pairs = _maximum_matching(left_g, left_p, adjacency)
            paired_g = {gi for gi, _ in pairs}
            paired_p = {pi for _, pi in pairs}
            for gi, pi in pairs:
                gm, pm = left_g[gi], left_p[pi]
                if gm.etype is pm.etype:
                    boundary += 1
                    add_example("boundary", g_set.doc_id, _fmt(gm), _fmt(pm))
                else:
                    wrong_type += 1
                    add_example("type", g_set.doc_id, _fmt(gm), _fmt(pm))
            for gi, gm in enumerate(left_g):
                if gi not in paired_g:
                    misses += 1
                    add_example("miss", g_set.doc_id, _fmt(gm), None)
            for pi, pm in enumerate(left_p):
                if pi not in paired_p:
                    spurious += 1
                    add_example("spurious", g_set.doc_id, None, _fmt(pm))
        else:
            gold_rels = list(g_set.relations)
            pred_rels = list(p_set.relations)
            g_by_id = {m.id: m for m in g_set.mentions}
            p_by_id = {m.id: m for m in p_set.mentions}
            gold_mentions = list(g_set.mentions)
            pred_mentions = list(p_set.mentions)
            mpairs, _ = match_mentions(
                gold_mentions, pred_mentions, MatchMode.EXACT
            )
            mapped = {
                gold_mentions[gi].id: pred_mentions[pi].id for gi, pi in mpairs
            }
            pred_triples = {(r.main, r.modifier, r.label): i
                            for i, r in enumerate(pred_rels)}
            exact_g: set[int] = set()
            exact_p: set[int] = set()
            for i, r in enumerate(gold_rels):
                triple = (mapped.get(r.main), mapped.get(r.modifier), r.label)
                j = pred_triples.get(triple)
                if j is not None and j not in exact_p:
                    exact_g.add(i)
                    exact_p.add(j)
            left_g_rel = [r for i, r in enumerate(gold_rels) if i not in exact_g]
            left_p_rel = [r for i, r in enumerate(pred_rels) if i not in exact_p]

            def rel_overlap(gr, pr) -> int:
                gm, gd = g_by_id.get(gr.main), g_by_id.get(gr.modifier)
                pm, pd = p_by_id.get(pr.main), p_by_id.get(pr.modifier)
                if not all((gm, gd, pm, pd)):
                    return 0
                main_ov = _overlap(gm, pm)
                mod_ov = _overlap(gd, pd)
                if main_ov <= 0 or mod_ov <= 0:
                    return 0
                return main_ov + mod_ov

            adjacency = []
            for gr in left_g_rel:
                cand = [
                    (-rel_overlap(gr, pr), pi)
                    for pi, pr in enumerate(left_p_rel)
                    if rel_overlap(gr, pr) > 0
                ]
                cand.sort()
                adjacency.append([pi for _, pi in cand])
            pairs = _maximum_matching(left_g_rel, left_p_rel, adjacency)
            paired_g = {gi for gi, _ in pairs}
            paired_p = {pi for _, pi in pairs}
            for gi, pi in pairs:
                gr, pr = left_g_rel[gi], left_p_rel[pi]
                if gr.label is pr.label:
                    boundary += 1
                    add_example(
                        "boundary", g_set.doc_id,
                        _fmt_rel(g_set, gr), _fmt_rel(p_set, pr),
                    )
                else:
                    wrong_type += 1
                    add_example(
                        "type", g_set.doc_id,
                        _fmt_rel(g_set, gr), _fmt_rel(p_set, pr),
                    )
            for gi, gr in enumerate(left_g_rel):
                if gi not in paired_g:
                    misses += 1
                    add_example("miss", g_set.doc_id, _fmt_rel(g_set, gr), None)
            for pi, pr in enumerate(left_p_rel):
                if pi not in paired_p:
                    spurious += 1
                    add_example("spurious", g_set.doc_id, None, _fmt_rel(p_set, pr))

    return ErrorBreakdown(
        misses=misses,
        spurious=spurious,
        boundary_errors=boundary,
        type_errors=wrong_type,
        examples={k: tuple(v) for k, v in examples.items()},
    )


def _fmt(m: EntityMention) -> str:
    return f"{m.etype.value} [{m.start}, {m.end}) {m.surface!r}"


def _fmt_rel(s: AnnotationSet, r) -> str:
    main = s.mention_by_id(r.main)
    modifier = s.mention_by_id(r.modifier)
    return (
        f"{r.label.value}({_fmt(main) if main else r.main}, "
        f"{_fmt(modifier) if modifier else r.modifier})"
    )


@dataclass(frozen=True)
class StatsTable:
    documents: int
    main_counts: dict[str, int]
    relation_counts: dict[str, int]  # "problem/negation" keys, table order


def corpus_stats(sets: list[AnnotationSet]) -> StatsTable:
    """Document, main-mention, and per-pair relation counts."""
    main_counts = {t.value: 0 for t in MainEntityType}
    relation_counts: dict[str, int] = {}
    for t in MainEntityType:
        for mod in REPORT_ORDER[t]:
            relation_counts[f"{t.value}/{mod.value}"] = 0
    for s in sets:
        by_id = {m.id: m for m in s.mentions}
        for m in s.mentions:
            if m.is_main:
                main_counts[m.etype.value] += 1
        for r in s.relations:
            main = by_id.get(r.main)
            if main is None or not main.is_main:
                continue
            key = f"{main.etype.value}/{r.label.value}"
            if key in relation_counts:
                relation_counts[key] += 1
    return StatsTable(
        documents=len(sets),
        main_counts=main_counts,
        relation_counts=relation_counts,
    )


def report_to_dict(report: MetricReport) -> dict:
    return {
        "task": report.task,
        "mode": report.mode.value,
        "counts": {"tp": report.counts.tp, "fp": report.counts.fp, "fn": report.counts.fn},
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "per_type": {
            key: {
                "tp": t.counts.tp, "fp": t.counts.fp, "fn": t.counts.fn,
                "precision": t.precision, "recall": t.recall, "f1": t.f1,
            }
            for key, t in report.per_type.items()
        },
    }


def significance_to_dict(report: SignificanceReport) -> dict:
    return {
        "replicates": report.replicates,
        "statistic": report.statistic,
        "p_value": report.p_value,
        "ci95": list(report.ci95),
        "seed": report.seed,
        "mean_f1_a": report.mean_f1_a,
        "mean_f1_b": report.mean_f1_b,
        "resample_unit": "document",
    }


def report_to_text(reports: list[MetricReport]) -> str:
    """Aligned table: one row per (task, mode), P/R/F1 to three decimals."""
    lines = [f"{'task':<6}{'mode':<10}{'P':>8}{'R':>8}{'F1':>8}{'TP':>8}{'FP':>8}{'FN':>8}"]
    for rep in reports:
        lines.append(
            f"{rep.task:<6}{rep.mode.value:<10}"
            f"{rep.precision:>8.3f}{rep.recall:>8.3f}{rep.f1:>8.3f}"
            f"{rep.counts.tp:>8}{rep.counts.fp:>8}{rep.counts.fn:>8}"
        )
    return "\n".join(lines)


def stats_to_text(table: StatsTable) -> str:
    lines = [f"{'Documents':<28}{table.documents:>8}"]
    for t in MainEntityType:
        lines.append(f"{t.value:<28}{table.main_counts[t.value]:>8}")
        for mod in REPORT_ORDER[t]:
            key = f"{t.value}/{mod.value}"
            lines.append(f"  {mod.value:<26}{table.relation_counts[key]:>8}")
    return "\n".join(lines)


def dump_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
