"""Offset reconstruction: map spans in mutated model output back to the source.

Generation may casefold, drop, or rewrite pieces of the sentence it was
asked to tag. Alignment runs on a normalized projection (case folded,
whitespace removed) of both strings, with offset maps back to the
originals, so purely cosmetic differences cost nothing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_WORD_CHAR = re.compile(r"\w")

MATCH, DELETE, INSERT, SUBST = 0, 1, 2, 3  # backtrace ops, preference order


class EmptyAfterNormalizationError(ValueError):
    pass


def normalize(s: str) -> tuple[str, list[int]]:
    """Casefolded, whitespace-free projection plus an offset map.

    Returns (norm, index_map) where index_map[i] is the original offset of
    norm[i]. A casefold that expands one char to several maps every
    expansion char to the same original offset.
    """
    chars: list[str] = []
    index_map: list[int] = []
    for i, ch in enumerate(s):
        if ch.isspace():
            continue
        for folded in ch.casefold():
            chars.append(folded)
            index_map.append(i)
    return "".join(chars), index_map


@dataclass(frozen=True)
class Alignment:
    """Minimum-cost character correspondence between two strings.

    `pairs` holds (source_offset, hypothesis_offset) anchors for exactly
    matched characters, in original coordinates, strictly increasing in
    both. `cost` is the Levenshtein distance of the normalized projections.
    """

    pairs: tuple[tuple[int, int], ...]
    cost: int


def _banded_distance(
    a: str, b: str, half_width: int
) -> tuple[int, list[tuple[int, int]]]:
    """Levenshtein DP restricted to |j - i| <= half_width.

    Returns (cost, matched (i, j) index pairs into a and b). Cells outside
    the band are treated as unreachable. Tie order: match, delete, insert,
    substitute.
    """
    n, m = len(a), len(b)
    big = n + m + 1
    width = 2 * half_width + 1

    # cost[i][k] with k = j - i + half_width
    cost = [[big] * width for _ in range(n + 1)]
    op = [[SUBST] * width for _ in range(n + 1)]

    for i in range(n + 1):
        lo = max(0, i - half_width)
        hi = min(m, i + half_width)
        for j in range(lo, hi + 1):
            k = j - i + half_width
            if i == 0 and j == 0:
                cost[i][k] = 0
                continue
            best, chosen = big, SUBST
            if i > 0 and j > 0 and a[i - 1] == b[j - 1]:
                c = cost[i - 1][k]  # j-1 - (i-1) = j - i
                if c < best:
                    best, chosen = c, MATCH
            if i > 0 and k + 1 < width:
                c = cost[i - 1][k + 1] + 1  # delete a[i-1]
                if c < best:
                    best, chosen = c, DELETE
            if k - 1 >= 0:
                c = cost[i][k - 1] + 1  # insert b[j-1]
                if c < best:
                    best, chosen = c, INSERT
            if i > 0 and j > 0 and a[i - 1] != b[j - 1]:
                c = cost[i - 1][k] + 1
                if c < best:
                    best, chosen = c, SUBST
            cost[i][k] = best
            op[i][k] = chosen

    end_k = m - n + half_width
    total = cost[n][end_k] if 0 <= end_k < width else big

    matches: list[tuple[int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        k = j - i + half_width
        o = op[i][k]
        if o == MATCH:
            i, j = i - 1, j - 1
            matches.append((i, j))
        elif o == DELETE:
            i -= 1
        elif o == INSERT:
            j -= 1
        else:
            i, j = i - 1, j - 1
    matches.reverse()
    return total, matches


def align_texts(source: str, hypothesis: str) -> Alignment:
    """Minimum-cost alignment of `hypothesis` against `source`.

    Runs a banded DP with half-width max(64, |length difference| + 16);
    the band is provably sufficient whenever the banded cost comes out
    <= the half-width, and the full DP is used otherwise.
    """
    a, amap = normalize(source)
    b, bmap = normalize(hypothesis)
    if not a or not b:
        raise EmptyAfterNormalizationError(
            "source" if not a else "hypothesis"
        )

    half_width = max(64, abs(len(a) - len(b)) + 16)
    total, matches = _banded_distance(a, b, half_width)
    if total > half_width:
        # optimal path may leave the band; redo unrestricted
        total, matches = _banded_distance(a, b, max(len(a), len(b)))

    pairs: list[tuple[int, int]] = []
    for i, j in matches:
        p = (amap[i], bmap[j])
        if pairs and (p[0] <= pairs[-1][0] or p[1] <= pairs[-1][1]):
            continue  # casefold expansion can repeat an original offset
        pairs.append(p)
    return Alignment(pairs=tuple(pairs), cost=total)


@dataclass(frozen=True)
class AnchorConfig:
    confidence_threshold: float = 0.7
    max_source_gap: int = 16  # non-whitespace source chars skipped inside a span
    word_snap: bool = True


@dataclass(frozen=True)
class AnchoredSpan:
    class_name: str
    source_start: int
    source_end: int
    confidence: float


@dataclass(frozen=True)
class DroppedSpan:
    class_name: str
    hyp_start: int
    hyp_end: int
    reason: str  # NoAnchor | LowConfidence | Discontiguous | Overlap
    confidence: float


@dataclass(frozen=True)
class AnchorOutcome:
    kept: tuple[AnchoredSpan, ...]
    dropped: tuple[DroppedSpan, ...]


def anchor_spans(
    source: str,
    decoded: tuple,
    config: AnchorConfig | None = None,
) -> AnchorOutcome:
    """Project decoded spans back onto `source` offsets.

    `decoded` is spanmark.decode output (the plain text and span list; a
    trailing diagnostics element is ignored). A span survives when at
    least `confidence_threshold` of its characters anchor to the source
    and the anchored region skips no more than `max_source_gap` source
    characters internally; kept spans are snapped outward to whole-word
    boundaries and clamped so they never overlap each other.
    """
    cfg = config or AnchorConfig()
    plain, spans = decoded[0], decoded[1]
    if not spans:
        return AnchorOutcome(kept=(), dropped=())

    def drop_all(reason: str) -> AnchorOutcome:
        return AnchorOutcome(
            kept=(),
            dropped=tuple(
                DroppedSpan(c, s, e, reason, 0.0) for c, s, e in spans
            ),
        )

    try:
        alignment = align_texts(source, plain)
    except EmptyAfterNormalizationError:
        return drop_all("NoAnchor")

    _, hyp_map = normalize(plain)
    src_norm, src_map = normalize(source)
    # original source offset -> normalized source index (first norm char at it)
    src_norm_at: dict[int, int] = {}
    for norm_i, orig in enumerate(src_map):
        src_norm_at.setdefault(orig, norm_i)
    # hypothesis original offset -> anchored source original offset
    anchor_of: dict[int, int] = {hyp: src for src, hyp in alignment.pairs}

    kept: list[AnchoredSpan] = []
    dropped: list[DroppedSpan] = []
    prev_hi = 0
    for class_name, start, end in spans:
        hyp_positions = [p for p in hyp_map if start <= p < end]
        total = len(set(hyp_positions))
        anchored = sorted(
            {anchor_of[p] for p in hyp_positions if p in anchor_of}
        )
        if total == 0 or not anchored:
            dropped.append(DroppedSpan(class_name, start, end, "NoAnchor", 0.0))
            continue
        confidence = len(anchored) / total
        if confidence < cfg.confidence_threshold:
            dropped.append(
                DroppedSpan(class_name, start, end, "LowConfidence", confidence)
            )
            continue
        norm_positions = [src_norm_at[p] for p in anchored]
        gaps = [
            later - earlier - 1
            for earlier, later in zip(norm_positions, norm_positions[1:])
        ]
        if any(g > cfg.max_source_gap for g in gaps):
            dropped.append(
                DroppedSpan(class_name, start, end, "Discontiguous", confidence)
            )
            continue
        lo, hi = anchored[0], anchored[-1] + 1
        if cfg.word_snap:
            while lo > 0 and _is_word(source[lo - 1]) and _is_word(source[lo]):
                lo -= 1
            while hi < len(source) and _is_word(source[hi]) and _is_word(source[hi - 1]):
                hi += 1
        lo = max(lo, prev_hi)
        if lo >= hi:
            dropped.append(
                DroppedSpan(class_name, start, end, "Overlap", confidence)
            )
            continue
        kept.append(AnchoredSpan(class_name, lo, hi, confidence))
        prev_hi = hi
    return AnchorOutcome(kept=tuple(kept), dropped=tuple(dropped))


def _is_word(ch: str) -> bool:
    return bool(_WORD_CHAR.match(ch))
