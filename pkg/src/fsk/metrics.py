"""Evaluation metrics for the four FAS tasks.

Classification: ACC, and HTER with positive = spoof. FAR is the share of
attacks accepted as bonafide, fn / (fn + tp). FRR is the share of bonafide
faces rejected as attacks, fp / (fp + tn).

Text: sentence BLEU-1..4, ROUGE-L (beta = 1.2) and METEOR-exact (the
exact-match stage of METEOR, no stemming or synonyms).

Localization: IoU and AP@tau, the share of samples whose predicted box
reaches IoU >= tau against the single gold box. If both boxes are absent,
the sample counts as correct.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .imagecore import BBox
from .text import tokenize

__all__ = [
    "ConfusionCounts",
    "TextPair",
    "UndefinedRateError",
    "accuracy",
    "ap_at",
    "bleu_n",
    "far",
    "frr",
    "hter",
    "iou",
    "lcs_length",
    "meteor_alignment",
    "meteor_exact",
    "rouge_l",
]

ROUGE_BETA = 1.2
METEOR_ALPHA_WEIGHT = 9  # Fmean = 10PR / (R + 9P)
METEOR_PENALTY_GAMMA = 0.5
METEOR_PENALTY_BETA = 3
# memo entries before chunk minimisation falls back to greedy tiling
METEOR_SEARCH_BUDGET = 200_000


class UndefinedRateError(ValueError):
    pass


# -- classification ----------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @classmethod
    def from_labels(cls, gold_spoof: Sequence[bool], pred_spoof: Sequence[bool | None]):
        """Tally binary decisions; a ``None`` prediction counts as wrong."""
        tp = tn = fp = fn = 0
        for g, p in zip(gold_spoof, pred_spoof, strict=True):
            if g:
                if p is True:
                    tp += 1
                else:
                    fn += 1
            else:
                if p is False:
                    tn += 1
                else:
                    fp += 1
        return cls(tp=tp, tn=tn, fp=fp, fn=fn)


def accuracy(c: ConfusionCounts) -> float:
    if c.total < 1:
        raise UndefinedRateError("accuracy of an empty confusion table")
    return float(Fraction(100 * (c.tp + c.tn), c.total))


def _far(c: ConfusionCounts) -> Fraction:
    if c.fn + c.tp < 1:
        raise UndefinedRateError("FAR undefined: no attack samples")
    return Fraction(c.fn, c.fn + c.tp)


def _frr(c: ConfusionCounts) -> Fraction:
    if c.fp + c.tn < 1:
        raise UndefinedRateError("FRR undefined: no bonafide samples")
    return Fraction(c.fp, c.fp + c.tn)


def far(c: ConfusionCounts) -> float:
    """Attacks accepted as bonafide, in percent."""
    return float(100 * _far(c))


def frr(c: ConfusionCounts) -> float:
    """Bonafide faces rejected as attacks, in percent."""
    return float(100 * _frr(c))


def hter(c: ConfusionCounts) -> float:
    return float(50 * (_far(c) + _frr(c)))


# -- text --------------------------------------------------------------------


@dataclass(frozen=True)
class TextPair:
    hypothesis: tuple[str, ...]
    reference: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))
        object.__setattr__(self, "reference", tuple(self.reference))
        if any(not t for t in self.hypothesis + self.reference):
            raise ValueError("tokens must be non-empty strings")

    @classmethod
    def from_text(cls, hypothesis: str, reference: str) -> "TextPair":
        return cls(tokenize(hypothesis), tokenize(reference))


def _as_pair(pair_or_hyp, reference=None) -> TextPair:
    if isinstance(pair_or_hyp, TextPair):
        pair = pair_or_hyp
    else:
        hyp, ref = pair_or_hyp, reference
        if isinstance(hyp, str):
            hyp = tokenize(hyp)
        if isinstance(ref, str):
            ref = tokenize(ref)
        pair = TextPair(hyp, ref)
    if not pair.hypothesis or not pair.reference:
        raise ValueError("hypothesis and reference must be non-empty")
    return pair


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(pair_or_hyp, reference=None, n: int = 4) -> float:
    """Sentence BLEU-n: geometric mean of clipped precisions times brevity penalty.

    Orders longer than the hypothesis are left out of the mean; any zero
    precision among the remaining orders gives 0.
    """
    if not 1 <= n <= 4:
        raise ValueError("BLEU order must be in 1..4")
    pair = _as_pair(pair_or_hyp, reference)
    hyp, ref = pair.hypothesis, pair.reference
    log_sum = 0.0
    orders = min(n, len(hyp))
    for order in range(1, orders + 1):
        h_counts = _ngram_counts(hyp, order)
        r_counts = _ngram_counts(ref, order)
        clipped = sum(min(c, r_counts[g]) for g, c in h_counts.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / sum(h_counts.values()))
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum / orders)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(pair_or_hyp, reference=None, beta: float = ROUGE_BETA) -> float:
    pair = _as_pair(pair_or_hyp, reference)
    lcs = lcs_length(pair.hypothesis, pair.reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(pair.hypothesis)
    r = lcs / len(pair.reference)
    b2 = beta * beta
    return (1 + b2) * p * r / (r + b2 * p)


def _count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in sorted(alignment):
        if prev is None or not (i == prev[0] + 1 and j == prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return chunks


def _greedy_tiling(hyp, ref) -> list[tuple[int, int]]:
    """Repeatedly align the longest common run of still-unaligned tokens."""
    used_h = [False] * len(hyp)
    used_r = [False] * len(ref)
    alignment = []
    while True:
        best = (0, 0, 0)
        for i in range(len(hyp)):
            for j in range(len(ref)):
                k = 0
                while (
                    i + k < len(hyp)
                    and j + k < len(ref)
                    and not used_h[i + k]
                    and not used_r[j + k]
                    and hyp[i + k] == ref[j + k]
                ):
                    k += 1
                if k > best[0]:
                    best = (k, i, j)
        k, i, j = best
        if k == 0:
            return alignment
        for d in range(k):
            used_h[i + d] = used_r[j + d] = True
            alignment.append((i + d, j + d))


def meteor_alignment(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, int]:
    """Return ``(matches, chunks)`` of a maximum exact-match alignment.

    Among alignments with the most matches, chunks are minimised by
    memoised search. Past ``METEOR_SEARCH_BUDGET`` states the search gives up
    and greedy longest-run tiling is used instead.
    """
    hc, rc = Counter(hyp), Counter(ref)
    matches = sum(min(c, rc[w]) for w, c in hc.items())
    if matches == 0:
        return 0, 0
    # unmatched hyp occurrences allowed per word
    slack = {w: c - min(c, rc[w]) for w, c in hc.items()}
    positions = {}
    for j, w in enumerate(ref):
        positions.setdefault(w, []).append(j)
    seen_before = []
    running = Counter()
    for w in hyp:
        seen_before.append(running[w])
        running[w] += 1

    memo: dict = {}

    class _Budget(Exception):
        pass

    def best(i: int, prev: int, used: int) -> float:
        if i == len(hyp):
            return 0
        key = (i, prev, used)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= METEOR_SEARCH_BUDGET:
            raise _Budget
        w = hyp[i]
        cands = positions.get(w, ())
        result = math.inf
        matched_so_far = sum(1 for j in cands if used >> j & 1)
        if seen_before[i] - matched_so_far < slack[w]:
            result = best(i + 1, -1, used)
        for j in cands:
            if used >> j & 1:
                continue
            cost = 0 if (prev >= 0 and j == prev + 1) else 1
            result = min(result, cost + best(i + 1, j, used | (1 << j)))
        memo[key] = result
        return result

    try:
        chunks = best(0, -1, 0)
    except (_Budget, RecursionError):
        chunks = _count_chunks(_greedy_tiling(hyp, ref))
    return matches, int(chunks)


def meteor_exact(pair_or_hyp, reference=None) -> float:
    pair = _as_pair(pair_or_hyp, reference)
    m, chunks = meteor_alignment(pair.hypothesis, pair.reference)
    if m == 0:
        return 0.0
    p = m / len(pair.hypothesis)
    r = m / len(pair.reference)
    fmean = (METEOR_ALPHA_WEIGHT + 1) * p * r / (r + METEOR_ALPHA_WEIGHT * p)
    penalty = METEOR_PENALTY_GAMMA * (chunks / m) ** METEOR_PENALTY_BETA
    return fmean * (1.0 - penalty)


# -- localization --------------------------------------------------------------


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0) * max(ih, 0)
    return inter / (a.area + b.area - inter)


def _localization_correct(pred: BBox | None, gold: BBox | None, tau: float) -> bool:
    if gold is None or pred is None:
        return gold is None and pred is None
    return iou(pred, gold) >= tau


def ap_at(samples, tau: float) -> float:
    """Percentage of ``(predicted, gold)`` pairs localized at IoU >= ``tau``.

    Samples may be 2-tuples or dicts with ``predicted`` and ``gold`` keys.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    samples = list(samples)
    if not samples:
        raise ValueError("ap_at needs at least one sample")
    correct = 0
    for s in samples:
        pred, gold = (s["predicted"], s["gold"]) if isinstance(s, dict) else s
        correct += _localization_correct(pred, gold, tau)
    return float(Fraction(100 * correct, len(samples)))
