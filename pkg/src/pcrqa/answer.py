"""Map predicted mask tokens to final labels.

Matching runs in three tiers: exact word-sequence match, partial word
match, then minimum-edit-distance correction of tokens that hit no label
word at all.  Ranking is pinned to (tier, combined score desc, distance
asc, label id) so outputs are totally ordered for fixed inputs.
"""

from dataclasses import dataclass
from typing import Union

from .dataset import Necessity, TagVocabulary
from .kernels import edit_distance
from .model import MaskPrediction
from .tokens import SPECIAL_TOKENS

EXACT = "exact"
PARTIAL_WORDS = "partial_words"
EDIT_DISTANCE = "edit_distance"

_TIER_ORDER = {EXACT: 0, PARTIAL_WORDS: 1, EDIT_DISTANCE: 2}

DEFAULT_VERBALIZER = {"yes": Necessity.NECESSARY, "no": Necessity.UNNECESSARY}


@dataclass(frozen=True)
class LabelMapping:
    label: Union[str, Necessity]
    method: str
    distance: int
    source_tokens: tuple[str, ...]
    score: float


def _nearest(token: str, words: list[str]) -> tuple[str, int]:
    """Closest vocabulary word by (distance, lexicographic word)."""
    best_word, best_dist = None, None
    for w in words:
        d = edit_distance(token, w)
        if best_dist is None or d < best_dist or (d == best_dist and w < best_word):
            best_word, best_dist = w, d
    return best_word, best_dist


def _match_label(
    words: list[str],
    pools: list[dict[str, tuple[float, int]]],
) -> Union[tuple[str, tuple[str, ...], float, int], None]:
    """Try exact then partial matching against per-mask candidate pools.

    Each pool maps candidate word -> (probability, correction distance).
    Exact means the label's word sequence fills a contiguous mask run; the
    best run is the one with least correction, then highest probability.
    """
    n = len(pools)
    m = len(words)
    best = None  # (dist, -score, start)
    for start in range(0, n - m + 1):
        if not all(words[i] in pools[start + i] for i in range(m)):
            continue
        score = 1.0
        dist = 0
        for i in range(m):
            p, d = pools[start + i][words[i]]
            score *= p
            dist += d
        if best is None or (dist, -score) < (best[0], -best[1]):
            best = (dist, score, start)
    if best is not None:
        dist, score, _ = best
        return EXACT if dist == 0 else EDIT_DISTANCE, tuple(words), score, dist
    # partial: claim each label word at most once, scanning masks in order
    remaining = set(words)
    score = 1.0
    dist = 0
    toks = []
    for pool in pools:
        hit = None
        for word in pool:
            if word in remaining:
                p, d = pool[word]
                if hit is None or p > hit[1]:
                    hit = (word, p, d)
        if hit is not None:
            remaining.discard(hit[0])
            toks.append(hit[0])
            score *= hit[1]
            dist += hit[2]
    if not toks:
        return None
    return (PARTIAL_WORDS if dist == 0 else EDIT_DISTANCE), tuple(toks), score, dist


def map_tag_predictions(
    preds: list[MaskPrediction], vocab: TagVocabulary, k: int
) -> list[LabelMapping]:
    """Recombine per-mask candidates into the top-k distinct labels."""
    if len(vocab) == 0:
        raise ValueError("empty tag vocabulary")
    if k < 1:
        raise ValueError("k must be >= 1")
    all_words = vocab.all_words()
    raw_pools: list[dict[str, tuple[float, int]]] = []
    corrected_pools: list[dict[str, tuple[float, int]]] = []
    for pred in preds:
        raw: dict[str, tuple[float, int]] = {}
        corrected: dict[str, tuple[float, int]] = {}
        for token, prob in pred.candidates:
            if token in SPECIAL_TOKENS:
                continue  # sentinels carry no label content
            if token not in raw or prob > raw[token][0]:
                raw[token] = (prob, 0)
            if token in all_words:
                word, dist = token, 0
            else:
                word, dist = _nearest(token, all_words)
            prev = corrected.get(word)
            if prev is None or (dist, -prob) < (prev[1], -prev[0]):
                corrected[word] = (prob, dist)
        raw_pools.append(raw)
        corrected_pools.append(corrected)

    mappings: dict[str, LabelMapping] = {}
    for label in sorted(vocab.entries):
        words = vocab.words(label)
        hit = _match_label(words, raw_pools)
        if hit is None:
            # only now let corrected tokens participate; any match here has
            # distance >= 1, otherwise the raw pass would have found it
            hit = _match_label(words, corrected_pools)
        if hit is None:
            continue
        method, toks, score, dist = hit
        mappings[label] = LabelMapping(
            label=label, method=method, distance=dist, source_tokens=toks, score=score
        )
    ranked = sorted(
        mappings.values(),
        key=lambda m: (_TIER_ORDER[m.method], -m.score, m.distance, m.label),
    )
    return ranked[:k]


def decide_necessity(
    pred: MaskPrediction,
    verbalizer: dict[str, Necessity] = None,
) -> LabelMapping:
    """Highest-ranked verbalizer token wins; otherwise nearest by edit distance."""
    verbalizer = DEFAULT_VERBALIZER if verbalizer is None else verbalizer
    if not verbalizer:
        raise ValueError("empty verbalizer")
    if not pred.candidates:
        raise ValueError("empty prediction list")
    for token, score in pred.candidates:
        if token in verbalizer:
            return LabelMapping(
                label=verbalizer[token],
                method=EXACT,
                distance=0,
                source_tokens=(token,),
                score=score,
            )
    top_token, top_score = pred.candidates[0]
    word, dist = _nearest(top_token, sorted(verbalizer))
    return LabelMapping(
        label=verbalizer[word],
        method=EDIT_DISTANCE,
        distance=dist,
        source_tokens=(top_token,),
        score=top_score,
    )


def prediction_to_record(
    request_id: int, tags: list[LabelMapping], necessity: LabelMapping
) -> dict:
    return {
        "id": request_id,
        "predicted_tags": [
            {
                "label": m.label,
                "method": m.method,
                "distance": m.distance,
                "score": m.score,
            }
            for m in tags
        ],
        "necessity": necessity.label.value,
        "necessity_method": necessity.method,
    }
