"""Labeled corpus construction: necessity labels, tag filtering, fold splits.

A review request's necessity label is derived from its community vote score;
tags below a corpus-frequency threshold are dropped, and requests left
tagless disappear with them.  Fold splitting is seeded and reproducible.
"""

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

DEFAULT_NECESSITY_THRESHOLD = 4
DEFAULT_RARE_TAG_THRESHOLD = 50
DEFAULT_FOLDS = 10


class Necessity(str, Enum):
    NECESSARY = "necessary"
    UNNECESSARY = "unnecessary"


class TagNormalizeError(ValueError):
    def __init__(self, surface: str):
        super().__init__(f"tag {surface!r} normalizes to an empty word sequence")
        self.surface = surface


@dataclass(frozen=True)
class ReviewRequest:
    id: int
    title: str
    text: str
    code_snippets: tuple[str, ...]
    tags: tuple[str, ...]
    score: int
    necessity: Necessity


@dataclass
class TagVocabulary:
    """Surviving tags keyed by lowercased surface, with word decompositions."""

    entries: dict[str, dict] = field(default_factory=dict)

    def __contains__(self, tag_id: str) -> bool:
        return tag_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def words(self, tag_id: str) -> list[str]:
        return list(self.entries[tag_id]["words"])

    def all_words(self) -> list[str]:
        """Distinct words across all entries, sorted."""
        seen = set()
        for entry in self.entries.values():
            seen.update(entry["words"])
        return sorted(seen)

    def max_words(self) -> int:
        """Longest word decomposition; the corpus-derived tag mask count."""
        if not self.entries:
            return 0
        return max(len(e["words"]) for e in self.entries.values())

    def to_json(self) -> str:
        return json.dumps(self.entries, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TagVocabulary":
        return cls(entries=json.loads(text))


@dataclass(frozen=True)
class CorpusStats:
    n_train: int
    n_val: int
    n_test: int
    n_labels_total: int
    n_labels_train: int


def label_necessity(score: int, threshold: int = DEFAULT_NECESSITY_THRESHOLD) -> Necessity:
    """Necessary iff the vote score reaches the threshold."""
    if threshold < 0:
        raise ValueError("necessity threshold must be >= 0")
    return Necessity.NECESSARY if score >= threshold else Necessity.UNNECESSARY


_WORD_RUN_RE = re.compile(r"[a-z]+|[0-9]+")


def normalize_tag(surface: str) -> list[str]:
    """Decompose a tag surface into lowercase words.

    Any non-alphanumeric character separates words (covers hyphen, dot,
    plus) and letter/digit boundaries split within a fragment, so
    "python3.x" becomes ["python", "3", "x"].
    """
    if not surface:
        raise TagNormalizeError(surface)
    words = _WORD_RUN_RE.findall(surface.lower())
    if not words:
        raise TagNormalizeError(surface)
    return words


def build_requests(
    records: list[dict], necessity_threshold: int = DEFAULT_NECESSITY_THRESHOLD
) -> list[ReviewRequest]:
    """Turn ingest records into labeled requests (tag filtering comes later)."""
    requests = []
    for rec in records:
        requests.append(
            ReviewRequest(
                id=rec["id"],
                title=rec.get("title", ""),
                text=rec.get("text", ""),
                code_snippets=tuple(rec.get("code_snippets", ())),
                tags=tuple(rec.get("tags", ())),
                score=rec["score"],
                necessity=label_necessity(rec["score"], necessity_threshold),
            )
        )
    return requests


def filter_rare_tags(
    corpus: list[ReviewRequest],
    theta: int = DEFAULT_RARE_TAG_THRESHOLD,
    iterate: bool = False,
) -> tuple[list[ReviewRequest], TagVocabulary]:
    """Drop tags with corpus frequency < theta, then requests left tagless.

    Frequencies are counted once on the input corpus; a tag at exactly theta
    survives.  ``iterate`` recounts on the filtered corpus and repeats until
    stable (a single pass is already a fixed point for ordinary corpora,
    because dropped requests carry no surviving tags).
    """
    if theta < 1:
        raise ValueError("rare-tag threshold must be >= 1")
    current = list(corpus)
    while True:
        counts: dict[str, int] = {}
        for req in current:
            for tag in req.tags:
                counts[tag] = counts.get(tag, 0) + 1
        surviving = {tag for tag, n in counts.items() if n >= theta}
        filtered = []
        changed = False
        for req in current:
            kept = tuple(t for t in req.tags if t in surviving)
            if not kept:
                changed = True
                continue
            if kept != req.tags:
                changed = True
                req = ReviewRequest(
                    id=req.id,
                    title=req.title,
                    text=req.text,
                    code_snippets=req.code_snippets,
                    tags=kept,
                    score=req.score,
                    necessity=req.necessity,
                )
            filtered.append(req)
        current = filtered
        if not (iterate and changed):
            break

    vocab = TagVocabulary()
    final_counts: dict[str, int] = {}
    for req in current:
        for tag in req.tags:
            final_counts[tag] = final_counts.get(tag, 0) + 1
    for tag in sorted(final_counts):
        vocab.entries[tag] = {
            "surface": tag,
            "words": normalize_tag(tag),
            "frequency": final_counts[tag],
        }
    return current, vocab


def split_folds(
    corpus_size: int, folds: int = DEFAULT_FOLDS, seed: int = 0
) -> list[tuple[list[int], list[int], list[int]]]:
    """Shuffle once by seed, cut into ``folds`` test chunks, remainder 8:1.

    Returns (train, validation, test) index lists per fold, each sorted.
    Every index lands in exactly one test set across folds.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if corpus_size < folds:
        raise ValueError(f"corpus size {corpus_size} smaller than folds {folds}")
    perm = np.random.default_rng(seed).permutation(corpus_size)
    chunks = np.array_split(perm, folds)
    splits = []
    for f in range(folds):
        test = chunks[f]
        remainder = np.concatenate([chunks[g] for g in range(folds) if g != f])
        n_val = len(remainder) // 9
        train = remainder[: len(remainder) - n_val]
        val = remainder[len(remainder) - n_val :]
        splits.append(
            (sorted(int(i) for i in train), sorted(int(i) for i in val), sorted(int(i) for i in test))
        )
    return splits


def corpus_stats(
    corpus: list[ReviewRequest],
    split: tuple[list[int], list[int], list[int]],
    vocab: TagVocabulary,
) -> CorpusStats:
    train, val, test = split
    train_tags = {tag for i in train for tag in corpus[i].tags}
    return CorpusStats(
        n_train=len(train),
        n_val=len(val),
        n_test=len(test),
        n_labels_total=len(vocab),
        n_labels_train=len(train_tags),
    )


# --- serialization -------------------------------------------------------


def request_to_record(req: ReviewRequest) -> dict:
    return {
        "id": req.id,
        "title": req.title,
        "text": req.text,
        "code_snippets": list(req.code_snippets),
        "tags": list(req.tags),
        "score": req.score,
        "necessity": req.necessity.value,
    }


def request_from_record(rec: dict) -> ReviewRequest:
    return ReviewRequest(
        id=rec["id"],
        title=rec["title"],
        text=rec["text"],
        code_snippets=tuple(rec["code_snippets"]),
        tags=tuple(rec["tags"]),
        score=rec["score"],
        necessity=Necessity(rec["necessity"]),
    )


def save_corpus(corpus: list[ReviewRequest], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for req in corpus:
            fh.write(json.dumps(request_to_record(req), sort_keys=True) + "\n")


def load_corpus(path: Path) -> list[ReviewRequest]:
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                corpus.append(request_from_record(json.loads(line)))
    return corpus


def save_folds(splits, path: Path) -> None:
    payload = [[s[0], s[1], s[2]] for s in splits]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_folds(path: Path):
    with open(path, encoding="utf-8") as fh:
        return [tuple(part for part in fold) for fold in json.load(fh)]
