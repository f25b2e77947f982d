"""Domain-term knowledge base and per-request guidance extraction.

The base is a newline-delimited JSON file of term definitions with optional
abbreviation aliases.  A request's guidance is found by space-splitting its
title and text, fuzzing each word (case, plural, tense), and looking the
variants up in the base; matched definitions later seed the trainable
prefix.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

from .dataset import ReviewRequest
from .tokens import PAD

logger = logging.getLogger(__name__)

DEFAULT_PREFIX_BUDGET = 50


class KnowledgeLoadError(ValueError):
    pass


@dataclass(frozen=True)
class KnowledgeEntry:
    term: str
    aliases: tuple[str, ...]
    definition: str
    source: str


@dataclass
class KnowledgeBase:
    entries: list[KnowledgeEntry] = field(default_factory=list)
    index: dict[str, KnowledgeEntry] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def lookup(self, key: str) -> Optional[KnowledgeEntry]:
        return self.index.get(_norm_key(key))


def _norm_key(s: str) -> str:
    return " ".join(s.lower().split())


def load_knowledge(fh: IO[str]) -> KnowledgeBase:
    """Index every valid line; report and skip invalid ones.

    Raises when no line is valid or when two entries collide on a
    normalized term/alias key.
    """
    kb = KnowledgeBase()
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            term = rec["term"].strip()
            definition = rec["definition"].strip()
            if not term or not definition:
                raise ValueError("empty term or definition")
            aliases = tuple(a for a in rec.get("aliases", []) if a.strip())
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError, ValueError) as exc:
            kb.skipped.append(f"line {lineno}: {exc}")
            continue
        entry = KnowledgeEntry(
            term=term,
            aliases=aliases,
            definition=definition,
            source=rec.get("source", ""),
        )
        for key in (term,) + aliases:
            norm = _norm_key(key)
            if norm in kb.index:
                raise KnowledgeLoadError(
                    f"line {lineno}: key {norm!r} collides with existing entry "
                    f"{kb.index[norm].term!r}"
                )
            kb.index[norm] = entry
        kb.entries.append(entry)
    if kb.skipped:
        logger.warning("knowledge file: skipped %d invalid lines", len(kb.skipped))
    if not kb.entries:
        raise KnowledgeLoadError("knowledge file contains no valid entries")
    return kb


def _fuzz_variants(word: str) -> list[str]:
    """Case/plural/tense variants, most specific first."""
    w = word.lower().strip("\"'`.,:;!?()[]{}<>")
    if not w:
        return []
    variants = [w]
    if w.endswith("es") and len(w) > 3:
        variants.append(w[:-2])
    if w.endswith("s") and len(w) > 2:
        variants.append(w[:-1])
    if w.endswith("ing") and len(w) > 4:
        base = w[:-3]
        variants.extend([base, base + "e"])
        if len(base) > 2 and base[-1] == base[-2]:
            variants.append(base[:-1])
    if w.endswith("ed") and len(w) > 3:
        base = w[:-2]
        variants.extend([base, base + "e"])
        if len(base) > 2 and base[-1] == base[-2]:
            variants.append(base[:-1])
    return list(dict.fromkeys(variants))


def extract_terms(
    request: ReviewRequest,
    kb: KnowledgeBase,
    model_vocab: Optional[set[str]] = None,
    include_tag_words: bool = True,
) -> list[KnowledgeEntry]:
    """Matched entries in first-occurrence order, deduplicated.

    Words already present in the backend vocabulary are not candidates;
    without a vocabulary, every word is (a notice is logged).  Tag surfaces
    seed extra candidate words after the text when ``include_tag_words``.
    """
    words = (request.title + " " + request.text).split()
    if include_tag_words:
        for tag in request.tags:
            words.extend(tag.split())
    if model_vocab is None:
        logger.debug("no model vocabulary configured; matching all request words")
    found: list[KnowledgeEntry] = []
    seen_terms = set()
    for word in words:
        lowered = word.lower()
        if model_vocab is not None and lowered in model_vocab:
            continue
        for variant in _fuzz_variants(word):
            entry = kb.index.get(variant)
            if entry is not None:
                if entry.term not in seen_terms:
                    seen_terms.add(entry.term)
                    found.append(entry)
                break
    return found


@dataclass(frozen=True)
class KnowledgePrefix:
    """Content tokens for the trainable prefix; PAD fills the unused tail."""

    tokens: tuple[str, ...]
    budget: int

    @property
    def initialized(self) -> bool:
        return len(self.tokens) > 0

    def padded(self) -> list[str]:
        return list(self.tokens) + [PAD] * (self.budget - len(self.tokens))


def render_knowledge_prefix(
    entries: Iterable[KnowledgeEntry], budget: int = DEFAULT_PREFIX_BUDGET
) -> KnowledgePrefix:
    """Concatenate definitions in order and cut to the token budget."""
    if budget < 1:
        raise ValueError("prefix budget must be >= 1")
    tokens: list[str] = []
    for entry in entries:
        tokens.extend(entry.definition.split())
        if len(tokens) >= budget:
            break
    return KnowledgePrefix(tokens=tuple(tokens[:budget]), budget=budget)
