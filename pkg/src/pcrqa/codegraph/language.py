"""Keyword/regex-table language detection for short code snippets.

Each language family carries a weighted feature table; the family with the
highest total match score wins, with ties resolved in table order.  A best
score below SCORE_FLOOR yields Unknown.  The tables are exported so tests
can recompute scores independently.
"""

import re
from enum import Enum


class Language(str, Enum):
    PYTHON_LIKE = "python_like"
    JAVA_LIKE = "java_like"
    C_FAMILY = "c_family"
    JS_LIKE = "js_like"
    UNKNOWN = "unknown"


SCORE_FLOOR = 2

# (pattern, weight); score = sum(weight * match count).
LANGUAGE_FEATURES: dict[Language, list[tuple[str, int]]] = {
    Language.PYTHON_LIKE: [
        (r"\bdef\s+\w+\s*\(", 3),
        (r"\belif\b", 3),
        (r"\blambda\b", 3),
        (r":\s*(?:\n|$)", 2),
        (r"\bself\b", 2),
        (r"\bfor\s+\w+\s+in\b", 2),
        (r"\bNone\b|\bTrue\b|\bFalse\b", 1),
        (r"\bprint\s*\(", 1),
        (r"\bimport\b(?![^\n]*;)", 1),
    ],
    Language.JAVA_LIKE: [
        (r"System\s*\.\s*out", 3),
        (r"@Override\b", 3),
        (r"\bpublic\b|\bprivate\b|\bprotected\b", 2),
        (r"\bnew\s+[A-Z]\w*\s*\(", 2),
        (r"\bString\b", 2),
        (r"\bextends\b|\bimplements\b", 2),
        (r"\bstatic\b", 1),
        (r"\bvoid\b", 1),
        (r"\bfinal\b", 1),
    ],
    Language.C_FAMILY: [
        (r"#include\b", 4),
        (r"\bstd::", 4),
        (r"\bprintf\s*\(|\bscanf\s*\(", 3),
        (r"\bmalloc\b|\bfree\s*\(", 3),
        (r"\bint\s+main\s*\(", 3),
        (r"\bcout\b|\bcin\b", 3),
        (r"\btemplate\s*<", 3),
        (r"\bstruct\b", 2),
        (r"\bnullptr\b|\bNULL\b", 2),
        (r"->", 1),
        (r"\b(?:int|char|float|double|long|unsigned|size_t)\s+\**\w+", 1),
    ],
    Language.JS_LIKE: [
        (r"\bfunction\b", 3),
        (r"\bconsole\s*\.\s*log\b", 3),
        (r"===|!==", 2),
        (r"=>", 2),
        (r"\b(?:var|let|const)\s+\w+", 2),
        (r"\bdocument\b|\bwindow\b", 2),
        (r"\bundefined\b", 2),
        (r"\brequire\s*\(", 2),
    ],
}

_COMPILED = {
    lang: [(re.compile(pat), w) for pat, w in feats]
    for lang, feats in LANGUAGE_FEATURES.items()
}


def score_languages(source: str) -> dict[Language, int]:
    """Feature-table score per language family."""
    return {
        lang: sum(w * len(rx.findall(source)) for rx, w in feats)
        for lang, feats in _COMPILED.items()
    }


def detect_language(source: str) -> Language:
    scores = score_languages(source)
    best = max(scores.values(), default=0)
    if best < SCORE_FLOOR:
        return Language.UNKNOWN
    for lang in LANGUAGE_FEATURES:
        if scores[lang] == best:
            return lang
    return Language.UNKNOWN
