"""Whitespace + punctuation tokenizer shared by the prompt and model layers.

Rules (frozen so serialized prompts stay stable):
  * the sentinels [CLS], [SEP], [MASK], [PAD] pass through unchanged;
  * everything else is lowercased;
  * runs of word characters (letters, digits, underscore) form one token;
  * every other non-space character is its own token.
"""

import re

BOS = "[CLS]"
SEP = "[SEP]"
MASK = "[MASK]"
PAD = "[PAD]"

SPECIAL_TOKENS = (BOS, SEP, MASK, PAD)

_TOKEN_RE = re.compile(r"\[CLS\]|\[SEP\]|\[MASK\]|\[PAD\]|\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Split text into tokens; sentinels kept verbatim, the rest lowercased."""
    out = []
    for tok in _TOKEN_RE.findall(text):
        out.append(tok if tok in SPECIAL_TOKENS else tok.lower())
    return out
