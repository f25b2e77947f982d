"""Mask-filling backends.

The default backend is a seeded deterministic filler: candidate scores are
derived from a keyed hash of (seed, mask ordinal, context window, token),
with tokens appearing near the mask boosted.  It stands in for a real
pretrained encoder where model weights cannot be fetched; point model_id
at a local transformers checkpoint to serve a real one.
"""

import hashlib
import re
from typing import Protocol

MASK_TOKEN = "[MASK]"
SENTINELS = {"[CLS]", "[SEP]", "[MASK]", "[PAD]"}

_WORD_RE = re.compile(r"[a-z0-9]+")

# base vocabulary of the seeded filler; request tokens are added per call
_BASE_VOCAB = sorted(
    """
    yes no maybe code review request function method class object variable
    loop array list string number value return import module test error
    exception thread lock queue stack heap tree graph node edge sort search
    java python ruby rust go swift kotlin scala perl php html css sql shell
    performance memory speed style design pattern clean fast slow safe
    public private static void final const let var new delete true false
    null none empty first last next prev index key data type item user file
    read write open close run stop start end begin result output input
    """.split()
)


class Filler(Protocol):
    model_id: str

    def fill(
        self, tokens: list[str], mask_indices: list[int], top_k: int
    ) -> list[list[tuple[str, float]]]: ...


def retokenize(tokens: list[str]) -> tuple[list[str], list[int]]:
    """Server-side re-tokenization.

    Sentinels pass through; everything else lowercases and splits into
    word runs.  Returns the new stream plus, for each original position,
    how many mask sentinels preceded it (used for mask alignment).
    """
    out: list[str] = []
    masks_before: list[int] = []
    seen_masks = 0
    for tok in tokens:
        masks_before.append(seen_masks)
        if tok in SENTINELS:
            out.append(tok)
            if tok == MASK_TOKEN:
                seen_masks += 1
            continue
        out.extend(_WORD_RE.findall(tok.lower()))
    return out, masks_before


class SeededHashFiller:
    """Deterministic stand-in encoder: no sampling, stable across runs."""

    def __init__(self, model_id: str, seed: int = 0):
        self.model_id = model_id
        self.seed = seed

    def _raw_score(self, mask_ordinal: int, context: str, token: str) -> float:
        key = f"{self.seed}|{mask_ordinal}|{context}|{token}".encode("utf-8")
        digest = hashlib.blake2s(key).digest()
        return int.from_bytes(digest[:8], "little") / 2**64

    def fill(self, tokens, mask_indices, top_k):
        stream, masks_before = retokenize(tokens)
        server_masks = [i for i, t in enumerate(stream) if t == MASK_TOKEN]
        vocab = sorted(set(_BASE_VOCAB) | {t for t in stream if t not in SENTINELS})
        predictions = []
        for idx in mask_indices:
            ordinal = masks_before[idx]
            pos = server_masks[ordinal]
            window = [
                t
                for t in stream[max(0, pos - 8) : pos + 9]
                if t not in SENTINELS
            ]
            context = " ".join(window)
            raw = {}
            for token in vocab:
                score = self._raw_score(ordinal, context, token)
                if token in window:
                    score *= 3.0
                raw[token] = score
            total = sum(raw.values())
            ranked = sorted(raw.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
            predictions.append([(token, score / total) for token, score in ranked])
        return predictions


class TransformersFiller:
    """Serve a local pretrained masked-token model via transformers."""

    def __init__(self, model_id: str):
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise RuntimeError(
                "transformers is required to serve a pretrained model"
            ) from exc
        self.model_id = model_id
        self._pipe = pipeline("fill-mask", model=model_id)

    def fill(self, tokens, mask_indices, top_k):  # pragma: no cover - needs weights
        mask_token = self._pipe.tokenizer.mask_token
        text_tokens = [mask_token if t == MASK_TOKEN else t for t in tokens]
        text = " ".join(text_tokens)
        outputs = self._pipe(text, top_k=top_k)
        if tokens.count(MASK_TOKEN) == 1:
            outputs = [outputs]
        predictions = []
        for idx in mask_indices:
            ordinal = sum(1 for t in tokens[:idx] if t == MASK_TOKEN)
            cands = outputs[ordinal]
            predictions.append(
                [(c["token_str"].strip(), min(max(c["score"], 0.0), 1.0)) for c in cands]
            )
        return predictions


def make_filler(model_id: str, seed: int = 0) -> Filler:
    if model_id.startswith("seeded-hash"):
        return SeededHashFiller(model_id, seed)
    return TransformersFiller(model_id)
