"""Prompt assembly: hard template with mask slots plus soft segments.

Segment order is fixed: [CLS] template title text [SEP] knowledge-prefix
code-graph.  The prefix occupies a contiguous, fixed-length index range so
the trainable-parameter registry can address it; the code graph takes one
frozen vector slot at the end.  When the budget is tight the request text
is cut first, then the title; the template and structural segments never
shrink.
"""

import json
from dataclasses import dataclass
from typing import Optional

from .dataset import ReviewRequest
from .knowledge import KnowledgePrefix
from .tokens import BOS, MASK, SEP, tokenize

DEFAULT_MAX_LEN = 300
DEFAULT_TAG_MASKS = 3

_TEMPLATE_HEAD = "The requested label is"
_TEMPLATE_QUESTION = ". Is this request necessary for review?"
_TEMPLATE_GUIDE = "Request:"


class PromptBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    kind: str  # bos | template | title | text | sep | knowledge_prefix | code_graph
    tokens: Optional[tuple[str, ...]] = None
    vector_ref: Optional[str] = None
    trainable: bool = False
    frozen: bool = False

    def length(self) -> int:
        return 1 if self.tokens is None else len(self.tokens)


@dataclass(frozen=True)
class PromptInstance:
    segments: tuple[Segment, ...]
    mask_positions: tuple[int, ...]

    @property
    def tag_mask_count(self) -> int:
        return len(self.mask_positions) - 1

    @property
    def necessity_mask_index(self) -> int:
        return self.mask_positions[-1]

    def total_length(self) -> int:
        return sum(seg.length() for seg in self.segments)

    def segment_offsets(self) -> list[tuple[Segment, int, int]]:
        out = []
        pos = 0
        for seg in self.segments:
            out.append((seg, pos, pos + seg.length()))
            pos += seg.length()
        return out

    def prefix_range(self) -> tuple[int, int]:
        for seg, start, end in self.segment_offsets():
            if seg.kind == "knowledge_prefix":
                return (start, end)
        raise ValueError("no knowledge_prefix segment")

    def graph_position(self) -> int:
        for seg, start, _ in self.segment_offsets():
            if seg.kind == "code_graph":
                return start
        raise ValueError("no code_graph segment")

    def graph_ref(self) -> Optional[str]:
        for seg in self.segments:
            if seg.kind == "code_graph":
                return seg.vector_ref
        return None

    def token_at(self, pos: int) -> Optional[str]:
        for seg, start, end in self.segment_offsets():
            if start <= pos < end:
                return None if seg.tokens is None else seg.tokens[pos - start]
        raise IndexError(pos)

    def to_payload(self) -> dict:
        return {
            "segments": [
                {
                    "kind": seg.kind,
                    "tokens": list(seg.tokens) if seg.tokens is not None else None,
                    "vector_ref": seg.vector_ref,
                    "trainable": seg.trainable,
                    "frozen": seg.frozen,
                }
                for seg in self.segments
            ],
            "mask_positions": list(self.mask_positions),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True)

    @classmethod
    def from_payload(cls, payload: dict) -> "PromptInstance":
        segments = tuple(
            Segment(
                kind=s["kind"],
                tokens=tuple(s["tokens"]) if s["tokens"] is not None else None,
                vector_ref=s.get("vector_ref"),
                trainable=s["trainable"],
                frozen=s["frozen"],
            )
            for s in payload["segments"]
        )
        return cls(segments=segments, mask_positions=tuple(payload["mask_positions"]))

    @classmethod
    def from_json(cls, text: str) -> "PromptInstance":
        return cls.from_payload(json.loads(text))


def build_template(tag_mask_count: int = DEFAULT_TAG_MASKS) -> list[str]:
    """Template tokens: tag masks, the necessity question mask, guide run."""
    if tag_mask_count < 1:
        raise ValueError("tag_mask_count must be >= 1")
    tokens = tokenize(_TEMPLATE_HEAD)
    tokens.extend([MASK] * tag_mask_count)
    tokens.extend(tokenize(_TEMPLATE_QUESTION))
    tokens.append(MASK)
    tokens.extend(tokenize(_TEMPLATE_GUIDE))
    return tokens


def assemble_prompt(
    request: ReviewRequest,
    template: list[str],
    knowledge_prefix: KnowledgePrefix,
    code_graph_ref: str,
    max_len: int = DEFAULT_MAX_LEN,
) -> PromptInstance:
    """Build the full instance; text is truncated before title on overflow."""
    prefix_tokens = knowledge_prefix.padded()
    skeleton = 1 + len(template) + 1 + len(prefix_tokens) + 1
    if skeleton > max_len:
        raise PromptBudgetError(
            f"max_len {max_len} cannot hold template and structural segments ({skeleton})"
        )
    room = max_len - skeleton
    title_tokens = tokenize(request.title)
    text_tokens = tokenize(request.text)
    if len(title_tokens) + len(text_tokens) > room:
        text_tokens = text_tokens[: max(0, room - len(title_tokens))]
    if len(title_tokens) > room:
        title_tokens = title_tokens[:room]

    segments = (
        Segment(kind="bos", tokens=(BOS,)),
        Segment(kind="template", tokens=tuple(template)),
        Segment(kind="title", tokens=tuple(title_tokens)),
        Segment(kind="text", tokens=tuple(text_tokens)),
        Segment(kind="sep", tokens=(SEP,)),
        Segment(kind="knowledge_prefix", tokens=tuple(prefix_tokens), trainable=True),
        Segment(kind="code_graph", vector_ref=code_graph_ref, frozen=True),
    )
    mask_positions = tuple(1 + i for i, tok in enumerate(template) if tok == MASK)
    if not mask_positions:
        raise ValueError("template has no mask slots")
    return PromptInstance(segments=segments, mask_positions=mask_positions)
