"""Stream-parse a Stack Exchange style Posts.xml dump and clean post bodies.

The dump is one <row .../> element per post inside a single wrapper element.
Parsing is event-driven (expat) so memory stays bounded on multi-gigabyte
dumps; rows that lack required attributes become error records instead of
aborting the run.
"""

import html
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Union
from xml.parsers import expat


class DumpParseError(Exception):
    """Malformed XML framing; fatal for the whole dump."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class TagFormatError(ValueError):
    """Tags attribute is not a balanced run of <...> groups."""

    def __init__(self, fragment: str):
        super().__init__(f"unbalanced tag delimiters at {fragment!r}")
        self.fragment = fragment


@dataclass(frozen=True)
class RawPost:
    id: int
    score: int
    title: str
    body_html: str
    tags_raw: str
    created_at: str


@dataclass(frozen=True)
class RowError:
    """Per-row failure; carries the byte offset of the offending row."""

    reason: str
    offset: int


@dataclass(frozen=True)
class CleanedBody:
    text: str
    code_snippets: tuple[str, ...]


# Question rows only by default; pass e.g. ("1", "2") to also keep answers.
QUESTION_POST_TYPES = ("1",)

_REQUIRED_ATTRS = ("Id", "Score")


def stream_posts(
    dump_source: BinaryIO,
    post_types: tuple[str, ...] = QUESTION_POST_TYPES,
    chunk_size: int = 1 << 16,
) -> Iterator[Union[RawPost, RowError]]:
    """Yield RawPost (or RowError) for each retained <row> in document order.

    Rows whose PostTypeId is present but not in ``post_types`` are skipped;
    rows without a PostTypeId attribute are retained.
    """
    parser = expat.ParserCreate()
    pending: list[Union[RawPost, RowError]] = []

    def handle_start(name, attrs):
        if name != "row":
            return
        post_type = attrs.get("PostTypeId")
        if post_type is not None and post_type not in post_types:
            return
        offset = parser.CurrentByteIndex
        for required in _REQUIRED_ATTRS:
            if required not in attrs:
                pending.append(RowError(f"missing attribute: {required}", offset))
                return
        try:
            post_id = int(attrs["Id"])
            score = int(attrs["Score"])
        except ValueError as exc:
            pending.append(RowError(f"non-integer attribute: {exc}", offset))
            return
        pending.append(
            RawPost(
                id=post_id,
                score=score,
                title=attrs.get("Title", ""),
                body_html=attrs.get("Body", ""),
                tags_raw=attrs.get("Tags", ""),
                created_at=attrs.get("CreationDate", ""),
            )
        )

    parser.StartElementHandler = handle_start
    while True:
        chunk = dump_source.read(chunk_size)
        try:
            parser.Parse(chunk, not chunk)
        except expat.ExpatError as exc:
            raise DumpParseError(
                expat.errors.messages[exc.code], parser.ErrorByteIndex
            ) from exc
        yield from pending
        pending.clear()
        if not chunk:
            return


def parse_tags(tags_raw: str) -> list[str]:
    """Split an angle-bracket tag run, lowercased, first occurrence kept."""
    s = tags_raw.strip()
    tags: list[str] = []
    seen = set()
    i = 0
    while i < len(s):
        if s[i] != "<":
            raise TagFormatError(s[i:])
        end = s.find(">", i)
        if end == -1:
            raise TagFormatError(s[i:])
        tag = s[i + 1 : end].strip().lower()
        if "<" in tag:
            raise TagFormatError(s[i : end + 1])
        if tag and tag not in seen:
            seen.add(tag)
            tags.append(tag)
        i = end + 1
    return tags


_CODE_RE = re.compile(r"<code\b[^>]*>(.*?)</code\s*>", re.IGNORECASE | re.DOTALL)
_URL_RE = re.compile(r"(?:https?://|www\.)[^\s\"'<>]+", re.IGNORECASE)
_CONTROL_RE = re.compile(r"[\x00-\x1f\x7f]")
_TAG_RE = re.compile(r"<[^>]*>")
_SPACE_RE = re.compile(r"\s+")


def clean_body(body_html: str) -> CleanedBody:
    """Split a post body into noise-free prose and verbatim code snippets.

    Code element contents are pulled out first (entity-unescaped, whitespace
    preserved, document order).  The remainder then goes through a fixed
    noise pass, in this order: URL removal, control-character removal,
    entity unescape, tag strip, whitespace collapse.
    """
    snippets = tuple(html.unescape(m.group(1)) for m in _CODE_RE.finditer(body_html))
    text = _CODE_RE.sub(" ", body_html)
    text = _URL_RE.sub(" ", text)
    text = _CONTROL_RE.sub(" ", text)
    text = html.unescape(text)
    text = _TAG_RE.sub(" ", text)
    text = _SPACE_RE.sub(" ", text).strip()
    return CleanedBody(text=text, code_snippets=snippets)


def post_to_record(post: RawPost) -> dict:
    """NDJSON record for one post: cleaned body, split tags, metadata."""
    cleaned = clean_body(post.body_html)
    return {
        "id": post.id,
        "score": post.score,
        "title": post.title,
        "text": cleaned.text,
        "code_snippets": list(cleaned.code_snippets),
        "tags": parse_tags(post.tags_raw),
        "created_at": post.created_at,
    }


def error_to_record(err: RowError) -> dict:
    return {"error": err.reason, "offset": err.offset}
