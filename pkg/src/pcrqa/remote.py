"""HTTP client for external mask-fill backends.

Wire protocol: POST {endpoint}/v1/fill-mask with {"tokens": [...],
"mask_indices": [...], "top_k": n}; the response carries one candidate list
per mask index, scores in [0, 1] in non-increasing order.  Responses are
validated before they reach callers; transport failures retry with backoff.
"""

import json
import time
import urllib.error
import urllib.request
from typing import Optional

from .model import MaskPrediction
from .prompt import PromptInstance
from .tokens import PAD

FILL_MASK_PATH = "/v1/fill-mask"

DEFAULT_ATTEMPTS = 3
DEFAULT_TIMEOUT = 10.0
DEFAULT_BACKOFF = 0.2


class RemoteProtocolError(ValueError):
    """The server broke the wire-protocol contract."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class RemoteUnavailableError(ConnectionError):
    """Transport-level failure after the configured attempts; retryable."""


def flat_tokens(instance: PromptInstance) -> list[str]:
    """Token stream for the wire: vector slots render as padding tokens."""
    out: list[str] = []
    for seg in instance.segments:
        if seg.tokens is None:
            out.append(PAD)
        else:
            out.extend(seg.tokens)
    return out


def validate_response(payload: dict, mask_count: int, top_k: int) -> list[list[dict]]:
    if not isinstance(payload, dict):
        raise RemoteProtocolError("body", "response is not a JSON object")
    preds = payload.get("predictions")
    if not isinstance(preds, list):
        raise RemoteProtocolError("predictions", "missing or not a list")
    if "model_id" not in payload:
        raise RemoteProtocolError("model_id", "missing")
    if len(preds) != mask_count:
        raise RemoteProtocolError(
            "predictions", f"expected {mask_count} mask entries, got {len(preds)}"
        )
    for mi, cands in enumerate(preds):
        if not isinstance(cands, list) or len(cands) != top_k:
            raise RemoteProtocolError(
                "predictions", f"mask {mi}: expected {top_k} candidates"
            )
        last = None
        for ci, cand in enumerate(cands):
            if not isinstance(cand, dict) or "token" not in cand or "score" not in cand:
                raise RemoteProtocolError(
                    "predictions", f"mask {mi} candidate {ci}: needs token and score"
                )
            score = cand["score"]
            if not isinstance(score, (int, float)) or not (0.0 <= score <= 1.0):
                raise RemoteProtocolError(
                    "score", f"mask {mi} candidate {ci}: {score!r} outside [0, 1]"
                )
            if last is not None and score > last:
                raise RemoteProtocolError(
                    "score", f"mask {mi}: scores increase at candidate {ci}"
                )
            last = score
    return preds


def remote_predict(
    endpoint: str,
    instance: PromptInstance,
    top_k: int,
    attempts: int = DEFAULT_ATTEMPTS,
    timeout: float = DEFAULT_TIMEOUT,
    backoff: float = DEFAULT_BACKOFF,
) -> list[MaskPrediction]:
    """Round-trip one instance through a conformant fill-mask server."""
    body = json.dumps(
        {
            "tokens": flat_tokens(instance),
            "mask_indices": list(instance.mask_positions),
            "top_k": top_k,
        }
    ).encode("utf-8")
    url = endpoint.rstrip("/") + FILL_MASK_PATH
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    last_error: Optional[Exception] = None
    raw = None
    for attempt in range(attempts):
        try:
            with urllib.request.urlopen(request, timeout=timeout) as resp:
                raw = resp.read()
            break
        except urllib.error.HTTPError as exc:
            if exc.code >= 500:
                last_error = exc
            else:
                raise RemoteProtocolError("http", f"server rejected request: {exc.code}")
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            last_error = exc
        if attempt + 1 < attempts:
            time.sleep(backoff * (2**attempt))
    if raw is None:
        raise RemoteUnavailableError(
            f"{url} unreachable after {attempts} attempts: {last_error}"
        )
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise RemoteProtocolError("body", f"response is not JSON: {exc}")
    preds = validate_response(payload, len(instance.mask_positions), top_k)
    return [
        MaskPrediction(
            position=pos,
            candidates=tuple((c["token"], float(c["score"])) for c in cands),
        )
        for pos, cands in zip(instance.mask_positions, preds)
    ]


class RemoteBackend:
    """Backend-contract shim over remote_predict."""

    def __init__(self, endpoint: str, vocabulary: Optional[set[str]] = None, **kwargs):
        self.endpoint = endpoint
        self.vocabulary = vocabulary or set()
        self.kwargs = kwargs

    def predict_masks(self, instance: PromptInstance, top_k: int) -> list[MaskPrediction]:
        return remote_predict(self.endpoint, instance, top_k, **self.kwargs)
