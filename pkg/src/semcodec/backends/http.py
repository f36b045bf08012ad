"""Generic JSON-over-HTTP backend adapter.

One POST endpoint carries all four operations; the request names the
operation and the response returns either ``text`` or ``image_b64``.
Credentials come from the environment only (never config files or
transcripts). Transient failures are retried with bounded exponential
backoff, honoring ``Retry-After`` when the server sends one.

Request shape::

    {"op": "describe"|"transform"|"generate"|"regenerate",
     "session_id": str, "prompt": str,
     "payload": str | null, "image_b64": str | null}

Response shape: ``{"text": str}`` for text ops, ``{"image_b64": str,
"width": int, "height": int}`` for image ops (PNG-encoded).
"""

from __future__ import annotations

import base64
import io
import os
import time
from dataclasses import dataclass
from typing import Any, Callable

import requests
from PIL import Image

from .base import (
    Backend,
    BackendCapabilities,
    BackendSession,
    BackendUnavailable,
    ContentRefused,
    ImageRef,
    MalformedResponse,
    NoPriorImage,
    EditUnsupported,
    RateLimited,
)

API_URL_ENV = "SEMCODEC_API_URL"
API_KEY_ENV = "SEMCODEC_API_KEY"

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})

# post(url, json_payload, headers) -> (status_code, body_or_None, response_headers)
PostFn = Callable[[str, dict, dict], tuple[int, Any, dict]]


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay: float = 1.0
    multiplier: float = 2.0

    def delay(self, attempt: int) -> float:
        return self.base_delay * self.multiplier**attempt


def _requests_post(url: str, payload: dict, headers: dict) -> tuple[int, Any, dict]:
    try:
        response = requests.post(url, json=payload, headers=headers, timeout=60)
    except requests.RequestException as exc:
        raise ConnectionError(str(exc)) from exc
    try:
        body = response.json()
    except ValueError:
        body = None
    return response.status_code, body, dict(response.headers)


def _retry_after(headers: dict) -> float | None:
    value = headers.get("Retry-After") or headers.get("retry-after")
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def http_call(
    endpoint: str,
    request: dict,
    retry: RetryPolicy = RetryPolicy(),
    *,
    expect: tuple[str, ...] = (),
    headers: dict | None = None,
    post: PostFn = _requests_post,
    sleep: Callable[[float], None] = time.sleep,
) -> dict:
    """One logical call: bounded retries, then shape validation of the body."""
    headers = dict(headers or {})
    last_error: str = "no attempts made"
    last_retry_after: float | None = None
    rate_limited = False
    for attempt in range(retry.attempts):
        try:
            status, body, response_headers = post(endpoint, request, headers)
        except ConnectionError as exc:
            last_error = str(exc)
            rate_limited = False
            if attempt + 1 < retry.attempts:
                sleep(retry.delay(attempt))
            continue
        if status in RETRYABLE_STATUSES:
            last_error = f"HTTP {status}"
            rate_limited = status == 429
            last_retry_after = _retry_after(response_headers) if rate_limited else None
            if attempt + 1 < retry.attempts:
                wait = retry.delay(attempt)
                if last_retry_after is not None:
                    wait = max(wait, last_retry_after)
                sleep(wait)
            continue
        if status != 200:
            detail = ""
            if isinstance(body, dict):
                detail = str(body.get("error", ""))
            if "content_refused" in detail:
                raise ContentRefused(detail or f"HTTP {status}")
            raise BackendUnavailable(f"HTTP {status} {detail}".strip())
        if not isinstance(body, dict):
            raise MalformedResponse("<root>", "body is not a JSON object")
        for name in expect:
            if name not in body:
                raise MalformedResponse(name, "missing required field")
        return body
    if rate_limited:
        raise RateLimited(last_retry_after)
    raise BackendUnavailable(f"retries exhausted: {last_error}")


class HttpBackend(Backend):
    """Adapter from the backend interface to one generic JSON endpoint."""

    deterministic = False

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        *,
        supports_session_edit: bool = False,
        retry: RetryPolicy = RetryPolicy(),
        post: PostFn = _requests_post,
        sleep: Callable[[float], None] = time.sleep,
    ):
        endpoint = endpoint or os.environ.get(API_URL_ENV)
        if not endpoint:
            raise BackendUnavailable(f"no endpoint configured (set {API_URL_ENV})")
        self._endpoint = endpoint
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._capabilities = BackendCapabilities(supports_session_edit=supports_session_edit)
        self._retry = retry
        self._post = post
        self._sleep = sleep

    @property
    def capabilities(self) -> BackendCapabilities:
        return self._capabilities

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return headers

    def _call(self, request: dict, expect: tuple[str, ...]) -> dict:
        return http_call(
            self._endpoint,
            request,
            self._retry,
            expect=expect,
            headers=self._headers(),
            post=self._post,
            sleep=self._sleep,
        )

    def _decode_image(self, body: dict) -> ImageRef:
        try:
            raw_png = base64.b64decode(body["image_b64"])
        except (TypeError, ValueError) as exc:
            raise MalformedResponse("image_b64", str(exc)) from exc
        try:
            with Image.open(io.BytesIO(raw_png)) as img:
                rgb = img.convert("RGB")
                raw = rgb.tobytes()
                width, height = rgb.size
        except OSError as exc:
            raise MalformedResponse("image_b64", f"not a decodable image: {exc}") from exc
        return ImageRef.from_pixels(raw, width, height)

    def describe(self, session: BackendSession, image: ImageRef, prompt: str) -> str:
        png = io.BytesIO()
        Image.frombytes("RGB", (image.width, image.height), image.load_pixels()).save(
            png, format="PNG"
        )
        body = self._call(
            {
                "op": "describe",
                "session_id": session.session_id,
                "prompt": prompt,
                "payload": None,
                "image_b64": base64.b64encode(png.getvalue()).decode("ascii"),
            },
            expect=("text",),
        )
        session.append("user", prompt, image_hash=image.content_hash)
        session.append("assistant", body["text"])
        return body["text"]

    def transform(self, session: BackendSession, instruction: str, payload: str) -> str:
        body = self._call(
            {
                "op": "transform",
                "session_id": session.session_id,
                "prompt": instruction,
                "payload": payload,
                "image_b64": None,
            },
            expect=("text",),
        )
        session.append("user", f"{instruction}\n\n{payload}")
        session.append("assistant", body["text"])
        return body["text"]

    def generate(self, session: BackendSession, prompt: str) -> ImageRef:
        body = self._call(
            {
                "op": "generate",
                "session_id": session.session_id,
                "prompt": prompt,
                "payload": None,
                "image_b64": None,
            },
            expect=("image_b64",),
        )
        image = self._decode_image(body)
        session.append("user", prompt)
        session.append("assistant", "", image_hash=image.content_hash)
        return image

    def regenerate(self, session: BackendSession, edit: str) -> ImageRef:
        if not self._capabilities.supports_session_edit:
            raise EditUnsupported("endpoint does not support session edits")
        if session.last_image_hash() is None:
            raise NoPriorImage("session holds no generated image to edit")
        body = self._call(
            {
                "op": "regenerate",
                "session_id": session.session_id,
                "prompt": edit,
                "payload": None,
                "image_b64": None,
            },
            expect=("image_b64",),
        )
        image = self._decode_image(body)
        session.append("user", edit)
        session.append("assistant", "", image_hash=image.content_hash)
        return image
