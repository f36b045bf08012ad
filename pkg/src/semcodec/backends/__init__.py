"""Model backends: the interface, a deterministic mock, and a generic HTTP adapter."""

from __future__ import annotations

import os
from pathlib import Path

from .base import (
    Backend,
    BackendCapabilities,
    BackendError,
    BackendSession,
    BackendUnavailable,
    ContentRefused,
    EditUnsupported,
    FixtureMissing,
    ImageRef,
    MalformedResponse,
    Message,
    NoPriorImage,
    RateLimited,
    UnrecognizedInstruction,
)
from .http import HttpBackend, RetryPolicy, http_call
from .mock import MockBackend, make_placeholder_image

BACKEND_ENV = "SEMCODEC_BACKEND"

__all__ = [
    "Backend",
    "BackendCapabilities",
    "BackendError",
    "BackendSession",
    "BackendUnavailable",
    "ContentRefused",
    "EditUnsupported",
    "FixtureMissing",
    "HttpBackend",
    "ImageRef",
    "MalformedResponse",
    "Message",
    "MockBackend",
    "NoPriorImage",
    "RateLimited",
    "RetryPolicy",
    "UnrecognizedInstruction",
    "create_backend",
    "http_call",
    "make_placeholder_image",
]


def create_backend(name: str | None = None, *, fixtures_dir: Path | None = None) -> Backend:
    """Build a backend by name, falling back to the SEMCODEC_BACKEND env var (default mock)."""
    name = name or os.environ.get(BACKEND_ENV, "mock")
    if name == "mock":
        return MockBackend(fixtures_dir=fixtures_dir)
    if name == "http":
        return HttpBackend()
    raise ValueError(f"unknown backend {name!r} (expected 'mock' or 'http')")
