"""Provider-agnostic backend interface: sessions, image handles, capabilities, errors."""

from __future__ import annotations

import hashlib
import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image


class BackendError(Exception):
    """Base class for model-backend failures."""


class BackendUnavailable(BackendError):
    """Transport-level failure that survived the retry policy."""


class RateLimited(BackendError):
    """Provider rate limit that survived the retry policy."""

    def __init__(self, retry_after: float | None = None):
        self.retry_after = retry_after
        suffix = f" (retry after {retry_after}s)" if retry_after is not None else ""
        super().__init__(f"rate limited{suffix}")


class ContentRefused(BackendError):
    """Provider policy rejected the request content."""


class EditUnsupported(BackendError):
    """Backend cannot modify a previously generated image within a session."""


class NoPriorImage(BackendError):
    """Regeneration requested in a session that never generated an image."""


class FixtureMissing(BackendError):
    """Mock backend has no canned description for this image."""

    def __init__(self, content_hash: str):
        self.content_hash = content_hash
        super().__init__(f"no fixture description for image {content_hash}")


class MalformedResponse(BackendError):
    """Service response missing or mistyping a required field."""

    def __init__(self, field_path: str, detail: str = ""):
        self.field_path = field_path
        message = f"malformed response: field {field_path!r}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class UnrecognizedInstruction(BackendError):
    """Mock backend could not map a transform instruction to one of its rules."""


@dataclass(frozen=True)
class BackendCapabilities:
    supports_session_edit: bool


@dataclass
class Message:
    role: str
    content: str
    image_hash: str | None = None


@dataclass
class BackendSession:
    """One isolated model conversation. History is append-only."""

    session_id: str
    history: list[Message] = field(default_factory=list)

    def append(self, role: str, content: str, image_hash: str | None = None) -> None:
        self.history.append(Message(role=role, content=content, image_hash=image_hash))

    def last_image_hash(self) -> str | None:
        for message in reversed(self.history):
            if message.image_hash is not None:
                return message.image_hash
        return None


@dataclass(frozen=True)
class ImageRef:
    """Handle on raw RGB image data with a stable content digest."""

    width: int
    height: int
    content_hash: str
    pixels: bytes | None = None
    path: Path | None = None

    @staticmethod
    def hash_pixels(raw: bytes, width: int, height: int) -> str:
        digest = hashlib.sha256()
        digest.update(struct.pack(">II", width, height))
        digest.update(raw)
        return digest.hexdigest()

    @classmethod
    def from_pixels(cls, raw: bytes, width: int, height: int) -> "ImageRef":
        if len(raw) != width * height * 3:
            raise ValueError(
                f"expected {width * height * 3} RGB bytes for {width}x{height}, got {len(raw)}"
            )
        return cls(
            width=width,
            height=height,
            content_hash=cls.hash_pixels(raw, width, height),
            pixels=raw,
        )

    @classmethod
    def from_path(cls, path: Path | str) -> "ImageRef":
        path = Path(path)
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            raw = rgb.tobytes()
            width, height = rgb.size
        return cls(
            width=width,
            height=height,
            content_hash=cls.hash_pixels(raw, width, height),
            pixels=raw,
            path=path,
        )

    def load_pixels(self) -> bytes:
        if self.pixels is not None:
            return self.pixels
        if self.path is None:
            raise ValueError("image has neither in-memory pixels nor a path")
        with Image.open(self.path) as img:
            return img.convert("RGB").tobytes()

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        raw = self.load_pixels()
        Image.frombytes("RGB", (self.width, self.height), raw).save(path)
        return path


class Backend(ABC):
    """The three model capabilities the codec needs, plus session-local edits."""

    #: True when every operation is a pure function of fixtures and inputs,
    #: letting callers use a logical clock for reproducible transcripts.
    deterministic: bool = False

    @property
    @abstractmethod
    def capabilities(self) -> BackendCapabilities: ...

    @abstractmethod
    def describe(self, session: BackendSession, image: ImageRef, prompt: str) -> str:
        """Produce a free-form description of the image."""

    @abstractmethod
    def transform(self, session: BackendSession, instruction: str, payload: str) -> str:
        """Apply a text instruction (select, compress, decompress, compare) to a payload."""

    @abstractmethod
    def generate(self, session: BackendSession, prompt: str) -> ImageRef:
        """Produce a new 1024x1024 image from a text prompt."""

    @abstractmethod
    def regenerate(self, session: BackendSession, edit: str) -> ImageRef:
        """Edit the session's previous image; requires supports_session_edit."""
