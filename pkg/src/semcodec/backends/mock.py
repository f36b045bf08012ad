"""Fully deterministic mock backend.

Every operation is a pure function of the bundled fixtures and the inputs
seen so far, which makes whole-pipeline runs byte-reproducible offline:

* ``describe`` looks the image up in a fixture table (or in the registry of
  images this backend itself generated) and returns canned text.
* ``transform`` recognizes the four instruction families by signature
  phrases and applies a fixed rule for each.
* ``generate``/``regenerate`` emit placeholder images whose pixels are a
  pure function of the prompt (solid fill from the digest, digest bytes
  stamped into the first pixels).

Fixture directory format (plain text):

* ``descriptions.tsv`` -- one ``<content_hash>\\t<description>`` line per image.
* ``words.txt`` -- one word per line; inverted through the devowel rule to
  build the decompression dictionary (ties resolved first-alphabetical).
"""

from __future__ import annotations

import hashlib
import re
from importlib.resources import files
from pathlib import Path

from .. import textcodec
from .base import (
    Backend,
    BackendCapabilities,
    BackendSession,
    FixtureMissing,
    ImageRef,
    NoPriorImage,
    EditUnsupported,
    UnrecognizedInstruction,
)

GENERATED_SIZE = 1024

# Helper words the word-select rule refuses to spend budget on.
STOPWORDS = frozenset(
    """
    a an the this that these those it its i you he she we they them his her our
    their your my me us of in on at to from by with and or but nor so as for
    into onto over under near above below between through across is are was
    were be been being am has have had do does did will would shall should can
    could may might must not no yes if then than there here when where while
    which who whom whose what why how all any both each few more most other
    some such only own same too very s t also
    """.split()
)

_WORD_SELECT_RE = re.compile(r"\bto (\d+) words\b")
_WORD_COMPRESS_MARKER = "remove all vowels"
_WORD_DECOMPRESS_MARKER = "decompress"
_COMPARE_MARKER = "most important difference"

# Pipeline composition convention: "<template>\n\n<content>". Mock rules act
# on the content block only.
_BLOCK_SEPARATOR = "\n\n"


def make_placeholder_image(
    seed_material: str | bytes, width: int = GENERATED_SIZE, height: int = GENERATED_SIZE
) -> ImageRef:
    """Deterministic stand-in image: solid digest color, digest stamped in row 0."""
    if isinstance(seed_material, str):
        seed_material = seed_material.encode("utf-8")
    digest = hashlib.sha256(seed_material).digest()
    raw = bytearray(bytes(digest[:3]) * (width * height))
    raw[: len(digest)] = digest
    return ImageRef.from_pixels(bytes(raw), width, height)


def content_words(text: str) -> list[str]:
    return [word for word in textcodec.canonicalize(text).split() if word not in STOPWORDS]


def select_words(text: str, count: int) -> str:
    return " ".join(content_words(text)[:count])


def compare_descriptions(new: str, original: str) -> str:
    """First differing content word becomes the edit suggestion; equal -> no-op."""
    new_words = content_words(new)
    original_words = content_words(original)
    for index in range(max(len(new_words), len(original_words))):
        got = new_words[index] if index < len(new_words) else None
        want = original_words[index] if index < len(original_words) else None
        if got == want:
            continue
        if got is None:
            return f"add {want}"
        if want is None:
            return f"remove {got}"
        return f"replace {got} with {want}"
    return "no change"


def build_decompression_dictionary(words: list[str]) -> dict[str, str]:
    """Invert the devowel rule over a word list; first-alphabetical wins ties."""
    mapping: dict[str, str] = {}
    for word in sorted(set(words)):
        key = textcodec.devowel_oracle(textcodec.canonicalize(word), textcodec.REPAIR)
        if key and " " not in key and key not in mapping:
            mapping[key] = word
    return mapping


def _content_block(text: str) -> str:
    if _BLOCK_SEPARATOR in text:
        return text.split(_BLOCK_SEPARATOR, 1)[1]
    return text


def default_fixtures_dir():
    return files("semcodec").joinpath("fixtures")


class MockBackend(Backend):
    """Offline backend driven entirely by fixtures and fixed rules."""

    deterministic = True

    def __init__(
        self,
        fixtures_dir: Path | None = None,
        *,
        policy: textcodec.RepairPolicy = textcodec.REPAIR,
        capabilities: BackendCapabilities = BackendCapabilities(supports_session_edit=True),
    ):
        root = fixtures_dir if fixtures_dir is not None else default_fixtures_dir()
        self._policy = policy
        self._capabilities = capabilities
        self._descriptions: dict[str, str] = {}
        descriptions_file = root.joinpath("descriptions.tsv")
        if descriptions_file.is_file():
            for line in descriptions_file.read_text(encoding="utf-8").splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                content_hash, _, description = line.partition("\t")
                self._descriptions[content_hash.strip()] = description.strip()
        words_file = root.joinpath("words.txt")
        word_list = (
            words_file.read_text(encoding="utf-8").split() if words_file.is_file() else []
        )
        self._dictionary = build_decompression_dictionary(word_list)
        # images this backend generated, mapped to the text they depict
        self._generated: dict[str, str] = {}

    @property
    def capabilities(self) -> BackendCapabilities:
        return self._capabilities

    def add_description(self, content_hash: str, description: str) -> None:
        """Register a fixture description at runtime (tests, ad-hoc images)."""
        self._descriptions[content_hash] = description

    def decompress_token(self, token: str) -> str:
        return self._dictionary.get(token, token)

    def describe(self, session: BackendSession, image: ImageRef, prompt: str) -> str:
        session.append("user", prompt, image_hash=image.content_hash)
        description = self._descriptions.get(image.content_hash)
        if description is None:
            description = self._generated.get(image.content_hash)
        if description is None:
            raise FixtureMissing(image.content_hash)
        session.append("assistant", description)
        return description

    def transform(self, session: BackendSession, instruction: str, payload: str) -> str:
        session.append("user", f"{instruction}{_BLOCK_SEPARATOR}{payload}")
        lowered = instruction.lower()
        select_match = _WORD_SELECT_RE.search(lowered)
        if select_match:
            result = select_words(payload, int(select_match.group(1)))
        elif _WORD_COMPRESS_MARKER in lowered:
            result = textcodec.devowel_oracle(textcodec.canonicalize(payload), self._policy)
        elif _COMPARE_MARKER in lowered:
            blocks = payload.split(_BLOCK_SEPARATOR)
            result = compare_descriptions(blocks[0], blocks[-1])
        elif _WORD_DECOMPRESS_MARKER in lowered:
            result = " ".join(self.decompress_token(token) for token in payload.split())
        else:
            raise UnrecognizedInstruction(f"no mock rule matches instruction: {instruction[:80]!r}")
        session.append("assistant", result)
        return result

    def generate(self, session: BackendSession, prompt: str) -> ImageRef:
        session.append("user", prompt)
        image = make_placeholder_image(prompt)
        self._generated[image.content_hash] = _content_block(prompt)
        session.append("assistant", "", image_hash=image.content_hash)
        return image

    def regenerate(self, session: BackendSession, edit: str) -> ImageRef:
        if not self._capabilities.supports_session_edit:
            raise EditUnsupported("this backend cannot edit images within a session")
        previous_hash = session.last_image_hash()
        if previous_hash is None:
            raise NoPriorImage("session holds no generated image to edit")
        session.append("user", edit)
        image = make_placeholder_image(f"{previous_hash}|{edit}")
        base = self._generated.get(previous_hash, "")
        change = _content_block(edit)
        self._generated[image.content_hash] = f"{base} {change}".strip()
        session.append("assistant", "", image_hash=image.content_hash)
        return image
