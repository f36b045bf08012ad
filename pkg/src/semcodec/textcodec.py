"""Deterministic text layer of the semantic codec.

Everything here is pure and offline: the fixed 16-symbol alphabet, text
canonicalization, repair of out-of-alphabet characters, 4-bit nibble
packing, and the versioned ``.smc`` container format.

Container layout (all integers big-endian)::

    offset  size  field
    0       4     magic        b"SMC1"
    4       1     version      1
    5       2     width        pixels, > 0
    7       2     height       pixels, > 0
    9       4     symbol_count number of 4-bit symbols in payload
    13      ...   payload      ceil(symbol_count / 2) bytes, two symbols
                               per byte, first symbol in the high nibble,
                               trailing unused nibble zero
"""

from __future__ import annotations

import re
import struct
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping

# The 16 symbols carried by the codec: space plus the fifteen permitted
# consonants, in this fixed order. Index in this string == wire symbol value.
ALPHABET = " ntsrhldcmfgpbkv"

_CHAR_TO_INDEX = {char: index for index, char in enumerate(ALPHABET)}

VOWELS = frozenset("aeiou")

# Consonants outside the alphabet that repair mode rewrites to a nearby
# in-alphabet consonant. ``None`` means the character is dropped.
DEFAULT_SUBSTITUTIONS: Mapping[str, str | None] = {
    "w": "v",
    "j": "g",
    "q": "k",
    "x": "k",
    "z": "s",
    "y": None,
}

MAGIC = b"SMC1"
VERSION = 1
_HEADER = struct.Struct(">4sBHHI")
HEADER_SIZE = _HEADER.size  # 13 bytes

MAX_DIMENSION = 0xFFFF

_WHITESPACE_RE = re.compile(r"\s+")

SymbolString = tuple[int, ...]


class CodecError(Exception):
    """Base class for text-codec and container errors."""


class IllegalSymbol(CodecError):
    """Strict-mode mapping hit a character outside the alphabet."""

    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"illegal symbol {char!r} at position {position}")


class LengthMismatch(CodecError):
    """Payload byte length inconsistent with the claimed symbol count."""


class BadMagic(CodecError):
    """Container does not start with the SMC1 magic."""


class UnsupportedVersion(CodecError):
    """Container declares a version this codec does not speak."""


class Truncated(CodecError):
    """Container is shorter than its header or declared payload."""


class DimensionOverflow(CodecError):
    """Image dimension does not fit the 16-bit header field."""


@dataclass(frozen=True)
class RepairPolicy:
    """How to handle text that violates the alphabet.

    ``strict`` raises :class:`IllegalSymbol` on the first out-of-alphabet
    character; ``repair`` rewrites known stray consonants through the
    substitution table and silently drops everything else (vowels included),
    re-collapsing whitespace afterwards.
    """

    mode: str = "repair"
    substitutions: Mapping[str, str | None] = field(
        default_factory=lambda: dict(DEFAULT_SUBSTITUTIONS)
    )

    def __post_init__(self) -> None:
        if self.mode not in ("strict", "repair"):
            raise ValueError(f"unknown repair mode: {self.mode!r}")
        for source, target in self.substitutions.items():
            if target is not None and target not in _CHAR_TO_INDEX:
                raise ValueError(
                    f"substitution target {target!r} (for {source!r}) is not in the alphabet"
                )


STRICT = RepairPolicy(mode="strict")
REPAIR = RepairPolicy(mode="repair")


def canonicalize(text: str) -> str:
    """Normalize free-form text: lowercase, strip punctuation, collapse whitespace.

    Total and idempotent; safe on any Unicode input.

    >>> canonicalize("Indian, Traditional Arch!")
    'indian traditional arch'
    """
    lowered = text.lower()
    kept = []
    for char in lowered:
        if unicodedata.category(char).startswith("P"):
            continue
        kept.append(char)
    return _WHITESPACE_RE.sub(" ", "".join(kept)).strip()


def _repair_text(text: str, policy: RepairPolicy) -> str:
    """Rewrite ``text`` so every character is in the alphabet (repair semantics)."""
    out = []
    for char in text:
        if char in _CHAR_TO_INDEX:
            out.append(char)
            continue
        if policy.mode == "repair":
            replacement = policy.substitutions.get(char)
            if replacement is not None:
                out.append(replacement)
        # vowels and anything else unmapped are dropped
    return _WHITESPACE_RE.sub(" ", "".join(out)).strip()


def to_symbols(text: str, policy: RepairPolicy = REPAIR) -> SymbolString:
    """Map canonical text to alphabet indices.

    Strict mode errors on the first out-of-alphabet character; repair mode
    substitutes or drops it per the policy table.
    """
    if policy.mode == "strict":
        symbols = []
        for position, char in enumerate(text):
            index = _CHAR_TO_INDEX.get(char)
            if index is None:
                raise IllegalSymbol(position, char)
            symbols.append(index)
        return tuple(symbols)
    repaired = _repair_text(text, policy)
    return tuple(_CHAR_TO_INDEX[char] for char in repaired)


def from_symbols(symbols: Iterable[int]) -> str:
    """Exact inverse of :func:`to_symbols` on alphabet-only text."""
    chars = []
    for position, symbol in enumerate(symbols):
        if not 0 <= symbol <= 15:
            raise ValueError(f"symbol {symbol} at position {position} outside [0, 15]")
        chars.append(ALPHABET[symbol])
    return "".join(chars)


def pack(symbols: Iterable[int]) -> bytes:
    """Pack 4-bit symbols two per byte, first symbol in the high nibble.

    Odd lengths are padded with a zero nibble; the container's symbol count
    disambiguates on unpack.

    >>> pack([1, 2]).hex()
    '12'
    >>> pack([15]).hex()
    'f0'
    """
    seq = tuple(symbols)
    for position, symbol in enumerate(seq):
        if not 0 <= symbol <= 15:
            raise ValueError(f"symbol {symbol} at position {position} outside [0, 15]")
    packed = bytearray((len(seq) + 1) // 2)
    for position, symbol in enumerate(seq):
        byte_index, high = divmod(position, 2)
        if high == 0:
            packed[byte_index] |= symbol << 4
        else:
            packed[byte_index] |= symbol
    return bytes(packed)


def unpack(data: bytes, symbol_count: int) -> SymbolString:
    """Inverse of :func:`pack`: recover ``symbol_count`` symbols from packed bytes."""
    if symbol_count < 0:
        raise ValueError("symbol_count must be non-negative")
    expected = (symbol_count + 1) // 2
    if len(data) != expected:
        raise LengthMismatch(
            f"payload is {len(data)} bytes but {symbol_count} symbols need {expected}"
        )
    symbols = []
    for position in range(symbol_count):
        byte = data[position // 2]
        symbols.append(byte >> 4 if position % 2 == 0 else byte & 0x0F)
    return tuple(symbols)


def encode_container(symbols: Iterable[int], width: int, height: int) -> bytes:
    """Serialize symbols plus image dimensions into the ``.smc`` wire format."""
    seq = tuple(symbols)
    for name, value in (("width", width), ("height", height)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
        if value > MAX_DIMENSION:
            raise DimensionOverflow(f"{name} {value} exceeds 16-bit range")
    header = _HEADER.pack(MAGIC, VERSION, width, height, len(seq))
    return header + pack(seq)


def decode_container(blob: bytes) -> tuple[SymbolString, int, int]:
    """Parse an ``.smc`` container back into (symbols, width, height).

    Exact inverse of :func:`encode_container` on valid input; errors name the
    first violated field.
    """
    if len(blob) < HEADER_SIZE:
        raise Truncated(f"header needs {HEADER_SIZE} bytes, got {len(blob)}")
    magic, version, width, height, symbol_count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"magic is {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported (expected {VERSION})")
    if width == 0 or height == 0:
        raise CodecError(f"header declares zero dimension ({width}x{height})")
    payload = blob[HEADER_SIZE:]
    expected = (symbol_count + 1) // 2
    if len(payload) < expected:
        raise Truncated(
            f"payload needs {expected} bytes for {symbol_count} symbols, got {len(payload)}"
        )
    if len(payload) > expected:
        raise LengthMismatch(f"{len(payload) - expected} trailing bytes after payload")
    return unpack(payload, symbol_count), width, height


def devowel_oracle(text: str, policy: RepairPolicy = REPAIR) -> str:
    """Rule-based character compression: strip vowels, then repair to the alphabet.

    A deterministic stand-in for model-driven character compression, used by
    the mock backend and by tests. Never touches the live-model path.

    >>> devowel_oracle("indian traditional arch")
    'ndn trdtnl rch'
    """
    devoweled = "".join(char for char in text if char not in VOWELS)
    return _repair_text(devoweled, policy)
