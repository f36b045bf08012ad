"""Bitrate arithmetic, compression-region classification, and baseline ratios.

All rates are computed exactly with :class:`fractions.Fraction`; display
helpers round to two decimal microbits-per-pixel and also give a
one-significant-figure approximation for at-a-glance comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import textcodec

BITS_PER_SYMBOL = 4

STRUCTURAL = "structural"
MIXED = "mixed"
SEMANTIC = "semantic"
SUB_SEMANTIC = "sub_semantic"

REGIONS = (STRUCTURAL, MIXED, SEMANTIC, SUB_SEMANTIC)

Rate = Fraction | float | int


class ZeroPixels(Exception):
    """Rate requested over an image with no pixels."""


class ZeroBits(Exception):
    """Ratio requested against a zero-bit payload."""


@dataclass(frozen=True)
class RegionThresholds:
    """Lower bpp bound of each region; everything below semantic_min is sub-semantic."""

    structural_min: Fraction = Fraction(1, 10)
    mixed_min: Fraction = Fraction(1, 1000)
    semantic_min: Fraction = Fraction(1, 100_000)

    def __post_init__(self) -> None:
        if not self.structural_min > self.mixed_min > self.semantic_min > 0:
            raise ValueError(
                "thresholds must satisfy structural_min > mixed_min > semantic_min > 0"
            )


DEFAULT_THRESHOLDS = RegionThresholds()


@dataclass(frozen=True)
class BitrateReport:
    """Exact rate accounting for one payload.

    ``bpp * pixels == bits`` holds exactly; ``microbpp`` is ``bpp * 10**6``.
    """

    bits: int
    pixels: int
    bpp: Fraction
    microbpp: Fraction
    region: str | None = None
    baseline_ratio: Fraction | None = None

    @property
    def microbpp_display(self) -> float:
        """microbpp rounded to two decimals for printing."""
        return round(float(self.microbpp), 2)

    @property
    def microbpp_approx(self) -> float:
        """One-significant-figure microbpp, e.g. 95.37 -> 100."""
        return approx_to_one_significant(float(self.microbpp))


def approx_to_one_significant(value: float) -> float:
    """Round a positive rate to one significant figure (0 stays 0)."""
    if value == 0:
        return 0.0
    exponent = math.floor(math.log10(abs(value)))
    scale = 10.0**exponent
    return round(value / scale) * scale


def bits_of_symbols(symbol_count: int) -> int:
    """Payload bit count of a symbol string: four bits per symbol."""
    if symbol_count < 0:
        raise ValueError("symbol count must be non-negative")
    return BITS_PER_SYMBOL * symbol_count


def bpp(bits: int, width: int, height: int) -> BitrateReport:
    """Exact bits-per-pixel report (region left unclassified)."""
    pixels = width * height
    if pixels <= 0:
        raise ZeroPixels(f"image has no pixels ({width}x{height})")
    rate = Fraction(bits, pixels)
    return BitrateReport(bits=bits, pixels=pixels, bpp=rate, microbpp=rate * 10**6)


def classify_region(bpp_value: Rate, thresholds: RegionThresholds = DEFAULT_THRESHOLDS) -> str:
    """Map a bpp value onto the structural/mixed/semantic/sub-semantic bands."""
    value = Fraction(bpp_value) if not isinstance(bpp_value, Fraction) else bpp_value
    if value < 0:
        raise ValueError("bpp must be non-negative")
    if value >= thresholds.structural_min:
        return STRUCTURAL
    if value >= thresholds.mixed_min:
        return MIXED
    if value >= thresholds.semantic_min:
        return SEMANTIC
    return SUB_SEMANTIC


def baseline_ratio(our_bits: int, baseline_bits: int) -> Fraction:
    """How many times larger a baseline encoding is than ours."""
    if our_bits <= 0:
        raise ZeroBits("cannot compare against a payload with no bits")
    if baseline_bits < 0:
        raise ValueError("baseline bits must be non-negative")
    return Fraction(baseline_bits, our_bits)


def payload_report(
    symbol_count: int,
    width: int,
    height: int,
    *,
    thresholds: RegionThresholds = DEFAULT_THRESHOLDS,
    baseline_bits: int | None = None,
) -> BitrateReport:
    """Full report for a symbol payload: bits, exact rates, region, optional ratio."""
    bits = bits_of_symbols(symbol_count)
    partial = bpp(bits, width, height)
    ratio = None
    if baseline_bits is not None:
        ratio = baseline_ratio(bits, baseline_bits)
    return BitrateReport(
        bits=bits,
        pixels=partial.pixels,
        bpp=partial.bpp,
        microbpp=partial.microbpp,
        region=classify_region(partial.bpp, thresholds),
        baseline_ratio=ratio,
    )


def container_reports(
    blob: bytes, thresholds: RegionThresholds = DEFAULT_THRESHOLDS
) -> tuple[BitrateReport, BitrateReport]:
    """(payload, total) rate reports for one serialized container.

    Payload counts only the 4-bit symbols; total also charges the 13-byte
    header as transport framing.
    """
    symbols, width, height = textcodec.decode_container(blob)
    payload = payload_report(len(symbols), width, height, thresholds=thresholds)
    total_bits = len(blob) * 8
    total_partial = bpp(total_bits, width, height)
    total = BitrateReport(
        bits=total_bits,
        pixels=total_partial.pixels,
        bpp=total_partial.bpp,
        microbpp=total_partial.microbpp,
        region=classify_region(total_partial.bpp, thresholds),
    )
    return payload, total


def format_report(report: BitrateReport, label: str = "payload") -> str:
    """Single-line plain-text rendering of a report."""
    parts = [
        f"{label}: {report.bits} bits over {report.pixels} px",
        f"{report.microbpp_display} µbpp (≈{report.microbpp_approx:g} µbpp)",
    ]
    if report.region is not None:
        parts.append(f"region={report.region}")
    if report.baseline_ratio is not None:
        parts.append(f"baseline_ratio={float(report.baseline_ratio):.2f}x")
    return "  ".join(parts)
