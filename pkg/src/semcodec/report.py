"""Rate-report rendering across containers: table, CSV, JSON, and figure."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import metrics, textcodec


@dataclass
class ReportRow:
    path: str
    symbols: int
    bits: int
    microbpp: Fraction
    total_microbpp: Fraction
    region: str
    baseline_ratio: Fraction | None = None

    @property
    def microbpp_display(self) -> float:
        return round(float(self.microbpp), 2)

    @property
    def total_microbpp_display(self) -> float:
        return round(float(self.total_microbpp), 2)


def container_row(
    path: Path | str,
    *,
    baseline_bits: int | None = None,
    thresholds: metrics.RegionThresholds = metrics.DEFAULT_THRESHOLDS,
) -> ReportRow:
    """Rate row for one ``.smc`` file; raises textcodec errors on malformed input."""
    blob = Path(path).read_bytes()
    symbols, _, _ = textcodec.decode_container(blob)
    payload, total = metrics.container_reports(blob, thresholds)
    ratio = None
    if baseline_bits is not None and payload.bits > 0:
        ratio = metrics.baseline_ratio(payload.bits, baseline_bits)
    return ReportRow(
        path=str(path),
        symbols=len(symbols),
        bits=payload.bits,
        microbpp=payload.microbpp,
        total_microbpp=total.microbpp,
        region=payload.region,
        baseline_ratio=ratio,
    )


def gather_rows(
    paths: list[Path | str], *, baseline_bits: int | None = None
) -> tuple[list[ReportRow], list[tuple[str, str]]]:
    """Rows sorted by rate descending, plus (path, message) for unreadable files."""
    rows = []
    errors = []
    for path in paths:
        try:
            rows.append(container_row(path, baseline_bits=baseline_bits))
        except (OSError, textcodec.CodecError) as exc:
            errors.append((str(path), f"{type(exc).__name__}: {exc}"))
    rows.sort(key=lambda row: row.microbpp, reverse=True)
    return rows, errors


def format_table(rows: list[ReportRow]) -> str:
    headers = ["file", "symbols", "bits", "µbpp", "region"]
    if any(row.baseline_ratio is not None for row in rows):
        headers.append("baseline_ratio")
    cells = []
    for row in rows:
        line = [
            row.path,
            str(row.symbols),
            str(row.bits),
            f"{row.microbpp_display:.2f}",
            row.region,
        ]
        if "baseline_ratio" in headers:
            ratio = f"{float(row.baseline_ratio):.2f}x" if row.baseline_ratio is not None else "-"
            line.append(ratio)
        cells.append(line)
    widths = [max(len(header), *(len(line[i]) for line in cells)) if cells else len(header)
              for i, header in enumerate(headers)]
    render = lambda line: "  ".join(text.ljust(width) for text, width in zip(line, widths)).rstrip()
    out = [render(headers)]
    out.extend(render(line) for line in cells)
    return "\n".join(out)


def rows_to_records(rows: list[ReportRow]) -> list[dict]:
    records = []
    for row in rows:
        record = {
            "file": row.path,
            "symbols": row.symbols,
            "bits": row.bits,
            "microbpp": float(row.microbpp),
            "microbpp_approx": metrics.approx_to_one_significant(float(row.microbpp)),
            "total_microbpp": float(row.total_microbpp),
            "region": row.region,
        }
        if row.baseline_ratio is not None:
            record["baseline_ratio"] = float(row.baseline_ratio)
        records.append(record)
    return records


def rows_to_json(rows: list[ReportRow]) -> str:
    return json.dumps(rows_to_records(rows), indent=2)


def write_csv(rows: list[ReportRow], path: Path | str) -> Path:
    path = Path(path)
    records = rows_to_records(rows)
    fields = ["file", "symbols", "bits", "microbpp", "microbpp_approx",
              "total_microbpp", "region", "baseline_ratio"]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields, restval="")
        writer.writeheader()
        writer.writerows(records)
    return path


# (label, band color) keyed by region; bands drawn in microbpp space
_BAND_STYLE = {
    metrics.STRUCTURAL: "#c6dbef",
    metrics.MIXED: "#9ecae1",
    metrics.SEMANTIC: "#6baed6",
    metrics.SUB_SEMANTIC: "#deebf7",
}


def render_figure(
    rows: list[ReportRow],
    path: Path | str,
    *,
    thresholds: metrics.RegionThresholds = metrics.DEFAULT_THRESHOLDS,
) -> Path:
    """Log-rate chart of every container against the region bands, saved to a file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    structural = float(thresholds.structural_min) * 1e6
    mixed = float(thresholds.mixed_min) * 1e6
    semantic = float(thresholds.semantic_min) * 1e6

    values = [max(float(row.microbpp), semantic / 100) for row in rows]
    lo = min([semantic / 10] + values) / 2
    hi = max([structural * 10] + values) * 2

    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.5 * len(rows) + 1.5)))
    bands = [
        (lo, semantic, metrics.SUB_SEMANTIC),
        (semantic, mixed, metrics.SEMANTIC),
        (mixed, structural, metrics.MIXED),
        (structural, hi, metrics.STRUCTURAL),
    ]
    for left, right, region in bands:
        ax.axvspan(left, right, color=_BAND_STYLE[region], alpha=0.5)
        ax.text(
            (left * right) ** 0.5, 1.02, region.replace("_", "-"),
            transform=ax.get_xaxis_transform(), ha="center", va="bottom", fontsize=8,
        )
    positions = range(len(rows))
    ax.scatter(values, positions, color="#08306b", zorder=3)
    for value, position, row in zip(values, positions, rows):
        ax.annotate(
            f"{row.microbpp_display:.2f} µbpp", (value, position),
            textcoords="offset points", xytext=(6, -3), fontsize=8,
        )
    ax.set_yticks(list(positions))
    ax.set_yticklabels([Path(row.path).name for row in rows], fontsize=8)
    ax.set_xscale("log")
    ax.set_xlim(lo, hi)
    ax.invert_yaxis()
    ax.set_xlabel("payload rate (µbpp, log scale)")
    ax.set_title("container bitrates by compression region")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
