"""Command-line surface: encode, decode, roundtrip, reflect, inspect, report.

Option precedence is flag > config file > built-in default; ``--dump-config``
prints the effective configuration as JSON, which can be fed back via
``--config``. Exit codes: 0 success, 1 I/O or backend failure, 2 strict-mode
alphabet violation, 3 malformed container.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from PIL import Image

from . import metrics, pipeline, textcodec
from . import report as report_mod
from .backends import BackendError, ImageRef, create_backend

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ILLEGAL_SYMBOL = 2
EXIT_BAD_CONTAINER = 3

TARGET_SIZE = 1024

CONFIG_DEFAULTS = {
    "backend": "mock",
    "words": 25,
    "reflect": 2,
    "reflect_threshold": 500.0,
    "policy": "repair",
    "tolerance": 0.10,
    "prompts": None,
    "fixtures": None,
    "jobs": 1,
}

_POLICIES = {"strict": textcodec.STRICT, "repair": textcodec.REPAIR}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=["mock", "http"], help="model backend")
    common.add_argument("--words", type=int, metavar="K", help="target word count")
    common.add_argument("--reflect", type=int, metavar="R", help="reflection iterations")
    common.add_argument(
        "--reflect-threshold", type=float, metavar="MICROBPP", dest="reflect_threshold",
        help="minimum payload rate before reflection runs",
    )
    common.add_argument("--policy", choices=["strict", "repair"], help="alphabet repair policy")
    common.add_argument("--tolerance", type=float, help="word-count tolerance fraction")
    common.add_argument("--prompts", metavar="DIR", help="prompt template directory")
    common.add_argument("--fixtures", metavar="DIR", help="mock fixtures directory")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--jobs", type=int, metavar="N", help="concurrent per-file pipelines")
    common.add_argument("--config", metavar="FILE", help="JSON config file")
    common.add_argument(
        "--dump-config", action="store_true",
        help="print the effective configuration as JSON and exit",
    )

    parser = argparse.ArgumentParser(prog="semcodec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_encode = sub.add_parser("encode", parents=[common], help="image -> .smc container")
    p_encode.add_argument("paths", nargs="*", metavar="IMAGE")

    p_decode = sub.add_parser("decode", parents=[common], help=".smc container -> image")
    p_decode.add_argument("paths", nargs="*", metavar="CONTAINER")

    p_round = sub.add_parser("roundtrip", parents=[common], help="encode then decode")
    p_round.add_argument("paths", nargs="*", metavar="IMAGE")

    p_reflect = sub.add_parser(
        "reflect", parents=[common],
        help="decode with the reflection gate bypassed (threshold forced to 0)",
    )
    p_reflect.add_argument("paths", nargs="*", metavar="CONTAINER")

    p_inspect = sub.add_parser("inspect", help="print container fields (no backend)")
    p_inspect.add_argument("paths", nargs="+", metavar="CONTAINER")

    p_report = sub.add_parser("report", parents=[common], help="rate table across containers")
    p_report.add_argument("paths", nargs="*", metavar="CONTAINER")
    p_report.add_argument("--baseline", metavar="FILE", help="baseline file for size ratios")

    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (flag wins)."""
    effective = dict(CONFIG_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        unknown = set(loaded) - set(CONFIG_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        effective.update(loaded)
    for key in CONFIG_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            effective[key] = value
    return effective


def make_pipeline_config(opts: dict) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        target_word_count=opts["words"],
        word_count_tolerance=opts["tolerance"],
        reflection_iterations=opts["reflect"],
        reflection_threshold_microbpp=opts["reflect_threshold"],
        repair_policy=_POLICIES[opts["policy"]],
        prompt_set=Path(opts["prompts"]) if opts["prompts"] else None,
    )


def make_backend(opts: dict):
    fixtures = Path(opts["fixtures"]) if opts["fixtures"] else None
    return create_backend(opts["backend"], fixtures_dir=fixtures)


def center_crop_1024(path: Path | str) -> tuple[ImageRef, str]:
    """Largest centered square, resampled to 1024x1024. Returns (image, audit note)."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
    width, height = rgb.size
    if (width, height) == (TARGET_SIZE, TARGET_SIZE):
        return ImageRef.from_pixels(rgb.tobytes(), width, height), "none (already 1024x1024)"
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    square = rgb.crop((left, top, left + side, top + side))
    note = f"center_crop {width}x{height} -> {side}x{side}"
    if side != TARGET_SIZE:
        square = square.resize((TARGET_SIZE, TARGET_SIZE), Image.LANCZOS)
        note += f" -> resample {TARGET_SIZE}x{TARGET_SIZE}"
    return ImageRef.from_pixels(square.tobytes(), TARGET_SIZE, TARGET_SIZE), note


def classify_error(exc: Exception) -> int:
    if isinstance(exc, textcodec.IllegalSymbol):
        return EXIT_ILLEGAL_SYMBOL
    if isinstance(exc, textcodec.CodecError):
        return EXIT_BAD_CONTAINER
    return EXIT_FAILURE


_PER_FILE_ERRORS = (textcodec.CodecError, BackendError, pipeline.PipelineError, OSError, ValueError)


def run_per_file(paths: list[str], worker, jobs: int) -> int:
    """Apply worker to each path, print its lines, keep the first failure code."""

    def safe(path):
        try:
            return EXIT_OK, worker(path)
        except _PER_FILE_ERRORS as exc:
            return classify_error(exc), [f"error: {path}: {type(exc).__name__}: {exc}"]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(safe, paths))
    else:
        results = [safe(path) for path in paths]

    exit_code = EXIT_OK
    for code, lines in results:
        stream = sys.stdout if code == EXIT_OK else sys.stderr
        for line in lines:
            print(line, file=stream)
        if code != EXIT_OK and exit_code == EXIT_OK:
            exit_code = code
    return exit_code


def _summary_line(path: str, container: bytes) -> str:
    payload, _ = metrics.container_reports(container)
    symbols = payload.bits // metrics.BITS_PER_SYMBOL
    return (
        f"{path}: symbols={symbols} µbpp={payload.microbpp_display:g} "
        f"region={payload.region}"
    )


def _write_encode_artifacts(out_dir: Path, stem: str, result: pipeline.EncodeResult) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    smc_path = out_dir / f"{stem}.smc"
    smc_path.write_bytes(result.container)
    result.transcript.save(out_dir / f"{stem}.encode.transcript.json")
    payload, total = metrics.container_reports(result.container)
    report_text = "\n".join(
        [metrics.format_report(payload, "payload"), metrics.format_report(total, "total")]
    )
    (out_dir / f"{stem}.report.txt").write_text(report_text + "\n", encoding="utf-8")
    return [_summary_line(str(smc_path), result.container)]


def _write_decode_artifacts(
    out_dir: Path, stem: str, decoded: pipeline.DecodeResult
) -> list[str]:
    out_dir.mkdir(parents=True, exist_ok=True)
    if decoded.reflection_trace is not None:
        decoded.transcript.metadata["reflection"] = decoded.reflection_trace.to_dict()
    image_path = out_dir / f"{stem}.decoded.png"
    decoded.image.save(image_path)
    decoded.transcript.save(out_dir / f"{stem}.decode.transcript.json")
    lines = [f"{image_path}: image {decoded.image.width}x{decoded.image.height}"]
    if decoded.reflection_trace is not None:
        for index, record in enumerate(decoded.reflection_trace.iterations, start=1):
            record.pre_image.save(out_dir / f"{stem}.reflect_{index}_pre.png")
            record.post_image.save(out_dir / f"{stem}.reflect_{index}_post.png")
        lines.append(
            f"{stem}: reflection ran {len(decoded.reflection_trace.iterations)} iteration(s), "
            f"stop_reason={decoded.reflection_trace.stop_reason}"
        )
    return lines


def cmd_encode(paths: list[str], opts: dict) -> int:
    backend = make_backend(opts)
    config = make_pipeline_config(opts)
    out_dir = Path(opts["out"])
    prompts = pipeline.load_prompts(config.prompt_set)

    def worker(path):
        image, note = center_crop_1024(path)
        result = pipeline.encode_image(image, config, backend, prompts=prompts)
        result.transcript.metadata["preprocess"] = note
        return _write_encode_artifacts(out_dir, Path(path).stem, result)

    return run_per_file(paths, worker, opts["jobs"])


def cmd_decode(paths: list[str], opts: dict, *, force_reflection: bool = False) -> int:
    backend = make_backend(opts)
    config = make_pipeline_config(opts)
    if force_reflection:
        if config.reflection_iterations < 1:
            print("error: reflect needs --reflect >= 1", file=sys.stderr)
            return EXIT_FAILURE
        config.reflection_threshold_microbpp = 0.0
    out_dir = Path(opts["out"])
    prompts = pipeline.load_prompts(config.prompt_set)

    def worker(path):
        blob = Path(path).read_bytes()
        decoded = pipeline.decode_container(blob, config, backend, prompts=prompts)
        return _write_decode_artifacts(out_dir, Path(path).stem, decoded)

    return run_per_file(paths, worker, opts["jobs"])


def cmd_roundtrip(paths: list[str], opts: dict) -> int:
    backend = make_backend(opts)
    config = make_pipeline_config(opts)
    out_dir = Path(opts["out"])
    prompts = pipeline.load_prompts(config.prompt_set)

    def worker(path):
        image, note = center_crop_1024(path)
        encoded, decoded = pipeline.roundtrip(image, config, backend, prompts=prompts)
        encoded.transcript.metadata["preprocess"] = note
        stem = Path(path).stem
        lines = _write_encode_artifacts(out_dir, stem, encoded)
        lines += _write_decode_artifacts(out_dir, stem, decoded)
        return lines

    return run_per_file(paths, worker, opts["jobs"])


def cmd_inspect(paths: list[str]) -> int:
    def worker(path):
        blob = Path(path).read_bytes()
        symbols, width, height = textcodec.decode_container(blob)
        payload, total = metrics.container_reports(blob)
        return [
            f"{path}:",
            f"  magic={textcodec.MAGIC.decode()} version={textcodec.VERSION} "
            f"width={width} height={height} symbol_count={len(symbols)}",
            f'  text: "{textcodec.from_symbols(symbols)}"',
            f"  {metrics.format_report(payload, 'payload')}",
            f"  {metrics.format_report(total, 'total')}",
        ]

    return run_per_file(paths, worker, jobs=1)


def cmd_report(paths: list[str], opts: dict, baseline: str | None) -> int:
    baseline_bits = None
    if baseline:
        baseline_bits = Path(baseline).stat().st_size * 8
    rows, errors = report_mod.gather_rows(paths, baseline_bits=baseline_bits)
    for path, message in errors:
        print(f"error: {path}: {message}", file=sys.stderr)
    if not rows:
        return EXIT_BAD_CONTAINER if errors else EXIT_FAILURE
    print(report_mod.format_table(rows))
    print(report_mod.rows_to_json(rows))
    out = opts.get("out")
    if out and out != ".":
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        report_mod.write_csv(rows, out_dir / "report.csv")
        (out_dir / "report.json").write_text(report_mod.rows_to_json(rows) + "\n", encoding="utf-8")
        report_mod.render_figure(rows, out_dir / "report.png")
        print(f"wrote {out_dir / 'report.csv'}, report.json, report.png")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "inspect":
        return cmd_inspect(args.paths)

    try:
        opts = resolve_options(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: bad configuration: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    if getattr(args, "dump_config", False):
        print(json.dumps(opts, indent=2, sort_keys=True))
        return EXIT_OK

    opts["out"] = args.out  # per-invocation, never part of the config file

    if not args.paths:
        parser.error(f"{args.command}: at least one input path is required")

    try:
        if args.command == "encode":
            return cmd_encode(args.paths, opts)
        if args.command == "decode":
            return cmd_decode(args.paths, opts)
        if args.command == "reflect":
            return cmd_decode(args.paths, opts, force_reflection=True)
        if args.command == "roundtrip":
            return cmd_roundtrip(args.paths, opts)
        if args.command == "report":
            return cmd_report(args.paths, opts, args.baseline)
    except textcodec.IllegalSymbol as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ILLEGAL_SYMBOL
    except textcodec.CodecError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BAD_CONTAINER
    except (BackendError, pipeline.PipelineError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
