"""Encoder and decoder stage orchestration.

The encoder runs describe -> word select -> word compress in one fresh
session, repairs and packs the result into a container carrying the image
dimensions. The decoder unpacks, decompresses, and generates in a second
session that shares nothing with the first except the container bytes;
when the payload clears the reflection gate, the reflection controller
takes over the same decoder session.

Every stage is recorded in a :class:`SessionTranscript`. With a
deterministic backend the transcript timestamps come from a logical step
counter, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Callable

from . import metrics, reflection, textcodec
from .backends.base import Backend, BackendSession, ImageRef

ENCODE_STAGES = ("describe", "word_select", "word_compress")
DECODE_STAGES = ("word_decompress", "generate")
REFLECTION_SKIPPED = "reflection_skipped"

SKIP_BELOW_THRESHOLD = "below_threshold"
SKIP_EDIT_UNSUPPORTED = "edit_unsupported"
SKIP_ZERO_ITERATIONS = "zero_iterations"

TEMPLATE_NAMES = (
    "describe",
    "word_select",
    "word_compress",
    "word_decompress",
    "generate",
    "reflect_compare",
    "reflect_generate",
)

# Convention for single-prompt operations: template, blank line, content.
PROMPT_SEPARATOR = "\n\n"


class PipelineError(Exception):
    pass


class MissingTemplate(PipelineError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"prompt template {name!r} not found")


class MissingPlaceholder(PipelineError):
    def __init__(self, template: str, placeholder: str):
        self.template = template
        self.placeholder = placeholder
        super().__init__(f"template {template!r} lacks required placeholder {placeholder!r}")


class SessionHygieneError(PipelineError):
    """Decoder transcript contains encoder text beyond the payload."""


@dataclass(frozen=True)
class PromptSet:
    describe: str
    word_select: str
    word_compress: str
    word_decompress: str
    generate: str
    reflect_compare: str
    reflect_generate: str


def default_prompts_dir():
    return files("semcodec").joinpath("prompts")


def load_prompts(directory: Path | str | None = None) -> PromptSet:
    """Load the stage templates from a directory of ``<name>.txt`` files."""
    root = Path(directory) if directory is not None else default_prompts_dir()
    texts = {}
    for name in TEMPLATE_NAMES:
        candidate = root.joinpath(f"{name}.txt")
        if not candidate.is_file():
            raise MissingTemplate(name)
        texts[name] = candidate.read_text(encoding="utf-8").strip()
    if "{K}" not in texts["word_select"]:
        raise MissingPlaceholder("word_select", "{K}")
    return PromptSet(**texts)


@dataclass
class PipelineConfig:
    """Tunable knobs shared by encoder, decoder, and reflection."""

    target_word_count: int = 25
    word_count_tolerance: float = 0.10
    reflection_iterations: int = 2
    reflection_threshold_microbpp: float = 500
    repair_policy: textcodec.RepairPolicy = textcodec.REPAIR
    prompt_set: Path | None = None

    def __post_init__(self) -> None:
        if self.target_word_count < 1:
            raise ValueError("target_word_count must be at least 1")
        if not 0 <= self.word_count_tolerance < 1:
            raise ValueError("word_count_tolerance must be in [0, 1)")
        if self.reflection_iterations < 0:
            raise ValueError("reflection_iterations must be non-negative")
        if self.reflection_threshold_microbpp < 0:
            raise ValueError("reflection_threshold_microbpp must be non-negative")


@dataclass
class StageRecord:
    name: str
    prompt_text: str
    input_text: str
    output_text: str
    timestamp: float


@dataclass
class SessionTranscript:
    """Ordered record of every stage in one encode or decode session."""

    session_id: str
    stages: list[StageRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def record(
        self, name: str, prompt_text: str, input_text: str, output_text: str, timestamp: float
    ) -> None:
        if self.stages and timestamp < self.stages[-1].timestamp:
            raise ValueError("stage timestamps must be non-decreasing")
        self.stages.append(StageRecord(name, prompt_text, input_text, output_text, timestamp))

    def stage_names(self) -> list[str]:
        return [stage.name for stage in self.stages]

    def stage_texts(self) -> set[str]:
        """All non-empty stage inputs and outputs (used for hygiene checks)."""
        texts = set()
        for stage in self.stages:
            for text in (stage.input_text, stage.output_text):
                if text:
                    texts.add(text)
        return texts

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "stages": [
                {
                    "name": stage.name,
                    "prompt": stage.prompt_text,
                    "input": stage.input_text,
                    "output": stage.output_text,
                    "timestamp": stage.timestamp,
                }
                for stage in self.stages
            ],
            "warnings": list(self.warnings),
            "metadata": dict(self.metadata),
        }

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        return path


@dataclass
class EncodeResult:
    container: bytes
    description: str
    selected_words: str
    compressed_text: str
    transcript: SessionTranscript
    report: metrics.BitrateReport

    @property
    def intermediate(self) -> dict:
        return {
            "description": self.description,
            "selected_words": self.selected_words,
            "compressed_text": self.compressed_text,
        }


@dataclass
class DecodeResult:
    image: ImageRef
    decompressed_text: str
    expanded_prompt: str
    transcript: SessionTranscript
    reflection_trace: reflection.ReflectionTrace | None = None


def make_clock(backend: Backend, clock: Callable[[], float] | None) -> Callable[[], float]:
    """Wall clock normally; a logical step counter for deterministic backends."""
    if clock is not None:
        return clock
    if getattr(backend, "deterministic", False):
        counter = iter(range(10**9))
        return lambda: float(next(counter))
    return time.time


def encode_image(
    image: ImageRef,
    config: PipelineConfig,
    backend: Backend,
    *,
    prompts: PromptSet | None = None,
    clock: Callable[[], float] | None = None,
) -> EncodeResult:
    """Describe -> select K words -> compress characters -> pack a container."""
    prompts = prompts or load_prompts(config.prompt_set)
    tick = make_clock(backend, clock)
    session = BackendSession("encoder")
    transcript = SessionTranscript(session_id=session.session_id)

    description = backend.describe(session, image, prompts.describe)
    transcript.record("describe", prompts.describe, image.content_hash, description, tick())

    select_instruction = prompts.word_select.replace("{K}", str(config.target_word_count))
    selected = backend.transform(session, select_instruction, description)
    transcript.record("word_select", select_instruction, description, selected, tick())

    requested = config.target_word_count
    got = len(selected.split())
    deviation = abs(got - requested) / requested
    if deviation > config.word_count_tolerance:
        transcript.warnings.append(
            f"WordBudgetViolation: requested {requested} words, got {got} "
            f"({deviation:.1%} exceeds {config.word_count_tolerance:.0%} tolerance)"
        )

    compressed_raw = backend.transform(session, prompts.word_compress, selected)
    transcript.record("word_compress", prompts.word_compress, selected, compressed_raw, tick())

    canonical = textcodec.canonicalize(compressed_raw)
    symbols = textcodec.to_symbols(canonical, config.repair_policy)
    compressed_text = textcodec.from_symbols(symbols)
    container = textcodec.encode_container(symbols, image.width, image.height)
    report = metrics.payload_report(len(symbols), image.width, image.height)

    return EncodeResult(
        container=container,
        description=description,
        selected_words=selected,
        compressed_text=compressed_text,
        transcript=transcript,
        report=report,
    )


def decode_container(
    container_bytes: bytes,
    config: PipelineConfig,
    backend: Backend,
    *,
    prompts: PromptSet | None = None,
    clock: Callable[[], float] | None = None,
) -> DecodeResult:
    """Unpack -> decompress words -> generate, then reflect when gated in."""
    prompts = prompts or load_prompts(config.prompt_set)
    tick = make_clock(backend, clock)
    symbols, width, height = textcodec.decode_container(container_bytes)
    payload_text = textcodec.from_symbols(symbols)

    session = BackendSession("decoder")
    transcript = SessionTranscript(session_id=session.session_id)

    decompressed = backend.transform(session, prompts.word_decompress, payload_text)
    transcript.record("word_decompress", prompts.word_decompress, payload_text, decompressed, tick())

    expanded_prompt = f"{prompts.generate}{PROMPT_SEPARATOR}{decompressed}"
    image = backend.generate(session, expanded_prompt)
    transcript.record("generate", prompts.generate, decompressed, image.content_hash, tick())

    bits = metrics.bits_of_symbols(len(symbols))
    trace = None
    skip_reason = None
    if config.reflection_iterations == 0:
        skip_reason = SKIP_ZERO_ITERATIONS
    elif not reflection.gate(bits, width, height, config):
        skip_reason = SKIP_BELOW_THRESHOLD
    elif not backend.capabilities.supports_session_edit:
        skip_reason = SKIP_EDIT_UNSUPPORTED

    if skip_reason is not None:
        transcript.record(REFLECTION_SKIPPED, "", "", skip_reason, tick())
    else:
        trace = reflection.run_reflection(
            session,
            image,
            decompressed,
            config,
            backend,
            prompts=prompts,
            transcript=transcript,
            clock=tick,
        )
        if trace.iterations:
            image = trace.iterations[-1].post_image

    return DecodeResult(
        image=image,
        decompressed_text=decompressed,
        expanded_prompt=expanded_prompt,
        transcript=transcript,
        reflection_trace=trace,
    )


def shared_stage_texts(
    encoder: SessionTranscript, decoder: SessionTranscript, allowed: set[str]
) -> set[str]:
    """Stage texts present in both transcripts, minus the permitted payload forms."""
    return (encoder.stage_texts() & decoder.stage_texts()) - allowed


def roundtrip(
    image: ImageRef,
    config: PipelineConfig,
    backend: Backend,
    *,
    prompts: PromptSet | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[EncodeResult, DecodeResult]:
    """Encode then decode with two independent sessions, enforcing hygiene."""
    prompts = prompts or load_prompts(config.prompt_set)
    encoded = encode_image(image, config, backend, prompts=prompts, clock=clock)
    decoded = decode_container(encoded.container, config, backend, prompts=prompts, clock=clock)
    leaked = shared_stage_texts(
        encoded.transcript, decoded.transcript, allowed={encoded.compressed_text}
    )
    if leaked:
        raise SessionHygieneError(
            f"decoder transcript shares non-payload text with encoder: {sorted(leaked)[:3]!r}"
        )
    return encoded, decoded
