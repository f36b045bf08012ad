"""Iterative image refinement: generate, describe, compare, regenerate.

Runs a fixed number of iterations (no automated stopping condition exists
for image quality, so the budget is the contract). Each iteration describes
the current image with the same template the encoder used, asks for the
single most salient difference from the description available to the
decoder, and regenerates with that one edit. Every intermediate image is
kept in the trace: later iterations can regress, and callers may want to
pick a different one after the fact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Callable

from .backends.base import Backend, BackendSession, EditUnsupported, ImageRef

if TYPE_CHECKING:  # pragma: no cover
    from .pipeline import PipelineConfig, PromptSet, SessionTranscript

STOP_BUDGET_EXHAUSTED = "budget_exhausted"
STOP_EDIT_UNSUPPORTED = "edit_unsupported"

PROMPT_SEPARATOR = "\n\n"


@dataclass
class IterationRecord:
    """One reflect cycle: the image we looked at and the image we got back."""

    pre_image: ImageRef
    new_description: str
    edit_suggestion: str
    post_image: ImageRef

    @property
    def generated_image_hash(self) -> str:
        return self.pre_image.content_hash

    @property
    def regenerated_image_hash(self) -> str:
        return self.post_image.content_hash

    def to_dict(self) -> dict:
        return {
            "generated_image_hash": self.generated_image_hash,
            "new_description": self.new_description,
            "edit_suggestion": self.edit_suggestion,
            "regenerated_image_hash": self.regenerated_image_hash,
        }


@dataclass
class ReflectionTrace:
    iterations: list[IterationRecord]
    stop_reason: str

    def to_dict(self) -> dict:
        return {
            "iterations": [record.to_dict() for record in self.iterations],
            "stop_reason": self.stop_reason,
        }


def gate(bits: int, width: int, height: int, config: "PipelineConfig") -> bool:
    """True when the payload rate reaches the reflection threshold."""
    pixels = width * height
    if pixels <= 0:
        raise ValueError("image has no pixels")
    microbpp = Fraction(bits * 10**6, pixels)
    return microbpp >= Fraction(str(config.reflection_threshold_microbpp))


def reflect_once(
    session: BackendSession,
    current_image: ImageRef,
    original_description: str,
    prompts: "PromptSet",
    backend: Backend,
    *,
    transcript: "SessionTranscript | None" = None,
    clock: Callable[[], float] | None = None,
) -> IterationRecord:
    """Describe the current image, pick the most salient difference, regenerate."""
    if not backend.capabilities.supports_session_edit:
        raise EditUnsupported("backend cannot edit a previously generated image")
    tick = clock or (lambda: 0.0)

    new_description = backend.describe(session, current_image, prompts.describe)
    if transcript is not None:
        transcript.record(
            "reflect_describe", prompts.describe, current_image.content_hash, new_description, tick()
        )

    compare_payload = f"{new_description}{PROMPT_SEPARATOR}{original_description}"
    edit_suggestion = backend.transform(session, prompts.reflect_compare, compare_payload)
    if not edit_suggestion.strip():
        raise ValueError("backend returned an empty edit suggestion")
    if transcript is not None:
        transcript.record(
            "reflect_compare", prompts.reflect_compare, compare_payload, edit_suggestion, tick()
        )

    edit_instruction = f"{prompts.reflect_generate}{PROMPT_SEPARATOR}{edit_suggestion}"
    post_image = backend.regenerate(session, edit_instruction)
    if transcript is not None:
        transcript.record(
            "reflect_generate",
            prompts.reflect_generate,
            edit_suggestion,
            post_image.content_hash,
            tick(),
        )

    return IterationRecord(
        pre_image=current_image,
        new_description=new_description,
        edit_suggestion=edit_suggestion,
        post_image=post_image,
    )


def run_reflection(
    session: BackendSession,
    image: ImageRef,
    original_description: str,
    config: "PipelineConfig",
    backend: Backend,
    *,
    prompts: "PromptSet | None" = None,
    transcript: "SessionTranscript | None" = None,
    clock: Callable[[], float] | None = None,
) -> ReflectionTrace:
    """Exactly ``reflection_iterations`` cycles, unless edits become unsupported."""
    if prompts is None:
        from .pipeline import load_prompts

        prompts = load_prompts(config.prompt_set)
    iterations: list[IterationRecord] = []
    current = image
    for _ in range(config.reflection_iterations):
        try:
            record = reflect_once(
                session,
                current,
                original_description,
                prompts,
                backend,
                transcript=transcript,
                clock=clock,
            )
        except EditUnsupported:
            return ReflectionTrace(iterations=iterations, stop_reason=STOP_EDIT_UNSUPPORTED)
        iterations.append(record)
        current = record.post_image
    return ReflectionTrace(iterations=iterations, stop_reason=STOP_BUDGET_EXHAUSTED)
