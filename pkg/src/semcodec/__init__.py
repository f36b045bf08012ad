"""Ultra-low-bitrate semantic image codec.

Images are compressed to a handful of 4-bit characters: a vision model
describes the picture, the most reconstruction-relevant words are kept,
vowels are stripped, and the survivors are packed into a tiny versioned
container. Decoding expands the characters back to text and hands it to an
image generator, optionally polishing the result with an iterative
reflection loop. All model calls sit behind pluggable backends; the bundled
mock backend makes every pipeline byte-reproducible offline.
"""

from . import metrics, reflection, textcodec
from .backends import Backend, BackendSession, HttpBackend, ImageRef, MockBackend, create_backend
from .pipeline import (
    DecodeResult,
    EncodeResult,
    PipelineConfig,
    PromptSet,
    SessionTranscript,
    decode_container,
    encode_image,
    load_prompts,
    roundtrip,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BackendSession",
    "DecodeResult",
    "EncodeResult",
    "HttpBackend",
    "ImageRef",
    "MockBackend",
    "PipelineConfig",
    "PromptSet",
    "SessionTranscript",
    "create_backend",
    "decode_container",
    "encode_image",
    "load_prompts",
    "metrics",
    "reflection",
    "roundtrip",
    "textcodec",
    "__version__",
]
