import dataclasses

import pytest

from semcodec import pipeline, textcodec
from semcodec.backends import BackendCapabilities, BackendSession, MockBackend
from semcodec.backends.base import Backend
from semcodec.backends.mock import content_words, make_placeholder_image


class ScriptedTextBackend(Backend):
    """Returns canned text per stage; generates placeholder images."""

    deterministic = True

    def __init__(self, selected_words: str, compressed: str = "bt"):
        self._selected = selected_words
        self._compressed = compressed
        self._capabilities = BackendCapabilities(supports_session_edit=False)

    @property
    def capabilities(self):
        return self._capabilities

    def describe(self, session, image, prompt):
        return "a scripted description"

    def transform(self, session, instruction, payload):
        if "to " in instruction and " words" in instruction:
            return self._selected
        if "remove all vowels" in instruction.lower():
            return self._compressed
        return payload

    def generate(self, session, prompt):
        image = make_placeholder_image(prompt)
        session.append("assistant", "", image_hash=image.content_hash)
        return image

    def regenerate(self, session, edit):
        raise NotImplementedError


@pytest.fixture
def config():
    return pipeline.PipelineConfig(target_word_count=8)


class TestLoadPrompts:
    def test_bundled_default_set_loads(self):
        prompts = pipeline.load_prompts()
        assert "{K}" in prompts.word_select
        assert "n, t, s, r, h, l, d, c, m, f, g, p, b, k, v" in prompts.word_compress
        assert prompts.describe  # shared by encode and reflect

    def test_missing_placeholder(self, tmp_path):
        src = pipeline.default_prompts_dir()
        for name in pipeline.TEMPLATE_NAMES:
            (tmp_path / f"{name}.txt").write_text(src.joinpath(f"{name}.txt").read_text())
        (tmp_path / "word_select.txt").write_text("select the best words")
        with pytest.raises(pipeline.MissingPlaceholder) as excinfo:
            pipeline.load_prompts(tmp_path)
        assert excinfo.value.template == "word_select"

    def test_empty_directory(self, tmp_path):
        with pytest.raises(pipeline.MissingTemplate) as excinfo:
            pipeline.load_prompts(tmp_path)
        assert excinfo.value.name == "describe"


class TestPipelineConfig:
    def test_defaults(self, config):
        assert config.word_count_tolerance == 0.10
        assert config.reflection_iterations == 2
        assert config.reflection_threshold_microbpp == 500

    @pytest.mark.parametrize(
        "bad",
        [
            {"target_word_count": 0},
            {"word_count_tolerance": 1.0},
            {"word_count_tolerance": -0.1},
            {"reflection_iterations": -1},
            {"reflection_threshold_microbpp": -5},
        ],
    )
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            pipeline.PipelineConfig(**bad)


class TestEncode:
    def test_container_matches_oracle_composition(self, mock_backend, harbor_image, config):
        result = pipeline.encode_image(harbor_image, config, mock_backend)
        expected = textcodec.devowel_oracle(textcodec.canonicalize(result.selected_words))
        symbols, width, height = textcodec.decode_container(result.container)
        assert textcodec.from_symbols(symbols) == expected
        assert (width, height) == (1024, 1024)

    def test_stage_order_exact(self, mock_backend, harbor_image, config):
        result = pipeline.encode_image(harbor_image, config, mock_backend)
        assert result.transcript.stage_names() == list(pipeline.ENCODE_STAGES)

    def test_container_roundtrips_to_compressed_text(self, mock_backend, harbor_image, config):
        result = pipeline.encode_image(harbor_image, config, mock_backend)
        symbols, _, _ = textcodec.decode_container(result.container)
        assert textcodec.from_symbols(symbols) == result.compressed_text

    def test_report_attached(self, mock_backend, harbor_image, config):
        result = pipeline.encode_image(harbor_image, config, mock_backend)
        symbols, _, _ = textcodec.decode_container(result.container)
        assert result.report.bits == 4 * len(symbols)
        assert result.report.pixels == 1024 * 1024

    def test_within_tolerance_passes_silently(self):
        # 32 words against K=30 is a 6.7% deviation
        backend = ScriptedTextBackend(" ".join(f"word{i}" for i in range(32)))
        config = pipeline.PipelineConfig(target_word_count=30)
        image = make_placeholder_image("any", 64, 64)
        result = pipeline.encode_image(image, config, backend)
        assert result.transcript.warnings == []

    def test_overshoot_beyond_tolerance_warns(self):
        # 40 words against K=30 is a 33% deviation
        backend = ScriptedTextBackend(" ".join(f"word{i}" for i in range(40)))
        config = pipeline.PipelineConfig(target_word_count=30)
        image = make_placeholder_image("any", 64, 64)
        result = pipeline.encode_image(image, config, backend)
        assert any("WordBudgetViolation" in warning for warning in result.transcript.warnings)

    def test_undershoot_with_mock_fixture_warns(self, mock_backend, sparse_image):
        config = pipeline.PipelineConfig(target_word_count=30)
        result = pipeline.encode_image(sparse_image, config, mock_backend)
        assert any("WordBudgetViolation" in warning for warning in result.transcript.warnings)
        assert result.container  # violation is advisory, output still produced

    def test_strict_mode_propagates_illegal_symbol(self):
        backend = ScriptedTextBackend("three words here", compressed="wndw")
        config = pipeline.PipelineConfig(
            target_word_count=3, repair_policy=textcodec.STRICT
        )
        image = make_placeholder_image("any", 64, 64)
        with pytest.raises(textcodec.IllegalSymbol):
            pipeline.encode_image(image, config, backend)


class TestDecode:
    def test_stage_order_with_skip(self, mock_backend, harbor_image, config):
        encoded = pipeline.encode_image(harbor_image, config, mock_backend)
        decoded = pipeline.decode_container(encoded.container, config, mock_backend)
        assert decoded.transcript.stage_names() == ["word_decompress", "generate", "reflection_skipped"]

    def test_small_payload_skips_below_threshold(self, mock_backend, config):
        container = textcodec.encode_container([1] * 25, 1024, 1024)
        decoded = pipeline.decode_container(container, config, mock_backend)
        skip = decoded.transcript.stages[-1]
        assert skip.name == "reflection_skipped"
        assert skip.output_text == pipeline.SKIP_BELOW_THRESHOLD
        assert decoded.reflection_trace is None

    def test_large_payload_reflects(self, mock_backend, config):
        symbols = textcodec.to_symbols("n" * 210, textcodec.STRICT)
        container = textcodec.encode_container(symbols, 1024, 1024)
        decoded = pipeline.decode_container(container, config, mock_backend)
        assert decoded.reflection_trace is not None
        assert len(decoded.reflection_trace.iterations) == 2
        names = decoded.transcript.stage_names()
        assert names == [
            "word_decompress",
            "generate",
            "reflect_describe",
            "reflect_compare",
            "reflect_generate",
            "reflect_describe",
            "reflect_compare",
            "reflect_generate",
        ]

    def test_r_zero_skip(self, mock_backend):
        config = pipeline.PipelineConfig(reflection_iterations=0)
        container = textcodec.encode_container([1] * 210, 1024, 1024)
        decoded = pipeline.decode_container(container, config, mock_backend)
        assert decoded.transcript.stages[-1].output_text == pipeline.SKIP_ZERO_ITERATIONS

    def test_edit_unsupported_skip(self):
        backend = MockBackend(capabilities=BackendCapabilities(supports_session_edit=False))
        config = pipeline.PipelineConfig()
        container = textcodec.encode_container([1] * 210, 1024, 1024)
        decoded = pipeline.decode_container(container, config, backend)
        assert decoded.transcript.stages[-1].output_text == pipeline.SKIP_EDIT_UNSUPPORTED

    def test_decode_is_deterministic(self, mock_backend, harbor_image, config):
        encoded = pipeline.encode_image(harbor_image, config, mock_backend)

        def run():
            decoded = pipeline.decode_container(encoded.container, config, MockBackend())
            return decoded.transcript.to_dict(), decoded.image.content_hash

        assert run() == run()

    def test_expanded_prompt_contains_decompressed_text(self, mock_backend, harbor_image, config):
        encoded = pipeline.encode_image(harbor_image, config, mock_backend)
        decoded = pipeline.decode_container(encoded.container, config, mock_backend)
        assert decoded.decompressed_text in decoded.expanded_prompt

    def test_container_errors_propagate(self, mock_backend, config):
        with pytest.raises(textcodec.BadMagic):
            pipeline.decode_container(b"XXXX" + b"\x00" * 20, config, mock_backend)


class TestRoundtrip:
    def test_hygiene_no_shared_stage_text(self, mock_backend, harbor_image, config):
        encoded, decoded = pipeline.roundtrip(harbor_image, config, mock_backend)
        leaked = pipeline.shared_stage_texts(
            encoded.transcript, decoded.transcript, allowed={encoded.compressed_text}
        )
        assert leaked == set()

    def test_describe_output_never_reaches_decoder(self, mock_backend, harbor_image, config):
        encoded, decoded = pipeline.roundtrip(harbor_image, config, mock_backend)
        assert encoded.description not in decoded.transcript.stage_texts()

    def test_repeat_runs_identical(self, harbor_image, config):
        def run():
            encoded, decoded = pipeline.roundtrip(harbor_image, config, MockBackend())
            return (
                encoded.container,
                encoded.transcript.to_dict(),
                decoded.transcript.to_dict(),
                decoded.image.content_hash,
            )

        assert run() == run()

    def test_r_zero_has_no_trace(self, mock_backend, harbor_image):
        config = pipeline.PipelineConfig(reflection_iterations=0)
        _, decoded = pipeline.roundtrip(harbor_image, config, mock_backend)
        assert decoded.reflection_trace is None

    def test_timestamps_non_decreasing(self, mock_backend, harbor_image, config):
        encoded, decoded = pipeline.roundtrip(harbor_image, config, mock_backend)
        for transcript in (encoded.transcript, decoded.transcript):
            stamps = [stage.timestamp for stage in transcript.stages]
            assert stamps == sorted(stamps)


class TestTranscript:
    def test_save_round_trips_through_json(self, tmp_path, mock_backend, harbor_image, config):
        import json

        result = pipeline.encode_image(harbor_image, config, mock_backend)
        path = result.transcript.save(tmp_path / "t.json")
        loaded = json.loads(path.read_text())
        assert loaded == result.transcript.to_dict()
        assert [stage["name"] for stage in loaded["stages"]] == list(pipeline.ENCODE_STAGES)

    def test_record_rejects_time_travel(self):
        transcript = pipeline.SessionTranscript("s")
        transcript.record("a", "", "", "", 5.0)
        with pytest.raises(ValueError):
            transcript.record("b", "", "", "", 4.0)
