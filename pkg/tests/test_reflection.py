import pytest

from semcodec import pipeline, reflection
from semcodec.backends import BackendCapabilities, BackendSession, EditUnsupported, MockBackend
from semcodec.backends.mock import make_placeholder_image


@pytest.fixture
def prompts():
    return pipeline.load_prompts()


@pytest.fixture
def config():
    return pipeline.PipelineConfig()


def seeded_session(backend, description="a gray boat on water"):
    """Generate one image in a fresh session and return (session, image)."""
    session = BackendSession("decoder")
    image = backend.generate(session, f"template\n\n{description}")
    return session, image


class TestGate:
    def test_small_payload_below_default_threshold(self, config):
        assert reflection.gate(100, 1024, 1024, config) is False

    def test_large_payload_clears_default_threshold(self, config):
        assert reflection.gate(840, 1024, 1024, config) is True

    def test_zero_threshold_always_passes(self):
        config = pipeline.PipelineConfig(reflection_threshold_microbpp=0)
        assert reflection.gate(0, 1024, 1024, config) is True

    def test_boundary_is_inclusive(self):
        config = pipeline.PipelineConfig(reflection_threshold_microbpp=500)
        # 1 bit over 2000 pixels = exactly 500 microbpp
        assert reflection.gate(1, 50, 40, config) is True

    def test_zero_pixels_rejected(self, config):
        with pytest.raises(ValueError):
            reflection.gate(100, 0, 10, config)


class TestReflectOnce:
    def test_record_fields_and_hash(self, mock_backend, prompts):
        session, image = seeded_session(mock_backend)
        record = reflection.reflect_once(
            session, image, "a red boat on water", prompts, mock_backend
        )
        assert record.new_description == "a gray boat on water"
        assert record.edit_suggestion == "replace gray with red"
        expected_edit = f"{prompts.reflect_generate}\n\n{record.edit_suggestion}"
        expected = make_placeholder_image(f"{image.content_hash}|{expected_edit}")
        assert record.regenerated_image_hash == expected.content_hash

    def test_identical_descriptions_yield_no_change(self, mock_backend, prompts):
        session, image = seeded_session(mock_backend, "a gray boat")
        record = reflection.reflect_once(session, image, "a gray boat", prompts, mock_backend)
        assert record.edit_suggestion == "no change"
        # regeneration still happens
        assert record.regenerated_image_hash != record.generated_image_hash

    def test_edit_unsupported_before_any_call(self, prompts):
        backend = MockBackend(capabilities=BackendCapabilities(supports_session_edit=False))
        session = BackendSession("decoder")
        image = make_placeholder_image("unregistered")
        with pytest.raises(EditUnsupported):
            reflection.reflect_once(session, image, "desc", prompts, backend)
        assert session.history == []  # failed before touching the session


class TestRunReflection:
    def test_fixed_two_iterations(self, mock_backend, prompts, config):
        session, image = seeded_session(mock_backend)
        trace = reflection.run_reflection(
            session, image, "a red boat on water", config, mock_backend, prompts=prompts
        )
        assert len(trace.iterations) == 2
        assert trace.stop_reason == reflection.STOP_BUDGET_EXHAUSTED

    def test_r_zero_is_a_noop(self, mock_backend, prompts):
        config = pipeline.PipelineConfig(reflection_iterations=0)
        session, image = seeded_session(mock_backend)
        trace = reflection.run_reflection(
            session, image, "desc", config, mock_backend, prompts=prompts
        )
        assert trace.iterations == []
        assert trace.stop_reason == reflection.STOP_BUDGET_EXHAUSTED

    def test_r_five_runs_five(self, mock_backend, prompts):
        config = pipeline.PipelineConfig(reflection_iterations=5)
        session, image = seeded_session(mock_backend)
        trace = reflection.run_reflection(
            session, image, "a red boat on water", config, mock_backend, prompts=prompts
        )
        assert len(trace.iterations) == 5

    def test_hash_chain(self, mock_backend, prompts):
        config = pipeline.PipelineConfig(reflection_iterations=3)
        session, image = seeded_session(mock_backend)
        trace = reflection.run_reflection(
            session, image, "a red boat on water", config, mock_backend, prompts=prompts
        )
        assert trace.iterations[0].generated_image_hash == image.content_hash
        for previous, current in zip(trace.iterations, trace.iterations[1:]):
            assert current.generated_image_hash == previous.regenerated_image_hash
        for record in trace.iterations:
            expected_edit = f"{prompts.reflect_generate}\n\n{record.edit_suggestion}"
            expected = make_placeholder_image(f"{record.generated_image_hash}|{expected_edit}")
            assert record.regenerated_image_hash == expected.content_hash

    def test_partial_trace_on_capability_loss(self, prompts, config):
        class FlakyEditBackend(MockBackend):
            """Stops supporting edits after the first regeneration."""

            def __init__(self):
                super().__init__()
                self._edits = 0

            @property
            def capabilities(self):
                return BackendCapabilities(supports_session_edit=self._edits < 1)

            def regenerate(self, session, edit):
                image = super().regenerate(session, edit)
                self._edits += 1
                return image

        backend = FlakyEditBackend()
        session, image = seeded_session(backend)
        trace = reflection.run_reflection(
            session, image, "a red boat on water", config, backend, prompts=prompts
        )
        assert len(trace.iterations) == 1
        assert trace.stop_reason == reflection.STOP_EDIT_UNSUPPORTED

    def test_compare_receives_decoder_side_description_only(self, mock_backend, prompts, config):
        session, image = seeded_session(mock_backend)
        original = "a red boat on water"
        transcript = pipeline.SessionTranscript("decoder")
        reflection.run_reflection(
            session, image, original, config, mock_backend,
            prompts=prompts, transcript=transcript, clock=lambda: 0.0,
        )
        compare_stages = [s for s in transcript.stages if s.name == "reflect_compare"]
        assert compare_stages
        for stage in compare_stages:
            assert stage.input_text.endswith(original)

    def test_trace_serialization(self, mock_backend, prompts, config):
        session, image = seeded_session(mock_backend)
        trace = reflection.run_reflection(
            session, image, "a red boat", config, mock_backend, prompts=prompts
        )
        data = trace.to_dict()
        assert data["stop_reason"] == "budget_exhausted"
        assert len(data["iterations"]) == 2
        assert set(data["iterations"][0]) == {
            "generated_image_hash",
            "new_description",
            "edit_suggestion",
            "regenerated_image_hash",
        }
