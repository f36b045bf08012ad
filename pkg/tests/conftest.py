import pytest

from semcodec.backends import ImageRef, MockBackend
from semcodec.backends.mock import default_fixtures_dir


@pytest.fixture
def mock_backend():
    return MockBackend()


def load_fixture_image(name: str) -> ImageRef:
    return ImageRef.from_path(str(default_fixtures_dir().joinpath(f"images/{name}.png")))


@pytest.fixture
def harbor_image():
    return load_fixture_image("harbor")


@pytest.fixture
def arch_image():
    return load_fixture_image("arch")


@pytest.fixture
def sparse_image():
    return load_fixture_image("sparse")
