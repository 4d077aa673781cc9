import threading
from pathlib import Path

import numpy as np
import pytest

from copyaudit import backends
from copyaudit.imagecore import ImageBuffer

FIXTURES = Path(__file__).parent / "fixtures"

FIXTURE_NAMES = ["circle", "square", "triangle", "portrait", "rings", "bar"]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def random_image(rng, h, w, channels=1) -> ImageBuffer:
    return ImageBuffer.from_array(rng.uniform(0.0, 1.0, size=(h, w, channels)))


@pytest.fixture(scope="session")
def mock_server_url():
    """A live mock backend server on an ephemeral port."""
    server = backends.make_mock_server(0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
