import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from mlbackend.config import AdapterConfig
from mlbackend.server import create_app

TEST_CFG = AdapterConfig(
    segmentation_model_id="torchvision/maskrcnn_resnet50_fpn:untrained",
    segmentation_min_size=32,
    score_threshold=0.05,
)


@pytest.fixture(scope="session")
def client():
    app = create_app(TEST_CFG, load_async=False)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="session")
def live_server_url():
    """Adapter running over real HTTP for the shared contract suite."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    app = create_app(TEST_CFG, load_async=False)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 120
    while not server.started:
        if time.time() > deadline:
            pytest.fail("adapter server never started")
        time.sleep(0.1)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)
