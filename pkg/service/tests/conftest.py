import socket
import threading
import time
from pathlib import Path

import pytest
import requests
import uvicorn

from denoiser_service import ServiceConfig, create_app

# the golden fixtures live with the engine so both suites run one copy
ENGINE_FIXTURE_DIR = Path(__file__).resolve().parents[2] / "tests" / "data" / "conformance"


def _free_port() -> int:
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


@pytest.fixture(scope="session")
def server_url():
    port = _free_port()
    app = create_app(ServiceConfig(native_resolution=64, port=port))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 10.0
    while time.time() < deadline:
        try:
            if requests.get(f"{url}/v1/health", timeout=1).status_code == 200:
                break
        except requests.RequestException:
            pass
        time.sleep(0.05)
    else:
        raise RuntimeError("service did not come up within 10s")
    yield url
    server.should_exit = True
    thread.join(timeout=5)
