from __future__ import annotations

import pytest
from loguru import logger


@pytest.fixture(scope="session")
def anyio_backend():
    return "asyncio"


@pytest.fixture
def log_messages():
    """Collect what liftr logs at INFO and above while the test runs."""
    messages: list[str] = []
    logger.enable("liftr")
    sink_id = logger.add(lambda m: messages.append(m.record["message"]), level="INFO")
    yield messages
    logger.remove(sink_id)
    logger.disable("liftr")
