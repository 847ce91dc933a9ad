import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
sys.path.insert(0, str(ROOT / "src"))

# one line per acceptance criterion, echoed after the test summary so the
# [PASS]/[FAIL] verdicts survive pytest's output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def mlp_tiny():
    from advkit import engine
    return engine.load_model(FIXTURES / "models" / "mlp_tiny.json")


@pytest.fixture(scope="session")
def cnn_tiny():
    from advkit import engine
    return engine.load_model(FIXTURES / "models" / "cnn_tiny.json")


@pytest.fixture(scope="session")
def mixed_tiny():
    from advkit import engine
    return engine.load_model(FIXTURES / "models" / "mixed_tiny.json")


@pytest.fixture(scope="session")
def probe_images():
    from advkit import images
    return [images.load_image(FIXTURES / "images" / f"probe_{i:02d}.pgm")
            for i in range(20)]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
