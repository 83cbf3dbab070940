import sys
from pathlib import Path

import pytest

from skgkit.graph import SceneKG

HERE = Path(__file__).resolve().parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(FIXTURES))

CHASE_SCENE = [
    ("chase", "ARG0", "dog"),
    ("chase", "ARG1", "ball"),
    ("throw", "ARG1", "ball"),
    ("throw", "ARG0", "owner"),
]


@pytest.fixture
def chase_scene():
    return SceneKG.from_triples(CHASE_SCENE)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
