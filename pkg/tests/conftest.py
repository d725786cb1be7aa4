import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import load  # noqa: E402


@pytest.fixture
def tree_processing():
    return load("tree_processing.chc")


@pytest.fixture
def take_drop():
    return load("take_drop.chc")
