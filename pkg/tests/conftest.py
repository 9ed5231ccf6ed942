import math
from pathlib import Path

import pytest

from jointbeam.core import Vocabulary
from jointbeam.models import load_models
from jointbeam.data import desk_bundle_path, suite_paths

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture
def vocab_a():
    return Vocabulary(("a",))


@pytest.fixture
def vocab_ab():
    return Vocabulary(("a", "b"))


@pytest.fixture
def uniform_grid_bundle():
    """Two frames over {a, blank}, every row 0.5/0.5."""
    return load_models(fixture_path("grid_t2_v1.json"))


@pytest.fixture
def tdx_t1_bundle():
    """One frame: P(a|start)=0.6, P(blank|start)=0.4, P(blank|[a])=0.7."""
    return load_models(fixture_path("tdx_t1_v1.json"))


@pytest.fixture
def att_bundle():
    """Attention table whose greedy path [a] is also the global argmax."""
    return load_models(fixture_path("att_v1.json"))


@pytest.fixture
def desk_bundle():
    """Four frames, two tokens, all three decoders as tables."""
    return load_models(desk_bundle_path())


@pytest.fixture(scope="session")
def suite_bundles():
    return [load_models(p) for p in suite_paths()]


def assert_log_close(actual: float, expected: float, tol: float = 1e-12):
    if math.isinf(expected):
        assert actual == expected
    else:
        assert abs(actual - expected) <= tol, f"{actual} != {expected} (tol {tol})"
