"""Shared fixtures: the shipped example charts and atlases."""

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from app.utils.cech_complex import build_based_lifting  # noqa: E402
from app.utils.kd_algebra import build_algebra  # noqa: E402
from app.utils.spec_loader import load_atlas, load_chart  # noqa: E402

SPECS = ROOT / "specs"


@pytest.fixture(scope="session")
def specs_dir() -> Path:
    return SPECS


@pytest.fixture(scope="session")
def e1():
    return load_chart(SPECS / "e1.json")


@pytest.fixture(scope="session")
def e2():
    return load_chart(SPECS / "e2.json")


@pytest.fixture(scope="session")
def e3():
    return load_chart(SPECS / "e3.json")


@pytest.fixture(scope="session")
def e1_aux():
    return load_chart(SPECS / "e1_aux.json")


@pytest.fixture(scope="session")
def e2_aux1():
    return load_chart(SPECS / "e2_aux1.json")


@pytest.fixture(scope="session")
def e2_aux2():
    return load_chart(SPECS / "e2_aux2.json")


@pytest.fixture(scope="session")
def e3_scaled():
    return load_chart(SPECS / "e3_scaled.json")


@pytest.fixture
def e1_ctx(e1):
    return build_algebra(e1)


@pytest.fixture
def e2_ctx(e2):
    return build_algebra(e2)


@pytest.fixture
def e3_ctx(e3):
    return build_algebra(e3)


@pytest.fixture(scope="session")
def line2():
    return build_based_lifting(load_atlas(SPECS / "atlas_line2.json"))


@pytest.fixture(scope="session")
def line3():
    return build_based_lifting(load_atlas(SPECS / "atlas_line3.json"))


@pytest.fixture(scope="session")
def linear3():
    return build_based_lifting(load_atlas(SPECS / "atlas_linear3.json"))
