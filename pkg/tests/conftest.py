from __future__ import annotations

import json
from pathlib import Path

import pytest

from simcompose import compose, load_class, parse_request

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "simcompose" / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def sea_class():
    return load_class(FIXTURES / "sea.json")


@pytest.fixture(scope="session")
def ship_class():
    return load_class(FIXTURES / "ship.json")


@pytest.fixture(scope="session")
def sea_ship(sea_class, ship_class):
    return compose(sea_class, ship_class)


@pytest.fixture(scope="session")
def golden_request_doc() -> dict:
    return json.loads((FIXTURES / "golden_request.json").read_text(encoding="utf-8"))


@pytest.fixture()
def golden_request(sea_ship, golden_request_doc):
    return parse_request(golden_request_doc, sea_ship)
