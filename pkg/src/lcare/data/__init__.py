"""Bundled synthetic price fixture (3000 business days, one break)."""

import json
from importlib import resources


def fixture_path():
    return resources.files(__name__) / "fixture_prices.csv"


def fixture_moments() -> dict:
    return json.loads((resources.files(__name__) / "fixture_moments.json").read_text())
