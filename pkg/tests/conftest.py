from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from ecogauge.config import config_from_dict
from ecogauge.footprint import profile

T0 = datetime(2025, 1, 19, 9, 0, 0, tzinfo=timezone.utc)


def at(minutes: float = 0, seconds: float = 0) -> datetime:
    return T0 + timedelta(minutes=minutes, seconds=seconds)


@pytest.fixture
def figure_model():
    return profile("paper-figures")


@pytest.fixture
def text_model():
    return profile("paper-text")


@pytest.fixture
def figure_config(tmp_path):
    return config_from_dict({
        "resources": {"profile": "paper-figures"},
        "storage": {"dir": str(tmp_path / "data")},
    })
