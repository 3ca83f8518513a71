"""Shared fixtures for the heat enclosure tests."""
import sys
from functools import lru_cache
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

FIXTURES = ROOT / "fixtures"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution acceptance runs")


@lru_cache(maxsize=None)
def _load(name: str, refinement: int):
    from config_manager import load_scene
    return load_scene(FIXTURES / f"{name}.yaml", refinement)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def scene_loader():
    """load(name, refinement) for shipped scenes; scenes are cached across tests."""
    return _load


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep settings and run logs out of the real home directory."""
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.setenv("USERPROFILE", str(home))
    return home
