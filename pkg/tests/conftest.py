import sys
from pathlib import Path
from typing import Any, Callable, Dict

import pytest
import yaml

PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_PATH = PROJECT_ROOT / "src"
if str(SRC_PATH) not in sys.path:
    sys.path.insert(0, str(SRC_PATH))


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[Dict[str, Any]], Path]:
    """Helper to write YAML scenario files for tests."""

    def _writer(data: Dict[str, Any]) -> Path:
        path = tmp_path / "scenario.yaml"
        with path.open("w", encoding="utf-8") as fh:
            yaml.safe_dump(data, fh)
        return path

    return _writer


@pytest.fixture
def scenario():
    from uplink_analysis.config import ScenarioConfig

    return ScenarioConfig()


@pytest.fixture(autouse=True)
def _isolated_scenario_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("UPLINK_SCENARIO_DIR", str(tmp_path / "scenarios"))
    monkeypatch.delenv("UPLINK_LOG_LEVEL", raising=False)
