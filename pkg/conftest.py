import logging
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(ROOT))

import settings  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """每個測試都從預設設定開始，不受環境變數影響。"""
    monkeypatch.delenv(settings.THREADS_ENV, raising=False)
    monkeypatch.delenv(settings.CONFIG_ENV, raising=False)
    settings.set_settings(None)
    yield
    settings.set_settings(None)


@pytest.fixture(autouse=True)
def reset_cli_logging():
    """cli.main 掛在 root 上的 stderr handler 綁定的是當次測試的 capsys。"""
    yield
    root = logging.getLogger()
    for h in [h for h in root.handlers if getattr(h, "_homscope", False)]:
        root.removeHandler(h)
    root.setLevel(logging.WARNING)


@pytest.fixture
def fixtures_dir():
    return ROOT / "tests" / "fixtures"
