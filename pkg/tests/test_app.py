# -*- coding: utf-8 -*-
import os

import pytest

from util.errors import DataError, ErrorCode

testing = pytest.importorskip("streamlit.testing.v1")

APP = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "main_app.py")
SIMULATE = "🚀 시뮬레이션 실행"


def _app():
    at = testing.AppTest.from_file(APP, default_timeout=60)
    at.run()
    return at


def test_app_renders_without_data():
    at = _app()
    assert not at.exception
    assert any(b.label == SIMULATE for b in at.button)


def test_simulation_error_is_shown_not_raised(monkeypatch):
    def broken(*args, **kwargs):
        raise DataError(ErrorCode.INVALID_VALUE, "bad fleet")

    monkeypatch.setattr("data.simulator.generate_fleet", broken)
    at = _app()
    next(b for b in at.button if b.label == SIMULATE).click().run()
    assert not at.exception
    assert any("bad fleet" in e.value for e in at.error)
