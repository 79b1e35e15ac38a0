from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from complexrk.storage import DATA_DIR_ENV, DEFAULT_SETTINGS, DataStore, default_data_dir, format_float, render_csv


def test_format_float_uses_seventeen_significant_digits() -> None:
    assert format_float(1.0) == "1.0000000000000000e+00"
    assert format_float(-0.1) == "-1.0000000000000001e-01"
    assert format_float(None) == ""


def test_render_csv_formats_floats_and_footer() -> None:
    text = render_csv(["n", "error"], [[10, 0.5], [20, np.float64(0.125)]], {"slope": 2.0, "method": "euler"})
    assert text.splitlines() == [
        "n,error",
        "10,5.0000000000000000e-01",
        "20,1.2500000000000000e-01",
        "# slope=2.0000000000000000e+00",
        "# method=euler",
    ]


def test_data_dir_can_be_overridden(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    assert default_data_dir() == tmp_path
    assert DataStore().data_dir == tmp_path


def test_settings_fill_missing_defaults(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    assert store.read_settings() == DEFAULT_SETTINGS
    store.initialize()
    assert json.loads(store.settings_path.read_text(encoding="utf-8")) == DEFAULT_SETTINGS

    store.write_settings({"fit_floor": 1e-10})
    settings = store.read_settings()
    assert settings["fit_floor"] == 1e-10
    assert settings["reference_steps"] == DEFAULT_SETTINGS["reference_steps"]


def test_unreadable_settings_fall_back_to_defaults(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    store.settings_path.write_text("{", encoding="utf-8")
    assert store.read_settings() == DEFAULT_SETTINGS


def test_write_output_creates_parent_directories(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    target = tmp_path / "runs" / "grid.csv"
    store.write_output(target, "a,b\n")
    assert target.read_text(encoding="utf-8") == "a,b\n"
    assert list(target.parent.iterdir()) == [target]


def test_cached_array_computes_once(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    calls = []

    def compute() -> np.ndarray:
        calls.append(1)
        return np.arange(6.0).reshape(3, 2)

    first = store.cached_array("orbit", 3, compute)
    second = store.cached_array("orbit", 3, compute)
    assert len(calls) == 1
    np.testing.assert_array_equal(first, second)
    sidecar = json.loads(store.reference_path("orbit", 3).with_suffix(".json").read_text(encoding="utf-8"))
    assert sidecar["shape"] == [3, 2]


def test_cached_array_recomputes_corrupt_cache(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    path = store.reference_path("orbit", 2)
    path.parent.mkdir(parents=True)
    path.write_bytes(b"not an array")
    values = store.cached_array("orbit", 2, lambda: np.ones(2))
    np.testing.assert_array_equal(values, np.ones(2))
    np.testing.assert_array_equal(np.load(path), np.ones(2))
