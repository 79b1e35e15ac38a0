from __future__ import annotations

import io
import json
import logging
import os
import threading
from copy import deepcopy
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Any, Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR_ENV = "COMPLEXRK_DATA_DIR"

DEFAULT_SETTINGS = {
    "api_port": 8080,
    "log_level": "INFO",
    "reference_steps": 100000,
    "cache_reference": True,
    "default_n_list": [10, 20, 40, 80, 160, 320],
    "fit_floor": 1e-13,
    "csv_digits": 17,
}


def default_data_dir() -> Path:
    override = os.getenv(DATA_DIR_ENV)
    return Path(override) if override else BASE_DIR / "data"


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile("w", delete=False, encoding="utf-8", dir=path.parent, newline="") as tmp:
        tmp.write(text)
        tmp.flush()
    Path(tmp.name).replace(path)


def atomic_write_json(path: Path, payload: dict[str, Any]) -> None:
    atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def format_float(value: float | None, digits: int = 17) -> str:
    if value is None:
        return ""
    return f"{float(value):.{digits - 1}e}"


def render_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    footer: dict[str, Any] | None = None,
    digits: int = 17,
) -> str:
    """CSV text with floats in fixed-precision scientific notation and `# key=value` footers."""
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        cells = []
        for cell in row:
            if cell is None or isinstance(cell, float) or isinstance(cell, np.floating):
                cells.append(format_float(cell, digits))
            else:
                cells.append(str(cell))
        out.write(",".join(cells) + "\n")
    for key, value in (footer or {}).items():
        rendered = format_float(value, digits) if isinstance(value, (float, np.floating)) else str(value)
        out.write(f"# {key}={rendered}\n")
    return out.getvalue()


@dataclass
class DataStore:
    data_dir: Path = field(default_factory=default_data_dir)

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        self._lock = threading.RLock()
        self.cache_dir = self.data_dir / "cache"
        self.settings_path = self.data_dir / "settings.json"

    def initialize(self) -> None:
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        if not self.settings_path.exists():
            atomic_write_json(self.settings_path, deepcopy(DEFAULT_SETTINGS))

    def read_settings(self) -> dict[str, Any]:
        with self._lock:
            if not self.settings_path.exists():
                return deepcopy(DEFAULT_SETTINGS)
            try:
                with self.settings_path.open("r", encoding="utf-8") as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                logger.warning("Ignoring unreadable settings file %s: %s", self.settings_path, exc)
                return deepcopy(DEFAULT_SETTINGS)
        for key, value in DEFAULT_SETTINGS.items():
            data.setdefault(key, deepcopy(value))
        return data

    def write_settings(self, payload: dict[str, Any]) -> None:
        for key, value in DEFAULT_SETTINGS.items():
            payload.setdefault(key, deepcopy(value))
        with self._lock:
            atomic_write_json(self.settings_path, payload)

    def write_output(self, path: Path, text: str) -> None:
        with self._lock:
            atomic_write_text(Path(path), text)

    def reference_path(self, name: str, n_steps: int) -> Path:
        return self.cache_dir / f"{name}_reference_{n_steps}.npy"

    def cached_array(self, name: str, n_steps: int, compute: Callable[[], np.ndarray]) -> np.ndarray:
        """Load a cached reference trajectory or compute and store it."""
        path = self.reference_path(name, n_steps)
        with self._lock:
            if path.exists():
                try:
                    values = np.load(path, allow_pickle=False)
                    logger.info("Loaded %s reference (%d steps) from %s", name, n_steps, path)
                    return values
                except (OSError, ValueError) as exc:
                    logger.warning("Recomputing %s reference, cache %s unreadable: %s", name, path, exc)

            logger.info("Computing %s reference with %d steps", name, n_steps)
            values = compute()
            path.parent.mkdir(parents=True, exist_ok=True)
            with NamedTemporaryFile("wb", delete=False, dir=path.parent, suffix=".npy") as tmp:
                np.save(tmp, values, allow_pickle=False)
                tmp.flush()
            Path(tmp.name).replace(path)
            atomic_write_json(
                path.with_suffix(".json"),
                {"name": name, "n_steps": n_steps, "shape": list(values.shape), "created_at": utc_now_iso()},
            )
            return values
