from __future__ import annotations

from typing import Any, Literal, TypeVar

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import InvalidArgumentError

ComplexPair = tuple[float, float]
Model = TypeVar("Model", bound=BaseModel)

ARENSTORF_VARIANTS = ("plain-euler", "composed-euler", "reference", "compare")
GRID_PATHS = ("real", "circle", "roots", "fractal", "composed")


def parse(model: type[Model], payload: Any) -> Model:
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        raise InvalidArgumentError(f"Invalid {model.__name__}: {exc}") from exc


def _pair(value: complex) -> ComplexPair:
    return (value.real, value.imag)


def to_complex(value: str | float | ComplexPair) -> complex:
    """Accepts 1.5, [re, im] or a literal such as "0.5+0.5i"."""
    if isinstance(value, (tuple, list)):
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise ValueError(f"not a complex number: {value!r}") from exc
    return complex(value)


class TableauSpec(BaseModel):
    name: str = "custom"
    s: int = Field(ge=1)
    A: list[list[ComplexPair]]
    b: list[ComplexPair]
    c: list[ComplexPair]
    order: int = Field(ge=1)
    symmetric: bool = False

    @model_validator(mode="after")
    def _check_shape(self) -> TableauSpec:
        if len(self.A) != self.s or any(len(row) != self.s for row in self.A):
            raise ValueError(f"A must be {self.s}x{self.s}")
        if len(self.b) != self.s or len(self.c) != self.s:
            raise ValueError(f"b and c must have {self.s} entries")
        return self


class ScheduleSpec(BaseModel):
    p: int = Field(ge=1)
    k: int = Field(ge=2)
    g: int = Field(default=1, ge=1)
    sigma: list[ComplexPair]


class LinearProblemSpec(BaseModel):
    A: list[list[ComplexPair | float]]
    t0: ComplexPair | float = 0.0
    x0: list[ComplexPair | float]
    t: ComplexPair | float | None = None

    def matrix(self) -> list[list[complex]]:
        return [[to_complex(entry) for entry in row] for row in self.A]

    def initial(self) -> list[complex]:
        return [to_complex(entry) for entry in self.x0]

    def start(self) -> complex:
        return to_complex(self.t0)

    def end(self) -> complex:
        return self.start() + 1 if self.t is None else to_complex(self.t)


class RunConfig(BaseModel):
    """Validated options shared by the command line and the HTTP surface."""

    command: str = "grid"
    method: str = "euler"
    problem: str = "exp"
    path: str = "circle"
    p: int = Field(default=1, ge=1)
    k: int = Field(default=2, ge=2)
    r: int = Field(default=1, ge=0)
    gain: int | None = Field(default=None, ge=1)
    n: int | None = Field(default=None, ge=1)
    n_list: list[int] | None = None
    conjugate: bool = False
    t0: str | float | ComplexPair = 0.0
    t: str | float | ComplexPair | None = None
    out: str | None = None
    seed: int = 0
    variant: Literal["plain-euler", "composed-euler", "reference", "compare"] = "compare"
    stride: int = Field(default=1, ge=1)
    cases: int = Field(default=20, ge=1)
    workers: int | None = Field(default=None, ge=1)

    @field_validator("path")
    @classmethod
    def _known_path(cls, value: str) -> str:
        if value not in GRID_PATHS:
            raise ValueError(f"Unknown path kind: {value!r} (expected one of {', '.join(GRID_PATHS)})")
        return value

    @field_validator("n_list")
    @classmethod
    def _positive_n_list(cls, value: list[int] | None) -> list[int] | None:
        if value is None:
            return value
        if not value:
            raise ValueError("n-list must not be empty")
        if any(n < 1 for n in value):
            raise ValueError("n-list values must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n-list must be strictly increasing")
        return value

    @field_validator("t0", "t")
    @classmethod
    def _parse_complex(cls, value: Any) -> Any:
        if value is not None:
            to_complex(value)
        return value

    def start(self) -> complex:
        return to_complex(self.t0)

    def endpoint(self) -> complex:
        return self.start() + 1 if self.t is None else to_complex(self.t)


def complex_json(value: complex) -> list[float]:
    return list(_pair(complex(value)))
