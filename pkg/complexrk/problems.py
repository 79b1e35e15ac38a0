from __future__ import annotations

import cmath
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, InvalidArgumentError, SingularityError
from .grids import PathSpec, discretize
from .numerics import CMatrix, as_matrix, as_vector, exact_linear_flow
from .rk import DOPRI5, GridFunction, RightHandSide, initial_vector, integrate, linear_rhs
from .schemas import LinearProblemSpec, parse
from .storage import DataStore

logger = logging.getLogger(__name__)

LINEAR = "linear"
GENERAL = "general"

ARENSTORF_MU = 0.012277471
ARENSTORF_MU_HAT = 1.0 - ARENSTORF_MU
ARENSTORF_PERIOD = 17.065216560157960
ARENSTORF_X0 = (0.994, 0.0, 0.0, -2.001585106379080)
ARENSTORF_POSITION = (0, 1)
MIN_REFERENCE_STEPS = 10000
SINGULARITY_GUARD = 1e-9

ExactFlow = Callable[[complex, complex, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class IVProblem:
    name: str
    dimension: int
    rhs: RightHandSide
    t0: complex
    x0: np.ndarray
    kind: str = GENERAL
    matrix: CMatrix | None = None
    exact_flow: ExactFlow | None = None
    t_end: complex = 1 + 0j

    def __post_init__(self) -> None:
        x0 = np.asarray(self.x0)
        if x0.shape != (self.dimension,):
            raise DimensionError(f"problem {self.name!r}: x0 has shape {x0.shape}, expected ({self.dimension},)")
        if self.kind not in (LINEAR, GENERAL):
            raise InvalidArgumentError(f"Unknown problem kind: {self.kind!r}")
        if self.kind == LINEAR and (self.matrix is None or self.exact_flow is None):
            raise InvalidArgumentError(f"linear problem {self.name!r} needs its matrix and exact flow")
        object.__setattr__(self, "x0", x0)

    @property
    def is_linear(self) -> bool:
        return self.kind == LINEAR

    def exact(self, t: complex) -> np.ndarray:
        if self.exact_flow is None:
            raise InvalidArgumentError(f"problem {self.name!r} has no exact flow")
        return self.exact_flow(self.t0, t, self.x0)


def make_linear(A: npt.ArrayLike, t0: complex, x0: npt.ArrayLike, *, name: str = LINEAR, t_end: complex = 1 + 0j) -> IVProblem:
    matrix = as_matrix(A, name="A")
    vector = as_vector(x0, name="x0")
    if matrix.shape[0] != vector.size:
        raise DimensionError(f"A is {matrix.shape[0]}x{matrix.shape[0]} but x0 has {vector.size} entries")

    def flow(start: complex, stop: complex, value: np.ndarray) -> np.ndarray:
        return exact_linear_flow(matrix, start, stop, value)

    return IVProblem(
        name=name,
        dimension=vector.size,
        rhs=linear_rhs(matrix),
        t0=complex(t0),
        x0=initial_vector(vector),
        kind=LINEAR,
        matrix=matrix,
        exact_flow=flow,
        t_end=complex(t_end),
    )


def exponential_problem() -> IVProblem:
    return make_linear([[1.0]], 0.0, [1.0], name="exp")


def rotation_problem() -> IVProblem:
    return make_linear([[0.0, 1.0], [-1.0, 0.0]], 0.0, [1.0, 0.0], name="rotation", t_end=math.pi / 2)


def _radius_cubed(w: complex | float) -> complex | float:
    """Principal branch of w**(3/2)."""
    if isinstance(w, complex):
        return w * cmath.sqrt(w)
    return w * math.sqrt(w)


def arenstorf_rhs(state: npt.ArrayLike) -> np.ndarray:
    """Planar restricted three-body right-hand side for (x1, x2, x1', x2')."""
    state = np.asarray(state)
    if state.shape != (4,):
        raise DimensionError(f"Arenstorf state must have 4 entries, got shape {state.shape}")
    x1, x2, v1, v2 = state.tolist()
    mu, mu_hat = ARENSTORF_MU, ARENSTORF_MU_HAT

    w_earth = (x1 + mu) ** 2 + x2**2
    w_moon = (x1 - mu_hat) ** 2 + x2**2
    d_earth = _radius_cubed(w_earth)
    d_moon = _radius_cubed(w_moon)
    if abs(d_earth) < SINGULARITY_GUARD:
        raise SingularityError(1, abs(d_earth))
    if abs(d_moon) < SINGULARITY_GUARD:
        raise SingularityError(2, abs(d_moon))
    if isinstance(w_earth, complex) and logger.isEnabledFor(logging.DEBUG):
        logger.debug(
            "branch proximity: earth %.3e, moon %.3e",
            abs(w_earth.imag) / max(abs(w_earth.real), 1e-300),
            abs(w_moon.imag) / max(abs(w_moon.real), 1e-300),
        )

    a1 = x1 + 2 * v2 - mu_hat * (x1 + mu) / d_earth - mu * (x1 - mu_hat) / d_moon
    a2 = x2 - 2 * v1 - mu_hat * x2 / d_earth - mu * x2 / d_moon
    return np.array([v1, v2, a1, a2], dtype=state.dtype if np.iscomplexobj(state) else np.float64)


def _arenstorf_time_rhs(t: complex, x: np.ndarray) -> np.ndarray:
    return arenstorf_rhs(x)


def arenstorf_problem() -> IVProblem:
    return IVProblem(
        name="arenstorf",
        dimension=4,
        rhs=_arenstorf_time_rhs,
        t0=0j,
        x0=np.array(ARENSTORF_X0, dtype=np.float64),
        kind=GENERAL,
        t_end=complex(ARENSTORF_PERIOD),
    )


def arenstorf_reference(n_steps: int = 100000, *, store: DataStore | None = None, t_end: float = ARENSTORF_PERIOD) -> GridFunction:
    """Fixed-step Dormand-Prince trajectory on a real equidistant grid over [0, t_end]."""
    if n_steps < MIN_REFERENCE_STEPS:
        raise InvalidArgumentError(f"reference needs at least {MIN_REFERENCE_STEPS} steps, got {n_steps}")
    problem = arenstorf_problem()
    grid = discretize(PathSpec.real_segment(0.0, t_end), n_steps)

    def compute() -> np.ndarray:
        return integrate(DOPRI5, problem.rhs, grid, problem.x0).values

    if store is None or t_end != ARENSTORF_PERIOD:
        return GridFunction(grid, compute())
    return GridFunction(grid, store.cached_array("arenstorf", n_steps, compute))


BUILTIN_PROBLEMS: dict[str, Callable[[], IVProblem]] = {
    "exp": exponential_problem,
    "rotation": rotation_problem,
    "arenstorf": arenstorf_problem,
}


def load_problem(name_or_path: str) -> IVProblem:
    """Built-in problem by name, or a linear problem from a JSON file."""
    key = name_or_path.strip().lower()
    if key in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[key]()

    path = Path(name_or_path)
    if not path.exists():
        raise InvalidArgumentError(
            f"Unknown problem: {name_or_path!r} (built-ins: {', '.join(BUILTIN_PROBLEMS)}, or a JSON file path)"
        )
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"Invalid JSON in {path}: {exc}") from exc
    return problem_from_json(payload, name=path.stem)


def problem_from_json(payload: dict, *, name: str = LINEAR) -> IVProblem:
    spec = parse(LinearProblemSpec, payload)
    return make_linear(spec.matrix(), spec.start(), spec.initial(), name=name, t_end=spec.end())
