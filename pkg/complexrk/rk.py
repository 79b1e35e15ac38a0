from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Any, Callable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import ComplexRKError, DimensionError, DomainError, InvalidArgumentError, StepFailure
from .grids import TimeGrid
from .numerics import CMatrix, CVector, as_matrix, as_vector, mat_poly_eval
from .schemas import TableauSpec, parse

logger = logging.getLogger(__name__)

RightHandSide = Callable[[complex, np.ndarray], np.ndarray]
Scalar = Fraction | complex


def _exact(value: Any) -> Scalar:
    """Keep rationals exact, everything else becomes complex."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _as_pair(value: Scalar) -> list[float]:
    number = complex(value)
    return [number.real, number.imag]


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    name: str
    A: tuple[tuple[Scalar, ...], ...]
    b: tuple[Scalar, ...]
    c: tuple[Scalar, ...]
    order: int
    symmetric: bool = False
    a_matrix: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        A = tuple(tuple(_exact(entry) for entry in row) for row in self.A)
        b = tuple(_exact(entry) for entry in self.b)
        c = tuple(_exact(entry) for entry in self.c)
        s = len(b)
        if s < 1:
            raise InvalidArgumentError("a tableau needs at least one stage")
        if len(A) != s or any(len(row) != s for row in A) or len(c) != s:
            raise DimensionError(f"tableau {self.name!r}: A must be {s}x{s} and c must have {s} entries")
        for i, row in enumerate(A):
            if any(row[j] != 0 for j in range(i, s)):
                raise InvalidArgumentError(f"tableau {self.name!r} is not explicit: A[{i}] has entries on or above the diagonal")
        if not 1 <= self.order <= s:
            raise InvalidArgumentError(f"tableau {self.name!r}: order must lie in [1, {s}], got {self.order}")

        complex_valued = any(isinstance(v, complex) and v.imag != 0 for v in (*b, *c, *(e for row in A for e in row)))
        dtype = np.complex128 if complex_valued else np.float64
        a_matrix = np.array([[complex(e) for e in row] for row in A], dtype=np.complex128)
        weights = np.array([complex(e) for e in b], dtype=np.complex128)
        nodes = np.array([complex(e) for e in c], dtype=np.complex128)
        for array in (a_matrix, weights, nodes):
            if not np.all(np.isfinite(array)):
                raise DomainError(f"tableau {self.name!r} has non-finite coefficients")
        if dtype is np.float64:
            a_matrix, weights, nodes = a_matrix.real.copy(), weights.real.copy(), nodes.real.copy()

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_matrix", a_matrix)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "nodes", nodes)

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def gain(self) -> int:
        return 2 if self.symmetric else 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.a_matrix)

    @property
    def is_rational(self) -> bool:
        return all(isinstance(v, Fraction) for v in (*self.b, *(e for row in self.A for e in row)))

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "s": self.s,
            "A": [[_as_pair(entry) for entry in row] for row in self.A],
            "b": [_as_pair(entry) for entry in self.b],
            "c": [_as_pair(entry) for entry in self.c],
            "order": self.order,
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> ButcherTableau:
        spec = parse(TableauSpec, payload)
        return cls(
            name=spec.name,
            A=tuple(tuple(complex(*entry) for entry in row) for row in spec.A),
            b=tuple(complex(*entry) for entry in spec.b),
            c=tuple(complex(*entry) for entry in spec.c),
            order=spec.order,
            symmetric=spec.symmetric,
        )


def _rows(*rows: Sequence[str | int]) -> tuple[tuple[Fraction, ...], ...]:
    size = len(rows)
    return tuple(tuple(Fraction(v) for v in row) + (Fraction(0),) * (size - len(row)) for row in rows)


EULER = ButcherTableau("euler", _rows([]), (1,), (0,), order=1)
HEUN = ButcherTableau("heun", _rows([], [1]), ("1/2", "1/2"), (0, 1), order=2)
RK4 = ButcherTableau(
    "rk4",
    _rows([], ["1/2"], [0, "1/2"], [0, 0, 1]),
    ("1/6", "1/3", "1/3", "1/6"),
    (0, "1/2", "1/2", 1),
    order=4,
)
DOPRI5 = ButcherTableau(
    "dopri5",
    _rows(
        [],
        ["1/5"],
        ["3/40", "9/40"],
        ["44/45", "-56/15", "32/9"],
        ["19372/6561", "-25360/2187", "64448/6561", "-212/729"],
        ["9017/3168", "-355/33", "46732/5247", "49/176", "-5103/18656"],
    ),
    ("35/384", 0, "500/1113", "125/192", "-2187/6784", "11/84"),
    (0, "1/5", "3/10", "4/5", "8/9", 1),
    order=5,
)

TABLEAUS: dict[str, ButcherTableau] = {tab.name: tab for tab in (EULER, HEUN, RK4, DOPRI5)}


def get_tableau(name: str) -> ButcherTableau:
    key = name.strip().lower()
    if key not in TABLEAUS:
        raise InvalidArgumentError(f"Unknown method: {name!r} (available: {', '.join(sorted(TABLEAUS))})")
    return TABLEAUS[key]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values x_j attached to the nodes of a TimeGrid; row j belongs to node j."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        if values.ndim != 2 or values.shape[0] != self.grid.nodes.size:
            raise DimensionError(f"expected {self.grid.nodes.size} value rows, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    def real(self) -> GridFunction:
        return GridFunction(self.grid, self.values.real.copy())

    def im_norms(self) -> npt.NDArray[np.float64]:
        if not np.iscomplexobj(self.values):
            return np.zeros(self.values.shape[0])
        return np.linalg.norm(self.values.imag, axis=1)

    def csv_header(self) -> list[str]:
        columns = ["index", "re_t", "im_t"]
        for i in range(self.values.shape[1]):
            columns += [f"re_x{i + 1}", f"im_x{i + 1}"]
        return columns

    def csv_rows(self, stride: int = 1) -> list[list[Any]]:
        last = self.values.shape[0] - 1
        indices = list(range(0, last + 1, max(1, stride)))
        if indices[-1] != last:
            indices.append(last)
        rows = []
        for j in indices:
            node = self.grid.nodes[j]
            row: list[Any] = [j, node.real, node.imag]
            for entry in self.values[j]:
                row += [entry.real, getattr(entry, "imag", 0.0)]
            rows.append(row)
        return rows


def rk_step(tab: ButcherTableau, f: RightHandSide, t: complex, tau: complex, x: np.ndarray) -> np.ndarray:
    """One explicit Runge-Kutta step x -> x + tau * sum_i b_i k_i."""
    x = np.asarray(x)
    if tau == 0:
        return x.copy()
    dtype = np.result_type(x.dtype, tab.a_matrix.dtype, np.asarray(tau).dtype)
    stages = np.empty((tab.s, x.size), dtype=dtype)
    for i in range(tab.s):
        if i == 0:
            stage_x = x
        else:
            stage_x = x + tau * (tab.a_matrix[i, :i] @ stages[:i])
        stages[i] = f(t + tab.nodes[i] * tau, stage_x)
    return x + tau * (tab.weights @ stages)


def integrate(tab: ButcherTableau, f: RightHandSide, grid: TimeGrid, x0: npt.ArrayLike) -> GridFunction:
    """Run the one-step recursion x_{j+1} = Psi(t_j, tau_j) x_j over the whole grid."""
    x = np.asarray(x0)
    if x.ndim != 1 or x.size == 0:
        raise DimensionError(f"initial value must be a non-empty vector, got shape {x.shape}")

    if grid.is_real and tab.is_real and not np.iscomplexobj(x):
        times, steps, dtype = grid.nodes.real, grid.steps.real, np.float64
    else:
        times, steps, dtype = grid.nodes, grid.steps, np.complex128
        x = x.astype(np.complex128)

    values = np.empty((grid.n + 1, x.size), dtype=dtype)
    values[0] = x
    for j in range(grid.n):
        try:
            values[j + 1] = rk_step(tab, f, times[j], steps[j], values[j])
        except (ComplexRKError, ArithmeticError, ValueError) as exc:
            raise StepFailure(j, reason=str(exc)) from exc
    if not np.all(np.isfinite(values[-1])):
        raise StepFailure(grid.n - 1, reason="non-finite terminal value")
    return GridFunction(grid, values)


def _poly_add(left: list[Scalar], right: list[Scalar]) -> list[Scalar]:
    size = max(len(left), len(right))
    left = left + [0] * (size - len(left))
    right = right + [0] * (size - len(right))
    return [a + b for a, b in zip(left, right)]


def _poly_scale_shift(coeff: Scalar, poly: list[Scalar]) -> list[Scalar]:
    """coeff * z * poly(z)"""
    return [0] + [coeff * value for value in poly]


def stability_polynomial(tab: ButcherTableau) -> list[Scalar]:
    """Coefficients p_0..p_s with Psi(tau) x = P(tau A) x on x' = A x.

    Stage polynomials follow P_1 = 1, P_i = 1 + z sum_{j<i} A_ij P_j and
    P = 1 + z sum_i b_i P_i. Rational tableaus give exact Fractions.
    """
    if tab.is_rational:
        A: Sequence[Sequence[Scalar]] = tab.A
        b: Sequence[Scalar] = tab.b
    else:
        A = [[complex(e) for e in row] for row in tab.A]
        b = [complex(e) for e in tab.b]

    stage_polys: list[list[Scalar]] = []
    for i in range(tab.s):
        poly: list[Scalar] = [Fraction(1)]
        for j in range(i):
            if A[i][j] != 0:
                poly = _poly_add(poly, _poly_scale_shift(A[i][j], stage_polys[j]))
        stage_polys.append(poly)

    total: list[Scalar] = [Fraction(1)]
    for i in range(tab.s):
        if b[i] != 0:
            total = _poly_add(total, _poly_scale_shift(b[i], stage_polys[i]))
    total = total + [Fraction(0)] * (tab.s + 1 - len(total))
    return total[: tab.s + 1]


def linear_step_matrix(tab: ButcherTableau, A: npt.ArrayLike, tau: complex) -> CMatrix:
    matrix = as_matrix(A, name="A")
    return mat_poly_eval(stability_polynomial(tab), complex(tau) * matrix)


def linear_rhs(A: npt.ArrayLike) -> RightHandSide:
    matrix = as_matrix(A, name="A")
    if not np.any(matrix.imag):
        real_matrix = matrix.real.copy()

        def rhs(t: complex, x: np.ndarray) -> np.ndarray:
            return real_matrix @ x

        return rhs

    def complex_rhs(t: complex, x: np.ndarray) -> np.ndarray:
        return matrix @ x

    return complex_rhs


def initial_vector(x0: npt.ArrayLike) -> CVector | npt.NDArray[np.float64]:
    vector = as_vector(x0, name="x0")
    return vector.real.copy() if not np.any(vector.imag) else vector
