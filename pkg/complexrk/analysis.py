from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import numpy.typing as npt

from .composition import compose_integrate, schedule_from_path
from .errors import DimensionError, IndeterminateOrderError, InvalidArgumentError, NoReferenceError
from .grids import PathSpec, TimeGrid, discretize, symmetric_witness
from .numerics import CVector, as_matrix, as_vector, mat_exp
from .problems import (
    ARENSTORF_PERIOD,
    ARENSTORF_POSITION,
    IVProblem,
    arenstorf_problem,
    arenstorf_reference,
    make_linear,
)
from .rk import EULER, HEUN, RK4, ButcherTableau, GridFunction, integrate, stability_polynomial
from .storage import DataStore

logger = logging.getLogger(__name__)

FIT_FLOOR = 1e-13
MIN_STUDY_POINTS = 4
STUDY_CSV_HEADER = ["n", "delta_n", "error", "im_norm"]
REALITY_CSV_HEADER = [
    "case",
    "dimension",
    "method",
    "p",
    "n",
    "terminal_norm",
    "terminal_im_norm",
    "max_node_im_norm",
    "witness",
    "passed",
]
REALITY_RTOL = 1e-10

GridFactory = Callable[[int], TimeGrid]


@dataclass(frozen=True)
class ConvergenceStudy:
    n_values: list[int]
    deltas: list[float]
    terminal_errors: list[float]
    im_norms: list[float]
    fitted_slope: float
    fit_window: tuple[int, int]

    def csv_rows(self) -> list[list[Any]]:
        return study_csv_rows(self)


def terminal_error(
    gf: GridFunction,
    problem: IVProblem,
    reference: GridFunction | npt.ArrayLike | None = None,
    *,
    components: Sequence[int] | None = None,
) -> float:
    """Euclidean distance between the computed and the true value at the last node.

    `components` restricts the distance to the listed state entries.
    """
    if reference is not None:
        target = reference.terminal if isinstance(reference, GridFunction) else np.asarray(reference)
    elif problem.exact_flow is not None:
        target = problem.exact(gf.grid.t_end)
    else:
        raise NoReferenceError(f"problem {problem.name!r} has neither an exact flow nor a reference trajectory")
    target = np.asarray(target)
    if target.shape != gf.terminal.shape:
        raise DimensionError(f"reference has shape {target.shape}, trajectory terminal has {gf.terminal.shape}")
    difference = target - gf.terminal
    if components is not None:
        indices = [int(i) for i in components]
        if not indices or any(not 0 <= i < difference.size for i in indices):
            raise DimensionError(f"components {indices} do not index a state of size {difference.size}")
        difference = difference[indices]
    return float(np.linalg.norm(difference))


def fit_order(
    n_values: Sequence[int],
    errors: Sequence[float],
    floor: float = FIT_FLOOR,
) -> tuple[float, tuple[int, int]]:
    """Least-squares slope of log(error) against log(1/n).

    The window is the longest run of strictly decreasing errors above `floor`
    that ends at the last such error. Returns (slope, (start, stop)) with
    `stop` exclusive.
    """
    n = np.asarray(n_values, dtype=np.float64)
    err = np.asarray(errors, dtype=np.float64)
    if n.shape != err.shape:
        raise DimensionError(f"{n.size} n-values but {err.size} errors")
    if n.size < MIN_STUDY_POINTS:
        raise InvalidArgumentError(f"an order fit needs at least {MIN_STUDY_POINTS} n-values, got {n.size}")
    if np.any(n < 1) or np.any(np.diff(n) <= 0):
        raise InvalidArgumentError("n-values must be positive and strictly increasing")
    if not np.all(np.isfinite(err)) or np.any(err < 0):
        raise InvalidArgumentError("errors must be finite and non-negative")

    above = np.flatnonzero(err > floor)
    if above.size == 0:
        raise IndeterminateOrderError(f"every error is at the rounding floor {floor:.1e}")
    # first index that is at the floor ends the window
    stop = int(above[0])
    while stop < err.size and err[stop] > floor:
        stop += 1
    start = stop - 1
    while start > 0 and err[start - 1] > err[start]:
        start -= 1
    if stop - start < 2:
        raise IndeterminateOrderError(f"no decreasing error window above {floor:.1e}")

    slope, _ = np.polyfit(np.log(1.0 / n[start:stop]), np.log(err[start:stop]), 1)
    return float(slope), (start, stop)


def _study_point(tab: ButcherTableau, problem: IVProblem, grid_factory: GridFactory, n: int) -> tuple[float, float, float]:
    grid = grid_factory(n)
    if abs(grid.t0 - problem.t0) > 1e-12 * max(1.0, abs(problem.t0)):
        raise InvalidArgumentError(f"grid starts at {grid.t0}, problem {problem.name!r} at {problem.t0}")
    gf = integrate(tab, problem.rhs, grid, problem.x0)
    return grid.max_step, terminal_error(gf, problem), float(gf.im_norms()[-1])


def estimate_order(
    tab: ButcherTableau,
    problem: IVProblem,
    grid_factory: GridFactory,
    n_values: Sequence[int],
    *,
    floor: float = FIT_FLOOR,
    max_workers: int | None = None,
) -> ConvergenceStudy:
    """Terminal errors over a family of grids and the fitted convergence order."""
    n_list = [int(n) for n in n_values]
    if len(n_list) < MIN_STUDY_POINTS:
        raise InvalidArgumentError(f"an order study needs at least {MIN_STUDY_POINTS} n-values, got {len(n_list)}")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise InvalidArgumentError("n-values must be positive and strictly increasing")

    def run(n: int) -> tuple[float, float, float]:
        return _study_point(tab, problem, grid_factory, n)

    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(run, n_list))
    else:
        points = [run(n) for n in n_list]

    deltas = [point[0] for point in points]
    errors = [point[1] for point in points]
    im_norms = [point[2] for point in points]
    slope, window = fit_order(n_list, errors, floor)
    logger.info(
        "order study %s/%s over n=%s..%s: slope %.4f (window %d:%d)",
        tab.name,
        problem.name,
        n_list[0],
        n_list[-1],
        slope,
        *window,
    )
    return ConvergenceStudy(n_list, deltas, errors, im_norms, slope, window)


def study_csv_rows(study: ConvergenceStudy) -> list[list[Any]]:
    return [
        [n, float(delta), float(error), float(im_norm)]
        for n, delta, error, im_norm in zip(study.n_values, study.deltas, study.terminal_errors, study.im_norms)
    ]


def main_theorem_ratio(
    tab: ButcherTableau,
    A: npt.ArrayLike | IVProblem,
    x0: npt.ArrayLike | None,
    path: PathSpec,
    n: int,
) -> tuple[CVector, CVector]:
    """Scaled terminal error and its predicted leading term on x' = A x.

    lhs = eps_n / delta_n^p from an actual run; rhs is
    delta_n^-p * sum_j tau_j^(p+1) * exp((t - t0) A) [A^(p+1)/(p+1)! - C] x0
    with C = p_{p+1} A^(p+1) taken from the stability polynomial.
    """
    if isinstance(A, IVProblem):
        if not A.is_linear:
            raise InvalidArgumentError(f"leading-term analysis needs a linear problem, {A.name!r} is not")
        matrix = A.matrix
        vector = as_vector(A.x0 if x0 is None else x0, name="x0")
    else:
        if callable(A):
            raise InvalidArgumentError("leading-term analysis needs a matrix, not a right-hand side")
        matrix = as_matrix(A, name="A")
        if x0 is None:
            raise InvalidArgumentError("x0 is required when A is given as a matrix")
        vector = as_vector(x0, name="x0")

    problem = make_linear(matrix, path.t0, vector, t_end=path.t)
    grid = discretize(path, n)
    gf = integrate(tab, problem.rhs, grid, problem.x0)
    flow = mat_exp((path.t - path.t0) * matrix)
    error = flow @ vector - gf.terminal

    p = tab.order
    delta = grid.max_step
    scale = delta**p
    lhs = error / scale

    coefficients = stability_polynomial(tab)
    c_coeff = complex(coefficients[p + 1]) if p + 1 < len(coefficients) else 0j
    power = np.linalg.matrix_power(matrix, p + 1)
    bracket = power / math.factorial(p + 1) - c_coeff * power
    step_sum = grid.power_sum(p + 1)
    rhs = step_sum / scale * (flow @ (bracket @ vector))
    return lhs, rhs


def relative_gap(lhs: npt.ArrayLike, rhs: npt.ArrayLike, atol: float = 1e-12) -> float:
    """||lhs - rhs|| / ||rhs||, absolute below `atol`."""
    gap = float(np.linalg.norm(np.asarray(lhs) - np.asarray(rhs)))
    scale = float(np.linalg.norm(rhs))
    return gap / scale if scale > atol else gap


def reality_report(gf: GridFunction) -> tuple[float, float]:
    norms = gf.im_norms()
    return float(norms[-1]), float(norms.max())


@dataclass(frozen=True)
class RealityCase:
    index: int
    dimension: int
    method: str
    p: int
    n: int
    terminal_norm: float
    terminal_im_norm: float
    max_node_im_norm: float
    witness: tuple[int, ...] | None = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.terminal_im_norm <= REALITY_RTOL * (1.0 + self.terminal_norm)

    def csv_row(self) -> list[Any]:
        return [
            self.index,
            self.dimension,
            self.method,
            self.p,
            self.n,
            self.terminal_norm,
            self.terminal_im_norm,
            self.max_node_im_norm,
            int(self.witness is not None),
            int(self.passed),
        ]


def reality_suite(
    rng: np.random.Generator,
    cases: int = 20,
    *,
    max_dimension: int = 3,
    tableaus: Sequence[ButcherTableau] = (EULER, HEUN, RK4),
    p_values: Sequence[int] = (1, 2, 3),
    n_range: tuple[int, int] = (4, 32),
    t: float = 1.0,
) -> list[RealityCase]:
    """Random real linear systems integrated along real-ended circle segments."""
    results = []
    for index in range(cases):
        dimension = int(rng.integers(1, max_dimension + 1))
        A = rng.standard_normal((dimension, dimension))
        x0 = rng.standard_normal(dimension)
        tab = tableaus[int(rng.integers(len(tableaus)))]
        p = int(p_values[int(rng.integers(len(p_values)))])
        n = int(rng.integers(n_range[0], n_range[1] + 1))

        grid = discretize(PathSpec.circle_segment(0.0, t, p), n)
        problem = make_linear(A, 0.0, x0, t_end=t)
        gf = integrate(tab, problem.rhs, grid, problem.x0)
        terminal_im, max_im = reality_report(gf)
        case = RealityCase(
            index=index,
            dimension=dimension,
            method=tab.name,
            p=p,
            n=n,
            terminal_norm=float(np.linalg.norm(gf.terminal)),
            terminal_im_norm=terminal_im,
            max_node_im_norm=max_im,
            witness=symmetric_witness(grid),
        )
        if not case.passed:
            logger.warning("reality case %d (%s, p=%d, n=%d): |Im x_n| = %.3e", index, tab.name, p, n, terminal_im)
        results.append(case)
    logger.info("reality suite: %d/%d cases real at the terminal node", sum(c.passed for c in results), len(results))
    return results


@dataclass(frozen=True)
class ArenstorfResult:
    reference: GridFunction
    plain: GridFunction | None
    composed: GridFunction | None
    plain_error: float | None
    composed_error: float | None

    @property
    def ratio(self) -> float | None:
        if self.plain_error is None or not self.composed_error:
            return None
        return self.plain_error / self.composed_error

    @property
    def closure_error(self) -> float:
        """Distance between the reference end point and the initial value after one period."""
        return float(np.linalg.norm(self.reference.terminal - self.reference.initial))


def arenstorf_benchmark(
    n_plain: int = 100000,
    n_macro: int = 50000,
    *,
    k: int = 2,
    reference_steps: int = 100000,
    store: DataStore | None = None,
    plain: bool = True,
    composed: bool = True,
) -> ArenstorfResult:
    """Plain Euler against Euler composed along the circle schedule, both over one period.

    The composed state is projected back to the reals after every macro step.
    Errors are position errors (x1, x2) at t = T against the reference orbit.
    """
    problem = arenstorf_problem()
    reference = arenstorf_reference(reference_steps, store=store)

    plain_gf = plain_error = None
    if plain:
        grid = discretize(PathSpec.real_segment(0.0, ARENSTORF_PERIOD), n_plain)
        plain_gf = integrate(EULER, problem.rhs, grid, problem.x0)
        plain_error = terminal_error(plain_gf, problem, reference, components=ARENSTORF_POSITION)
        logger.info("plain Euler, %d steps: position error %.6e", n_plain, plain_error)

    composed_gf = composed_error = None
    if composed:
        schedule = schedule_from_path(EULER.order, k)
        macro = discretize(PathSpec.real_segment(0.0, ARENSTORF_PERIOD), n_macro)
        composed_gf = compose_integrate(EULER, schedule, problem.rhs, macro, problem.x0, real_projection=True)
        composed_error = terminal_error(composed_gf, problem, reference, components=ARENSTORF_POSITION)
        logger.info("composed Euler, %d macro steps (k=%d): position error %.6e", n_macro, k, composed_error)

    result = ArenstorfResult(reference, plain_gf, composed_gf, plain_error, composed_error)
    if result.ratio is not None:
        logger.info("Arenstorf error ratio plain/composed: %.2f", result.ratio)
    return result
