from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import ComplexRKError, InvalidArgumentError, StepFailure
from .grids import PathSpec, TimeGrid, discretize, fractal_grid, normalized_circle_steps
from .rk import ButcherTableau, GridFunction, RightHandSide, rk_step
from .schemas import ScheduleSpec, parse

logger = logging.getLogger(__name__)

ORDER_CONDITION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CompositionSchedule:
    """Complex coefficients sigma_1..sigma_k of one macro step."""

    sigma: tuple[complex, ...]
    base_order: int
    gain: int = 1
    partial_sums: tuple[complex, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        sigma = tuple(complex(value) for value in self.sigma)
        if len(sigma) < 2:
            raise InvalidArgumentError(f"a composition needs k >= 2 coefficients, got {len(sigma)}")
        if not all(np.isfinite(value) for value in sigma):
            raise InvalidArgumentError("composition coefficients must be finite")
        if self.base_order < 1 or self.gain < 1:
            raise InvalidArgumentError("base_order and gain must be >= 1")
        sums = [0j]
        for value in sigma[:-1]:
            sums.append(sums[-1] + value)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "partial_sums", tuple(sums))

    @property
    def k(self) -> int:
        return len(self.sigma)

    def validate(self, tol: float = ORDER_CONDITION_TOL) -> CompositionSchedule:
        consistency, cancellation = order_condition_residuals(self)
        if consistency > tol or cancellation > tol:
            raise InvalidArgumentError(
                f"schedule violates the order conditions: |sum - 1| = {consistency:.3e}, "
                f"|sum sigma^{self.base_order + 1}| = {cancellation:.3e}"
            )
        return self

    def to_json(self) -> dict[str, Any]:
        return {
            "p": self.base_order,
            "k": self.k,
            "g": self.gain,
            "sigma": [[value.real, value.imag] for value in self.sigma],
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> CompositionSchedule:
        spec = parse(ScheduleSpec, payload)
        if len(spec.sigma) != spec.k:
            raise InvalidArgumentError(f"schedule declares k={spec.k} but lists {len(spec.sigma)} coefficients")
        schedule = cls(tuple(complex(*pair) for pair in spec.sigma), spec.p, spec.g)
        return schedule.validate()


def schedule_from_path(p: int, k: int, gain: int = 1) -> CompositionSchedule:
    """Coefficients read off the k-step grid on the (p+1)-th circle segment from 0 to 1."""
    if k < 2:
        raise InvalidArgumentError(f"k must be >= 2, got {k}")
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    return CompositionSchedule(normalized_circle_steps(p, k), p, gain).validate()


def order_condition_residuals(sched: CompositionSchedule) -> tuple[float, float]:
    sigma = np.array(sched.sigma)
    consistency = abs(complex(sigma.sum()) - 1)
    cancellation = abs(complex(np.sum(sigma ** (sched.base_order + 1))))
    return float(consistency), float(cancellation)


def compose_step(
    tab: ButcherTableau,
    sched: CompositionSchedule,
    f: RightHandSide,
    t: complex,
    h: complex,
    x: np.ndarray,
) -> np.ndarray:
    """One macro step: micro steps sigma_l * h applied in order."""
    x = np.asarray(x)
    if h == 0:
        return x.copy()
    for index, (sigma, offset) in enumerate(zip(sched.sigma, sched.partial_sums)):
        try:
            x = rk_step(tab, f, t + offset * h, sigma * h, x)
        except (ComplexRKError, ArithmeticError, ValueError) as exc:
            raise StepFailure(0, micro_index=index, reason=str(exc)) from exc
    return x


def micro_grid(sched: CompositionSchedule, t: complex, h: complex) -> TimeGrid:
    return TimeGrid.from_steps(t, [sigma * h for sigma in sched.sigma])


def compose_integrate(
    tab: ButcherTableau,
    sched: CompositionSchedule,
    f: RightHandSide,
    grid: TimeGrid,
    x0: npt.ArrayLike,
    *,
    real_projection: bool = False,
) -> GridFunction:
    """Macro stepping along `grid`.

    By default the state stays complex between macro steps. With
    `real_projection` a real initial value is kept real: the imaginary part
    left by each macro step is logged and dropped.
    """
    x0 = np.asarray(x0)
    if real_projection and np.iscomplexobj(x0) and np.any(x0.imag):
        raise InvalidArgumentError("real projection needs a real initial value")
    dtype = np.float64 if real_projection else np.complex128
    values = np.empty((grid.n + 1, x0.size), dtype=dtype)
    values[0] = x0.real if real_projection else x0
    debug = logger.isEnabledFor(logging.DEBUG)
    worst = 0.0
    for j in range(grid.n):
        try:
            step = compose_step(tab, sched, f, grid.nodes[j], grid.steps[j], values[j])
        except StepFailure as exc:
            raise StepFailure(j, micro_index=exc.micro_index, reason=str(exc.__cause__)) from exc.__cause__
        im_norm = float(np.linalg.norm(np.imag(step)))
        worst = max(worst, im_norm)
        if debug:
            logger.debug("macro step %d: |Im x| = %.3e", j, im_norm)
        values[j + 1] = step.real if real_projection else step
    logger.info(
        "composed run over %d macro steps: max |Im x| = %.3e%s",
        grid.n,
        worst,
        " (projected out)" if real_projection else "",
    )
    return GridFunction(grid, values)


@dataclass(frozen=True)
class IteratedMethod:
    """Base method iterated r times through k-step compositions."""

    tableau: ButcherTableau
    k: int
    r: int
    gain: int

    @property
    def base_order(self) -> int:
        return self.tableau.order

    @property
    def order(self) -> int:
        return self.base_order + self.r * self.gain

    @property
    def micro_steps(self) -> int:
        return self.k**self.r

    def grid(self, t0: complex, h: complex) -> TimeGrid:
        return fractal_grid(self.base_order, self.gain, self.k, self.r, t0, h)

    def __call__(self, t0: complex, h: complex) -> TimeGrid:
        return self.grid(t0, h)

    def macro_grid(self, t0: complex, t: complex, n_macro: int) -> TimeGrid:
        """Fractal micro grids over n_macro equal macro steps from t0 to t."""
        macro = discretize_macro(t0, t, n_macro)
        return TimeGrid.concatenate([self.grid(macro.nodes[j], macro.steps[j]) for j in range(macro.n)])


def discretize_macro(t0: complex, t: complex, n_macro: int) -> TimeGrid:
    return discretize(PathSpec.real_segment(t0, t), n_macro)


def iterate_method(tab: ButcherTableau, k: int, r: int, gain: int | None = None) -> IteratedMethod:
    if k < 2:
        raise InvalidArgumentError(f"k must be >= 2, got {k}")
    if r < 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    resolved = tab.gain if gain is None else gain
    if resolved < 1:
        raise InvalidArgumentError(f"gain must be >= 1, got {resolved}")
    return IteratedMethod(tab, k, r, resolved)
