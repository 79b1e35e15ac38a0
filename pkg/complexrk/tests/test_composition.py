from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from complexrk.composition import (
    CompositionSchedule,
    compose_integrate,
    compose_step,
    iterate_method,
    micro_grid,
    order_condition_residuals,
    schedule_from_path,
)
from complexrk.errors import InvalidArgumentError, StepFailure
from complexrk.grids import PathSpec, discretize, symmetric_witness
from complexrk.numerics import mat_poly_eval
from complexrk.rk import EULER, HEUN, RK4, ButcherTableau, integrate, linear_rhs, stability_polynomial


def _exp_rhs(t: complex, x: np.ndarray) -> np.ndarray:
    return x


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("k", range(2, 9))
def test_schedule_from_path_satisfies_order_conditions(p: int, k: int) -> None:
    schedule = schedule_from_path(p, k)
    consistency, cancellation = order_condition_residuals(schedule)
    assert schedule.k == k
    assert consistency <= 1e-12
    assert cancellation <= 1e-12


def test_two_step_schedule_for_first_order_base() -> None:
    schedule = schedule_from_path(1, 2)
    assert_allclose(schedule.sigma, [0.5 + 0.5j, 0.5 - 0.5j], atol=1e-15)
    consistency, cancellation = order_condition_residuals(schedule)
    assert consistency <= 1e-15
    assert cancellation <= 1e-15


def test_three_step_schedule_cancels_cubes() -> None:
    assert order_condition_residuals(schedule_from_path(2, 3))[1] <= 1e-14


def test_schedule_construction_rejects_single_coefficient() -> None:
    with pytest.raises(InvalidArgumentError):
        CompositionSchedule((1.0,), 1)
    with pytest.raises(InvalidArgumentError):
        schedule_from_path(1, 1)
    with pytest.raises(InvalidArgumentError):
        schedule_from_path(0, 3)


def test_real_halving_schedule_reports_residuals_but_fails_validation() -> None:
    schedule = CompositionSchedule((0.5, 0.5), 1)
    consistency, cancellation = order_condition_residuals(schedule)
    assert consistency == 0.0
    assert cancellation == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        schedule.validate()


def test_compose_step_euler_hand_expansion() -> None:
    schedule = schedule_from_path(1, 2)
    out = compose_step(EULER, schedule, _exp_rhs, 0.0, 0.1, np.array([1.0]))
    assert_allclose(out, [1.105], atol=1e-15)


def test_compose_step_with_zero_macro_step() -> None:
    x = np.array([1.0, -2.0])
    assert_allclose(compose_step(RK4, schedule_from_path(4, 3), _exp_rhs, 0.0, 0.0, x), x, atol=0)


@pytest.mark.parametrize("tab", [EULER, HEUN, RK4], ids=lambda tab: tab.name)
def test_compose_step_equals_integration_over_micro_grid(tab: ButcherTableau) -> None:
    schedule = schedule_from_path(tab.order, 3)
    A = np.array([[0.3, 1.0], [-1.0, 0.2]])
    x = np.array([1.0, 0.5])
    composed = compose_step(tab, schedule, linear_rhs(A), 0.25, 0.2, x)
    stepped = integrate(tab, linear_rhs(A), micro_grid(schedule, 0.25, 0.2), x)
    assert_allclose(composed, stepped.terminal, atol=1e-15)


@pytest.mark.parametrize("tab", [EULER, HEUN, RK4], ids=lambda tab: tab.name)
def test_linear_macro_step_is_product_of_stability_matrices(tab: ButcherTableau) -> None:
    rng = np.random.default_rng(7)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    x = rng.standard_normal(3)
    h = 0.15 - 0.05j
    schedule = schedule_from_path(tab.order, 4)
    coefficients = stability_polynomial(tab)
    expected = x.astype(complex)
    for sigma in schedule.sigma:
        expected = mat_poly_eval(coefficients, sigma * h * A) @ expected
    assert_allclose(compose_step(tab, schedule, linear_rhs(A), 0.0, h, x), expected, rtol=1e-12, atol=1e-12)


def test_compose_step_reports_micro_index() -> None:
    def rhs(t: complex, x: np.ndarray) -> np.ndarray:
        if t != 0:
            raise ZeroDivisionError("pole")
        return x

    with pytest.raises(StepFailure) as excinfo:
        compose_step(EULER, schedule_from_path(1, 3), rhs, 0.0, 0.1, np.array([1.0]))
    assert excinfo.value.micro_index == 1


def test_compose_integrate_keeps_real_problems_real() -> None:
    A = np.array([[0.0, 1.0], [-2.0, -0.1]])
    schedule = schedule_from_path(2, 4)
    macro = discretize(PathSpec.real_segment(0.0, 2.0), 20)
    assert symmetric_witness(micro_grid(schedule, 0.0, 0.1)) is not None
    gf = compose_integrate(HEUN, schedule, linear_rhs(A), macro, [1.0, 0.0])
    assert gf.values.shape == (21, 2)
    assert np.linalg.norm(gf.terminal.imag) <= 1e-12


def test_compose_integrate_reindexes_failures_to_macro_step() -> None:
    def rhs(t: complex, x: np.ndarray) -> np.ndarray:
        if t.real > 0.52:
            raise ZeroDivisionError("pole")
        return x

    macro = discretize(PathSpec.real_segment(0.0, 1.0), 10)
    with pytest.raises(StepFailure) as excinfo:
        compose_integrate(EULER, schedule_from_path(1, 2), rhs, macro, [1.0])
    assert excinfo.value.step_index == 5
    assert excinfo.value.micro_index == 1


def test_iterate_method_orders_and_sizes() -> None:
    assert iterate_method(EULER, 2, 0).order == 1
    assert iterate_method(EULER, 2, 3).order == 4
    assert iterate_method(EULER, 2, 3).micro_steps == 8
    assert iterate_method(EULER, 2, 1, gain=2).order == 3
    with pytest.raises(InvalidArgumentError):
        iterate_method(EULER, 2, -1)
    with pytest.raises(InvalidArgumentError):
        iterate_method(EULER, 1, 2)


def test_iterate_method_depth_zero_is_a_single_step() -> None:
    grid = iterate_method(RK4, 3, 0).grid(1.0, 0.5)
    assert_allclose(grid.nodes, [1.0, 1.5], atol=0)


def test_iterate_method_depth_one_nodes() -> None:
    grid = iterate_method(EULER, 2, 1)(0.0, 1.0)
    assert_allclose(grid.nodes, [0.0, 0.5 + 0.5j, 1.0], atol=1e-15)


@pytest.mark.parametrize("r", range(7))
def test_iterate_method_grid_reaches_macro_endpoint(r: int) -> None:
    method = iterate_method(EULER, 2, r)
    grid = method.grid(0.5, 0.25)
    assert grid.n == 2**r
    assert abs(grid.t_end - 0.75) <= 1e-12


def test_iterate_method_macro_grid_concatenates() -> None:
    method = iterate_method(HEUN, 3, 2)
    grid = method.macro_grid(0.0, 1.0, 5)
    assert grid.n == 5 * 9
    assert abs(grid.t_end - 1.0) <= 1e-12


def test_schedule_json() -> None:
    payload = schedule_from_path(2, 3).to_json()
    assert (payload["p"], payload["k"], payload["g"]) == (2, 3, 1)
    loaded = CompositionSchedule.from_json(payload)
    assert_allclose(loaded.sigma, schedule_from_path(2, 3).sigma, atol=0)
    with pytest.raises(InvalidArgumentError):
        CompositionSchedule.from_json({**payload, "k": 4})
    with pytest.raises(InvalidArgumentError):
        CompositionSchedule.from_json({"p": 1, "k": 2, "sigma": [[0.5, 0.0], [0.5, 0.0]]})
    with pytest.raises(InvalidArgumentError):
        CompositionSchedule.from_json({"p": 1, "k": 1, "sigma": [[1.0, 0.0]]})


def test_compose_integrate_real_projection_drops_imaginary_part_per_macro_step() -> None:
    def rhs(t: complex, x: np.ndarray) -> np.ndarray:
        return np.array([x[1], -np.sin(x[0])])

    schedule = schedule_from_path(1, 2)
    macro = discretize(PathSpec.real_segment(0.0, 1.0), 8)
    gf = compose_integrate(EULER, schedule, rhs, macro, [1.0, 0.0], real_projection=True)
    assert gf.values.dtype == np.float64

    x = np.array([1.0, 0.0])
    for j in range(macro.n):
        x = compose_step(EULER, schedule, rhs, macro.nodes[j], macro.steps[j], x).real
        assert_allclose(gf.values[j + 1], x, atol=0)

    kept = compose_integrate(EULER, schedule, rhs, macro, [1.0, 0.0])
    assert np.linalg.norm(kept.terminal.imag) > 0
    assert np.linalg.norm(kept.terminal.real - gf.terminal) > 0


def test_compose_integrate_real_projection_needs_real_initial_value() -> None:
    macro = discretize(PathSpec.real_segment(0.0, 1.0), 4)
    with pytest.raises(InvalidArgumentError):
        compose_integrate(EULER, schedule_from_path(1, 2), _exp_rhs, macro, [1.0 + 1j], real_projection=True)
