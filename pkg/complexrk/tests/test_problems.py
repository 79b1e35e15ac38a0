from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from complexrk.errors import DimensionError, InvalidArgumentError, SingularityError
from complexrk.problems import (
    ARENSTORF_MU,
    ARENSTORF_MU_HAT,
    ARENSTORF_PERIOD,
    ARENSTORF_X0,
    BUILTIN_PROBLEMS,
    arenstorf_problem,
    arenstorf_reference,
    arenstorf_rhs,
    load_problem,
    make_linear,
    problem_from_json,
)
from complexrk.storage import DataStore


def test_builtin_problems() -> None:
    assert set(BUILTIN_PROBLEMS) == {"exp", "rotation", "arenstorf"}
    exp = load_problem("exp")
    assert exp.is_linear
    assert_allclose(exp.exact(1.0), [math.e], rtol=1e-14)
    rotation = load_problem("Rotation")
    assert_allclose(rotation.exact(rotation.t_end), [0.0, -1.0], atol=1e-14)
    assert not load_problem("arenstorf").is_linear


def test_make_linear_checks_dimensions() -> None:
    with pytest.raises(DimensionError):
        make_linear(np.eye(2), 0.0, [1.0])
    problem = make_linear([[1j]], 0.5j, [2.0], t_end=1.5j)
    assert_allclose(problem.exact(1.5j), [2.0 * np.exp(-1.0)], rtol=1e-14)


def test_load_problem_from_json(tmp_path: Path) -> None:
    spec = {"A": [[0.0, [1.0, 0.0]], [-1.0, 0.0]], "x0": [1.0, [0.0, 0.0]], "t0": 0.0, "t": [0.5, 0.5]}
    path = tmp_path / "oscillator.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    problem = load_problem(str(path))
    assert problem.name == "oscillator"
    assert problem.dimension == 2
    assert problem.t_end == 0.5 + 0.5j


def test_load_problem_errors(tmp_path: Path) -> None:
    with pytest.raises(InvalidArgumentError):
        load_problem("van-der-pol")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        load_problem(str(broken))
    with pytest.raises(InvalidArgumentError):
        problem_from_json({"A": [[1.0]]})


def test_arenstorf_rhs_real_input_gives_real_output() -> None:
    out = arenstorf_rhs(np.array(ARENSTORF_X0))
    assert out.dtype == np.float64
    assert_allclose(out[:2], [0.0, -2.001585106379080], atol=0)
    complex_out = arenstorf_rhs(np.array(ARENSTORF_X0, dtype=complex))
    assert complex_out.dtype == np.complex128
    assert_allclose(complex_out, out, rtol=1e-14)


def test_arenstorf_rhs_on_the_axis() -> None:
    x1 = ARENSTORF_X0[0]
    out = arenstorf_rhs([x1, 0.0, 0.0, 0.0])
    expected = x1 - ARENSTORF_MU_HAT * (x1 + ARENSTORF_MU) / abs(x1 + ARENSTORF_MU) ** 3
    expected -= ARENSTORF_MU * (x1 - ARENSTORF_MU_HAT) / abs(x1 - ARENSTORF_MU_HAT) ** 3
    assert_allclose(out, [0.0, 0.0, expected, 0.0], rtol=1e-13, atol=1e-13)


def test_arenstorf_rhs_commutes_with_conjugation() -> None:
    state = np.array([0.5 + 0.01j, 0.2 - 0.03j, 0.1 + 0.02j, -1.0 + 0.01j])
    assert_allclose(arenstorf_rhs(state.conj()), arenstorf_rhs(state).conj(), rtol=1e-14)


def test_arenstorf_rhs_singularities() -> None:
    with pytest.raises(SingularityError) as earth:
        arenstorf_rhs([-ARENSTORF_MU, 0.0, 0.0, 0.0])
    assert earth.value.body == 1
    with pytest.raises(SingularityError) as moon:
        arenstorf_rhs([ARENSTORF_MU_HAT, 0.0, 0.0, 0.0])
    assert moon.value.body == 2
    with pytest.raises(DimensionError):
        arenstorf_rhs([1.0, 2.0])


def test_arenstorf_problem_definition() -> None:
    problem = arenstorf_problem()
    assert problem.dimension == 4
    assert problem.t_end == ARENSTORF_PERIOD
    assert problem.exact_flow is None
    assert_allclose(problem.x0, ARENSTORF_X0, atol=0)


def test_arenstorf_reference_needs_enough_steps() -> None:
    with pytest.raises(InvalidArgumentError):
        arenstorf_reference(1000)


def test_arenstorf_reference_is_cached(tmp_path: Path) -> None:
    store = DataStore(tmp_path)
    store.initialize()
    first = arenstorf_reference(10000, store=store)
    assert store.reference_path("arenstorf", 10000).exists()
    second = arenstorf_reference(10000, store=store)
    assert first.values.shape == (10001, 4)
    assert_allclose(second.values, first.values, atol=0)


@pytest.mark.slow
def test_arenstorf_reference_closes_the_orbit() -> None:
    reference = arenstorf_reference(100000)
    assert reference.values.dtype == np.float64
    assert np.linalg.norm(reference.terminal - reference.initial) < 1e-3


def _complex_step_jacobian(state: np.ndarray, h: float = 1e-30) -> np.ndarray:
    columns = [arenstorf_rhs(state + 1j * h * e).imag / h for e in np.eye(4)]
    return np.array(columns).T


def _central_difference_jacobian(state: np.ndarray, h: float = 1e-6) -> np.ndarray:
    columns = [(arenstorf_rhs(state + h * e) - arenstorf_rhs(state - h * e)) / (2 * h) for e in np.eye(4)]
    return np.array(columns).T


def test_arenstorf_jacobian_is_smooth_along_the_orbit() -> None:
    orbit = arenstorf_reference(10000).values
    for state in orbit[::1000]:
        analytic = _complex_step_jacobian(state)
        numeric = _central_difference_jacobian(state)
        assert np.all(np.isfinite(numeric))
        assert np.linalg.norm(numeric - analytic) <= 1e-6 * np.linalg.norm(analytic)


def test_arenstorf_reference_crosses_the_axis_at_half_period() -> None:
    half = arenstorf_reference(20000, t_end=ARENSTORF_PERIOD / 2)
    assert half.grid.t_end == pytest.approx(ARENSTORF_PERIOD / 2)
    assert abs(half.terminal[1]) < 1e-2
