from __future__ import annotations

from numbers import Number
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import DimensionError, DomainError

CMatrix = npt.NDArray[np.complex128]
CVector = npt.NDArray[np.complex128]

ABS_TOL = 1e-12
EXP_TERM_RTOL = 1e-18
EXP_SCALED_NORM = 0.5
EXP_MAX_TERMS = 60


def as_matrix(value: npt.ArrayLike, *, square: bool = True, name: str = "matrix") -> CMatrix:
    matrix = np.array(value, dtype=np.complex128, ndmin=2)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {matrix.shape}")
    if square and matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {matrix.shape}")
    if matrix.size == 0:
        raise DimensionError(f"{name} must not be empty")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{name} has non-finite entries")
    return matrix


def as_vector(value: npt.ArrayLike, *, name: str = "vector") -> CVector:
    vector = np.array(value, dtype=np.complex128, ndmin=1)
    if vector.ndim != 1 or vector.size == 0:
        raise DimensionError(f"{name} must be a non-empty one-dimensional array, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise DomainError(f"{name} has non-finite entries")
    return vector


def mat_poly_eval(coeffs: Sequence[Number], M: npt.ArrayLike) -> CMatrix:
    """Evaluate sum_k coeffs[k] * M**k by Horner's scheme."""
    matrix = as_matrix(M)
    if len(coeffs) == 0:
        raise DimensionError("polynomial needs at least one coefficient")
    identity = np.eye(matrix.shape[0], dtype=np.complex128)
    result = complex(coeffs[-1]) * identity
    for coeff in reversed(coeffs[:-1]):
        result = matrix @ result + complex(coeff) * identity
    return result


def mat_exp(M: npt.ArrayLike) -> CMatrix:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    The argument is halved until its 1-norm is below EXP_SCALED_NORM, the
    series is summed until a term drops below EXP_TERM_RTOL relative to the
    partial sum, and the result is squared back.
    """
    matrix = as_matrix(M)
    norm = np.linalg.norm(matrix, 1)
    squarings = 0
    if norm > EXP_SCALED_NORM:
        squarings = int(np.ceil(np.log2(norm / EXP_SCALED_NORM)))
    scaled = matrix / 2.0**squarings

    result = np.eye(matrix.shape[0], dtype=np.complex128)
    term = result.copy()
    for k in range(1, EXP_MAX_TERMS):
        term = term @ scaled / k
        result = result + term
        if np.linalg.norm(term, 1) < EXP_TERM_RTOL * np.linalg.norm(result, 1):
            break

    for _ in range(squarings):
        result = result @ result
    return result


def exact_linear_flow(A: npt.ArrayLike, t0: complex, t: complex, x0: npt.ArrayLike) -> CVector:
    matrix = as_matrix(A, name="A")
    vector = as_vector(x0, name="x0")
    if matrix.shape[0] != vector.size:
        raise DimensionError(f"A is {matrix.shape[0]}x{matrix.shape[0]} but x0 has {vector.size} entries")
    if t == t0:
        return vector.copy()
    return mat_exp((complex(t) - complex(t0)) * matrix) @ vector
