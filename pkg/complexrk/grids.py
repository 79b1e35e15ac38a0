from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DegeneratePathError, DomainError, InvalidArgumentError, PhaseError

REAL_SEGMENT = "real-segment"
CIRCLE_SEGMENT = "circle-segment"
NODE_LIST = "explicit-node-list"
PATH_KINDS = (REAL_SEGMENT, CIRCLE_SEGMENT, NODE_LIST)

EXHAUSTIVE_WITNESS_LIMIT = 12
GRID_CSV_HEADER = ["index", "re_t", "im_t", "re_tau", "im_tau"]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Ordered complex time nodes t_0..t_n with steps tau_j = t_{j+1} - t_j."""

    nodes: npt.NDArray[np.complex128]
    steps: npt.NDArray[np.complex128] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=np.complex128, ndmin=1)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("a time grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise DomainError("time grid nodes must be finite")
        if self.steps is None:
            steps = np.diff(nodes)
        else:
            steps = np.array(self.steps, dtype=np.complex128, ndmin=1)
            if steps.shape != (nodes.size - 1,):
                raise InvalidArgumentError(f"expected {nodes.size - 1} steps, got {steps.size}")
        zero = np.flatnonzero(steps == 0)
        if zero.size:
            raise DegeneratePathError(f"time grid has a zero-length step at index {int(zero[0])}")
        nodes.setflags(write=False)
        steps.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def from_steps(cls, t0: complex, steps: npt.ArrayLike) -> TimeGrid:
        """Build a grid that keeps `steps` verbatim; nodes are their running sums."""
        steps = np.array(steps, dtype=np.complex128, ndmin=1)
        nodes = complex(t0) + np.concatenate(([0j], np.cumsum(steps)))
        return cls(nodes, steps)

    @classmethod
    def concatenate(cls, grids: Sequence[TimeGrid], tol: float = 1e-12) -> TimeGrid:
        if not grids:
            raise InvalidArgumentError("nothing to concatenate")
        for left, right in zip(grids, grids[1:]):
            if abs(left.t_end - right.t0) > tol * max(1.0, abs(left.t_end)):
                raise InvalidArgumentError("grids to concatenate must share their joining nodes")
        nodes = np.concatenate([grids[0].nodes] + [grid.nodes[1:] for grid in grids[1:]])
        steps = np.concatenate([grid.steps for grid in grids])
        return cls(nodes, steps)

    @property
    def n(self) -> int:
        return int(self.steps.size)

    @property
    def t0(self) -> complex:
        return complex(self.nodes[0])

    @property
    def t_end(self) -> complex:
        return complex(self.nodes[-1])

    @property
    def max_step(self) -> float:
        return float(np.max(np.abs(self.steps)))

    @property
    def is_real(self) -> bool:
        return not np.any(self.nodes.imag) and not np.any(self.steps.imag)

    def power_sum(self, exponent: int) -> complex:
        return complex(np.sum(self.steps**exponent))

    def conj(self) -> TimeGrid:
        return TimeGrid(self.nodes.conj(), self.steps.conj())

    def csv_rows(self) -> list[list[Any]]:
        rows: list[list[Any]] = []
        for index, node in enumerate(self.nodes):
            if index < self.n:
                tau = self.steps[index]
                rows.append([index, node.real, node.imag, tau.real, tau.imag])
            else:
                rows.append([index, node.real, node.imag, None, None])
        return rows


@dataclass(frozen=True)
class PathSpec:
    kind: str
    t0: complex = 0j
    t: complex = 1 + 0j
    p: int = 1
    conjugated: bool = False
    nodes: tuple[complex, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in PATH_KINDS:
            raise InvalidArgumentError(f"Unknown path kind: {self.kind!r} (expected one of {', '.join(PATH_KINDS)})")
        if self.kind == CIRCLE_SEGMENT and (not isinstance(self.p, int) or self.p < 1):
            raise InvalidArgumentError(f"circle segment needs an integer p >= 1, got {self.p!r}")
        if self.kind == NODE_LIST:
            if len(self.nodes) < 2:
                raise InvalidArgumentError("an explicit node list needs at least two nodes")
            object.__setattr__(self, "nodes", tuple(complex(node) for node in self.nodes))
            object.__setattr__(self, "t0", self.nodes[0])
            object.__setattr__(self, "t", self.nodes[-1])
        else:
            object.__setattr__(self, "t0", complex(self.t0))
            object.__setattr__(self, "t", complex(self.t))

    @classmethod
    def real_segment(cls, t0: complex = 0j, t: complex = 1 + 0j) -> PathSpec:
        return cls(REAL_SEGMENT, t0, t)

    @classmethod
    def circle_segment(cls, t0: complex = 0j, t: complex = 1 + 0j, p: int = 1, conjugated: bool = False) -> PathSpec:
        return cls(CIRCLE_SEGMENT, t0, t, p=p, conjugated=conjugated)

    @classmethod
    def explicit(cls, nodes: Iterable[complex]) -> PathSpec:
        return cls(NODE_LIST, nodes=tuple(nodes))

    def evaluate(self, x: float) -> complex:
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"path parameter must lie in [0, 1], got {x}")
        if self.kind == CIRCLE_SEGMENT:
            return gamma_segment(self.t0, self.t, self.p, x, conjugated=self.conjugated)
        if self.kind == REAL_SEGMENT:
            return self.t0 + (self.t - self.t0) * x
        segments = len(self.nodes) - 1
        position = x * segments
        index = min(int(position), segments - 1)
        local = position - index
        return self.nodes[index] + (self.nodes[index + 1] - self.nodes[index]) * local


def _check_endpoints(t0: complex, t: complex) -> None:
    if t == t0:
        raise DegeneratePathError(f"path endpoints coincide at {t0}")


def _circle_points(t0: complex, t: complex, p: int, xs: npt.NDArray[np.float64], conjugated: bool) -> npt.NDArray[np.complex128]:
    unit = -1j if conjugated else 1j
    angle = math.pi / (p + 1)
    scale = (t0 - t) / (2 * unit * math.sin(angle))
    return scale * (np.exp(unit * math.pi * (1 - 2 * xs) / (p + 1)) - math.cos(angle)) + (t0 + t) / 2


def gamma_segment(t0: complex, t: complex, p: int, x: float, *, conjugated: bool = False) -> complex:
    """Point x of the (p+1)-th circle segment joining t0 and t."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"path parameter must lie in [0, 1], got {x}")
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    t0, t = complex(t0), complex(t)
    _check_endpoints(t0, t)
    unit = -1j if conjugated else 1j
    angle = math.pi / (p + 1)
    scale = (t0 - t) / (2 * unit * math.sin(angle))
    return scale * (cmath.exp(unit * math.pi * (1 - 2 * x) / (p + 1)) - math.cos(angle)) + (t0 + t) / 2


def discretize(path: PathSpec, n: int) -> TimeGrid:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    if path.kind == NODE_LIST and n == len(path.nodes) - 1:
        return TimeGrid(np.array(path.nodes))
    _check_endpoints(path.t0, path.t)

    xs = np.arange(n + 1) / n
    if path.kind == CIRCLE_SEGMENT:
        nodes = _circle_points(path.t0, path.t, path.p, xs, path.conjugated)
    elif path.kind == REAL_SEGMENT:
        nodes = path.t0 + (path.t - path.t0) * xs
    else:
        nodes = np.array([path.evaluate(float(x)) for x in xs])
    nodes[0], nodes[-1] = path.t0, path.t
    return TimeGrid(nodes)


def grid_family(path: PathSpec) -> Callable[[int], TimeGrid]:
    return partial(discretize, path)


@lru_cache(maxsize=None)
def _normalized_circle_steps(p: int, k: int) -> tuple[complex, ...]:
    grid = discretize(PathSpec.circle_segment(0j, 1 + 0j, p), k)
    return tuple(complex(step) for step in grid.steps)


def normalized_circle_steps(p: int, k: int) -> tuple[complex, ...]:
    """Steps of the k-step grid on the (p+1)-th circle segment from 0 to 1."""
    return _normalized_circle_steps(int(p), int(k))


def roots_of_unity_steps(t0: complex, t: complex, p: int, n: int, k: int) -> TimeGrid:
    """Grid whose steps are n consecutive n(p+1)-th roots of unity, rescaled to reach t."""
    if n < 2:
        raise InvalidArgumentError(f"n must be >= 2 for a vanishing power sum, got {n}")
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    t0, t = complex(t0), complex(t)
    _check_endpoints(t0, t)
    order = n * (p + 1)
    roots = np.exp(2j * np.pi * (k + np.arange(n)) / order)
    total = complex(roots.sum())
    # n consecutive roots out of n(p+1) never cancel for p >= 1.
    if abs(total) < 1e-12 * n:
        raise PhaseError(f"roots of unity sum to ~0 for n={n}, p={p}, k={k}")
    alpha = (t - t0) / total
    return TimeGrid.from_steps(t0, alpha * roots)


def _pairs(steps: npt.NDArray[np.complex128], j: int, k: int, tol: float) -> bool:
    return abs(steps[j] - steps[k].conjugate()) <= tol


def _is_witness(steps: npt.NDArray[np.complex128], perm: Sequence[int], tol: float) -> bool:
    return all(perm[perm[j]] == j and _pairs(steps, j, perm[j], tol) for j in range(len(perm)))


def _search_involution(steps: npt.NDArray[np.complex128], tol: float) -> tuple[int, ...] | None:
    n = steps.size
    perm = [-1] * n

    def backtrack() -> bool:
        try:
            j = perm.index(-1)
        except ValueError:
            return True
        for k in range(j, n):
            if perm[k] != -1 or not _pairs(steps, j, k, tol):
                continue
            perm[j], perm[k] = k, j
            if backtrack():
                return True
            perm[j] = perm[k] = -1
        return False

    return tuple(perm) if backtrack() else None


def _greedy_involution(steps: npt.NDArray[np.complex128], tol: float) -> tuple[int, ...] | None:
    n = steps.size
    perm = [-1] * n
    conj = steps.conj()
    for j in range(n):
        if perm[j] != -1:
            continue
        free = [k for k in range(j, n) if perm[k] == -1]
        distances = np.abs(steps[j] - conj[free])
        best = free[int(np.argmin(distances))]
        if distances.min() > tol:
            return None
        perm[j], perm[best] = best, j
    return tuple(perm)


def symmetric_witness(grid: TimeGrid, tol: float = 1e-12) -> tuple[int, ...] | None:
    """Involution pairing every step with its complex conjugate, if one exists.

    Returned 0-based: entry j is the index of the step whose conjugate equals
    step j. Identity and reversal are tried first.
    """
    steps = grid.steps
    n = grid.n
    for candidate in (tuple(range(n)), tuple(reversed(range(n)))):
        if _is_witness(steps, candidate, tol):
            return candidate
    if n <= EXHAUSTIVE_WITNESS_LIMIT:
        return _search_involution(steps, tol)
    return _greedy_involution(steps, tol)


def _fractal_steps(p: int, g: int, k: int, r: int, h: complex) -> npt.NDArray[np.complex128]:
    if r == 0:
        return np.array([h], dtype=np.complex128)
    sigma = normalized_circle_steps(p + (r - 1) * g, k)
    return np.concatenate([_fractal_steps(p, g, k, r - 1, s * h) for s in sigma])


def fractal_grid(p: int, g: int, k: int, r: int, t0: complex, h: complex) -> TimeGrid:
    """Flattened micro-step grid of an r-fold iterated composition.

    The outermost level uses the circle segment of the highest order reached,
    p + (r-1)g; each of its k steps carries the grid of depth r-1.
    """
    for name, value, minimum in (("p", p, 1), ("g", g, 1), ("k", k, 2), ("r", r, 0)):
        if not isinstance(value, (int, np.integer)) or value < minimum:
            raise InvalidArgumentError(f"{name} must be an integer >= {minimum}, got {value!r}")
    if h == 0:
        raise DegeneratePathError("macro step h must be nonzero")
    return TimeGrid.from_steps(t0, _fractal_steps(int(p), int(g), int(k), int(r), complex(h)))
