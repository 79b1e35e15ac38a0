from __future__ import annotations

import asyncio
from typing import Any, Callable, TypeVar

from fastapi import APIRouter, HTTPException, Request

from .analysis import estimate_order, terminal_error
from .cli import build_path_grid, grid_factory, resolve_problem
from .composition import order_condition_residuals, schedule_from_path
from .errors import ComplexRKError
from .grids import symmetric_witness
from .problems import BUILTIN_PROBLEMS
from .rk import TABLEAUS, get_tableau, integrate
from .schemas import RunConfig, complex_json
from .storage import DataStore

router = APIRouter(prefix="/api", tags=["experiments"])

Result = TypeVar("Result")


def _http_error(exc: ComplexRKError) -> HTTPException:
    return HTTPException(status_code=422 if exc.numerical else 400, detail=str(exc))


async def _run(func: Callable[[], Result]) -> Result:
    try:
        return await asyncio.to_thread(func)
    except ComplexRKError as exc:
        raise _http_error(exc) from exc


def _settings(request: Request) -> dict[str, Any]:
    store: DataStore = request.app.state.store
    return store.read_settings()


@router.get("/methods")
async def list_methods() -> dict[str, Any]:
    return {
        "methods": {name: tab.to_json() for name, tab in TABLEAUS.items()},
        "problems": sorted(BUILTIN_PROBLEMS),
    }


@router.get("/schedule")
async def get_schedule(p: int = 1, k: int = 2, g: int = 1) -> dict[str, Any]:
    try:
        schedule = schedule_from_path(p, k, g)
    except ComplexRKError as exc:
        raise _http_error(exc) from exc
    consistency, cancellation = order_condition_residuals(schedule)
    return {**schedule.to_json(), "residuals": {"consistency": consistency, "cancellation": cancellation}}


@router.post("/grid")
async def post_grid(body: RunConfig) -> dict[str, Any]:
    def compute() -> dict[str, Any]:
        tab = get_tableau(body.method)
        grid = build_path_grid(body, tab, body.start(), body.endpoint(), body.n or 10)
        witness = symmetric_witness(grid)
        return {
            "path": body.path,
            "n": grid.n,
            "delta": grid.max_step,
            "nodes": [complex_json(node) for node in grid.nodes],
            "steps": [complex_json(step) for step in grid.steps],
            "witness": list(witness) if witness is not None else None,
        }

    return await _run(compute)


@router.post("/integrate")
async def post_integrate(body: RunConfig) -> dict[str, Any]:
    def compute() -> dict[str, Any]:
        tab = get_tableau(body.method)
        problem, t0, t = resolve_problem(body)
        grid = build_path_grid(body, tab, t0, t, body.n or 10)
        gf = integrate(tab, problem.rhs, grid, problem.x0)
        rows = range(0, grid.n + 1, body.stride)
        im_norms = gf.im_norms()
        return {
            "method": tab.name,
            "problem": problem.name,
            "nodes": [complex_json(grid.nodes[j]) for j in rows],
            "values": [[complex_json(entry) for entry in gf.values[j]] for j in rows],
            "terminal": [complex_json(entry) for entry in gf.terminal],
            "terminal_error": terminal_error(gf, problem) if problem.exact_flow is not None else None,
            "terminal_im_norm": float(im_norms[-1]),
            "max_node_im_norm": float(im_norms.max()),
        }

    return await _run(compute)


@router.post("/order-study")
async def post_order_study(body: RunConfig, request: Request) -> dict[str, Any]:
    settings = _settings(request)

    def compute() -> dict[str, Any]:
        tab = get_tableau(body.method)
        problem, t0, t = resolve_problem(body)
        study = estimate_order(
            tab,
            problem,
            grid_factory(body, tab, t0, t),
            body.n_list if body.n_list is not None else settings["default_n_list"],
            floor=float(settings["fit_floor"]),
            max_workers=body.workers,
        )
        return {
            "method": tab.name,
            "problem": problem.name,
            "path": body.path,
            "n_values": study.n_values,
            "deltas": study.deltas,
            "errors": study.terminal_errors,
            "im_norms": study.im_norms,
            "slope": study.fitted_slope,
            "fit_window": list(study.fit_window),
        }

    return await _run(compute)
