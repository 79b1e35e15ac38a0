from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .analysis import (
    REALITY_CSV_HEADER,
    STUDY_CSV_HEADER,
    arenstorf_benchmark,
    estimate_order,
    reality_suite,
    terminal_error,
)
from .composition import iterate_method, order_condition_residuals, schedule_from_path
from .errors import ComplexRKError, InvalidArgumentError
from .grids import GRID_CSV_HEADER, PathSpec, TimeGrid, discretize, fractal_grid, roots_of_unity_steps
from .problems import IVProblem, load_problem, make_linear
from .rk import TABLEAUS, ButcherTableau, get_tableau, integrate
from .schemas import ARENSTORF_VARIANTS, GRID_PATHS, RunConfig, parse, to_complex
from .storage import DataStore, render_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DEFAULT_GRID_N = 10
ARENSTORF_PLAIN_STEPS = 100000
COMMANDS = ("grid", "integrate", "order-study", "schedule", "arenstorf", "reality")


def build_path_grid(config: RunConfig, tab: ButcherTableau, t0: complex, t: complex, n: int) -> TimeGrid:
    """Grid of the configured kind between t0 and t."""
    if config.path == "real":
        return discretize(PathSpec.real_segment(t0, t), n)
    if config.path == "circle":
        return discretize(PathSpec.circle_segment(t0, t, config.p, config.conjugate), n)
    if config.path == "roots":
        if config.conjugate:
            return roots_of_unity_steps(t0.conjugate(), t.conjugate(), config.p, n, config.k).conj()
        return roots_of_unity_steps(t0, t, config.p, n, config.k)
    if config.path == "fractal":
        return fractal_grid(config.p, config.gain or tab.gain, config.k, config.r, t0, t - t0)
    method = iterate_method(tab, config.k, config.r, config.gain or tab.gain)
    return method.macro_grid(t0, t, n)


def grid_factory(config: RunConfig, tab: ButcherTableau, t0: complex, t: complex) -> Callable[[int], TimeGrid]:
    def factory(n: int) -> TimeGrid:
        return build_path_grid(config, tab, t0, t, n)

    return factory


def resolve_problem(config: RunConfig) -> tuple[IVProblem, complex, complex]:
    """Problem plus the endpoints to integrate between; explicit t0/t override the problem's."""
    problem = load_problem(config.problem)
    t0 = config.start() if "t0" in config.model_fields_set else problem.t0
    t = config.endpoint() if "t" in config.model_fields_set else problem.t_end
    if t0 != problem.t0:
        if not problem.is_linear:
            raise InvalidArgumentError(f"problem {problem.name!r} has a fixed initial time {problem.t0}")
        problem = make_linear(problem.matrix, t0, problem.x0, name=problem.name, t_end=t)
    return problem, t0, t


def _default_t(config: RunConfig) -> tuple[complex, complex]:
    t0 = config.start()
    return t0, config.endpoint()


def cmd_grid(config: RunConfig, settings: dict[str, Any]) -> tuple[str, int]:
    tab = get_tableau(config.method)
    t0, t = _default_t(config)
    n = config.n or DEFAULT_GRID_N
    grid = build_path_grid(config, tab, t0, t, n)
    order = (config.p if config.path != "composed" else tab.order) + 1
    footer = {
        "path": config.path,
        "n": grid.n,
        "delta": grid.max_step,
        f"abs_power_sum_{order}": abs(grid.power_sum(order)),
    }
    return render_csv(GRID_CSV_HEADER, grid.csv_rows(), footer, settings["csv_digits"]), EXIT_OK


def cmd_integrate(config: RunConfig, settings: dict[str, Any]) -> tuple[str, int]:
    tab = get_tableau(config.method)
    problem, t0, t = resolve_problem(config)
    grid = build_path_grid(config, tab, t0, t, config.n or DEFAULT_GRID_N)
    gf = integrate(tab, problem.rhs, grid, problem.x0)
    im_norms = gf.im_norms()
    footer: dict[str, Any] = {
        "method": tab.name,
        "problem": problem.name,
        "terminal_im_norm": float(im_norms[-1]),
        "max_node_im_norm": float(im_norms.max()),
    }
    if problem.exact_flow is not None:
        footer["terminal_error"] = terminal_error(gf, problem)
    return render_csv(gf.csv_header(), gf.csv_rows(config.stride), footer, settings["csv_digits"]), EXIT_OK


def cmd_order_study(config: RunConfig, settings: dict[str, Any]) -> tuple[str, int]:
    tab = get_tableau(config.method)
    problem, t0, t = resolve_problem(config)
    n_values = config.n_list if config.n_list is not None else settings["default_n_list"]
    study = estimate_order(
        tab,
        problem,
        grid_factory(config, tab, t0, t),
        n_values,
        floor=float(settings["fit_floor"]),
        max_workers=config.workers,
    )
    footer = {
        "method": tab.name,
        "problem": problem.name,
        "path": config.path,
        "slope": study.fitted_slope,
        "fit_window": f"{study.fit_window[0]}:{study.fit_window[1]}",
    }
    return render_csv(STUDY_CSV_HEADER, study.csv_rows(), footer, settings["csv_digits"]), EXIT_OK


def cmd_schedule(config: RunConfig, settings: dict[str, Any]) -> tuple[str, int]:
    schedule = schedule_from_path(config.p, config.k, config.gain or 1)
    payload = schedule.to_json()
    consistency, cancellation = order_condition_residuals(schedule)
    payload["residuals"] = {"consistency": consistency, "cancellation": cancellation}
    return json.dumps(payload, indent=2) + "\n", EXIT_OK


def cmd_arenstorf(config: RunConfig, settings: dict[str, Any], store: DataStore | None) -> tuple[str, int]:
    digits = settings["csv_digits"]
    reference_steps = int(settings["reference_steps"])
    variant = config.variant
    if variant == "plain-euler":
        n_plain, n_macro = config.n or ARENSTORF_PLAIN_STEPS, 1
    elif variant == "composed-euler":
        n_plain, n_macro = 1, config.n or ARENSTORF_PLAIN_STEPS // 2
    else:
        n_plain = config.n or ARENSTORF_PLAIN_STEPS
        n_macro = max(1, n_plain // 2)

    result = arenstorf_benchmark(
        n_plain,
        n_macro,
        k=config.k,
        reference_steps=reference_steps if variant != "reference" else (config.n or reference_steps),
        store=store,
        plain=variant in ("plain-euler", "compare"),
        composed=variant in ("composed-euler", "compare"),
    )

    if variant == "compare":
        rows = [["plain-euler", n_plain, result.plain_error], ["composed-euler", n_macro, result.composed_error]]
        footer = {"reference_steps": reference_steps, "error_components": "x1 x2", "ratio": result.ratio}
        return render_csv(["variant", "steps", "terminal_error"], rows, footer, digits), EXIT_OK

    if variant == "reference":
        gf = result.reference
        footer = {"variant": variant, "closure_error": result.closure_error}
    elif variant == "plain-euler":
        gf = result.plain
        footer = {"variant": variant, "terminal_error": result.plain_error}
    else:
        gf = result.composed
        footer = {"variant": variant, "terminal_error": result.composed_error}
    return render_csv(gf.csv_header(), gf.csv_rows(config.stride), footer, digits), EXIT_OK


def cmd_reality(config: RunConfig, settings: dict[str, Any]) -> tuple[str, int]:
    cases = reality_suite(np.random.default_rng(config.seed), config.cases)
    failed = [case.index for case in cases if not case.passed]
    footer = {"seed": config.seed, "passed": len(cases) - len(failed), "cases": len(cases)}
    text = render_csv(REALITY_CSV_HEADER, [case.csv_row() for case in cases], footer, settings["csv_digits"])
    if failed:
        logger.error("terminal values not real for cases %s", failed)
        return text, EXIT_NUMERICAL
    return text, EXIT_OK


def _complex_arg(text: str) -> str:
    try:
        to_complex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return text


def _n_list_arg(text: str) -> list[int]:
    try:
        return [int(item) for item in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complexrk",
        description="Runge-Kutta integration along complex time grids.",
    )
    parser.add_argument("--log-level", default=None, help="logging level (defaults to the log_level setting)")
    parser.add_argument("--data-dir", type=Path, default=None, help="settings and reference cache directory")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--method", default=argparse.SUPPRESS, help=f"built-in tableau ({', '.join(TABLEAUS)})")
    common.add_argument("--problem", default=argparse.SUPPRESS, help="built-in problem or linear problem JSON path")
    common.add_argument("--path", choices=GRID_PATHS, default=argparse.SUPPRESS)
    common.add_argument("--p", type=int, default=argparse.SUPPRESS, help="order the path is tuned for")
    common.add_argument("--k", type=int, default=argparse.SUPPRESS, help="composition size or roots phase")
    common.add_argument("--r", type=int, default=argparse.SUPPRESS, help="iteration depth")
    common.add_argument("--gain", type=int, default=argparse.SUPPRESS)
    common.add_argument("--n", type=int, default=argparse.SUPPRESS)
    common.add_argument("--n-list", dest="n_list", type=_n_list_arg, default=argparse.SUPPRESS)
    common.add_argument("--conjugate", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--t0", type=_complex_arg, default=argparse.SUPPRESS, help="start time, e.g. 0 or 0.5+0.5i")
    common.add_argument("--t", type=_complex_arg, default=argparse.SUPPRESS, help="end time")
    common.add_argument("--variant", choices=ARENSTORF_VARIANTS, default=argparse.SUPPRESS)
    common.add_argument("--stride", type=int, default=argparse.SUPPRESS, help="write every stride-th trajectory row")
    common.add_argument("--cases", type=int, default=argparse.SUPPRESS)
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file (stdout when omitted)")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("grid", parents=[common], help="dump a time grid as CSV")
    commands.add_parser("integrate", parents=[common], help="integrate a problem along a grid")
    commands.add_parser("order-study", parents=[common], help="fit the terminal convergence order")
    commands.add_parser("schedule", parents=[common], help="export a composition schedule as JSON")
    commands.add_parser("arenstorf", parents=[common], help="Arenstorf orbit benchmark")
    commands.add_parser("reality", parents=[common], help="seeded real-terminal-value suite")
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run_command(config: RunConfig, store: DataStore) -> tuple[str, int]:
    settings = store.read_settings()
    if config.command == "grid":
        return cmd_grid(config, settings)
    if config.command == "integrate":
        return cmd_integrate(config, settings)
    if config.command == "order-study":
        return cmd_order_study(config, settings)
    if config.command == "schedule":
        return cmd_schedule(config, settings)
    if config.command == "arenstorf":
        cache = None
        if settings["cache_reference"]:
            store.initialize()
            cache = store
        return cmd_arenstorf(config, settings, cache)
    if config.command == "reality":
        return cmd_reality(config, settings)
    raise InvalidArgumentError(f"Unknown command: {config.command!r} (expected one of {', '.join(COMMANDS)})")


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    log_level = args.pop("log_level")
    data_dir = args.pop("data_dir")
    store = DataStore(data_dir) if data_dir is not None else DataStore()
    configure_logging(log_level or store.read_settings()["log_level"])

    try:
        config = parse(RunConfig, args)
        logger.info("running %s", config.command)
        text, code = run_command(config, store)
        if config.out:
            store.write_output(Path(config.out), text)
            logger.info("wrote %s", config.out)
        else:
            sys.stdout.write(text)
    except ComplexRKError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL if exc.numerical else EXIT_USAGE
    return code
