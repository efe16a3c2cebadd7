import time

import numpy as np

from rhparametrix.parametrix import (
    boundedness_sweep,
    build_parametrix,
    eval_M,
    validate,
)
from rhparametrix.period_map import PeriodVector, invert_psi, psi
from rhparametrix.utils import logger

from .config import ProblemConfig, parse_grid
from .report import (
    EVAL_HEADER,
    INVERT_HEADER,
    SWEEP_HEADER,
    build_report,
    describe_parametrix,
    divisor_rows,
    fmt,
    write_csv,
    write_json,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _build(problem: ProblemConfig):
    tol = problem.tolerances
    return build_parametrix(
        problem.surface,
        problem.alpha,
        problem.n,
        tol=tol.invert_tol,
        quad_tol=tol.quadrature,
    )


def _validated_report(problem: ProblemConfig, seed: int, compare: bool):
    start = time.perf_counter()
    mat = _build(problem)
    residuals = validate(mat, seed=seed)
    timing = None if compare else time.perf_counter() - start
    report = build_report(mat, residuals, timing)
    tol = problem.tolerances
    passed = residuals.passed(tol.jump_threshold, tol.det_threshold)
    report["passed"] = passed
    if mat.sign_convention < 0:
        logger.warning("targets were negated to match the gap jumps")
    return mat, report, passed


def cmd_build(problem: ProblemConfig, seed: int = 0, compare: bool = False) -> int:
    mat, report, passed = _validated_report(problem, seed, compare)
    out = problem.output_dir
    write_json(out / "report.json", report)
    write_json(out / "parametrix.json", describe_parametrix(mat))
    logger.info(f"wrote {out / 'report.json'} and {out / 'parametrix.json'}")
    return EXIT_OK if passed else EXIT_VALIDATION


def cmd_validate(problem: ProblemConfig, seed: int = 0, compare: bool = False) -> int:
    _, report, passed = _validated_report(problem, seed, compare)
    path = problem.output_dir / "validate.json"
    write_json(path, report)
    if passed:
        logger.info(f"all residuals below thresholds, wrote {path}")
    else:
        logger.error(f"validation failed, see {path}")
    return EXIT_OK if passed else EXIT_VALIDATION


def cmd_eval(problem: ProblemConfig, grids: list[dict]) -> int:
    points = [p for spec in grids or [] for p in parse_grid(spec)]
    mat = _build(problem) if points else None

    rows = []
    for z, side in points:
        M = eval_M(mat, z, side)
        det_dev = abs(np.linalg.det(M) - 1)
        entries = [part for v in M.ravel() for part in (float(v.real), float(v.imag))]
        rows.append([fmt(z.real), fmt(z.imag), side.value if side else "", *entries, det_dev])

    path = problem.output_dir / "eval.csv"
    write_csv(path, EVAL_HEADER, rows)
    logger.info(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_sweep(
    problem: ProblemConfig, n_max: int, m: int = 64, eps: float = 0.1, workers: int = 1
) -> int:
    report = boundedness_sweep(
        problem.surface,
        problem.alpha,
        n_max,
        m=m,
        eps=eps,
        quad_tol=problem.tolerances.quadrature,
        workers=workers,
    )
    rows = [
        [n, report.norms[n], report.inverse_norms[n], report.envelope,
         int(report.norms[n] <= 1.05 * report.envelope)]
        for n in sorted(report.norms)
    ]
    path = problem.output_dir / "sweep.csv"
    write_csv(path, SWEEP_HEADER, rows)
    if not report.all_within:
        logger.error(f"some sup norms exceed 1.05 x envelope, see {path}")
        return EXIT_VALIDATION
    logger.info(f"all n = 0..{n_max} within the envelope {report.envelope:.6g}")
    return EXIT_OK


def cmd_invert(problem: ProblemConfig) -> int:
    config = problem.surface
    target = PeriodVector(problem.beta if problem.beta is not None else problem.targets)
    tol = problem.tolerances

    rows = []
    for nu in (1, 2):
        report = invert_psi(
            config, target, nu, tol=tol.invert_tol, quad_tol=tol.quadrature
        )
        achieved = psi(config, report.solution, nu, tol.quadrature)
        logger.info(
            f"nu={nu}: residual {achieved.distance(target):.2e} after "
            f"{report.iterations} iterations"
        )
        rows.extend(divisor_rows(config, nu, report))

    path = problem.output_dir / "divisor.csv"
    write_csv(path, INVERT_HEADER, rows)
    logger.info(f"wrote {path}")
    return EXIT_OK
