"""
Report and table writers. Reports are JSON with sorted keys; tables are CSV
with fixed headers and every number written as %.17g.
"""

import csv
import json
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from rhparametrix.parametrix import ParametrixMatrix, ResidualReport
from rhparametrix.period_map import InversionReport
from rhparametrix.surface import SurfaceConfig, oval_coords

EVAL_HEADER = [
    "re_z",
    "im_z",
    "side",
    "re_M11",
    "im_M11",
    "re_M12",
    "im_M12",
    "re_M21",
    "im_M21",
    "re_M22",
    "im_M22",
    "det_deviation",
]
SWEEP_HEADER = ["n", "sup_norm", "inverse_sup_norm", "envelope", "within"]
INVERT_HEADER = ["nu", "gap", "theta", "x", "sheet", "residual"]


def fmt(value: float) -> str:
    return "%.17g" % value


def jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [fmt(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )


def divisor_rows(config: SurfaceConfig, nu: int, report: InversionReport):
    for q in report.solution:
        x, _, sheet = oval_coords(config, q)
        yield [nu, q.gap, fmt(q.theta), fmt(x), sheet, fmt(report.residual)]


def divisor_table(config: SurfaceConfig, report: InversionReport) -> list[dict]:
    table = []
    for q in report.solution:
        x, w, sheet = oval_coords(config, q)
        table.append({"gap": q.gap, "theta": q.theta, "x": x, "w": w, "sheet": sheet})
    return table


def build_report(
    mat: ParametrixMatrix,
    residuals: ResidualReport | None = None,
    timing: float | None = None,
) -> dict:
    config = mat.config
    report = {
        "cuts": [list(c) for c in config.cuts],
        "alpha": mat.alphas,
        "n": mat.n,
        "beta_target": mat.targets,
        "sign_convention": mat.sign_convention,
        "rows": {},
    }
    for nu in (1, 2):
        inversion = mat.reports[nu]
        report["rows"][str(nu)] = {
            "divisor": divisor_table(config, inversion),
            "beta": np.mod(mat.rows[nu].beta, 1.0),
            "inversion_residual": inversion.residual,
            "iterations": inversion.iterations,
            "continuation_steps": inversion.continuation_steps,
        }
    if residuals is not None:
        report["residuals"] = residuals.to_dict()
    if timing is not None:
        report["timing"] = timing
    return report


def describe_parametrix(mat: ParametrixMatrix) -> dict:
    """Everything needed to rebuild M without inverting the period map again."""
    return {
        "cuts": [list(c) for c in mat.config.cuts],
        "alpha": mat.alphas,
        "n": mat.n,
        "sign_convention": mat.sign_convention,
        "differentials": {
            str(nu): {
                "nu": nu,
                "thetas": [q.theta for q in mat.rows[nu].omega.points],
                "c": float(mat.rows[nu].omega.c),
                "gamma": mat.rows[nu].omega.gamma,
            }
            for nu in (1, 2)
        },
    }
