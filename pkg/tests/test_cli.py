import csv
import json
import logging
from pathlib import Path

import pytest

from rhparametrix import utils
from rhparametrix.__main__ import build_parser, main
from rhparametrix.cli.config import ConfigError, ProblemConfig, Tolerances, parse_grid
from rhparametrix.cli.report import EVAL_HEADER, INVERT_HEADER, write_csv, write_json
from rhparametrix.surface import Side, SurfaceConfigError

ONE_CUT = {"cuts": [[-1, 1]], "alpha": [], "n": 0}
TWO_CUT = {"cuts": [[0, 1], [2, 5]], "alpha": [0.3], "n": 7}


def write_problem(tmp_path: Path, data: dict) -> str:
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path: Path) -> list[list[str]]:
    with path.open() as f:
        return list(csv.reader(f))


def test_problem_from_dict():
    problem = ProblemConfig.from_dict(TWO_CUT)
    assert problem.cuts == ((0.0, 1.0), (2.0, 5.0))
    assert problem.surface.genus == 1
    assert problem.targets == pytest.approx([0.1])
    assert problem.tolerances == Tolerances()
    assert problem.output_dir == Path("out")
    assert problem.beta is None


@pytest.mark.parametrize(
    "patch,error,match",
    [
        ({"cuts": [[0, 2], [1, 5]]}, SurfaceConfigError, "b_k < a_\\(k\\+1\\)"),
        ({"cuts": [[1, 0]]}, SurfaceConfigError, "a_k < b_k"),
        ({"alpha": [0.1, 0.2]}, ConfigError, "len\\(alpha\\)"),
        ({"alpha": [float("nan")]}, ConfigError, "finite"),
        ({"n": -1}, ConfigError, "n must be"),
        ({"n": 2.5}, ConfigError, "n must be"),
        ({"n": True}, ConfigError, "n must be"),
        ({"beta": [1.0]}, ConfigError, "beta"),
        ({"beta": [0.1, 0.2]}, ConfigError, "beta"),
        ({"colour": "blue"}, ConfigError, "unknown configuration keys"),
        ({"tolerances": {"abs": 1e-3}}, ConfigError, "unknown tolerance keys"),
        ({"alpha": ["wide"]}, ConfigError, "lists of numbers"),
        ({"cuts": [0, 1]}, ConfigError, "lists of numbers"),
        ({"beta": ["x"]}, ConfigError, "beta"),
    ],
)
def test_problem_validation(patch, error, match):
    with pytest.raises(error, match=match):
        ProblemConfig.from_dict({**TWO_CUT, **patch})


def test_missing_key():
    with pytest.raises(ConfigError, match="'n'"):
        ProblemConfig.from_dict({"cuts": [[-1, 1]], "alpha": []})
    with pytest.raises(ConfigError, match="JSON object"):
        ProblemConfig.from_dict([1, 2])


def test_user_defaults_are_merged_under_the_problem(isolated_user_config, tmp_path):
    isolated_user_config.mkdir()
    (isolated_user_config / "defaults.json").write_text(
        json.dumps({"tolerances": {"abs_tol": 1e-8, "max_depth": 30}})
    )
    data = {**ONE_CUT, "tolerances": {"abs_tol": 1e-10}}
    problem = ProblemConfig.from_file(write_problem(tmp_path, data))
    assert problem.tolerances.abs_tol == 1e-10
    assert problem.tolerances.max_depth == 30


def test_load_config_tolerates_missing_or_broken_files(isolated_user_config):
    assert utils.get_config_path() == isolated_user_config
    assert utils.load_config() is None
    isolated_user_config.mkdir()
    (isolated_user_config / "defaults.json").write_text("{not json")
    assert utils.load_config() is None


def test_from_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        ProblemConfig.from_file(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="valid JSON"):
        ProblemConfig.from_file(broken)


def test_overrides():
    problem = ProblemConfig.from_dict(ONE_CUT).with_overrides(tol=1e-6, out="elsewhere")
    assert problem.tolerances.abs_tol == problem.tolerances.rel_tol == 1e-6
    assert problem.output_dir == Path("elsewhere")
    assert ProblemConfig.from_dict(ONE_CUT).with_overrides() == ProblemConfig.from_dict(ONE_CUT)


def test_invalid_quadrature_tolerance():
    tolerances = Tolerances(abs_tol=-1.0)
    with pytest.raises(ConfigError):
        tolerances.quadrature


def test_circle_grid():
    points = parse_grid({"kind": "circle", "radius": "5", "count": "100"})
    assert len(points) == 100
    assert all(side is None and z.imag != 0 for z, side in points)
    assert all(abs(abs(z) - 5) <= 1e-12 for z, _ in points)


def test_segment_grid():
    both = parse_grid({"kind": "segment", "start": "-0.5", "end": "0.5", "count": "2"})
    assert [(z.real, side) for z, side in both] == [
        (-0.25, Side.ABOVE),
        (-0.25, Side.BELOW),
        (0.25, Side.ABOVE),
        (0.25, Side.BELOW),
    ]
    above = parse_grid(
        {"kind": "segment", "start": "2", "end": "3", "count": "3", "side": "above"}
    )
    assert [side for _, side in above] == [Side.ABOVE] * 3
    complex_segment = parse_grid({"kind": "segment", "start": "1j", "end": "2+1j", "count": "4"})
    assert len(complex_segment) == 4 and all(s is None for _, s in complex_segment)


def test_point_grid():
    assert parse_grid({"kind": "point", "z": "0.5", "side": "below"}) == [(0.5 + 0j, Side.BELOW)]
    assert parse_grid({"kind": "point", "z": "1+2j", "side": "below"}) == [(1 + 2j, None)]


@pytest.mark.parametrize(
    "spec,match",
    [
        ({"kind": "spiral"}, "unknown grid kind"),
        ({"kind": "circle"}, "radius"),
        ({"kind": "circle", "radius": "five"}, "cannot parse"),
        ({"kind": "circle", "radius": "1", "count": "-3"}, "non-negative"),
        ({"kind": "segment", "start": "0", "end": "1", "side": "left"}, "side"),
        ({"kind": "point", "z": "0.5", "side": "left"}, "side"),
    ],
)
def test_bad_grids(spec, match):
    with pytest.raises(ConfigError, match=match):
        parse_grid(spec)


def test_grid_arguments_are_parsed_into_dicts():
    args = build_parser().parse_args(
        ["eval", "--config", "p.json", "--grid", "kind=circle", "radius=5",
         "--grid", "kind=point", "z=1=2"]
    )
    assert args.grid == [{"kind": "circle", "radius": "5"}, {"kind": "point", "z": "1=2"}]


def test_malformed_grid_argument_exits():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["eval", "--config", "p.json", "--grid", "circle"])


def test_writers(tmp_path):
    write_csv(tmp_path / "a" / "t.csv", ["x", "y"], [[0.1, 3], [1 / 3, "s"]])
    assert (tmp_path / "a" / "t.csv").read_text() == (
        "x,y\n0.10000000000000001,3\n0.33333333333333331,s\n"
    )
    write_json(tmp_path / "r.json", {"b": 1j, "a": [Side.ABOVE, Path("p")]})
    text = (tmp_path / "r.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": ["above", "p"], "b": [0.0, 1.0]}


def test_no_command_prints_help(capsys):
    assert main([]) == 0
    assert "usage" in capsys.readouterr().out


def test_invalid_configuration_exit_code(tmp_path):
    path = write_problem(tmp_path, {**TWO_CUT, "cuts": [[0, 2], [1, 5]]})
    assert main(["build", "--config", path]) == 1
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 1


def test_eval_empty_grid(tmp_path):
    path = write_problem(tmp_path, ONE_CUT)
    out = tmp_path / "out"
    assert main(["eval", "--config", path, "--out", str(out)]) == 0
    assert read_csv(out / "eval.csv") == [EVAL_HEADER]


def test_eval_circle(tmp_path):
    path = write_problem(tmp_path, ONE_CUT)
    out = tmp_path / "out"
    argv = ["eval", "--config", path, "--out", str(out), "--grid", "kind=circle", "radius=5", "count=4"]
    assert main(argv) == 0
    rows = read_csv(out / "eval.csv")
    assert rows[0] == EVAL_HEADER and len(rows) == 5
    for row in rows[1:]:
        assert row[2] == ""
        assert float(row[-1]) <= 1e-10


def test_eval_on_the_cut_records_the_side(tmp_path):
    path = write_problem(tmp_path, ONE_CUT)
    out = tmp_path / "out"
    argv = ["eval", "--config", path, "--out", str(out),
            "--grid", "kind=segment", "start=-0.5", "end=0.5", "count=2"]
    assert main(argv) == 0
    assert [row[2] for row in read_csv(out / "eval.csv")[1:]] == ["above", "below"] * 2


@pytest.mark.parametrize(
    "grid,match",
    [
        (["z=0"], "side tag is mandatory"),
        (["z=1", "side=above"], "singular at the endpoint"),
    ],
)
def test_eval_at_an_invalid_point_is_a_usage_error(tmp_path, caplog, grid, match):
    path = write_problem(tmp_path, ONE_CUT)
    argv = ["eval", "--config", path, "--out", str(tmp_path / "out"), "--grid", "kind=point", *grid]
    with caplog.at_level(logging.ERROR, logger="rhparametrix"):
        assert main(argv) == 1
    assert any(match in r.getMessage() for r in caplog.records)


def test_build_one_cut(tmp_path, caplog):
    path = write_problem(tmp_path, {**ONE_CUT, "output": {"dir": str(tmp_path / "out")}})
    with caplog.at_level(logging.INFO, logger="rhparametrix"):
        assert main(["build", "--config", path, "--compare"]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["passed"] is True
    assert "timing" not in report
    assert report["rows"]["1"]["divisor"] == []
    described = json.loads((tmp_path / "out" / "parametrix.json").read_text())
    assert described["differentials"]["1"]["c"] == 0.5
    assert described["differentials"]["2"]["c"] == -0.5
    assert any("report.json" in r.getMessage() for r in caplog.records)


def test_compare_mode_is_reproducible(tmp_path):
    path = write_problem(tmp_path, ONE_CUT)
    texts = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["validate", "--config", path, "--out", str(out), "--compare", "--seed", "3"]) == 0
        texts.append((out / "validate.json").read_text())
    assert texts[0] == texts[1]


def test_invert_two_cut(tmp_path):
    path = write_problem(tmp_path, TWO_CUT)
    out = tmp_path / "out"
    assert main(["invert", "--config", path, "--out", str(out)]) == 0
    rows = read_csv(out / "divisor.csv")
    assert rows[0] == INVERT_HEADER
    assert [row[0] for row in rows[1:]] == ["1", "2"]
    for row in rows[1:]:
        assert row[1] == "1"
        assert 1.0 <= float(row[3]) <= 2.0
        assert row[4] in ("1", "2")
        assert float(row[5]) <= 1e-10


@pytest.mark.slow
def test_sweep_one_cut(tmp_path):
    path = write_problem(tmp_path, ONE_CUT)
    out = tmp_path / "out"
    assert main(["sweep", "--config", path, "--out", str(out), "--n-max", "3", "-m", "4"]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [row[0] for row in rows[1:]] == ["0", "1", "2", "3"]
    assert all(row[-1] == "1" for row in rows[1:])


def test_color_formatter():
    record = logging.LogRecord("rhparametrix", logging.WARNING, __file__, 1, "gap jump", None, None)
    assert utils.ColorFormatter(use_color=False).format(record) == "WARNING rhparametrix: gap jump"
    colored = utils.ColorFormatter().format(record)
    assert colored.startswith("\x1b[") and "gap jump" in colored
    record.levelno = logging.INFO
    assert utils.ColorFormatter().format(record) == "WARNING rhparametrix: gap jump"


def test_setup_logger_changes_level_without_new_handlers():
    logger = utils.setup_logger(logging.DEBUG)
    handlers = list(logger.handlers)
    try:
        assert logger.level == logging.DEBUG
        assert utils.setup_logger(logging.INFO).handlers == handlers
        assert all(h.level == logging.INFO for h in handlers)
    finally:
        utils.setup_logger(logging.INFO)
