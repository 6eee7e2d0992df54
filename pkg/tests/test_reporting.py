import numpy as np

from dunkl_lab.config import ExperimentConfig, config_to_text
from dunkl_lab.reporting import CaseRow, ExperimentReport, write_report


def toy_report(name="exp_kernel_bounds"):
    rows = [
        CaseRow("a-01", {"m": 0, "scale": 0.5}, "bound_constant", 1.25, 1.25, "ok"),
        CaseRow("a-02", {"m": 1}, "bound_constant", np.pi, 3.5, "ok"),
        CaseRow("a-03", {"scale": 2.0}, "bound_constant", 0.7, 0.7, "warn:edge"),
    ]
    return ExperimentReport(
        name=name,
        rows=rows,
        summary={"worst": 3.5},
        maximizing_case="a-02",
        config_echo=config_to_text(ExperimentConfig()),
        wall_clock=0.125,
        failures=[],
    )


def test_csv_schema_and_param_union(tmp_path):
    paths = write_report(toy_report(), tmp_path)
    lines = paths["csv"].read_text(encoding="utf-8").splitlines()
    # header: case_id, union of param names (sorted), then fixed columns
    assert lines[0] == "case_id,m,scale,quantity,value,fitted_constant,status"
    assert len(lines) == 4
    assert lines[1].startswith("a-01,0,0.5,bound_constant,1.25,1.25,ok")
    # missing params are left empty, never invented
    assert lines[2].split(",")[2] == ""
    assert lines[3].split(",")[1] == ""


def test_rewrite_is_byte_identical(tmp_path):
    first = write_report(toy_report(), tmp_path / "one")
    second = write_report(toy_report(), tmp_path / "two")
    assert first["csv"].read_bytes() == second["csv"].read_bytes()


def test_figure_and_summary_written(tmp_path):
    paths = write_report(toy_report(), tmp_path)
    assert paths["figure"].exists()
    assert paths["figure"].stat().st_size > 1000  # a rendered png, not a stub
    text = paths["summary"].read_text(encoding="utf-8")
    assert "PASS" in text
    assert "a-02" in text
    assert "seed" in text  # config echo rides along


def test_failures_flip_status(tmp_path):
    rep = toy_report()
    rep.failures.append("bound grew without limit")
    assert not rep.passed
    paths = write_report(rep, tmp_path)
    text = paths["summary"].read_text(encoding="utf-8")
    assert "FAIL" in text
    assert "bound grew without limit" in text


def test_float_formatting_stable(tmp_path):
    paths = write_report(toy_report(), tmp_path)
    body = paths["csv"].read_text(encoding="utf-8")
    assert "3.14159265359" in body  # .12g, no longer tail
