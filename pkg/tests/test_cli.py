import numpy as np
import pytest
from click.testing import CliRunner

from dunkl_lab.cli import main

SMALL = """
[rootsys]
family = z2
multiplicities = 1.0

[grid]
resolution = 64
box_halfwidth = 12.0

[operator]
t_min = 0.7
t_max = 5.0
time_count = 10

[experiment]
seed = 314
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL, encoding="utf-8")
    return path


def test_defaults_round_trips(runner, tmp_path):
    res = runner.invoke(main, ["defaults"])
    assert res.exit_code == 0
    cfg = tmp_path / "defaults.ini"
    cfg.write_text(res.output, encoding="utf-8")
    res2 = runner.invoke(main, ["rootsys", "describe", "--config", str(cfg)])
    assert res2.exit_code == 0


def test_rootsys_describe(runner, small_ini):
    res = runner.invoke(main, ["rootsys", "describe", "--config", str(small_ini)])
    assert res.exit_code == 0
    assert "homogeneous dimension" in res.output
    assert "3" in res.output  # D = 1 + 2k = 3


def test_grid_build_and_check(runner, small_ini, tmp_path):
    out = tmp_path / "grid.csv"
    res = runner.invoke(
        main, ["grid", "build", "--config", str(small_ini), "--out", str(out)]
    )
    assert res.exit_code == 0
    assert out.exists()
    res2 = runner.invoke(main, ["grid", "check", "--config", str(small_ini)])
    assert res2.exit_code == 0
    assert "PASS" in res2.output


def test_kernel_eval_and_normalization(runner, small_ini, tmp_path):
    out = tmp_path / "kern.csv"
    res = runner.invoke(
        main,
        ["kernel", "eval", "--config", str(small_ini), "--t", "0.5,1.0",
         "--x", "1.0", "--y", "0.3", "--out", str(out)],
    )
    assert res.exit_code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("t,")
    assert len(lines) == 3

    res2 = runner.invoke(
        main, ["kernel", "check-normalization", "--config", str(small_ini)]
    )
    assert res2.exit_code == 0
    assert "PASS" in res2.output


def test_op_maximal_writes_values(runner, small_ini, tmp_path):
    out = tmp_path / "max.csv"
    res = runner.invoke(
        main,
        ["op", "maximal", "--config", str(small_ini), "--fn", "bump",
         "--center", "1.0", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x0,value"
    assert len(lines) == 65  # one per node plus header
    vals = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert np.all(np.isfinite(vals)) and np.all(vals >= 0)


def test_space_atoms_manifest(runner, small_ini, tmp_path):
    out = tmp_path / "atoms.csv"
    res = runner.invoke(
        main,
        ["space", "atoms", "--config", str(small_ini), "--count", "4",
         "--kind", "size", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("atom_id,kind")
    assert len(lines) == 5


def test_run_is_deterministic(runner, small_ini, tmp_path):
    args = ["run", "exp_kernel_bounds", "--config", str(small_ini),
            "--seed", "314"]
    res1 = runner.invoke(main, args + ["--out", str(tmp_path / "a")])
    assert res1.exit_code == 0, res1.output
    assert "PASS" in res1.output
    res2 = runner.invoke(main, args + ["--out", str(tmp_path / "b")])
    assert res2.exit_code == 0
    csv_a = (tmp_path / "a" / "exp_kernel_bounds.csv").read_bytes()
    csv_b = (tmp_path / "b" / "exp_kernel_bounds.csv").read_bytes()
    assert csv_a == csv_b
    assert (tmp_path / "a" / "exp_kernel_bounds.png").stat().st_size > 1000


def test_run_rejects_unknown_experiment(runner, small_ini, tmp_path):
    out = tmp_path / "nope"
    res = runner.invoke(
        main,
        ["run", "exp_wrong", "--config", str(small_ini), "--out", str(out)],
    )
    assert res.exit_code != 0
    assert not out.exists()  # no partial output on failure


def test_missing_seed_fails_cleanly(runner, tmp_path):
    bad = tmp_path / "noseed.ini"
    bad.write_text("[rootsys]\nfamily = z2\nmultiplicities = 1.0\n",
                   encoding="utf-8")
    out = tmp_path / "never"
    res = runner.invoke(
        main,
        ["run", "exp_kernel_bounds", "--config", str(bad), "--out", str(out)],
    )
    assert res.exit_code != 0
    assert "seed" in res.output
    assert not out.exists()


def test_malformed_config_fails_cleanly(runner, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(SMALL + "\n[grid]\nresolution = banana\n", encoding="utf-8")
    res = runner.invoke(main, ["grid", "check", "--config", str(bad)])
    assert res.exit_code != 0
