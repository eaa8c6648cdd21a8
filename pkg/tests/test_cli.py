import csv
import subprocess
import sys

import numpy as np
import pytest

from gpe_ground import cli
from gpe_ground.grid import build_problem

SUMMARY_HEADER = "solver,dim,n,beta,a,b,outer_iters,lambda,residual,wall_seconds,status"
HISTORY_HEADER = "k,lambda_k,residual_k,step_or_inner_count,norm_u"


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run_cli(tmp_path, *args):
    out = tmp_path / "res"
    code = cli.main(["run", *args, "--out", str(out)])
    return code, out


def test_fmt():
    assert cli.fmt(None) == ""
    assert cli.fmt(3) == "3"
    assert cli.fmt(np.int64(7)) == "7"
    assert cli.fmt(1 / 3) == "0.3333333333"
    assert cli.fmt(100.40524717) == "100.4052472"
    assert cli.fmt(True) == "true"


def test_run_harmonic_beta50(tmp_path):
    code, out = run_cli(tmp_path, "--dim", "2", "--n", "15", "--beta", "50", "--potential", "harmonic",
                        "--solver", "nbi", "--a", "80.9598", "--b", "161.9196")
    assert code == 0
    lines = (tmp_path / "res_summary.csv").read_text().splitlines()
    assert lines[0] == SUMMARY_HEADER and len(lines) == 2
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert abs(float(row["lambda"]) - 100.4052) <= 2e-4
    assert row["status"] == "converged" and row["n"] == "225"
    assert float(row["a"]) == 80.9598 and float(row["b"]) == 161.9196
    hist = (tmp_path / "res_history.csv").read_text().splitlines()
    assert hist[0] == HISTORY_HEADER
    assert len(hist) - 1 == int(row["outer_iters"])


def test_run_history_inner_counts(tmp_path):
    code, _ = run_cli(tmp_path, "--n", "15", "--beta", "1", "--a", "22", "--b", "23")
    hist = read_rows(tmp_path / "res_history.csv")
    assert code == 0
    assert [int(h["step_or_inner_count"]) for h in hist][0] == 12
    assert [int(h["k"]) for h in hist] == list(range(1, len(hist) + 1))


def test_run_linear_limit(tmp_path):
    code, _ = run_cli(tmp_path, "--solver", "nni", "--beta", "0", "--n", "9")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    mu = np.linalg.eigvalsh(build_problem(2, 9, 0.0).B.to_dense())[0]
    assert code == 0
    assert float(row["lambda"]) == pytest.approx(mu, rel=1e-8)
    assert row["a"] == "" and row["b"] == ""


@pytest.mark.parametrize("solver", ["nni", "nni-inexact", "projected-gradient"])
def test_run_solvers_agree(tmp_path, solver):
    code, _ = run_cli(tmp_path, "--solver", solver, "--beta", "50", "--n", "15")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert code == 0 and row["solver"] == solver
    assert abs(float(row["lambda"]) - 100.4052) <= 2e-4


def test_run_auto_interval(tmp_path):
    code, _ = run_cli(tmp_path, "--beta", "50", "--auto-interval")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert code == 0
    assert float(row["a"]) == pytest.approx(80.9598, abs=1e-4)
    assert float(row["b"]) == pytest.approx(161.9196, abs=1e-4)


def test_run_lattice_potential(tmp_path):
    code, _ = run_cli(tmp_path, "--potential", "harmonic_lattice", "--solver", "nni", "--n", "7")
    assert code == 0


def test_run_3d_sizes(tmp_path):
    code, _ = run_cli(tmp_path, "--dim", "3", "--nx", "3", "--ny", "4", "--nz", "5", "--solver", "nni")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert code == 0 and row["n"] == "60" and row["dim"] == "3"


def test_run_failure_sets_status(tmp_path):
    code, _ = run_cli(tmp_path, "--beta", "1", "--a", "22", "--b", "23", "--max-outer", "3")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert code != 0
    assert row["status"] == "max_iterations" and row["outer_iters"] == "3"


def test_run_positivity_failure_status(tmp_path, monkeypatch):
    from gpe_ground.solvers import PositivityLostError

    def boom(*a, **k):
        raise PositivityLostError("forced")

    monkeypatch.setattr(cli, "nbi", boom)
    code, _ = run_cli(tmp_path, "--a", "22", "--b", "23")
    (row,) = read_rows(tmp_path / "res_summary.csv")
    assert code != 0 and row["status"] == "positivity_lost"
    assert read_rows(tmp_path / "res_history.csv") == []


def test_run_bad_interval_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli(tmp_path, "--a", "23", "--b", "22")
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        run_cli(tmp_path, "--a", "23")


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# example\nbeta = 50\nsolver = nni\nn = 9\ntol-outer = 1e-8\n")
    ns = cli.build_parser().parse_args(["run", "--config", str(conf), "--n", "15"])
    cfg = cli.config_from_args(ns)
    assert cfg.beta == 50.0 and cfg.solver == "nni" and cfg.tol_outer == 1e-8
    assert cfg.sizes == (15, 15)


def test_config_file_interval_overridden_by_flag(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("auto_interval = true\nwarm_start = off\n")
    ns = cli.build_parser().parse_args(["run", "--config", str(conf), "--a", "1", "--b", "2"])
    cfg = cli.config_from_args(ns)
    assert cfg.interval == (1.0, 2.0) and cfg.warm_start is False


def test_config_file_rejects_unknown_key(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        cli.config_from_args(cli.build_parser().parse_args(["run", "--config", str(conf)]))


def test_deterministic_output(tmp_path):
    def strip_time(path):
        rows = read_rows(path)
        for r in rows:
            r.pop("wall_seconds", None)
        return rows

    args = ["run", "--beta", "50", "--a", "80.9598", "--b", "161.9196", "--out", str(tmp_path / "x")]
    cli.main(args)
    first = (strip_time(tmp_path / "x_summary.csv"), (tmp_path / "x_history.csv").read_text())
    cli.main(args)
    assert first == (strip_time(tmp_path / "x_summary.csv"), (tmp_path / "x_history.csv").read_text())


def test_reproduce_table1(tmp_path):
    code = cli.main(["reproduce", "table1", "--out", str(tmp_path / "rep")])
    rows = read_rows(tmp_path / "rep_table1.csv")
    assert code == 0
    assert list(rows[0]) == list(cli.REPORT_COLUMNS)
    cell = {r["quantity"]: r for r in rows}
    assert cell["n=225 bi_iter"]["pass"] == "true"
    assert abs(int(cell["n=225 bi_iter"]["computed"]) - 18) <= 2


def test_reproduce_fig3(tmp_path):
    code = cli.main(["reproduce", "fig3", "--out", str(tmp_path / "rep")])
    rows = {r["quantity"]: r for r in read_rows(tmp_path / "rep_fig3.csv")}
    assert code == 0
    assert rows["outer_iters nondecreasing"]["pass"] == "true"
    assert rows["max deviation from slope-1 line"]["pass"] == "true"


def test_reproduce_fig1(tmp_path):
    code = cli.main(["reproduce", "fig1", "--out", str(tmp_path / "rep")])
    rows = {r["quantity"]: r for r in read_rows(tmp_path / "rep_fig1.csv")}
    assert code == 0
    assert rows["newton tail ratio spread"]["pass"] == "true"
    assert rows["nni tail ratio spread"]["pass"] == "true"


def test_reproduce_flags_failed_required_cell(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "_REPRODUCERS", {"table1": lambda large: [
        cli._near("table1", "x", 1.0, 2.0, 0.5), cli._info("table1", "y", None, 3.0)]})
    code = cli.reproduce("table1", str(tmp_path / "rep"))
    rows = read_rows(tmp_path / "rep_table1.csv")
    assert code == 1
    assert rows[0]["pass"] == "false" and rows[1]["pass"] == ""


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gpe_ground", "run", "--n", "5", "--solver", "nni",
                           "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m_summary.csv").exists()
