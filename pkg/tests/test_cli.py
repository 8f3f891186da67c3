"""Experiment configs, the run command, output files and table plumbing."""

import csv
import textwrap

import pytest

from varground import cli
from varground.cli import ConfigError, build_config, load_config, main, table_cells


def write_config(tmp_path, body, name="exp.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


ED_HUBBARD = """
    [experiment]
    label = hub-ed
    model = hubbard
    method = ed

    [model]
    n_sites = 4
    u = 2.0
"""


def test_ed_run_writes_result_and_trace(tmp_path):
    cfg = write_config(tmp_path, ED_HUBBARD)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    (rec,) = read_csv(out / "result.csv")
    assert float(rec["energy_per_site"]) == pytest.approx(-1.71898570225126, abs=1e-10)
    assert float(rec["energy"]) == pytest.approx(4 * float(rec["energy_per_site"]), rel=1e-15)
    assert rec["energy_err"] == ""
    trace = read_csv(out / "trace.csv")
    assert len(trace) == 1
    assert float(trace[0]["energy_per_site"]) == pytest.approx(-1.71898570225126, abs=1e-10)


def test_energy_per_site_is_energy_over_n_for_every_normalization(tmp_path):
    for norm, t in (("per_site_over_t", 1.0), ("raw", 2.0)):
        cfg = build_config(
            {"model": "hubbard", "method": "ed"},
            {"n_sites": 2, "u": 4.0, "t": t, "normalization": norm},
            {},
        )
        rec = cli.execute(cfg).record
        assert rec.energy_per_site == rec.energy / 2
    # the raw dimer: E = -(U + sqrt(U^2 + 16 t^2)) / 2 with t = 2
    assert rec.energy == pytest.approx(-(4 + (16 + 64) ** 0.5) / 2, abs=1e-10)


@pytest.mark.parametrize(
    "body",
    [
        "[experiment]\nmodel = hubbard\nmethod = ed\n[model]\nn_sites = 4\nfoo = 1\n",
        "[experiment]\nmodel = hubbard\nmethod = ed\n[model]\nn_sites = four\n",
        "[experiment]\nmodel = nope\nmethod = ed\n[model]\nn_sites = 4\n",
        "[experiment]\nmodel = hubbard\nmethod = ed\n",
        "[model]\nn_sites = 4\n",
        "not an ini file at all",
        "[experiment]\nmodel = hubbard\nmethod = vqe\n[model]\nn_sites = 3\n",
        "[experiment]\nmodel = hubbard\nmethod = rbm\n[model]\nn_sites = 2\n[method]\nmove = single_flip\nsector = auto\n",
        "[experiment]\nmodel = ising\nmethod = vqe\n[model]\nn_sites = 4\n",
        "[experiment]\nmodel = hubbard\nmethod = dmrg\n[model]\nn_sites = 4\n[method]\nchi_max = 0\n",
    ],
)
def test_malformed_config_exits_2_without_files(tmp_path, body, capsys):
    cfg = write_config(tmp_path, body)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.ini")]) == 2


def test_solver_failure_exits_1(tmp_path, monkeypatch):
    def boom(cfg):
        raise RuntimeError("no convergence")

    monkeypatch.setattr(cli, "execute", boom)
    cfg = write_config(tmp_path, ED_HUBBARD)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 1
    assert not out.exists()


def test_output_directory_precedence(tmp_path, monkeypatch):
    body = ED_HUBBARD.replace("method = ed", f"method = ed\n    output_dir = {tmp_path / 'from_cfg'}")
    cfg = write_config(tmp_path, body)
    monkeypatch.setenv("VARGROUND_OUTPUT_DIR", str(tmp_path / "from_env"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "result.csv").exists()
    assert main(["run", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "result.csv").exists()
    monkeypatch.delenv("VARGROUND_OUTPUT_DIR")
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "from_cfg" / "result.csv").exists()


def test_results_are_deterministic(tmp_path):
    body = """
        [experiment]
        label = vqe-small
        model = hubbard
        method = vqe
        seed = 3

        [model]
        n_sites = 2
        u = 1.0

        [method]
        p = 2
        n_iters = 40
        report_window = 10
    """
    cfg = write_config(tmp_path, body)
    rows = []
    for d in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / d)]) == 0
        (rec,) = read_csv(tmp_path / d / "result.csv")
        rec.pop("wall_time_s")
        rec.pop("git_or_build_id")
        rows.append(rec)
        rows.append((tmp_path / d / "trace.csv").read_text())
    assert rows[0] == rows[2] and rows[1] == rows[3]
    assert main(["--seed", "4", "run", str(cfg), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trace.csv").read_text() != rows[1]


def test_variational_records_respect_the_bound(tmp_path):
    exact = cli.execute(build_config({"model": "hubbard", "method": "ed"}, {"n_sites": 2, "u": 2.0}, {})).record
    for method, mv in (("vqe", {"p": 2, "n_iters": 200, "report_window": 50}),
                       ("rbm", {"alpha": 2, "n_iters": 200, "n_samples": 100, "n_burn": 50})):  # fmt: skip
        rec = cli.execute(build_config({"model": "hubbard", "method": method}, {"n_sites": 2, "u": 2.0}, mv)).record
        assert rec.energy >= exact.energy - 3 * rec.energy_err - 1e-10


def test_rbm_trace_columns(tmp_path):
    body = """
        [experiment]
        model = ising
        method = rbm

        [model]
        n_sites = 3
        g = 0.5

        [method]
        alpha = 1
        n_iters = 5
        n_samples = 20
        n_burn = 5
    """
    out = tmp_path / "out"
    assert main(["run", str(write_config(tmp_path, body)), "--out", str(out)]) == 0
    trace = read_csv(out / "trace.csv")
    assert list(trace[0]) == ["iter", "energy_mean", "energy_err", "acceptance_rate", "grad_norm"]
    assert len(trace) == 5


def test_dmrg_trace_has_one_row_per_update(tmp_path):
    body = """
        [experiment]
        model = schwinger
        method = dmrg

        [model]
        n_sites = 4
        x = 100
        mu = 2.5

        [method]
        n_sweeps = 2
    """
    out = tmp_path / "out"
    assert main(["run", str(write_config(tmp_path, body)), "--out", str(out)]) == 0
    assert len(read_csv(out / "trace.csv")) == 2 * 2 * (4 - 1)
    (rec,) = read_csv(out / "result.csv")
    assert float(rec["energy_per_site"]) == pytest.approx(-54.4037370017, abs=1e-8)


def test_hubbard_rbm_defaults_to_sector_moves():
    cfg = build_config({"model": "hubbard", "method": "rbm"}, {"n_sites": 4}, {})
    assert cfg.method_params["move"] == "exchange_pair"
    assert cfg.method_params["sector"] == "auto"
    cfg = build_config({"model": "ising", "method": "rbm"}, {"n_sites": 4}, {})
    assert cfg.method_params["move"] == "single_flip"
    cfg = build_config({"model": "hubbard", "method": "rbm"}, {"n_sites": 4}, {"move": "single_flip", "sector": "none"})
    assert cfg.method_params["move"] == "single_flip"


def test_table_grids():
    assert len(table_cells("table1")) == 12
    t5 = table_cells("table5")
    assert len(t5) == 10
    assert {c.config.n_sites for c in t5} == {4, 8, 16, 32, 64}
    assert {c.config.model_params.mu for c in t5} == {0.0, 2.5}
    t6 = table_cells("table6")
    assert all(c.config.method_params["n_iters"] == 3000 for c in t6)
    assert all(c.config.method_params["report_window"] == 1000 for c in t6)
    t3 = table_cells("table3")
    assert all(c.config.method_params["alpha"] == 4 for c in t3)
    assert all(c.config.method_params["n_iters"] == 40000 for c in t3)
    t4 = table_cells("table4")
    assert all(c.config.method_params["p"] == 6 and c.config.method_params["eta"] == 0.01 for c in t4)
    with pytest.raises(ConfigError):
        table_cells("table7")


def test_table_output_layout(tmp_path, monkeypatch):
    # a two-cell stand-in for table1 keeps this fast
    cells = table_cells("table1")[:2]
    monkeypatch.setattr(cli, "table_cells", lambda name, seed=0: cells)
    path, failed = cli.run_table("table1", tmp_path)
    assert failed == 0
    rows = read_csv(path)
    assert list(rows[0]) == list(cli.TABLE_FIELDS)
    for row, cell in zip(rows, cells):
        assert row["status"] == "ok"
        assert float(row["reference"]) == cell.reference
        assert float(row["abs_deviation"]) < 1e-10
    grid = read_csv(tmp_path / "table1_grid.csv")
    assert list(grid[0]) == ["N", "U/t=0", "U/t=2"]
    assert (tmp_path / "table1" / cells[0].config.label / "trace.csv").exists()


def test_table_partial_failure(tmp_path, monkeypatch):
    cells = table_cells("table1")[:2]
    monkeypatch.setattr(cli, "table_cells", lambda name, seed=0: cells)
    real = cli.execute

    def flaky(cfg):
        if cfg.label == cells[1].config.label:
            raise RuntimeError("broken cell")
        return real(cfg)

    monkeypatch.setattr(cli, "execute", flaky)
    assert main(["table", "table1", "--out", str(tmp_path)]) == 1
    rows = read_csv(tmp_path / "table1.csv")
    assert [r["status"] for r in rows] == ["ok", "failed"]


def test_table_argument_errors(tmp_path):
    assert main(["table", "table9", "--out", str(tmp_path)]) == 2
    assert main(["table", "table1", "--jobs", "0", "--out", str(tmp_path)]) == 2


def test_version_and_bad_arguments(capsys):
    assert main(["--version"]) == 0
    assert "varground" in capsys.readouterr().out
    assert main(["frobnicate"]) == 2


def test_load_config_keeps_key_case(tmp_path):
    body = "[experiment]\nmodel = ising\nmethod = ed\n[model]\nn_sites = 3\nJ = 0.5\n"
    cfg = load_config(write_config(tmp_path, body))
    assert cfg.model_params.J == 0.5
