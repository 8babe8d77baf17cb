import csv
import json

import numpy as np
import pytest

from okflow.cli import eps_study_levels, main
from okflow.config import parse_config
from okflow.errors import ConfigurationError

BASE = {
    "problem": {"eps": "0.02", "sigma": "100", "m": "0.4", "theta": "0.5", "dt": "0.0004",
                "n_steps": "25"},
    "mesh": {"dim": "2", "n": "64"},
}


def write_config(path, sections=None, drop=(), **overrides):
    data = {k: dict(v) for k, v in BASE.items()}
    for sec, vals in (sections or {}).items():
        data.setdefault(sec, {}).update(vals)
    for sec, key in drop:
        del data[sec][key]
    for key, value in overrides.items():
        sec, name = key.split("__")
        data.setdefault(sec, {})[name] = value
    text = "".join(f"[{s}]\n" + "".join(f"{k} = {v}\n" for k, v in kv.items()) for s, kv in data.items())
    path.write_text(text)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# -- configuration ----------------------------------------------------------

def test_minimal_config(tmp_path):
    man = parse_config(write_config(tmp_path / "a.ini"))
    cfg = man.config
    assert (cfg.eps, cfg.sigma, cfg.m, cfg.theta, cfg.dt, cfg.n_steps, cfg.dim, cfg.n) == (
        0.02, 100.0, 0.4, 0.5, 0.0004, 25, 2, 64)
    assert (cfg.cheby_iters, cfg.richardson_steps, cfg.mg_cycles) == (10, 2, 5)
    assert man.kind == "run"


def test_theta_zero_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="theta"):
        parse_config(write_config(tmp_path / "a.ini", problem__theta="0"))


def test_missing_eps_named(tmp_path):
    with pytest.raises(ConfigurationError, match="'eps'"):
        parse_config(write_config(tmp_path / "a.ini", drop=[("problem", "eps")]))


@pytest.mark.parametrize("overrides", [{"solver__magic": "1"}, {"extra__x": "1"},
                                       {"mesh__n": "six"}, {"mesh__n": "6.5"},
                                       {"solver__compute_energy": "maybe"}])
def test_bad_entries(tmp_path, overrides):
    with pytest.raises(ConfigurationError):
        parse_config(write_config(tmp_path / "a.ini", **overrides))


def test_final_time_and_solver_knobs(tmp_path):
    path = write_config(tmp_path / "a.ini", drop=[("problem", "n_steps")], problem__T="0.12",
                        solver__gmres_tol="1e-8", solver__newton_tol="1e-9",
                        solver__gmres_restart="none", solver__cheby_iters="7",
                        solver__interval_deltas="1e-8, 1e-6", mesh__study_n="8 16",
                        output__directory=str(tmp_path / "o"), output__snapshot_every="0")
    man = parse_config(path, kind="mesh-study")
    assert man.config.n_steps == 300
    assert man.config.gmres_tol == 1e-8 and man.config.newton_tol == 1e-9
    assert man.config.gmres_restart is None and man.config.cheby_iters == 7
    assert man.interval_deltas == [1e-8, 1e-6] and man.study_n == [8, 16]
    assert man.output_dir == tmp_path / "o" and man.snapshot_every == 0
    with pytest.raises(ConfigurationError):
        parse_config(write_config(tmp_path / "b.ini", drop=[("problem", "n_steps")]))
    with pytest.raises(ConfigurationError):
        parse_config(path, kind="plot")


# -- commands ---------------------------------------------------------------

def small_config(tmp_path, **overrides):
    kw = {"mesh__n": "8", "problem__n_steps": "3", "output__directory": str(tmp_path / "out")}
    kw.update(overrides)
    return write_config(tmp_path / "run.ini", **kw)


def test_run_zero_steps(tmp_path):
    cfg = small_config(tmp_path, problem__n_steps="0")
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "stats.csv").read_text() == (
        "step,newton_iters,total_gmres,avg_gmres,residual,mass,energy,seconds\n")
    assert sorted(p.name for p in out.glob("*.vtk")) == ["state_0.vtk"]


def test_run_outputs(tmp_path):
    cfg = small_config(tmp_path, output__snapshot_every="2")
    assert main(["run", "--config", str(cfg), "--threads", "1"]) == 0
    rows = read_csv(tmp_path / "out" / "stats.csv")
    assert len(rows) == 4
    body = np.array(rows[1:], dtype=float)
    assert list(body[:, 0]) == [1, 2, 3]
    assert np.ptp(body[:, 5]) <= 1e-8
    # seventeen significant digits survive a text round trip
    assert all(float(x) == float(repr(float(x))) for x in rows[1][4:])
    assert sorted(p.name for p in (tmp_path / "out").glob("*.vtk")) == ["state_0.vtk", "state_2.vtk"]


def test_output_flag_overrides(tmp_path):
    cfg = small_config(tmp_path, problem__n_steps="1")
    assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "stats.csv").exists()


def test_step_failure_exit_code(tmp_path):
    cfg = small_config(tmp_path, solver__newton_tol="1e-30", solver__newton_maxit="1")
    assert main(["run", "--config", str(cfg)]) == 1
    # partial outputs are kept
    assert (tmp_path / "out" / "stats.csv").exists()
    assert (tmp_path / "out" / "state_0.vtk").exists()


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.ini", drop=[("problem", "eps")])
    assert main(["run", "--config", str(cfg)]) == 2
    assert "eps" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == 2


def test_mesh_study(tmp_path, capsys):
    cfg = small_config(tmp_path, mesh__study_n="4 8")
    assert main(["mesh-study", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "mesh_study.csv")
    assert rows[0] == ["n", "dofs", "avg_gmres_per_newton"]
    assert [r[:2] for r in rows[1:]] == [["4", "50"], ["8", "162"]]
    assert "Degrees of freedom" in capsys.readouterr().out


def test_mesh_study_single_entry_is_run(tmp_path):
    cfg = small_config(tmp_path, mesh__study_n="4")
    assert main(["mesh-study", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "stats.csv").exists()
    assert not (tmp_path / "out" / "mesh_study.csv").exists()


def test_eps_study(tmp_path):
    cfg = small_config(tmp_path, problem__eps_list="0.25 0.125", problem__n_steps="2")
    man = parse_config(cfg, kind="eps-study")
    assert [lvl[3] for lvl in eps_study_levels(man)] == [8, 16]
    assert main(["eps-study", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "eps_study.csv")
    assert rows[0] == ["eps", "dx", "dt", "avg_gmres_per_newton"]
    for row in rows[1:]:
        assert float(row[2]) == float(row[0]) ** 2
        assert float(row[1]) == float(row[0]) / 2


def test_eps_study_refuses_large_mesh(tmp_path, capsys):
    cfg = small_config(tmp_path, problem__eps_list="0.01", mesh__max_vertices="1000")
    assert main(["eps-study", "--config", str(cfg)]) == 2
    assert "max_vertices" in capsys.readouterr().err


def test_verify_and_fault_injection(tmp_path):
    cfg = small_config(tmp_path)
    assert main(["verify", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert report["passed"]
    assert sorted({ch["delta"] for ch in report["checks"] if ch["check"] == "eigenvalue_interval"}) == [
        1e-8, 1e-6, 1e-4]
    assert main(["verify", "--config", str(cfg), "--perturb-shat", "0.1"]) == 1
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    failed = {ch["check"] for ch in report["checks"] if not ch["passed"]}
    assert {"two_iteration", "null_space_eigenvalue", "matching_identity"} <= failed


@pytest.mark.parametrize("name,kind", [("run", "run"), ("mesh_study", "mesh-study"),
                                       ("eps_study", "eps-study"), ("verify", "verify")])
def test_shipped_configs_parse(name, kind):
    from pathlib import Path

    path = Path(__file__).parents[1] / "configs" / f"{name}.ini"
    assert parse_config(path, kind=kind).kind == kind
