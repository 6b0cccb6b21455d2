import pytest

from stfosls.cli import ConfigError, main, parse_config
from stfosls.mesh import read_mesh


HEAT_UNIFORM = """
case = heat-smooth
mode = uniform
degree = 1
levels = 3
write_mesh = true
"""

INCOMPATIBLE_ADAPTIVE = """
case = incompatible
mode = adaptive
marking = doerfler
theta = 0.5
max_iterations = 6
"""


def test_parse_defaults_and_overrides():
    config = parse_config(HEAT_UNIFORM)
    assert config.case == "heat-smooth"
    assert config.mode == "uniform"
    assert config.levels == 3
    assert config.write_mesh
    assert config.nt == 2 and config.nx == 2


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config("not_a_key = 1")
    with pytest.raises(ConfigError):
        parse_config("degree 2")


def test_parse_rejects_bad_values():
    with pytest.raises(ConfigError):
        parse_config("degree = 3")
    with pytest.raises(ConfigError):
        parse_config("marking = doerfler\ntheta = 0.0")
    with pytest.raises(ConfigError):
        parse_config("mode = sideways")
    with pytest.raises(ConfigError):
        parse_config("t_end = -1")
    with pytest.raises(ConfigError):
        parse_config("system = poisson\ncase = bogus")


def test_run_uniform_heat(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(HEAT_UNIFORM)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    lines = (out / "runlog.csv").read_text().splitlines()
    assert lines[0] == "level,dofs,elements,estimator,error,marked,cg_iters"
    assert len(lines) == 1 + 3
    summary = (out / "summary.txt").read_text()
    assert "reason = levels" in summary
    mesh = read_mesh(out / "mesh_final.txt")
    assert mesh.n_elements == 128


def test_run_invalid_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("marking = doerfler\ntheta = 0.0\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_run_incompatible_adaptive(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(INCOMPATIBLE_ADAPTIVE)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rows = (out / "runlog.csv").read_text().splitlines()[1:]
    first_eta = float(rows[0].split(",")[3])
    last_eta = float(rows[-1].split(",")[3])
    assert last_eta < first_eta
    assert rows[0].split(",")[4] == ""  # no reference error column


def test_identical_config_byte_identical_runlog(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(INCOMPATIBLE_ADAPTIVE)
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        assert main(["run", str(cfg), "--out", str(out)]) == 0
        outs.append((out / "runlog.csv").read_bytes())
    assert outs[0] == outs[1]


def test_verify_command(capsys):
    assert main(["verify", "--seed", "0"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert len(lines) >= 6
    assert all(l.startswith("PASS") for l in lines)
    names = [l.split()[1].rstrip(":") for l in lines]
    assert len(set(names)) == len(names)


def test_solver_failure_exit_3(tmp_path, monkeypatch):
    import stfosls.cli as cli
    from stfosls.driver import SolverFailure

    def boom(*args, **kwargs):
        raise SolverFailure("stalled")

    monkeypatch.setattr(cli, "adaptive_run", boom)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(INCOMPATIBLE_ADAPTIVE)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_internal_invariant_exit_4(tmp_path, monkeypatch):
    import stfosls.cli as cli
    from stfosls.driver import MarkingPropertyError

    def boom(*args, **kwargs):
        raise MarkingPropertyError("violated")

    monkeypatch.setattr(cli, "adaptive_run", boom)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(INCOMPATIBLE_ADAPTIVE)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_poisson_config(tmp_path):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("system = poisson\nmode = uniform\nlevels = 2\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rows = (out / "runlog.csv").read_text().splitlines()[1:]
    assert len(rows) == 2
    assert float(rows[0].split(",")[4]) > 0  # manufactured reference available
