import json

import numpy as np
import pytest

from thinlayer import cli
from thinlayer.config import ConfigError, RunConfig, from_dict, load_config
from thinlayer.experiment import (COLUMNS, ConvergenceReport, ConvergenceRow, ConvergenceStudy, ReportError,
                                  compare, emit_report, format_row, read_csv, run_convergence, run_fine,
                                  run_limit, write_csv)

SMALL = """\
[mesh]
n_beam_x = 2
n_beam_y = 2
hmax = 0.1

[study]
eps_list = [0.1, 0.05]
springs = ["paper"]
refinement_check = false
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def row(eps, scale=1.0):
    return ConvergenceRow(eps, 1e-9 * scale, 2e-10 * scale, 3.0 * scale, 40.0 * scale,
                          1.3e-4, 1.31e-4, 7.6e-3 * scale, 1234, 1200)


class TestConfig:
    def test_defaults(self):
        cfg = from_dict({})
        assert cfg.eta1_value == pytest.approx(4 / 3)
        assert cfg.study.eps_list == [0.1, 0.05, 0.02]
        assert cfg.mat_bulk.young == pytest.approx(2e11)
        assert from_dict({"eta0": 1.0, "kappa0": 0.1}).eta1_value == pytest.approx(2 / 3)

    @pytest.mark.parametrize("data", [
        {"epsilonn": 0.1},
        {"study": {"springs": ["3d"]}},
        {"study": {"eps_list": []}},
        {"study": {"colour": 1}},
        {"mesh": {"n_beams": 2}},
        {"omega": [1.0, 0.0]},
        {"bulk": {"young": 1.0}},
        {"bulk": {"young": -1.0, "poisson": 0.3}},
        {"epsilon": 2.0},
    ])
    def test_rejected(self, data):
        with pytest.raises(ConfigError):
            from_dict(data)

    def test_files(self, tmp_path, small_cfg):
        assert load_config(small_cfg).resolution().n_beam_x == 2
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.toml")
        bad = tmp_path / "bad.toml"
        bad.write_text("epsilon = = 1")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_digest(self):
        assert RunConfig().digest() == from_dict({}).digest()
        assert RunConfig().digest() != from_dict({"epsilon": 0.05}).digest()


class TestReport:
    def test_empty(self, tmp_path):
        with pytest.raises(ReportError):
            write_csv(ConvergenceReport("paper"), tmp_path / "x.csv")
        study = ConvergenceStudy({"paper": ConvergenceReport("paper")}, {}, {}, RunConfig())
        with pytest.raises(ReportError):
            emit_report(study, tmp_path)

    def test_round_trip(self, tmp_path):
        rep = ConvergenceReport("paper", [row(0.05, 0.5), row(0.1)]).sort()
        assert [r.epsilon for r in rep.rows] == [0.1, 0.05]
        path = write_csv(rep, tmp_path / "c.csv")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("epsilon,jump_u1_err,jump_u2,stress12_err,stress22_err")
        assert tuple(lines[0].split(",")) == COLUMNS
        assert read_csv(path) == [format_row(r) for r in rep.rows]
        assert read_csv(path)[1][-2] == "1234"

    def test_bad_header(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("eps,a\n1,2\n")
        with pytest.raises(ReportError):
            read_csv(p)

    def test_trends(self):
        rep = ConvergenceReport("paper", [row(0.1), row(0.05, 0.5), row(0.02, 0.25)])
        assert rep.decreasing("jump_u1_err") and not rep.decreasing("fine_energy")
        assert not ConvergenceReport("paper", [row(0.1)]).decreasing("jump_u1_err")


class TestStudy:
    def test_small_eps_needs_flag(self):
        with pytest.raises(ConfigError):
            run_convergence(RunConfig(), [0.1, 0.01])

    def test_failure_recorded(self):
        cfg = from_dict({"mesh": {"n_beam_x": 2, "n_beam_y": 2, "hmax": 0.1},
                         "study": {"max_dofs": 5000, "springs": ["paper"], "refinement_check": False}})
        study = run_convergence(cfg, [0.1, 0.05])
        rep = study.reports["paper"]
        assert [r.epsilon for r in rep.rows] == [0.1]
        assert "0.05" in rep.failures and "max_dofs" in rep.failures["0.05"]

    def test_rows_sane(self, small_cfg):
        study = run_convergence(load_config(small_cfg))
        rep = study.reports["paper"]
        assert [r.epsilon for r in rep.rows] == [0.1, 0.05]
        for r in rep.rows:
            assert min(r.jump_u1_err, r.jump_u2, r.stress12_err, r.stress22_err) >= 0
            assert r.fine_energy > 0 and r.limit_energy > 0 and r.dofs_fine > 0

    def test_filled_layer_collapses_gap(self):
        # beams replaced by bulk material, spring made rigid: both models describe
        # the same bonded bilayer and the energy gap drops to discretisation level
        cfg = RunConfig()
        s, res = cfg.scaling(0.1), cfg.resolution()
        filled = run_fine(cfg, s, res, fill_layer=True)
        rigid, _ = run_limit(cfg, s, "paper", filled.mesh.xs, res, k_scale=1e8)
        bonded = compare(filled, rigid, cfg)
        beams = run_fine(cfg, s, res)
        spring, _ = run_limit(cfg, s, "paper", beams.mesh.xs, res)
        ref = compare(beams, spring, cfg)
        assert bonded["energy_gap"] < 1e-5 < 1e-3 < ref["energy_gap"]
        assert bonded["jump_u2"] < 0.5 * ref["jump_u2"]
        assert bonded["stress22_err"] < 0.5 * ref["stress22_err"]


class TestCli:
    def test_converge_deterministic(self, tmp_path, small_cfg, capsys):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert cli.main(["converge", "--config", str(small_cfg), "--out-dir", str(out)]) == 0
        a, b = (o / "convergence_paper.csv" for o in outs)
        assert a.read_bytes() == b.read_bytes()
        manifest = json.loads((outs[0] / "manifest.json").read_text())
        assert manifest["config_sha256"] == load_config(small_cfg).digest()
        assert set(manifest["versions"]) >= {"thinlayer", "numpy", "scipy", "python"}
        assert "set logscale xy" in (outs[0] / "convergence_paper.gp").read_text()
        assert "jump_u1_err=" in capsys.readouterr().out

    def test_converge_failure_exit(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text(SMALL + "max_dofs = 5000\n")
        assert cli.main(["converge", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2

    def test_input_errors(self, tmp_path, small_cfg):
        out = str(tmp_path)
        assert cli.main(["solve-fine", "--eps", "2", "--out-dir", out]) == 1
        assert cli.main(["converge", "--config", str(tmp_path / "nope.toml"), "--out-dir", out]) == 1
        assert cli.main(["converge", "--eps-list", "0.1,0.01", "--config", str(small_cfg),
                         "--out-dir", out]) == 1
        assert cli.main(["converge", "--eps-list", "a,b"]) == 1
        assert cli.main(["frobnicate"]) == 1

    def test_bending(self, tmp_path, capsys):
        assert cli.main(["bending", "--n", "21", "--out-dir", str(tmp_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["midpoint"] == pytest.approx(4 / np.pi / 384, rel=1e-8)
        assert (tmp_path / "bending.csv").exists()

    def test_decompose_demo(self, tmp_path, capsys):
        assert cli.main(["decompose-demo", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)["moment_residual"] < 1e-12

    def test_solve_commands(self, tmp_path, small_cfg, capsys):
        args = ["--config", str(small_cfg), "--out-dir", str(tmp_path)]
        assert cli.main(["solve-fine", *args]) == 0
        assert cli.main(["solve-limit", "--spring", "2d", *args]) == 0
        assert (tmp_path / "fine.vtk").exists() and (tmp_path / "limit_2d_trace.csv").exists()
        header = (tmp_path / "limit_2d_trace.csv").read_text().splitlines()[0]
        assert header == "x,jump_u1,jump_u2,sigma12_plus,sigma22_plus"
