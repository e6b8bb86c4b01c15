import json
import subprocess
import sys

import numpy as np
import pytest

from crowdflow import cli
from crowdflow.dg import DgFunction
from crowdflow.io import read_csv, read_vtk, write_csv, write_profile_csv, write_vtk
from crowdflow.mesh import GeometrySpec, build_interval_mesh, build_mesh
from crowdflow.velocity import resolve_constant


class TestIo:
    def test_csv_fifteen_digits(self, tmp_path):
        vals = [1 / 3, np.pi, 1e-17, -2.5e8]
        write_csv(tmp_path / "a.csv", ["v"], [[v] for v in vals])
        header, data = read_csv(tmp_path / "a.csv")
        assert header == ["v"]
        np.testing.assert_allclose(data[:, 0], vals, rtol=1e-14)
        assert (tmp_path / "a.csv").read_text().splitlines()[1] == "0.333333333333333"

    def test_profile_rows(self, tmp_path):
        mesh = build_interval_mesh(4)
        rho = DgFunction.interpolate(mesh, lambda x: x)
        write_profile_csv(tmp_path / "p.csv", rho, np.full(4, 0.2))
        header, data = read_csv(tmp_path / "p.csv")
        assert header == ["x", "rho", "j"] and data.shape == (8, 3)
        np.testing.assert_allclose(data[:, 0], data[:, 1], atol=1e-15)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_vtk_roundtrip(self, tmp_path, dim, rng):
        mesh = build_interval_mesh(5) if dim == 1 else build_mesh(GeometrySpec.corridor(6, 3))
        rho = DgFunction(mesh, rng.random((mesh.n_cells, dim + 1)))
        vel = resolve_constant((0.3, -0.1)[:dim], mesh.n_cells, dim=dim)
        write_vtk(tmp_path / "s.vtk", rho, vel)
        d = read_vtk(tmp_path / "s.vtk")
        np.testing.assert_allclose(d.rho, rho.vector, rtol=1e-14)
        assert len(d.cells) == mesh.n_cells and d.points.shape == (mesh.n_dofs, 3)
        np.testing.assert_allclose(d.velocity[:, :dim], vel.cells, rtol=1e-14)
        assert set(d.cell_types) == {3 if dim == 1 else 5}

    def test_vtk_rejects_garbage(self, tmp_path):
        (tmp_path / "x.vtk").write_text("a\nb\nc\nd\nnothing\n")
        with pytest.raises(ValueError):
            read_vtk(tmp_path / "x.vtk")


class TestConfig:
    def test_defaults(self):
        cfg = cli.parse_config('{"mode": "solve1d", "epsilon": 0.1, "alpha": 0.2, "beta": 0.4}')
        assert cfg["cells"] == 200 and cfg["tau"] == 0.01 and cfg["tol"] == 1e-8
        assert cfg["eta"] == 10.0 and cfg["initial_density"] == 0.5
        p = cfg.model_params()
        assert (p.epsilon, p.alpha, p.beta) == (0.1, 0.2, 0.4)

    def test_rate_out_of_range(self):
        with pytest.raises(cli.ConfigError, match="alpha: 1.5 is outside"):
            cli.parse_config('{"mode": "solve1d", "epsilon": 0.1, "alpha": 1.5, "beta": 0.4}')

    def test_missing_epsilon(self):
        with pytest.raises(cli.ConfigError, match="epsilon"):
            cli.parse_config('{"mode": "solve1d", "alpha": 0.2, "beta": 0.4}')

    def test_unknown_key_and_bad_json(self):
        with pytest.raises(cli.ConfigError, match="frobnicate"):
            cli.parse_config('{"mode": "mesh", "frobnicate": 1}')
        with pytest.raises(cli.ConfigError, match="not valid JSON"):
            cli.parse_config("{mode")

    def test_rates_must_match_doors(self):
        with pytest.raises(cli.ConfigError, match="missing"):
            cli.parse_config('{"mode": "solve2d", "epsilon": 0.1, "rates": {"inflow1": 0.2}}')

    def test_2d_segments(self):
        cfg = cli.parse_config(json.dumps({
            "mode": "solve2d", "epsilon": 0.1,
            "rates": {"inflow1": 0.2, "inflow2": 0.4, "outflow1": 0.4, "outflow2": 0.2}}))
        segs = cfg.segments()
        assert [s.kind.value for s in segs].count("inflow") == 2
        assert segs[-1].kind.value == "wall"


def run_main(argv):
    return cli.main([str(a) for a in argv])


class TestMain:
    def test_solve1d(self, tmp_path):
        out = tmp_path / "p.csv"
        assert run_main(["solve1d", "--epsilon", 0.1, "--alpha", 0.2, "--beta", 0.4,
                         "--cells", 40, "--out", out]) == 0
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["report"]["converged"]
        assert summary["phase"] == "InfluxLimited"
        assert summary["estimates"]["maximal_current"] == "not-applicable"

    def test_deterministic(self, tmp_path):
        args = ["solve1d", "--epsilon", 0.05, "--alpha", 0.3, "--beta", 0.6, "--cells", 30]
        assert run_main(args + ["--out", tmp_path / "a.csv"]) == 0
        assert run_main(args + ["--out", tmp_path / "b.csv"]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_usage_errors(self, tmp_path, capsys):
        assert run_main(["solve1d", "--epsilon", 0.1, "--alpha", 1.5, "--beta", 0.4,
                         "--out", tmp_path / "x.csv"]) == 1
        assert "outside the admissible rate range" in capsys.readouterr().err
        with pytest.raises(SystemExit) as exc:
            run_main(["solve1d", "--epsilon", 0.1])
        assert exc.value.code == 1
        cfgfile = tmp_path / "c.json"
        cfgfile.write_text("{not json")
        assert run_main(["solve2d", "--config", cfgfile, "--out", tmp_path / "o"]) == 1
        assert run_main(["solve2d", "--config", tmp_path / "nope.json", "--out", tmp_path / "o"]) == 1

    def test_not_converged(self, tmp_path):
        assert run_main(["solve1d", "--epsilon", 0.1, "--alpha", 0.2, "--beta", 0.4,
                         "--cells", 20, "--max-iter", 5, "--out", tmp_path / "x.csv"]) == 2

    def test_solve2d_linear_potential(self, tmp_path):
        cfgfile = tmp_path / "c.json"
        cfgfile.write_text(json.dumps({
            "epsilon": 0.1, "nx": 8, "ny": 4, "tau": 20, "velocity": "linear",
            "doors": [{"tag": "in", "side": "left", "lo": 0.0, "hi": 1.0},
                      {"tag": "out", "side": "right", "lo": 0.0, "hi": 1.0}],
            "rates": {"in": 0.6, "out": 0.9}}))
        assert run_main(["solve2d", "--config", cfgfile, "--out", tmp_path / "o"]) == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["bounds"] == "not-applicable"
        assert rep["report"]["converged"]
        assert read_vtk(tmp_path / "o" / "solution.vtk").rho.size == 8 * 4 * 2 * 3

    def test_solve2d_harmonic_bounds(self, tmp_path):
        cfgfile = tmp_path / "c.json"
        cfgfile.write_text(json.dumps({
            "epsilon": 0.1, "nx": 20, "ny": 10, "tau": 20,
            "rates": {"inflow1": 0.2, "inflow2": 0.4, "outflow1": 0.4, "outflow2": 0.2}}))
        assert run_main(["solve2d", "--config", cfgfile, "--out", tmp_path / "o"]) == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["bounds"]["range"] == [0.2, 0.8]
        assert rep["velocity"]["method"] == "mixed"

    def test_analytic(self, tmp_path):
        assert run_main(["analytic", "--epsilon", 0.01, "--alpha", 0.2, "--beta", 0.4,
                         "--n-samples", 11, "--out", tmp_path]) == 0
        sol = json.loads((tmp_path / "solution.json").read_text())
        assert max(abs(r) for r in sol["bc_residuals"]) < 1e-10
        lines = (tmp_path / "phase_boundary.csv").read_text().splitlines()
        assert lines[0] == "alpha,beta,side" and len(lines) > 11
        assert (tmp_path / "profile.csv").exists()

    def test_analytic_needs_both_rates(self, tmp_path):
        assert run_main(["analytic", "--epsilon", 0.1, "--alpha", 0.2, "--out", tmp_path]) == 1

    def test_mesh(self, tmp_path):
        from crowdflow.mesh import read_mesh
        out = tmp_path / "m.txt"
        assert run_main(["mesh", "--geometry", "obstacle", "--nx", 40, "--ny", 20,
                         "--obstacle", "1.0,0.5,0.2", "--out", out]) == 0
        m = read_mesh(out)
        assert m.n_cells < 40 * 20 * 2
        assert run_main(["mesh", "--geometry", "obstacle", "--obstacle", "1,2", "--out", out]) == 1

    def test_console_script_module(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "crowdflow.cli", "analytic", "--epsilon", "0.1",
                            "--n-samples", "5", "--out", str(tmp_path)], capture_output=True)
        assert r.returncode == 0, r.stderr
