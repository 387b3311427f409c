import json
import math

import numpy as np
import pytest

from nsgeom import cli, fields as F, snapio
from nsgeom.analytic import AnalyticField


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def series_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("abc16")
    code = cli.main(["simulate", "--init", "abc", "--n", "16", "--dt", "0.01", "--t-end", "0.3",
                     "--snap-every", "0.05", "--out-dir", str(out), "--report", str(out / "sim.json")])
    assert code == 0
    return out


def load(path):
    return json.loads(path.read_text())


def test_simulate_report_and_snapshots(series_dir):
    rep = load(series_dir / "sim.json")
    assert rep["schema_version"] == cli.SCHEMA_VERSION and rep["command"] == "simulate"
    assert rep["audit"]["passed"]
    assert "out_dir" not in rep["config"] and rep["config"]["init"] == "abc"
    assert len(sorted(series_dir.glob("*.vxs"))) == 7
    e = rep["results"]["energies"]
    assert all(b <= a for a, b in zip(e, e[1:]))


def test_validate(series_dir, tmp_path):
    assert run(["validate", "--in", series_dir, "--report", tmp_path / "v.json"]) == 0
    rep = load(tmp_path / "v.json")
    assert rep["results"]["n_snapshots"] == 7
    assert rep["results"]["times"][-1] == pytest.approx(0.3)


def test_cone_with_plotdata(series_dir, tmp_path):
    assert run(["cone", "--in", series_dir, "--M", "1.0", "--lattice", "500",
                "--report", tmp_path / "c.json", "--plotdata", tmp_path / "plots"]) == 0
    rep = load(tmp_path / "c.json")
    assert 0.0 <= rep["results"]["cone"]["delta"] <= 1.0
    cols, data = cli.read_csv(tmp_path / "plots" / "directions.csv")
    assert cols == ["theta", "phi"] and len(data) == rep["results"]["n_samples"]


def test_flux(series_dir, tmp_path):
    code = run(["flux", "--in", series_dir, "--radii", "0.3,0.5", "--heights", "0.0,0.4",
                "--center", "0.0,1.5708,0.0", "--n-r", "24", "--n-theta", "48",
                "--report", tmp_path / "f.json", "--plotdata", tmp_path])
    assert code == 0
    cols, data = cli.read_csv(tmp_path / "flux.csv")
    assert cols[:4] == ["t", "z", "r", "gamma"] and data.shape == (4, 10)
    assert np.all(data[:, 3] > 0)


def test_type_i(series_dir, tmp_path):
    assert run(["typeI", "--in", series_dir, "--r-max", "0.5", "--levels", "2", "--quad", "6",
                "--report", tmp_path / "t.json", "--plotdata", tmp_path]) == 0
    rep = load(tmp_path / "t.json")
    assert rep["results"]["G"] >= 2.0 and rep["results"]["eps_ckn_heuristic"]
    cols, data = cli.read_csv(tmp_path / "scales.csv")
    assert cols == ["r", "F", "E", "A", "D"] and data.shape == (3, 5)


def test_axisym_synthetic(tmp_path):
    assert run(["axisym", "--c1", "20", "--c2", "20", "--start", "3e-4,0", "--seed", "4",
                "--report", tmp_path / "a.json", "--plotdata", tmp_path]) == 0
    rep = load(tmp_path / "a.json")
    tr = rep["results"]["trace"]
    assert tr["passed"] and tr["final"][0] == 0.0 and tr["switches"]
    cols, data = cli.read_csv(tmp_path / "trace.csv")
    assert cols == ["r", "z", "mode"] and set(np.unique(data[:, 2])) <= {1.0, 2.0}


def test_axisym_on_snapshot(tmp_path):
    # a uniform vertical stream is axisymmetric about every vertical line
    g = F.GridSpec.cube(16)
    comps = np.zeros((3,) + g.shape)
    comps[2] = 1.0
    snapio.write_snapshot(tmp_path / "u.vxs", F.VectorField(g, comps))
    code = run(["axisym", "--in", tmp_path / "u.vxs", "--axis", "3.14159,3.14159", "--c1", "11",
                "--c2", "11", "--start", "5e-4,3.14159", "--report", tmp_path / "a.json"])
    # the start must lie in the small ball about z = 0
    assert code == 4
    code = run(["axisym", "--in", tmp_path / "u.vxs", "--c1", "11", "--c2", "11",
                "--start", "5e-4,0", "--report", tmp_path / "a.json"])
    assert code == 0
    rep = load(tmp_path / "a.json")
    assert rep["results"]["velocity_cone"]["worst_ratio"] == pytest.approx(1.0)


def test_axisym_rejects_nonaxisymmetric(series_dir, tmp_path, capsys):
    assert run(["axisym", "--in", series_dir, "--c1", "11", "--c2", "11"]) == 3
    assert "angular deviation" in capsys.readouterr().err


def test_diagnose_deterministic(series_dir, tmp_path):
    args = ["diagnose", "--in", series_dir, "--lattice", "300", "--radii", "0.4", "--n-r", "16",
            "--n-theta", "32", "--levels", "1", "--quad", "4"]
    assert run(args + ["--report", tmp_path / "a.json"]) == 0
    assert run(args + ["--report", tmp_path / "b.json"]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    rep = load(tmp_path / "a.json")
    assert set(rep["results"]) == {"validate", "cone", "flux", "typeI"}


def test_stdout_report(series_dir, capsys):
    assert run(["validate", "--in", series_dir]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["tool"] == "nsgeom"


class TestExitCodes:
    def test_missing_input(self, tmp_path):
        assert run(["validate", "--in", tmp_path / "nope"]) == 3

    def test_truncated_snapshot(self, series_dir, tmp_path, capsys):
        src = sorted(series_dir.glob("*.vxs"))[0]
        bad = tmp_path / "bad.vxs"
        bad.write_bytes(src.read_bytes()[:-100])
        assert run(["validate", "--in", bad]) == 3
        assert "truncated" in capsys.readouterr().err

    def test_empty_directory(self, tmp_path):
        assert run(["validate", "--in", tmp_path]) == 3

    def test_repeated_times(self, tmp_path, capsys):
        v = F.sample(AnalyticField.abc(), F.GridSpec.cube(8))
        for i in range(2):
            snapio.write_snapshot(tmp_path / snapio.snapshot_name(i), v.with_time(0.1))
        assert run(["validate", "--in", tmp_path]) == 3
        assert "strictly increasing" in capsys.readouterr().err

    def test_bad_flag_value(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["simulate", "--dt", "-1"])
        assert err.value.code == 4

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["frobnicate"])
        assert err.value.code == 4

    def test_bad_constants(self):
        assert run(["axisym", "--c1", "5"]) == 4

    def test_cfl_violation(self, tmp_path):
        code = run(["simulate", "--init", "abc", "--n", "16", "--dt", "0.5", "--t-end", "0.5",
                    "--snap-every", "0.5", "--amplitude", "50", "--report", tmp_path / "x.json"])
        assert code == 4

    def test_audit_failure(self, tmp_path):
        # energy grows between these two snapshots, which no viscous flow can do
        g = F.GridSpec.cube(16)
        v = F.sample(AnalyticField.abc(), g)
        snapio.write_snapshot(tmp_path / snapio.snapshot_name(0), v.with_time(0.0))
        snapio.write_snapshot(tmp_path / snapio.snapshot_name(1),
                              F.VectorField(g, 2 * v.components, 0.1))
        assert run(["validate", "--in", tmp_path, "--report", tmp_path / "r.json"]) == 2
        assert not load(tmp_path / "r.json")["audit"]["passed"]


def test_csv_round_trip(tmp_path):
    rows = [[0.1, 1 / 3, math.pi], [1e-300, -2.5, 7.0]]
    cli.write_csv(tmp_path / "t.csv", ["a", "b", "c"], rows)
    cols, data = cli.read_csv(tmp_path / "t.csv")
    assert cols == ["a", "b", "c"]
    assert np.array_equal(data, np.array(rows))


def test_non_finite_values_are_strings():
    assert cli._clean({"x": float("nan"), "y": [np.float64("inf")], "z": np.int64(3)}) == \
        {"x": "nan", "y": ["inf"], "z": 3}
