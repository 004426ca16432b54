import csv
import json

import numpy as np
import pytest

from iforge import io
from iforge import polytope as pt
from iforge.cli import main, resolve_jobs
from iforge.exceptions import SpecError
from iforge.polytope import HPolytope


def scalar_spec(u, w, **extra):
    d = {"system": {"monolithic": {
        "A": [[1.0]], "B": [[1.0]], "X": {"box": [[-1, 1]]},
        "U": {"box": [[-u, u]]}, "W": {"box": [[-w, w]]}}}}
    d.update(extra)
    return d


def platoon_spec(**params):
    base = {"model": "decentral", "N": 6, "v_bar": 0.3}
    base.update(params)
    return {"system": {"platoon": base}, "synthesis": {"mode": "outer", "refine": True},
            "simulation": {"horizon": 60, "seed": 3}, "sweep": {"deltas": [], "modes": ["outer"]}}


@pytest.fixture
def write(tmp_path):
    def _write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)
    return _write


def rows(path):
    return list(csv.reader(open(path)))


def test_polytope_literal_roundtrip_is_bit_exact(rng, tmp_path):
    P = HPolytope(rng.normal(size=(7, 3)), rng.uniform(0.1, 1.0, 7))
    io.write_set_file(tmp_path / "p.json", P)
    Q = io.read_set_file(tmp_path / "p.json")
    assert np.array_equal(P.A, Q.A) and np.array_equal(P.b, Q.b)
    assert pt.equals(P, Q)
    E = io.polytope_from_dict(io.polytope_to_dict(HPolytope.empty(2)))
    assert pt.is_empty(E) and E.dim == 2


@pytest.mark.parametrize("bad", [
    {"system": {}},
    {"system": {"monolithic": {"A": [[1, 2], [3]], "B": [[1]], "X": {"box": [[0, 1]]},
                               "U": {"box": [[0, 1]]}, "W": {"box": [[0, 1]]}}}},
    {"system": {"network": {"subsystems": [scalar_spec(1, 0)["system"]["monolithic"]],
                            "couplings": [{"to": 0, "from": 3, "D": [[1]]}]}}},
    {"system": {"platoon": {"model": "decentral", "speed": 3}}},
    dict(scalar_spec(1, 0), extra=1),
    dict(scalar_spec(1, 0), synthesis={"mode": "sideways"}),
])
def test_spec_validation(bad):
    with pytest.raises(SpecError):
        io.parse_spec(bad)


def test_network_spec():
    sub = scalar_spec(0.3, 0.1)["system"]["monolithic"]
    spec = io.parse_spec({"system": {"network": {
        "subsystems": [sub, sub], "couplings": [{"to": 1, "from": 0, "D": [[0.1]]}]}}})
    assert spec.kind == "network" and spec.system.coupling(1, 0) == pytest.approx(np.array([[0.1]]))


def test_jobs_resolution(monkeypatch):
    monkeypatch.delenv("IFORGE_JOBS", raising=False)
    assert resolve_jobs(3) == 3
    assert resolve_jobs(None) >= 1
    monkeypatch.setenv("IFORGE_JOBS", "2")
    assert resolve_jobs(5) == 2


def test_synth_exit_codes(write, tmp_path):
    out = str(tmp_path / "o.json")
    assert main(["synth", write("s.json", scalar_spec(0.1, 0.2)), "--mode", "outer", "--out", out]) == 2
    assert json.load(open(out))["report"]["empty"] is True
    assert main(["synth", write("h.json", scalar_spec(0.2, 0.1)), "--out", out]) == 0
    assert pt.equals(io.read_set_file(out), HPolytope.box([-1], [1]))
    assert main(["synth", str(tmp_path / "missing.json"), "--out", out]) == 1


def test_compose_and_simulate(write, tmp_path, capsys):
    spec = write("p.json", platoon_spec(lam=0.06))
    ctrl = str(tmp_path / "c.json")
    assert main(["compose", spec, "--out", ctrl, "--jobs", "1", "--samples", "100"]) == 0
    report = json.load(open(ctrl))["report"]
    assert report["violations"] == 0
    traj = str(tmp_path / "t.csv")
    assert main(["simulate", spec, "--controller", ctrl, "--csv", traj]) == 0
    assert len(rows(traj)) == 1 + 61 * 6
    assert main(["simulate", spec, "--controller", ctrl, "--horizon", "0", "--csv", traj]) == 0
    assert len(rows(traj)) == 1 + 6
    assert main(["simulate", spec, "--controller", str(tmp_path / "nope.json"), "--csv", traj]) == 1
    assert "error" in capsys.readouterr().err


def test_compose_reports_infeasible_subsystem(write, tmp_path, capsys):
    spec = write("p.json", platoon_spec(lam=0.5, v_bar=5.0))
    assert main(["compose", spec, "--out", str(tmp_path / "c.json")]) == 2
    assert "subsystem 0" in capsys.readouterr().out


def test_compose_single_subsystem(write, tmp_path):
    sub = {"A": [[0.0]], "B": [[1.0]], "X": {"box": [[-1, 1]]}, "U": {"box": [[-1, 1]]},
           "W": {"box": [[-0.2, 0.2]]}}
    spec = write("n.json", {"system": {"network": {"subsystems": [sub]}}})
    assert main(["compose", spec, "--out", str(tmp_path / "c.json"), "--samples", "50"]) == 0


def test_sweep_empty_delta_list(write, tmp_path):
    out = str(tmp_path / "s.csv")
    assert main(["sweep", write("p.json", platoon_spec()), "--table1", "--csv", out]) == 0
    assert rows(out) == [["delta", "rho_density", "mode", "lambda_star", "eps_star"]]


def test_sweep_single_parameter(write, tmp_path):
    spec = platoon_spec(N=2, v_bar=5.0, delta=0.5)
    spec["sweep"] = {"parameter": "lambda", "grid_step": 0.01, "range": [0.0, 0.2],
                     "modes": ["outer"]}
    out = str(tmp_path / "s.csv")
    assert main(["sweep", write("p.json", spec), "--csv", out]) == 0
    assert rows(out)[1][2:4] == ["outer", "0.05"]


def test_project(write, tmp_path):
    out = str(tmp_path / "p.csv")
    box = write("b.json", {"kind": "set", "set": {"box": [[0, 1], [0, 2], [0, 3]]}})
    assert main(["project", box, "--dims", "1,2", "--csv", out]) == 0
    assert rows(out) == [["x", "y"], ["0.0", "0.0"], ["2.0", "0.0"], ["2.0", "3.0"],
                         ["0.0", "3.0"], ["0.0", "0.0"]]
    assert main(["project", box, "--dims", "1,3", "--csv", out]) == 1
    assert main(["project", box, "--dims", "x", "--csv", out]) == 1


def test_oracle(write, tmp_path):
    out = str(tmp_path / "g.csv")
    assert main(["oracle", write("h.json", scalar_spec(0.2, 0.1)), "--resolution", "0.1",
                 "--csv", out]) == 0
    got = [float(r[0]) for r in rows(out)[1:]]
    assert got == pytest.approx(np.linspace(-1, 1, 21))
    assert main(["oracle", write("s.json", scalar_spec(0.1, 0.2)), "--resolution", "0.1",
                 "--csv", out]) == 2
    assert rows(out) == [["x0"]]
    cube = {"system": {"monolithic": {
        "A": np.eye(3).tolist(), "B": np.eye(3).tolist(), "X": {"box": [[-1, 1]] * 3},
        "U": {"box": [[-1, 1]] * 3}, "W": {"box": [[0, 0]] * 3}}}}
    assert main(["oracle", write("c.json", cube), "--resolution", "0.1", "--csv", out]) == 1
