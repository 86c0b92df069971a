import csv
import io
import json

import numpy as np
import pytest

from coriolis_kit import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))


@pytest.mark.parametrize("cmd", sorted(cli.EXAMPLES))
def test_help_shows_example(capsys, cmd):
    with pytest.raises(SystemExit) as exc:
        cli.main([cmd, "--help"])
    assert exc.value.code == 0
    assert f"example: {cli.EXAMPLES[cmd]}" in capsys.readouterr().out


def test_coriolis_point_mass_zero(capsys):
    code, out, _ = run(capsys, "coriolis", "--model", "point_mass", "--state", "zero")
    table = rows(out)
    assert code == 0 and table[0] == ["matrix", "row_i", "col_j", "value[SI]"]
    C = [float(r[3]) for r in table[1:] if r[0] == "C"]
    assert len(C) == 9 and not any(C)


def test_state_file_and_out(capsys, tmp_path):
    state = tmp_path / "s.json"
    state.write_text(json.dumps({"q": [0.1, 0.2], "v": [1.0, -1.0]}))
    out = tmp_path / "c.csv"
    assert run(capsys, "coriolis", "--model", "planar_2r", "--state", str(state), "--out", str(out))[0] == 0
    from coriolis_kit import load_model
    from coriolis_kit.dynamics import coriolis_star

    C = coriolis_star(load_model("planar_2r"), np.array([0.1, 0.2]), np.array([1.0, -1.0])).C
    got = {(int(r[1]), int(r[2])): float(r[3]) for r in rows(out.read_text())[1:] if r[0] == "C"}
    assert np.isclose(got[(1, 2)], C[0, 1])


def test_christoffel_methods_agree(capsys):
    _, fast, _ = run(capsys, "christoffel", "--model", "belt_pair", "--random", "--seed", "2")
    _, sweep, _ = run(capsys, "christoffel", "--model", "belt_pair", "--random", "--seed", "2", "--method", "sweep")
    a = np.array([float(r[3]) for r in rows(fast)[1:]])
    b = np.array([float(r[3]) for r in rows(sweep)[1:]])
    assert a.size == 64 and np.abs(a - b).max() < 1e-11


def test_regressors(capsys):
    code, out, _ = run(capsys, "regressors", "--model", "pendulum", "--random")
    names = {r[0] for r in rows(out)[1:]}
    assert code == 0 and names == {"Y", "Y_p", "Y_g", "Y_c", "Y_T", "Y_Vdot"}


def test_simulate_then_identify(capsys, tmp_path):
    traj = tmp_path / "traj.csv"
    code, _, _ = run(capsys, "simulate", "--model", "pendulum", "--controller", "passivity", "--tfinal", "0.5",
                     "--dt", "1e-3", "--out", str(traj))
    assert code == 0
    res = tmp_path / "res.csv"
    code, _, err = run(capsys, "identify", "--model", "pendulum", "--trajectory", str(traj), "--out", str(res))
    assert code == 0 and "max|e_momentum|" in err
    table = np.array([[float(x) for x in r] for r in rows(res.read_text())[1:]])
    assert np.abs(table[:, 1:]).max() < 1e-3


def test_simulate_point_mass_experiment(capsys, tmp_path):
    out = tmp_path / "run.csv"
    code, _, _ = run(capsys, "simulate", "--model", "point_mass", "--factorization", "beta=-5", "--tfinal", "2", "--out", str(out))
    assert code == 0
    assert '"closed_form": true' in out.read_text().splitlines()[0]


def test_bench(capsys, monkeypatch):
    monkeypatch.setenv("CORIOLIS_KIT_THREADS", "1")
    code, out, err = run(capsys, "bench", "--family", "chain", "--sizes", "2,4,8", "--repeats", "1")
    table = rows(out)
    assert code == 0 and len(table) == 4 and "r2=" in err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", "--model", "geared_pair", "--samples", "2")
    assert code == 0 and all(r[3] == "ok" for r in rows(out)[1:])


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "coriolis", "--model", "no_such_model")[0] == 2
    assert run(capsys, "bench", "--sizes", "a,b")[0] == 2
    assert run(capsys, "simulate", "--model", "point_mass", "--factorization", "torsion")[0] == 2
    assert run(capsys, "coriolis", "--model", "pendulum", "--state", str(tmp_path / "none.json"))[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["coriolis"])
    assert exc.value.code == 2


def test_invalid_model_exits_one(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bodies": [{"parent": 2, "joint": {"kind": "revolute", "axis": [0, 0, 1]},
                                            "inertia": {"theta": [1, 0, 0, 0, 1, 1, 1, 0, 0, 0]}}]}))
    code, _, err = run(capsys, "coriolis", "--model", str(bad))
    assert code == 1 and "parent" in err
    state = tmp_path / "s.json"
    state.write_text(json.dumps({"q": [0.0, 0.0]}))
    assert run(capsys, "coriolis", "--model", "pendulum", "--state", str(state))[0] == 1


def test_loglog_fit():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    slope, _, r2 = cli.loglog_fit(x, 3 * x**1.5)
    assert np.isclose(slope, 1.5) and np.isclose(r2, 1.0)
