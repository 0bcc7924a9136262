import json
import math

import pytest

from greensign.cli import main


def write_problem(tmp_path, name="problem.json", **overrides):
    data = {
        "order": 4,
        "interval": [0, 1],
        "coefficients": ["0", "0", "0", "0"],
        "m_bar": 0,
        "sigma": [0, 2],
        "epsilon": [1, 2],
        "search": {"lambda_max": 5000.0},
        "grid": {"n_t": 101, "n_s": 101},
    }
    data.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_check_running_example(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(capsys, ["check", path])
    assert code == 0
    assert report["na"] is True
    assert report["indices"]["tau"] == [0, 2]
    assert report["indices"]["delta"] == [0, 3]
    assert report["input"]["search"]["lambda_max"] == 5000.0


def test_check_neumann_fails(tmp_path, capsys):
    path = write_problem(
        tmp_path, order=2, coefficients=["0", "0"], sigma=[1], epsilon=[1]
    )
    code, report = run(capsys, ["check", path])
    assert code == 2
    assert report["na"] is False


def test_malformed_sigma_exits_3(tmp_path, capsys):
    path = write_problem(tmp_path, sigma=[0, 0])
    code, report = run(capsys, ["check", path])
    assert code == 3
    assert report["error"]["type"] == "input"


def test_unknown_key_exits_3(tmp_path, capsys):
    path = write_problem(tmp_path, extra_knob=1)
    code, report = run(capsys, ["check", path])
    assert code == 3


def test_bad_coefficient_exits_3(tmp_path, capsys):
    path = write_problem(tmp_path, coefficients=["0", "0", "0", "2x"])
    code, report = run(capsys, ["check", path])
    assert code == 3


def test_eigen_base_least_positive(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(capsys, ["eigen", path, "--direction", "least-positive"])
    assert code == 0
    lam = report["eigenvalue"]["lambda"]
    assert lam == pytest.approx(2.36502**4, rel=1e-4)


def test_eigen_modified_space(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(
        capsys,
        ["eigen", path, "--space", "drop-sigma-add-beta", "--direction", "biggest-negative"],
    )
    assert code == 0
    lam = report["eigenvalue"]["lambda"]
    assert abs(lam) ** 0.25 == pytest.approx(5.5530542, rel=1e-4)
    assert report["eigenvalue"]["space"] == {"sigma": [0], "epsilon": [0, 1, 2]}


def test_eigen_undefined_space_exits_3(tmp_path, capsys):
    path = write_problem(tmp_path, sigma=[0, 1], epsilon=[0, 2])
    code, report = run(
        capsys,
        ["eigen", path, "--space", "drop-sigma-add-alpha", "--direction", "least-positive"],
    )
    assert code == 3
    assert report["error"]["type"] == "input"


def test_eigen_not_found_exits_4(tmp_path, capsys):
    path = write_problem(
        tmp_path, order=2, coefficients=["0", "0"], sigma=[0], epsilon=[0], search={}
    )
    code, report = run(capsys, ["eigen", path, "--direction", "least-positive"])
    assert code == 4
    assert report["error"]["type"] == "not-found"
    assert report["error"]["searched"][0] == 0.0
    assert report["error"]["searched"][1] == pytest.approx((12 * math.pi) ** 2)


def test_interval_report_and_determinism(tmp_path, capsys):
    path = write_problem(tmp_path, grid={"n_t": 41, "n_s": 41})
    code = main(["interval", path])
    first = capsys.readouterr().out
    assert code == 0
    code = main(["interval", path])
    second = capsys.readouterr().out
    assert code == 0
    assert first == second  # byte-identical reports
    report = json.loads(first)
    interval = report["interval"]
    assert interval["classification"] == "strongly-inverse-positive"
    assert interval["lower"]["value"] == pytest.approx(-(2.36502**4), rel=1e-4)
    assert interval["upper"]["value"] == pytest.approx(4 * math.pi**4, rel=1e-8)
    assert interval["lower"]["closed"] is False
    assert interval["upper"]["closed"] is True
    assert report["sign_check"]["classification"] == "strongly-inverse-positive"
    assert report["sign_check"]["matches"] is True


def test_interval_infinite_side(tmp_path, capsys):
    path = write_problem(
        tmp_path, order=2, coefficients=["0", "0"], sigma=[0], epsilon=[0],
        search={}, grid={"n_t": 41, "n_s": 41},
    )
    code, report = run(capsys, ["interval", path])
    assert code == 0
    interval = report["interval"]
    assert interval["classification"] == "strongly-inverse-negative"
    assert interval["lower"] == {"infinite": True, "closed": False}
    assert interval["upper"]["value"] == pytest.approx(math.pi**2, rel=1e-8)
    assert interval["upper"]["closed"] is False


def test_interval_na_failure_exits_2(tmp_path, capsys):
    path = write_problem(
        tmp_path, order=2, coefficients=["0", "0"], sigma=[1], epsilon=[1], search={}
    )
    code, report = run(capsys, ["interval", path])
    assert code == 2
    assert report["error"]["type"] == "property"


def test_necessary_report(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(capsys, ["necessary", path])
    assert code == 0
    nec = report["necessary"]
    assert nec["classification"] == "strongly-inverse-negative"
    assert nec["lower"]["value"] == pytest.approx(-math.pi**4, rel=1e-8)
    assert nec["upper"]["value"] == pytest.approx(-(2.36502**4), rel=1e-4)
    assert nec["sufficient"] is False


def test_necessary_none_for_initial_segments(tmp_path, capsys):
    path = write_problem(tmp_path, sigma=[0, 1], epsilon=[0, 1])
    code, report = run(capsys, ["necessary", path])
    assert code == 0
    assert report["necessary"] is None
    assert report["nonexistence"]["no_inverse_negative"] is True


def test_nonhomog_command(tmp_path, capsys):
    path = write_problem(tmp_path, sigma=[0, 2], epsilon=[1, 3])
    code, report = run(
        capsys,
        ["nonhomog", path, "--subsets", '{"sigma": [0, 2], "epsilon": [1, 3]}'],
    )
    assert code == 0
    interval = report["interval"]
    assert interval["lower"]["value"] == pytest.approx(-math.pi**4 / 16, rel=1e-8)
    assert interval["upper"]["value"] == pytest.approx(math.pi**4 / 4, rel=1e-8)


def test_nonhomog_bad_subsets_exit_3(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(capsys, ["nonhomog", path, "--subsets", '{"sigma": [0], "epsilon": [2]}'])
    assert code == 3
    code, report = run(capsys, ["nonhomog", path, "--subsets", "not json"])
    assert code == 3


def test_green_csv_and_sidecar(tmp_path, capsys):
    path = write_problem(tmp_path)
    out = str(tmp_path / "g.csv")
    code, report = run(capsys, ["green", path, "--M", "0", "--out", out])
    assert code == 0
    assert report["classification"] == "strongly-inverse-positive"
    lines = open(out).read().splitlines()
    assert lines[0] == "t,s,g"
    assert len(lines) == 1 + 101 * 101
    row = next(line for line in lines if line.startswith("1,0.5,"))
    assert float(row.split(",")[2]) == pytest.approx(0.0625, abs=1e-6)
    sidecar = json.loads(open(out + ".json").read())
    assert sidecar["classification"] == "strongly-inverse-positive"
    assert len(sidecar["d_alpha_at_a"]) == 101
    assert sidecar["d_alpha_at_a"][50] == pytest.approx(0.125, abs=1e-6)
    assert sidecar["jump_residual"] <= 1e-8
    assert "k1" in sidecar and "k2" in sidecar


def test_green_at_eigen_shift_exits_4(tmp_path, capsys):
    path = write_problem(tmp_path, grid={"n_t": 41, "n_s": 41})
    code, report = run(capsys, ["green", path, "--M", repr(-(2.3650203724**4)),
                                "--out", str(tmp_path / "x.csv")])
    assert code == 4
    assert report["error"]["type"] == "numerical"


def test_decompose_report(tmp_path, capsys):
    path = write_problem(tmp_path)
    code, report = run(capsys, ["decompose", path])
    assert code == 0
    assert report["full"] is True
    assert report["window"] == [0, 1]
    assert all(v > 0 for row in report["v_samples"]["v"] for v in row)


def test_decompose_shrunk_window_exits_2(tmp_path, capsys):
    path = write_problem(
        tmp_path, order=2, coefficients=["0", "0"], sigma=[0], epsilon=[0],
        m_bar=(4 * math.pi) ** 2, search={},
    )
    code, report = run(capsys, ["decompose", path])
    assert code == 2
    assert report["full"] is False
    assert report["first_failure"]["k"] == 1
