import json
import math

import pytest

from hermcount.cli import (ConfigError, config_to_argv, parse_element, parse_form, parse_grid, parse_ideal,
                           run_command)
from hermcount.forms import HermitianForm, UniMat
from hermcount.ring import Field, QuadIdeal

QI = Field(-4)


def run_json(argv, capsys):
    code = run_command(argv)
    out = capsys.readouterr().out
    assert code == 0
    return json.loads(out)


def test_parse_element():
    assert parse_element("2+i", QI) == QI(2) + QI.i()
    assert parse_element("1+w", QI) == QI(1, 1)
    assert parse_element("-3*w", QI) == QI(0, -3)
    assert parse_element("i", QI) == QI.i()
    with pytest.raises(ConfigError):
        parse_element("i", Field(-3))
    with pytest.raises(ConfigError):
        parse_element("2x", QI)


def test_parse_form_and_grid():
    assert parse_form("1,0,0,-2", QI) == HermitianForm.f_delta(QI, 2)
    assert parse_form("2,1+i,-2", QI) == HermitianForm(2, QI(1) + QI.i(), -2)
    with pytest.raises(ConfigError):
        parse_form("1,2", QI)
    assert parse_grid("5,10,20") == [5, 10, 20]
    for bad in ("10,5", "0,5", "a"):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    assert parse_ideal("1+i", QI) == QuadIdeal.from_generators([QI(1, 1)])
    with pytest.raises(ConfigError):
        parse_ideal("0", QI)


def test_predict(capsys):
    out = run_json(["predict", "--DK", "-4", "--form", "1,0,0,-2"], capsys)
    assert out["constant"] == pytest.approx(0.81881, abs=1e-5)
    assert out["iota_f"] == 1
    assert out["covolume_full"] == pytest.approx(2 * math.pi)
    assert out["gaussian_closed_form"] == pytest.approx(out["constant"], rel=1e-12)


def test_predict_congruence(capsys, tmp_path):
    out = run_json(["predict", "--form", "1,0,0,-2", "--kind", "hecke", "--ideal", "1+i",
                    "--cache-dir", str(tmp_path)], capsys)
    assert out["prediction"]["inputs"]["group"]["index_in_bianchi"] == 3
    assert out["prediction"]["inputs"]["group"]["stabilizer_index"] == 4
    assert out["constant"] == pytest.approx(0.81881 / 3, abs=1e-5)
    assert any(tmp_path.iterdir())


def test_index(capsys):
    out = run_json(["index", "--DK", "-4", "--ideal", "1+i", "--kind", "level"], capsys)
    assert (out["oracle"], out["classical"], out["swapped"], out["warning"]) == (6, 6, 12, True)
    out = run_json(["index", "--ideal", "1+i", "--kind", "hecke"], capsys)
    assert (out["oracle"], out["classical"], out["swapped"]) == (3, 3, "3/2")


def test_zeta(capsys):
    out = run_json(["zeta", "--DK", "-4", "--tol", "1e-10"], capsys)
    assert out["zeta_K2"] == pytest.approx(1.5067030, abs=1e-6)
    assert out["error_bound"] <= 1e-10


def test_automorphs_and_domain(capsys):
    out = run_json(["automorphs", "--form", "1,0,0,-2", "--height", "20"], capsys)
    assert out["all_verified"]
    target = UniMat.from_ints(QI, [[3, 4], [2, 3]]).to_json()
    assert any(g["matrix"] == target for g in out["generators"])
    out = run_json(["domain", "--form", "1,0,0,-2"], capsys)
    assert out["area"] == pytest.approx(2 * math.pi, rel=0.02)
    assert out["polygon"]


@pytest.mark.parametrize("argv,code", [
    (["predict", "--form", "1,0,0,1"], 2),
    (["predict", "--DK", "-5", "--form", "1,0,0,-2"], 2),
    (["count", "--form", "1,0,0,-2", "--s-grid", "10,5"], 2),
    (["count", "--form", "1,0,0,-2", "--s-grid", "10", "--height", "5"], 2),
    (["predict", "--form", "1,0,0,-2", "--kind", "hecke"], 2),
    (["index", "--ideal", "7", "--oracle-bound", "10"], 3),
    (["bogus"], 2),
    (["domain", "--form", "0,1,0,0"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert run_command(argv) == code


def test_geometry_exit_code(capsys, monkeypatch):
    from hermcount import cli
    from hermcount.hyperbolic import GeometryError

    def boom(*a, **k):
        raise GeometryError("polygon does not close")

    monkeypatch.setattr(cli, "load_or_search", boom)
    assert run_command(["domain", "--form", "1,0,0,-2"]) == 4


def test_compare_outputs_and_roundtrip(tmp_path, capsys):
    argv = ["compare", "--form", "1,0,0,-2", "--s-grid", "4,8,16"]
    assert run_command(argv + ["--out", str(tmp_path / "a.json")]) == 0
    assert run_command(argv + ["--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    report = json.loads((tmp_path / "a.json").read_text())
    assert report["config"]["request"]["height_bound"] == 64
    rerun = config_to_argv(report["config"]) + ["--out", str(tmp_path / "c.json")]
    assert run_command(rerun) == 0
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "a.json").read_bytes()


def test_predict_and_compare_agree(tmp_path, capsys):
    pred = run_json(["predict", "--form", "1,0,0,-5"], capsys)
    assert run_command(["compare", "--form", "1,0,0,-5", "--s-grid", "3,6,9",
                        "--out", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["prediction"]["value"] == pred["constant"]
    assert report["diagnostics"]["summary"]["predicted"] == pred["constant"]
