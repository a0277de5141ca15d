import json
import subprocess
import sys

import pytest

from surfchi.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, read_config


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    lines = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(lines[-1])


def load(path):
    return json.loads(path.read_text())


def test_generate_writes_obj_and_record(tmp_path, capsys):
    code, out = run(capsys, "generate", "--builtin", "sphere", "--radius", 1,
                    "--resolution", 16, "--out", tmp_path)
    assert code == EXIT_OK and out["euler_characteristic"] == 2
    rec = load(tmp_path / "sphere.json")
    assert rec["angle_defect_over_2pi"] == pytest.approx(2.0, abs=1e-9)
    assert (tmp_path / "sphere.obj").read_text().startswith("# surfchi fixture sphere")
    first = (tmp_path / "sphere.obj").read_bytes()
    run(capsys, "generate", "--builtin", "sphere", "--radius", 1, "--resolution", 16,
        "--out", tmp_path)
    assert (tmp_path / "sphere.obj").read_bytes() == first


def test_generated_mesh_feeds_back_in(tmp_path, capsys):
    run(capsys, "generate", "--builtin", "torus", "--R", 2, "--r", 1, "--resolution", "48,24",
        "--out", tmp_path)
    code, out = run(capsys, "check", "--mesh", tmp_path / "torus.obj", "--direction", "1,0.2,0.3",
                    "--out", tmp_path)
    assert code == EXIT_OK and out["passed"]
    assert load(tmp_path / "check.json")["chi_mesh_oracle"] == 0


def test_recover_sphere(tmp_path, capsys):
    code, out = run(capsys, "recover", "--builtin", "sphere", "--radius", 1, "--seed", 7,
                    "--out", tmp_path)
    assert code == EXIT_OK
    assert out["chi_recovered"] == 2 and out["match"] and out["certified"]
    for name in ("spectrum.csv", "spectrum.json", "profile.csv", "decomposition.json",
                 "genericity.json", "summary.json"):
        assert (tmp_path / name).exists(), name
    dec = load(tmp_path / "decomposition.json")
    assert dec["euler_characteristic"] == 2 and dec["schema_version"]


def test_recover_torus_radon_is_reproducible(tmp_path, capsys):
    args = ["recover", "--builtin", "torus", "--R", 2, "--r", 1, "--route", "radon", "--seed", 3]
    code, out = run(capsys, *args, "--out", tmp_path / "a")
    assert code == EXIT_OK and out["chi_recovered"] == 0
    assert (tmp_path / "a" / "radon.csv").exists()
    run(capsys, *args, "--out", tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_recover_along_torus_axis_fails(tmp_path, capsys):
    code, out = run(capsys, "recover", "--builtin", "torus", "--R", 2, "--r", 1,
                    "--direction", "0,0,1", "--out", tmp_path)
    assert code == EXIT_FAILED
    assert out["error"] and out["message"]


def test_invalid_parameters_are_usage_errors(tmp_path, capsys):
    code, out = run(capsys, "generate", "--builtin", "torus", "--R", 1, "--r", 2, "--out", tmp_path)
    assert code == EXIT_USAGE and "r" in out["message"]
    code, out = run(capsys, "generate", "--builtin", "sphere", "--implicit", "genus2",
                    "--out", tmp_path)
    assert code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["recover", "--builtin", "sphere", "--route", "sonar"])
    assert info.value.code == 2


def test_check_receivers(tmp_path, capsys):
    code, out = run(capsys, "check", "--builtin", "sphere", "--receiver", "0,0,0", "--out", tmp_path)
    assert code == EXIT_FAILED and not out["passed"]
    assert load(tmp_path / "check.json")["checks"][0]["focal"] is True
    code, out = run(capsys, "check", "--builtin", "sphere", "--receiver", "2,0,0", "--out", tmp_path)
    assert code == EXIT_OK and out["passed"]


def test_check_direction_reports_counts(tmp_path, capsys):
    code, _ = run(capsys, "check", "--builtin", "torus", "--R", 2, "--r", 1,
                  "--direction", "1,0,0", "--out", tmp_path)
    doc = load(tmp_path / "check.json")["checks"][0]
    assert code == EXIT_OK
    assert doc["counts"] == [1, 2, 1] and doc["morse_polynomial_at_minus_one"] == 0


def test_predict_sphere_is_exact(tmp_path, capsys):
    code, out = run(capsys, "predict", "--builtin", "sphere", "--radius", 1,
                    "--direction", "0,0,1", "--N", 2001, "--out", tmp_path)
    doc = load(tmp_path / "prediction.json")
    assert code == EXIT_OK and out["exact"]
    assert doc["skipped"] == [0] and len(doc["notes"]) == 2
    assert (tmp_path / "prediction.csv").read_text().count("\n") == 2001


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# torus run\nbuiltin = torus\nR = 2\nr = 1\ndirection = 1, 0, 0\n"
                   "out = " + str(tmp_path) + "\n")
    assert read_config(cfg)["direction"] == [1.0, 0.0, 0.0]
    code, _ = run(capsys, "check", "--config", cfg, "--direction", "0,0,1")
    assert code == EXIT_FAILED
    assert load(tmp_path / "check.json")["checks"][0]["direction"] == [0.0, 0.0, 1.0]
    bad = tmp_path / "bad.cfg"
    bad.write_text("builtin = torus\nspeed = 3\n")
    code, out = run(capsys, "check", "--config", bad)
    assert code == EXIT_USAGE and "speed" in out["message"]


def test_radon_and_wave_commands(tmp_path, capsys):
    code, out = run(capsys, "radon", "--builtin", "sphere", "--radius", 1, "--direction", "0,0,1",
                    "--dtau", 0.005, "--out", tmp_path)
    assert code == EXIT_OK and out["match"]
    assert out["peaks"] == pytest.approx([-1, 1], abs=0.005)
    code, out = run(capsys, "wave", "--builtin", "sphere", "--radius", 1, "--receiver", "2,0,0",
                    "--dt", 0.01, "--out", tmp_path)
    assert code == EXIT_OK and not out["focal"]
    assert out["support"][0] == pytest.approx(1.0, abs=0.01)
    assert out["support"][1] == pytest.approx(3.0, abs=0.01)
    assert {p.name for p in tmp_path.iterdir()} >= {"radon.csv", "radon_derivative.csv",
                                                    "radon_summary.json", "wave.csv",
                                                    "wave_operator.csv", "wave_summary.json"}


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "surfchi.cli", "check", "--builtin", "sphere",
                          "--direction", "0,0,1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["passed"] is True
