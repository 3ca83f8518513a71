import json

import pytest

from heat_enclosure import build_parser, run


def _run(*argv):
    return run([str(a) for a in argv])


def test_fixtures_command(tmp_path, capsys):
    assert _run("fixtures", "--out", tmp_path) == 0
    assert (tmp_path / "concentric.yaml").exists()
    assert (tmp_path / "laplace_specs.yaml").exists()
    assert "[OK] wrote" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    [],
    ["transmogrify"],
    ["audit", "--scene", "x.yaml"],
    ["extract", "--count", "many"],
])
def test_usage_errors_exit_1(argv):
    assert _run(*argv) == 1


def test_parser_knows_every_command():
    parser = build_parser()
    argvs = {
        "scene-validate": ["--scene", "s.yaml"],
        "sweep": ["--scene", "s.yaml"],
        "extract": ["--scene", "s.yaml", "--region", "log"],
        "audit": ["--which", "laplace"],
        "reconstruct": ["--scene", "s.yaml", "--oracle"],
        "fixtures": [],
    }
    for command, rest in argvs.items():
        assert parser.parse_args([command] + rest).command == command


def test_scene_validate_ok(fixtures_dir, tmp_path, capsys):
    code = _run("scene-validate", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 1,
                "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "validate.json").read_text())
    assert report["scene"] == "concentric"
    assert report["probes"][0]["path"]["l_min"] == pytest.approx(4.0, rel=1e-9)
    assert (tmp_path / "minimizers_p0.csv").exists()
    assert "[OK] assumptions hold" in capsys.readouterr().out


@pytest.mark.parametrize("name, probe", [("overlapping", "4,0,0"), ("blocking", "3,0,0")])
def test_scene_validate_reports_assumption_violations(fixtures_dir, tmp_path, name, probe):
    code = _run("scene-validate", "--scene", fixtures_dir / f"{name}.yaml", "--refinement", 1,
                "--probe", probe, "--out", tmp_path)
    assert code == 3


def test_missing_scene_file_is_usage_error(tmp_path):
    assert _run("scene-validate", "--scene", tmp_path / "absent.yaml", "--out", tmp_path) == 1


def test_probe_inside_outer_surface(fixtures_dir, tmp_path):
    code = _run("scene-validate", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 1,
                "--probe", "1,0,0", "--out", tmp_path)
    assert code == 3


def test_extract_writes_records(fixtures_dir, tmp_path):
    code = _run("extract", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 2,
                "--mu-min", 6, "--mu-max", 12, "--count", 4, "--out", tmp_path)
    assert code == 0
    record = json.loads((tmp_path / "extraction_p0.json").read_text())
    assert record["l_hat"] > 0
    assert record["oracle_value"] == pytest.approx(4.0, rel=1e-9)
    header = (tmp_path / "indicator_p0.csv").read_text().splitlines()[0]
    assert header == "mu,im_lambda,re_I0,im_I0,log_abs_I0,route_residual"
    assert json.loads((tmp_path / "extraction.json").read_text())["scene"] == "concentric"


def test_sweep_in_diverging_sector_is_numerical_failure(fixtures_dir, tmp_path):
    code = _run("sweep", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 1,
                "--region", "sector", "--delta0", 0.5, "--mu-min", 6, "--mu-max", 12, "--count", 3,
                "--out", tmp_path)
    assert code == 2
    data = json.loads((tmp_path / "sweep.json").read_text())
    assert "error" in data["probes"][0]


def test_reconstruct_with_oracle_lengths(fixtures_dir, tmp_path):
    code = _run("reconstruct", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 1,
                "--oracle", "--resolution", 0.2, "--out", tmp_path)
    assert code == 0
    soundness = json.loads((tmp_path / "soundness.json").read_text())
    assert soundness["sound"] is True
    assert soundness["volumes"][-1] < soundness["volumes"][0]
    assert len(soundness["probes"]) == 26
    assert (tmp_path / "enclosure.vtk").read_text().startswith("# vtk DataFile Version 3.0")
    assert (tmp_path / "voxels.csv").exists()


def test_reconstruct_from_missing_directory(fixtures_dir, tmp_path):
    code = _run("reconstruct", "--scene", fixtures_dir / "concentric.yaml", "--from", tmp_path / "nope",
                "--out", tmp_path)
    assert code == 1


def test_kernel_audit_command(fixtures_dir, tmp_path):
    code = _run("audit", "--which", "kernels", "--scene", fixtures_dir / "w_audit.yaml", "--refinement", 1,
                "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "kernel_decay.csv").read_text().splitlines()
    assert rows[0] == "name,mu,max_envelope,fitted_rate"
    summary = json.loads((tmp_path / "kernel_audit.json").read_text())
    assert summary["W"]["passed"] is True


def test_settings_file_errors_are_usage_errors(fixtures_dir, tmp_path):
    bad = tmp_path / "settings.yaml"
    bad.write_text("tolerances: {bogus: 1}\n")
    code = _run("--settings", bad, "scene-validate", "--scene", fixtures_dir / "concentric.yaml",
                "--out", tmp_path)
    assert code == 1


def test_run_is_logged(fixtures_dir, tmp_path, isolated_home):
    _run("scene-validate", "--scene", fixtures_dir / "concentric.yaml", "--refinement", 1, "--out", tmp_path)
    log = (isolated_home / ".heat-enclosure" / "runs.log").read_text()
    assert "=== Run Begin (scene-validate) ===" in log
    assert "(ok) ===" in log


@pytest.mark.slow
def test_laplace_audit_command(tmp_path):
    assert _run("audit", "--which", "laplace", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "laplace_audit.json").read_text())["passed"] is True
