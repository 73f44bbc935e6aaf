import json

from conforay.cli import main


def run(argv):
    return main(argv)


def test_synthesize_validate_reconstruct_cycle(tmp_path, capsys):
    ds_path = str(tmp_path / "flat.json")
    rc = run(["synthesize", "--phantom", "flat-constant", "--constant", "2.25",
              "--tau-mode", "analytic", "--dt", "0.02", "--t-max", "0.2",
              "--bnum", "24", "--out", ds_path])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out

    assert run(["validate", "--in", ds_path]) == 0
    assert "ok:" in capsys.readouterr().out

    report = str(tmp_path / "report.json")
    rc = run(["reconstruct", "--in", ds_path, "--mode", "reduced",
              "--out-report", report])
    assert rc == 0
    doc = json.loads(open(report).read())
    assert doc["passed"] is True
    assert doc["metrics"]["gtilde_max_rel"] < 1e-9
    assert doc["settings"]["config"]["mode"] == "reduced"


def test_roundtrip_subcommand_writes_report(tmp_path):
    report = str(tmp_path / "rt.json")
    rc = run(["roundtrip", "--phantom", "flat-constant", "--constant", "2.25",
              "--tau-mode", "analytic", "--dt", "0.02", "--t-max", "0.2",
              "--bnum", "24", "--out-report", report])
    assert rc == 0
    doc = json.loads(open(report).read())
    assert doc["failed_stage"] is None
    assert doc["metrics"]["rho_gamma_max_rel"] < 1e-9


def test_missing_file_is_io_error(tmp_path):
    assert run(["validate", "--in", str(tmp_path / "nope.json")]) == 2


def test_schema_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"format\": \"TTD\", \"version\": 1}")
    assert run(["validate", "--in", str(bad)]) == 2


def test_pipeline_failure_exit_code(tmp_path):
    # fmm synthesis without a lattice spacing fails in-stage
    rc = run(["roundtrip", "--phantom", "gaussian-bump", "--tau-mode", "fmm",
              "--dt", "0.02", "--t-max", "0.1", "--bnum", "12"])
    assert rc == 1


def test_dump_writes_csv(tmp_path):
    ds_path = str(tmp_path / "flat.json")
    run(["synthesize", "--phantom", "flat-constant", "--tau-mode", "analytic",
         "--dt", "0.02", "--t-max", "0.2", "--bnum", "24", "--out", ds_path])
    csv_path = tmp_path / "gt.csv"
    rc = run(["reconstruct", "--in", ds_path, "--dump", "gtilde",
              str(csv_path)])
    assert rc == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("iy1")
    assert len(lines) > 24
