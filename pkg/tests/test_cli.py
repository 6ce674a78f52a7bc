import json

import pytest

from qrepeater.workbench import ResultTable, cli, tables_equal
from qrepeater.montecarlo import read_trial_dump


def test_rate_writes_table_and_manifest(tmp_path, capsys):
    assert cli.main(["rate", "--preset", "C", "--out", str(tmp_path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "rate_hz" in out and "scheme=2+2" in out
    table = ResultTable.read(tmp_path / "rate.csv")
    assert table.rows[0]["scheme"] == "2+2" and table.rows[0]["total_distance_m"] == 100e3
    manifest = json.loads((tmp_path / "rate.manifest.json").read_text())
    assert manifest["tool"] == "qrepeater" and manifest["outputs"] == ["rate.csv"]
    assert manifest["job"]["params"]["tau_m_s"] == 1e-3


def test_rate_flags_and_set(tmp_path):
    assert cli.main(["rate", "--preset", "B", "--distance-km", "50", "--set", "tau_m_ms=10",
                     "--no-postselect", "--format", "json", "--out", str(tmp_path)]) == 0
    row = ResultTable.read(tmp_path / "rate.json").rows[0]
    assert row["total_distance_m"] == 50e3 and row["tau_m_s"] == pytest.approx(0.01)
    assert row["postselected"] is False


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "env"))
    assert cli.main(["rate", "--preset", "D"]) == 0
    assert (tmp_path / "env" / "rate.csv").exists()


def test_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.OUT_DIR_ENV, raising=False)
    monkeypatch.chdir(tmp_path)
    assert cli.main(["rate", "--preset", "D"]) == 0
    assert (tmp_path / cli.DEFAULT_OUT_DIR / "rate.manifest.json").exists()


@pytest.mark.parametrize("argv", [
    ["rate", "--preset", "Z"],
    ["rate", "--preset", "C", "--set", "eta_m=2"],
    ["rate", "--preset", "C", "--set", "colour=1"],
    ["rate", "--preset", "C", "--postselect"],
    ["rate", "--bogus"],
    ["nosuchcommand"],
    ["validate", "nosuite"],
    ["rate", "--preset", "C", "--workers", "0"],
    ["compare-cutoff", "--p0", "2"],
])
def test_usage_and_config_errors_exit_1(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv[0] in ("rate", "compare-cutoff") else argv) == \
        cli.EXIT_USAGE
    assert capsys.readouterr().err


def test_config_error_names_field(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: C\neta_m: 1.5\n")
    assert cli.main(["rate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "eta_m" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: C\ntotal_distance_km: 40\nseed: 5\n")
    assert cli.main(["rate", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path)]) == 0
    job = json.loads((tmp_path / "rate.manifest.json").read_text())["job"]
    assert job["seed"] == 9 and job["params"]["total_distance_m"] == 40e3


def test_sweep_memory_outputs(tmp_path):
    assert cli.main(["sweep-memory", "--preset", "C", "--tau-points", "6", "--eta-points", "5",
                     "--out", str(tmp_path)]) == 0
    grid = ResultTable.read(tmp_path / "sweep-memory.csv")
    iso = ResultTable.read(tmp_path / "sweep-memory-iso.csv")
    assert len(grid) == 30 and len(iso) == 6
    assert set(iso.column("status")) <= {"ok", "below", "above"}


def test_sweep_memory_axes_from_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: C\nsweep:\n  target_rate_hz: 0.5\n  axes:\n"
                   "    - {param: tau_m_ms, min: 1, max: 1000, points: 4, spacing: log}\n"
                   "    - {param: eta_m, min: 0.5, max: 1.0, points: 3}\n")
    assert cli.main(["sweep-memory", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    grid = ResultTable.read(tmp_path / "sweep-memory.csv")
    assert len(grid) == 12 and grid.rows[-1]["tau_m_s"] == pytest.approx(1.0)
    assert ResultTable.read(tmp_path / "sweep-memory-iso.csv").rows[0]["target_rate_hz"] == 0.5


def test_sweep_distance_presets(tmp_path):
    assert cli.main(["sweep-distance", "--presets", "A,C", "--points", "5", "--out", str(tmp_path)]) == 0
    table = ResultTable.read(tmp_path / "sweep-distance.csv")
    assert table.column("series") == ["A"] * 5 + ["C"] * 5


def test_simulate_with_dump_and_rerun(tmp_path, capsys):
    first = tmp_path / "first"
    argv = ["simulate", "--preset", "C", "--distance-km", "20", "--no-postselect", "--trials", "300",
            "--seed", "4", "--dump", "attempts", "--out", str(first)]
    assert cli.main(argv) == 0
    meta, data = read_trial_dump(first / "simulate-attempts.tsv")
    assert meta["kind"] == "attempts" and data["trial"].max() == 299
    second = tmp_path / "second"
    assert cli.main(["rerun", str(first / "simulate.manifest.json"), "--out", str(second), "--workers", "2"]) == 0
    for name in ("simulate.csv", "simulate-attempts.tsv", "simulate.manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert "mean EDT" in capsys.readouterr().out


def test_simulate_postselected_rejects_attempt_dump(tmp_path):
    assert cli.main(["simulate", "--preset", "A", "--trials", "10", "--dump", "attempts",
                     "--out", str(tmp_path)]) == 1


def test_rate_both_engines(tmp_path):
    assert cli.main(["rate", "--preset", "C", "--distance-km", "20", "--engine", "both", "--trials", "500",
                     "--out", str(tmp_path)]) == 0
    assert ResultTable.read(tmp_path / "rate.csv").column("engine") == ["analytic", "mc"]


def test_compare_cutoff(tmp_path):
    assert cli.main(["compare-cutoff", "--p0", "0.1", "--ratios", "10", "--trials", "500",
                     "--out", str(tmp_path)]) == 0
    row = ResultTable.read(tmp_path / "compare-cutoff.csv").rows[0]
    assert row["p0"] == 0.1 and row["tau_over_t0"] == 10.0 and 0 < row["ps_cut_mc"] <= 1


def test_validate_exit_codes(tmp_path, capsys, monkeypatch):
    from qrepeater.workbench import suites

    assert cli.main(["validate", "tdif", "--trials", "5000", "--out", str(tmp_path)]) in (0, 2)
    report = json.loads((tmp_path / "validate-tdif-report.json").read_text())
    assert report["suite"] == "tdif" and "checks" in report
    # a suite with a failing blocking check must exit 2
    monkeypatch.setattr(suites, "TV_MAX", 0.0)
    assert cli.main(["validate", "tdif", "--trials", "5000", "--out", str(tmp_path / "strict")]) == cli.EXIT_VALIDATION
    assert "FAIL" in capsys.readouterr().out


def test_rerun_missing_manifest(tmp_path):
    assert cli.main(["rerun", str(tmp_path / "none.json")]) == 1


def test_rerun_round_trip_formats(tmp_path):
    assert cli.main(["sweep-distance", "--presets", "F", "--points", "4", "--format", "json",
                     "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["rerun", str(tmp_path / "a" / "sweep-distance.manifest.json"),
                     "--out", str(tmp_path / "b")]) == 0
    a = ResultTable.read(tmp_path / "a" / "sweep-distance.json")
    b = ResultTable.read(tmp_path / "b" / "sweep-distance.json")
    assert tables_equal(a, b)
