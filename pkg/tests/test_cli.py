import csv
import json
import os

import pytest

from ampc_lab import cli, simlab

SCEN = os.path.join(os.path.dirname(__file__), "..", "scenarios")
FLAT = os.path.join(SCEN, "flat_6p5kg.json")


def test_run_writes_telemetry_and_plots(tmp_path, capsys):
    code = cli.main(["run", "--scenario", FLAT, "--out", str(tmp_path), "--set", "duration=1.0"])
    assert code == 0
    for name in ["telemetry.csv", "effective_config.json", *simlab.TELEMETRY_PLOTS]:
        assert (tmp_path / name).exists()
    line = capsys.readouterr().out.strip().splitlines()[-1]
    for key in ("success=", "mean_speed=", "mean_height=", "final_mass_error="):
        assert key in line


def test_effective_config_reloads(tmp_path, capsys):
    cli.main(["run", "--scenario", FLAT, "--out", str(tmp_path), "--set", "duration=0.2",
              "--echo-config"])
    echoed = capsys.readouterr().out
    data = json.loads(echoed[:echoed.rindex("}") + 1])
    saved = json.loads((tmp_path / "effective_config.json").read_text())
    assert data == saved
    assert simlab.Scenario.from_dict(saved) == simlab.load_scenario(str(tmp_path / "effective_config.json"))


def test_unknown_override_key(capsys):
    assert cli.main(["run", "--set", "mpc.horizon=3"]) == 2
    err = capsys.readouterr().err
    assert "mpc.horizon" in err and "valid keys" in err and "mpc.N" in err


def test_missing_scenario_file(tmp_path, capsys):
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.json")]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_flag_is_config_error():
    assert cli.main(["run", "--no-such-flag"]) == 2


def test_strict_failure_exit(tmp_path):
    args = ["run", "--scenario", os.path.join(SCEN, "flat_10kg.json"), "--mode", "baseline",
            "--out", str(tmp_path), "--strict"]
    assert cli.main(args) == 3


def test_mode_both_uses_subdirectories(tmp_path):
    assert cli.main(["run", "--scenario", FLAT, "--mode", "both", "--out", str(tmp_path),
                     "--set", "duration=0.2"]) == 0
    assert (tmp_path / "ampc" / "telemetry.csv").exists()
    assert (tmp_path / "baseline" / "telemetry.csv").exists()


@pytest.mark.parametrize("sub", ["run", "batch", "sweep-payload", "bench-qp", "plot"])
def test_help_lists_flags(sub, capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([sub, "--help"])
    out = capsys.readouterr().out
    parser = cli.build_parser()
    subparser = parser._subparsers._group_actions[0].choices[sub]
    for action in subparser._actions:
        for opt in action.option_strings:
            assert opt in out


def test_spec_flags_exist():
    parser = cli.build_parser()
    sub = parser._subparsers._group_actions[0].choices
    batch = {o for a in sub["batch"]._actions for o in a.option_strings}
    assert {"--scenario", "--out", "--seeds", "--parallel", "--set", "--mode", "--strict"} <= batch


def test_batch_twice_is_identical(tmp_path):
    args = ["batch", "--scenario", os.path.join(SCEN, "rough_6p5kg.json"), "--seeds", "3",
            "--terrain", "rough", "--set", "duration=1.0"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("aggregate.csv", "results.csv", "success.svg", "effective_config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_batch_seed_list(tmp_path):
    assert cli.main(["batch", "--seeds", "4,2", "--set", "duration=0.2", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "results.csv") as fh:
        assert [int(r["seed"]) for r in csv.DictReader(fh)] == [2, 4]
    assert cli.main(["batch", "--seeds", "0", "--out", str(tmp_path)]) == 2


def test_sweep_payload_writes_capacity(tmp_path):
    args = ["sweep-payload", "--scenario", FLAT, "--from", "0", "--to", "1", "--step", "1",
            "--mode", "both", "--set", "duration=0.5", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    with open(tmp_path / "capacity.csv") as fh:
        rows = {r["mode"]: r["max_sustained_payload"] for r in csv.DictReader(fh)}
    assert set(rows) == {"ampc", "baseline"}
    assert (tmp_path / "sweep.csv").exists()
    assert cli.main(["sweep-payload", "--step", "0", "--out", str(tmp_path)]) == 2


def test_bench_qp_writes_percentiles(tmp_path, capsys):
    assert cli.main(["bench-qp", "--repeats", "5", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "bench_qp.csv") as fh:
        row = next(csv.DictReader(fh))
    assert float(row["p50_ms"]) > 0 and float(row["optimal_fraction"]) == 1.0
    assert "p50=" in capsys.readouterr().out


def test_plot_regenerates_svgs(tmp_path):
    cli.main(["run", "--scenario", FLAT, "--set", "duration=0.3", "--out", str(tmp_path / "run")])
    cli.main(["batch", "--seeds", "2", "--set", "duration=0.3", "--out", str(tmp_path / "batch")])
    code = cli.main(["plot", "--telemetry", str(tmp_path / "run" / "telemetry.csv"),
                     "--aggregate", f"ampc={tmp_path / 'batch' / 'aggregate.csv'}",
                     "--out", str(tmp_path / "plots")])
    assert code == 0
    for name in simlab.TELEMETRY_PLOTS:
        assert (tmp_path / "plots" / name).exists()
    assert cli.main(["plot", "--out", str(tmp_path)]) == 2
