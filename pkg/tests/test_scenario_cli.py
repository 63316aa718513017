"""Scenario parsing, headless runs, frame dumps, CSV conversion and the CLI."""

import json
import os

import numpy as np
import pytest

from lbsteer import flags as fl
from lbsteer.cli import build_parser, main
from lbsteer.errors import ScenarioError
from lbsteer.runner import bench, frame_to_csv, run_headless
from lbsteer.scenario import build_simulation, load_scenario, parse_scenario

DAM2D = """
name test dam
dims 40 30
lattice d2q9
tau 0.7
gravity 0 -1e-4
background gas
border wall
box fluid 1 1 17 23
steps 120
frame_every 40
frame_fields fill speed
"""


# --------------------------------------------------------------------- parsing

def test_parse_round_trip_builds_simulation():
    scn = parse_scenario(DAM2D)
    assert scn.dims == (40, 30)
    assert scn.tau == 0.7
    sim, repairs = build_simulation(scn)
    assert sim.dims == (40, 30)
    assert repairs > 0
    assert sim.validate_invariants() == []


@pytest.mark.parametrize("text,line,fragment", [
    ("dims 40\n", 1, "dims"),
    ("dims 40 30\nlattice d9q2\n", 2, "lattice"),
    ("dims 40 30\nbox fluid 1 1\n", 2, "coordinates"),
    ("dims 40 30\nwibble 3\n", 2, "wibble"),
    ("dims 40 30\nbox plasma 1 1 2 2\n", 2, "plasma"),
    ("dims 40 30\nat x set_cells wall 1 1 2 2\n", 2, "iteration"),
    ("dims 40 30\nat 5 start\n", 2, "start"),
    ("box fluid 1 1 2 2\n", 1, "before dims"),
    ("dims 40 30\ntau abc\n", 2, "bad number"),
    ("dims 40 30 20\nlattice d2q9\n", 1, "does not match"),
])
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert err.value.line == line
    assert fragment in str(err.value)


def test_comments_and_blank_lines_ignored():
    scn = parse_scenario("# header\n\ndims 10 10  # trailing\n\nsteps 5\n")
    assert scn.dims == (10, 10)
    assert scn.steps == 5


def test_scheduled_commands_parse():
    scn = parse_scenario(
        "dims 20 20\nsteps 50\n"
        "at 10 set_cells wall 5 5 8 8\n"
        "at 20 move_region 5 5 8 8 offset 2 0\n"
        "at 30 set_param tau 0.9\n")
    assert [it for it, _ in scn.schedule] == [10, 20, 30]


def test_bundled_scenarios_parse():
    for name in ("dam2d.scn", "dam3d_86400.scn", "dam3d_206080.scn", "channel2d.scn"):
        scn = load_scenario(os.path.join("scenarios", name))
        assert scn.dims
        if "86400" in name:
            assert int(np.prod(scn.dims)) == 86400
        if "206080" in name:
            assert int(np.prod(scn.dims)) == 206080


# -------------------------------------------------------------------- headless

def test_run_headless_writes_frames_and_report(tmp_path):
    scn = parse_scenario(DAM2D)
    report = run_headless(scn, str(tmp_path))
    assert report["ok"]
    assert report["iterations"] == 120
    assert report["mass_drift_rel"] < 0.005
    files = sorted(os.listdir(tmp_path))
    # fields fill+speed at iterations 0, 40, 80, 120 -> 8 frames + sidecars
    assert sum(f.endswith(".f32") for f in files) == 8
    assert sum(f.endswith(".meta") for f in files) == 8
    assert "report.json" in files
    with open(tmp_path / "report.json") as fh:
        assert json.load(fh)["iterations"] == 120


def test_zero_step_run_writes_only_iteration_zero(tmp_path):
    scn = parse_scenario(DAM2D)
    report = run_headless(scn, str(tmp_path), iterations=0)
    assert report["iterations"] == 0
    frames = [f for f in os.listdir(tmp_path) if f.endswith(".f32")]
    assert sorted(frames) == ["fill_a2i0_it000000.f32", "speed_a2i0_it000000.f32"]


def test_dam_front_series_monotone_in_report(tmp_path):
    scn = parse_scenario(DAM2D.replace("steps 120", "steps 400"))
    report = run_headless(scn, str(tmp_path))
    fronts = [p for _, p in report["front_x"]]
    until_wall = [p for p in fronts if p < scn.dims[0] - 2]
    assert all(b >= a for a, b in zip(until_wall, until_wall[1:]))
    assert until_wall[-1] > until_wall[0]


def test_scheduled_edit_fires_at_iteration(tmp_path):
    text = DAM2D + "at 60 set_cells wall 30 1 34 10\n"
    scn = parse_scenario(text)
    report = run_headless(scn, str(tmp_path))
    assert report["ok"]
    sim, _ = build_simulation(parse_scenario(DAM2D))
    # run the twin manually and compare wall placement
    assert report["command_errors"] == []


def test_divergent_scenario_reports_last_stable(tmp_path):
    bad = DAM2D.replace("gravity 0 -1e-4", "gravity 0 -0.12")
    scn = parse_scenario(bad)
    report = run_headless(scn, str(tmp_path), iterations=4000)
    assert not report["ok"]
    assert "divergence" in report
    assert report["last_stable_iteration"] < 4000


# ------------------------------------------------------------------ frame dump

def test_to_csv_scalar_roundtrip(tmp_path):
    scn = parse_scenario(DAM2D)
    run_headless(scn, str(tmp_path), iterations=0)
    raw = tmp_path / "fill_a2i0_it000000.f32"
    out = frame_to_csv(str(raw))
    lines = open(out).read().splitlines()
    assert lines[0] == "i,j,value,valid"
    assert len(lines) == 1 + 40 * 30
    i, j, value, valid = lines[1].split(",")
    assert (i, j) == ("0", "0")
    assert valid == "0.0"  # border wall


# ------------------------------------------------------------------------- CLI

def test_cli_parser_defaults():
    args = build_parser().parse_args(["serve"])
    assert args.bind_tcp == ("127.0.0.1", 7070)
    assert args.bind_ws == ("127.0.0.1", 7071)
    assert args.max_frame_mb == 64
    args = build_parser().parse_args(["bench", "--scenario", "x.scn", "--threads", "2"])
    assert args.threads == 2


def test_cli_run_and_to_csv(tmp_path, capsys):
    scn_path = tmp_path / "mini.scn"
    scn_path.write_text(DAM2D.replace("steps 120", "steps 30"))
    out_dir = tmp_path / "out"
    code = main(["run", "--scenario", str(scn_path), "--out", str(out_dir)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["iterations"] == 30
    frame = next(str(out_dir / f) for f in os.listdir(out_dir) if f.endswith(".f32"))
    assert main(["to-csv", frame]) == 0


def test_cli_scenario_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("dims 10\n")
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_cli_divergence_exit_code(tmp_path, capsys):
    scn_path = tmp_path / "diverge.scn"
    scn_path.write_text(DAM2D.replace("gravity 0 -1e-4", "gravity 0 -0.12")
                        .replace("steps 120", "steps 4000"))
    code = main(["run", "--scenario", str(scn_path), "--out", str(tmp_path / "o")])
    assert code == 3


# ----------------------------------------------------------------------- bench

def test_bench_reports_structure():
    scn = parse_scenario(DAM2D)
    report = bench(scn, seconds=0.3, warmup=5)
    assert report["cells"] == 40 * 30
    assert report["mean_it_per_sec"] > 0
    assert set(report["phase_seconds"]) == {"collide_stream", "free_surface",
                                            "boundary", "moments"}
    assert report["hardware"]["cpu"]
    assert report["hardware"]["threads_used"] == 1


@pytest.mark.slow
def test_bench_scaling_doubling_cells_roughly_halves_it_per_sec():
    base = parse_scenario("dims 48 24 24\ntau 0.7\ngravity 0 -1e-4 0\n"
                          "background gas\nborder wall\nbox fluid 1 1 1 17 19 23\n")
    double = parse_scenario("dims 96 24 24\ntau 0.7\ngravity 0 -1e-4 0\n"
                            "background gas\nborder wall\nbox fluid 1 1 1 33 19 23\n")
    r1 = bench(base, seconds=2.0, warmup=20)
    r2 = bench(double, seconds=2.0, warmup=20)
    ratio = r1["mean_it_per_sec"] / r2["mean_it_per_sec"]
    assert 2.0 * 0.7 < ratio < 2.0 * 1.3  # within +-30% of proportional
