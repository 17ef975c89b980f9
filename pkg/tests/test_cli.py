"""End-to-end CLI runs, in process via main(argv)."""
import contextlib
import csv
import io
import json
import math

import numpy as np
import pytest

from drillsim import save_drill_script, save_sphere_pack
from drillsim.cli import main
from drillsim.drill import DrillScript, DrillStep
from drillsim.fixtures import load_outcomes_table

from conftest import small_random_volume


def run_cli(argv):
    """Invoke the CLI in process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def sections(stdout):
    """Split '# title' delimited CSV output into {title: rows}."""
    parts = {}
    current = None
    for line in stdout.splitlines():
        if line.startswith("# "):
            current = line[2:]
            parts[current] = []
        elif current is not None and line:
            parts[current].append(next(csv.reader([line])))
    return parts


def kv(rows):
    assert rows[0] == ["key", "value"]
    return dict(rows[1:])


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """One shared demo dataset, written by the make-fixtures command."""
    ws = tmp_path_factory.mktemp("workspace")
    code, out, err = run_cli(["make-fixtures", "--outdir", str(ws)])
    assert code == 0, err
    return ws


@pytest.fixture()
def small_pack(tmp_path):
    rng = np.random.default_rng(99)
    path = tmp_path / "pack.json"
    save_sphere_pack(small_random_volume(rng, n_min=30, n_max=30), path)
    return path


def test_make_fixtures_writes_everything(workspace):
    for name in ("tooth.json", "ideal.json", "cavity.drill", "trials.csv",
                 "study.csv", "outcomes.csv", "experts.csv", "gaze.log"):
        assert (workspace / name).is_file(), name
    assert len(list(workspace.glob("trial_*.drill"))) == 6


# --- voxelize ---------------------------------------------------------------

def test_voxelize_outputs_and_reruns_identically(small_pack, tmp_path):
    outdir = tmp_path / "out"
    argv = ["voxelize", "--pack", str(small_pack), "--grid", "24x24x24",
            "--outdir", str(outdir)]
    code, out, err = run_cli(argv)
    assert code == 0, err
    info = kv(sections(out)["voxelize"])
    assert info["spheres"] == "30"
    assert info["grid_dims"] == "24x24x24"
    assert int(info["occupied_voxels"]) > 0
    assert int(info["triangles"]) > 0
    assert info["watertight"] == "true"

    grid_bytes = (outdir / "grid.json").read_bytes()
    mesh_bytes = (outdir / "mesh.ply").read_bytes()
    code2, out2, _ = run_cli(argv)
    assert code2 == 0
    assert out2 == out
    assert (outdir / "grid.json").read_bytes() == grid_bytes
    assert (outdir / "mesh.ply").read_bytes() == mesh_bytes


def test_voxelize_option_precedence(small_pack, tmp_path):
    manifest = tmp_path / "run.json"
    manifest.write_text(json.dumps({
        "inputs": {"tooth": small_pack.name},
        "outputs": "results",
        "options": {"grid": "12x12x12"},
    }))
    code, out, err = run_cli(["voxelize", "--manifest", str(manifest)])
    assert code == 0, err
    assert kv(sections(out)["voxelize"])["grid_dims"] == "12x12x12"
    # the outputs dir resolves relative to the manifest
    assert (tmp_path / "results" / "grid.json").is_file()

    # an explicit flag beats the manifest option
    code, out, err = run_cli(["voxelize", "--manifest", str(manifest),
                              "--grid", "10x10x10"])
    assert code == 0, err
    assert kv(sections(out)["voxelize"])["grid_dims"] == "10x10x10"


def test_voxelize_convention_lookup(small_pack, tmp_path):
    target = small_pack.parent / "tooth.json"
    target.write_bytes(small_pack.read_bytes())
    code, out, err = run_cli(["voxelize", "--workdir", str(small_pack.parent),
                              "--grid", "8x8x8", "--outdir", str(tmp_path / "o")])
    assert code == 0, err


# --- drill-replay -----------------------------------------------------------

def test_drill_replay_totals(tmp_path):
    rng = np.random.default_rng(5)
    vol = small_random_volume(rng, n_min=40, n_max=40)
    pack = tmp_path / "pack.json"
    save_sphere_pack(vol, pack)
    script_path = tmp_path / "run.drill"
    steps = [DrillStep(t=float(i), position=(0.0, 0.0, 0.0),
                       orientation_deg=(0.0, 0.0, 0.0),
                       bur_radius=1.2, active=i > 0) for i in range(3)]
    save_drill_script(DrillScript(steps=tuple(steps)), script_path)

    outdir = tmp_path / "out"
    code, out, err = run_cli(["drill-replay", "--pack", str(pack),
                              "--script", str(script_path),
                              "--outdir", str(outdir)])
    assert code == 0, err
    parts = sections(out)
    replay_rows = parts["drill-replay"][1:]
    removed = [int(r[2]) for r in replay_rows]
    cumulative = [int(r[3]) for r in replay_rows]
    assert cumulative == list(np.cumsum(removed))
    assert removed[0] == 0  # inactive first step
    summary = kv(parts["summary"])
    assert int(summary["total_removed"]) == cumulative[-1] > 0
    drilled = json.loads((outdir / "drilled.json").read_text())
    assert len(drilled["removed"]) == cumulative[-1]


# --- score ------------------------------------------------------------------

def _score_rows(stdout):
    rows = sections(stdout)["score"]
    header, data = rows[0], rows[1:]
    return header, data


def test_score_ideal_outcome_is_perfect(workspace, tmp_path):
    code, out, err = run_cli([
        "score", "--workdir", str(workspace), "--grid", "45x68x45",
        "--outcome-pack", str(workspace / "ideal.json"),
        "--outdir", str(tmp_path), "--out", str(tmp_path / "report.json")])
    assert code == 0, err
    header, data = _score_rows(out)
    assert len(data) == 1
    row = dict(zip(header, data[0]))
    assert row["id"] == "ideal"
    assert row["fp"] == "0" and row["fn"] == "0"
    assert float(row["dentist"]) == 0.0
    assert float(row["precision"]) == 1.0 and float(row["sensitivity"]) == 1.0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report[0]["id"] == "ideal"
    assert report[0]["dentist"]["value"] == 0.0


def test_score_counts_csv_mode(tmp_path):
    path = tmp_path / "counts.csv"
    path.write_text("tp,tn,fp,fn\n9600,0,400,0\n100,100,0,0\n")
    code, out, err = run_cli(["score", "--outcomes", str(path),
                              "--outdir", str(tmp_path)])
    assert code == 0, err
    header, data = _score_rows(out)
    assert [r[0] for r in data] == ["0", "1"]
    first = dict(zip(header, data[0]))
    assert abs(float(first["dentist"]) - 4.8) < 1e-12
    assert first["dentist_out_of_range"] == "false"
    second = dict(zip(header, data[1]))
    assert float(second["dentist"]) == 0.0
    # battery columns are all present and parse
    battery_cols = [h for h in header if h.startswith("battery_")]
    assert len(battery_cols) == 24
    for col in battery_cols:
        float(first[col])


def test_score_trials_parallel_matches_serial(workspace, tmp_path):
    base = ["score", "--workdir", str(workspace), "--grid", "45x68x45",
            "--trials", str(workspace / "trials.csv"),
            "--outdir", str(tmp_path)]
    code1, out1, err1 = run_cli(base + ["--jobs", "1"])
    assert code1 == 0, err1
    code2, out2, err2 = run_cli(base + ["--jobs", "2"])
    assert code2 == 0, err2
    assert out1 == out2
    header, data = _score_rows(out1)
    assert [r[0] for r in data] == [
        "P01/1", "P01/2", "P01/3", "P02/1", "P02/2", "P02/3"]
    # longer runs complete more of the cavity, so the error score drops
    d = {r[0]: float(dict(zip(header, r))["dentist"]) for r in data}
    assert d["P01/3"] < d["P01/1"]
    assert d["P01/3"] == d["P02/3"]  # same full script, same outcome


def test_score_single_outcome_figures(workspace, tmp_path):
    outdir = tmp_path / "figout"
    code, out, err = run_cli([
        "score", "--workdir", str(workspace), "--grid", "45x68x45",
        "--script", str(workspace / "cavity.drill"),
        "--outdir", str(outdir), "--figures"])
    assert code == 0, err
    for name in ("classification_slice.png", "battery.png"):
        f = outdir / "figures" / name
        assert f.is_file() and f.stat().st_size > 0


# --- compare-metrics --------------------------------------------------------

def test_compare_metrics_ranks_and_coverage(workspace, tmp_path):
    code, out, err = run_cli(["compare-metrics", "--workdir", str(workspace),
                              "--outdir", str(tmp_path), "--k", "20"])
    assert code == 0, err
    parts = sections(out)
    comp = parts["metric-comparison"]
    assert comp[0] == ["rank", "metric", "n", "shapiro_w", "shapiro_p",
                       "pearson_r", "abs_r"]
    top = dict(zip(comp[0], comp[1]))
    assert top["metric"] == "dentist"
    assert float(top["abs_r"]) >= 0.8
    assert top["n"] == "240"

    agree = kv(parts["expert-agreement"])
    assert agree["chosen_metric"] == "dentist"
    assert "cohen_kappa_linear" in agree

    cov_key = [k for k in parts if k.startswith("coverage")]
    assert cov_key == ["coverage k=20 metric=dentist"]
    cov_rows = parts[cov_key[0]][1:]
    assert len(cov_rows) == 20
    ids = [int(r[0]) for r in cov_rows]
    assert len(set(ids)) == 20

    dentists = {int(r[0]): float(r[1]) for r in cov_rows}
    outcomes = load_outcomes_table(workspace / "outcomes.csv")
    from drillsim import dentist_score
    all_d = np.array([dentist_score(c).value for c in outcomes])
    assert int(np.argmin(all_d)) in ids
    assert int(np.argmax(all_d)) in ids
    for i, v in dentists.items():
        assert v == all_d[i]


def test_compare_metrics_requires_matching_expert_length(workspace, tmp_path):
    experts = tmp_path / "experts.csv"
    experts.write_text("expert\n1.0\n2.0\n")
    code, _, err = run_cli(["compare-metrics", "--workdir", str(workspace),
                            "--experts", str(experts),
                            "--outdir", str(tmp_path)])
    assert code == 1
    assert "error:" in err and "2 rows" in err


# --- calibrate --------------------------------------------------------------

def test_calibrate_offset_recovery(tmp_path):
    config = tmp_path / "cal.json"
    code, out, err = run_cli([
        "calibrate",
        "--measured", "100,50,25,10,20,30",
        "--reference", "122,76,18,10,20,120",
        "--save-config", str(config)])
    assert code == 0, err
    info = kv(sections(out)["camera-correction"])
    assert float(info["position_offset_x"]) == 22.0
    assert float(info["position_offset_y"]) == 26.0
    assert float(info["position_offset_z"]) == -7.0
    assert float(info["orientation_offset_x_deg"]) == 0.0
    assert float(info["orientation_offset_y_deg"]) == 0.0
    assert float(info["orientation_offset_z_deg"]) == 90.0
    assert float(info["residual_position"]) == 0.0
    assert float(info["residual_angle_deg"]) == 0.0
    assert config.is_file()

    code, out, err = run_cli(["calibrate", "--config", str(config),
                              "--pose", "1,2,3,0,0,45"])
    assert code == 0, err
    pose = kv(sections(out)["corrected-pose"])
    assert float(pose["position_x"]) == 23.0
    assert float(pose["position_y"]) == 28.0
    assert float(pose["position_z"]) == -4.0
    assert float(pose["orientation_z_deg"]) == 135.0


def test_calibrate_tool_tip(tmp_path):
    code, out, err = run_cli(["calibrate", "--grip", "0,0,0",
                              "--down=-z", "--forward=+x"])
    assert code == 0, err
    tip = kv(sections(out)["tool-tip"])
    assert float(tip["tip_x"]) == 50.0
    assert float(tip["tip_y"]) == 0.0
    assert float(tip["tip_z"]) == -20.0


def test_calibrate_requires_some_work():
    code, _, err = run_cli(["calibrate"])
    assert code == 1
    assert "nothing to do" in err


def test_calibrate_rejects_half_a_pair():
    code, _, err = run_cli(["calibrate", "--measured", "1,2,3,4,5,6"])
    assert code == 1
    assert "must be given together" in err


# --- gaze-stats -------------------------------------------------------------

def test_gaze_stats_on_workspace(workspace, tmp_path):
    code, out, err = run_cli([
        "gaze-stats", "--workdir", str(workspace), "--grid", "45x68x45",
        "--outdir", str(tmp_path)])
    assert code == 0, err
    info = kv(sections(out)["gaze-stats"])
    n, hits = int(info["samples"]), int(info["hits"])
    assert n == 120 and 0 < hits < n
    assert math.isclose(float(info["hit_rate"]), hits / n, rel_tol=1e-12)
    mean_mm = float(info["mean_eye_tooth_distance_mm"])
    assert 180.0 < mean_mm < 280.0
    assert math.isclose(float(info["distance_cm"]), mean_mm / 10.0,
                        rel_tol=1e-12)
    # per-eye render target is half as wide as the combined one
    per_eye = float(info["per_eye_share"])
    combined = float(info["combined_share"])
    assert math.isclose(per_eye, 2.0 * combined, rel_tol=1e-12)
    assert float(info["pixel_footprint_px"]) > 0


def test_gaze_stats_distance_override(workspace, tmp_path):
    code, out, err = run_cli([
        "gaze-stats", "--workdir", str(workspace), "--grid", "45x68x45",
        "--outdir", str(tmp_path), "--distance-cm", "23"])
    assert code == 0, err
    info = kv(sections(out)["gaze-stats"])
    assert float(info["distance_cm"]) == 23.0
    assert abs(float(info["pixel_footprint_px"]) - 119.1305946969107) < 1e-9


def test_gaze_stats_bad_log_line(workspace, tmp_path):
    bad = tmp_path / "bad.log"
    bad.write_text("0.0 0 0 200 63 0 200 0 0 -1\nnot a number\n")
    code, _, err = run_cli(["gaze-stats", "--workdir", str(workspace),
                            "--gaze", str(bad), "--grid", "45x68x45",
                            "--outdir", str(tmp_path)])
    assert code == 1
    assert "error:" in err and "line 2" in err


# --- study-report -----------------------------------------------------------

def test_study_report_pinned_statistics(workspace, tmp_path):
    code, out, err = run_cli(["study-report", "--workdir", str(workspace),
                              "--outdir", str(tmp_path)])
    assert code == 0, err
    parts = sections(out)

    screen = kv(parts["outlier-screen"])
    assert screen["kept"] == "37" and screen["removed"] == "3"

    removed = parts["removed-participants"][1:]
    assert [r[0] for r in removed] == ["P08", "P20", "P34"]
    # gains come back through e1 - e0, so the planted values round trip
    # only to float addition accuracy
    assert np.allclose(sorted(float(r[1]) for r in removed),
                       [-5.0, -5.0, 4.0], atol=1e-9)

    test_info = kv(parts["learning-gain-test"])
    assert test_info["n"] == "37"
    assert abs(float(test_info["mean_gain"]) - (-0.2432)) <= 1e-6
    assert abs(abs(float(test_info["t"])) - 1.037) <= 0.005
    assert abs(float(test_info["p"]) - 0.153) <= 0.005
    assert test_info["tails"] == "less"

    group_rows = parts["groups"][1:]
    assert len(group_rows) == 4
    assert sum(int(r[1]) for r in group_rows) == 37

    tests = {r[0]: r for r in parts["group-tests"][1:]}
    assert "anova_gain_by_group" in tests
    assert ";" in tests["anova_gain_by_group"][2]
    assert "welch_stereo_vs_mono" in tests
    assert "welch_aligned_vs_misaligned" in tests

    corr_rows = parts["correlations"][1:]
    assert [r[0] for r in corr_rows] == [
        "pre_error_vs_trial1", "real_gain_vs_virtual_gain",
        "eye_tooth_distance_vs_gain"]


def test_study_report_figures(workspace, tmp_path):
    outdir = tmp_path / "figs"
    code, _, err = run_cli(["study-report", "--workdir", str(workspace),
                            "--outdir", str(outdir), "--figures"])
    assert code == 0, err
    names = {p.name for p in (outdir / "figures").glob("*.png")}
    assert names == {"gains.png", "group_means.png", "trials.png",
                     "pre_vs_trial1.png", "real_vs_virtual.png",
                     "distance_vs_gain.png"}


def test_study_report_two_tailed_doubles_p(workspace, tmp_path):
    code, out, err = run_cli(["study-report", "--workdir", str(workspace),
                              "--outdir", str(tmp_path), "--tails", "two"])
    assert code == 0, err
    info = kv(sections(out)["learning-gain-test"])
    assert abs(float(info["p"]) - 2 * 0.15390219865354776) < 1e-9
    assert info["tails"] == "two"


# --- failure modes ----------------------------------------------------------

def test_missing_input_names_all_three_sources(tmp_path):
    code, _, err = run_cli(["score", "--workdir", str(tmp_path),
                            "--pack", str(tmp_path / "nope.json")])
    assert code == 1
    assert "error: input file not found" in err

    code, _, err = run_cli(["drill-replay", "--workdir", str(tmp_path)])
    assert code == 1
    assert "missing input 'tooth'" in err
    assert "tooth.json" in err and "manifest" in err


def test_broken_manifest_is_reported(tmp_path):
    manifest = tmp_path / "run.json"
    manifest.write_text("{not json")
    code, _, err = run_cli(["voxelize", "--manifest", str(manifest)])
    assert code == 1
    assert "error: manifest" in err


def test_bad_grid_flag(small_pack, tmp_path):
    code, _, err = run_cli(["voxelize", "--pack", str(small_pack),
                            "--grid", "90x135", "--outdir", str(tmp_path)])
    assert code == 1
    assert "grid must be NXxNYxNZ" in err
