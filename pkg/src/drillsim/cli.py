"""Command-line front end: reproducible batch runs over the simulation core.

Conventions shared by every subcommand:

* data goes to stdout as CSV (with ``# section`` marker lines) or to files;
  progress notes and warnings go to stderr; the exit code is 0 exactly when
  no error occurred.
* inputs resolve in priority order: explicit flag, then the run manifest's
  ``inputs`` entry, then a conventional file name under ``--workdir``.
* options resolve flag first, then the manifest's ``options`` entry, then
  the built-in default.

A run manifest is a JSON object ``{"inputs": {...}, "outputs": dir,
"options": {...}}``; relative paths inside it resolve against the manifest's
own directory.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calibration as cal
from . import figures as figs
from . import fixtures as fx
from . import gaze as gz
from . import stats as st
from .drill import load_drill_script, replay, save_drill_script
from .field import DEFAULT_DIMS, ISO_LEVEL, SUPPORT_SCALE, build_field, default_grid_box
from .mesh import extract_mesh, is_watertight, load_ply, save_ply
from .scoring import (BATTERY_METRICS, ClassificationCounts, classify,
                      dentist_score, f1_score, metric_battery, outcome_report)
from .volume import load_sphere_pack, save_sphere_pack
from .voxelgrid import save_voxel_grid, voxelize

__all__ = ["main"]

_CONVENTION = {
    "tooth": "tooth.json",
    "ideal": "ideal.json",
    "script": "cavity.drill",
    "outcome_pack": "drilled.json",
    "outcomes": "outcomes.csv",
    "experts": "experts.csv",
    "study": "study.csv",
    "gaze": "gaze.log",
    "mesh": "mesh.ply",
    "config": "calibration.json",
    "trials": "trials.csv",
}


class CliError(Exception):
    pass


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def _section(title: str) -> None:
    print(f"# {title}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)  # plain-float repr, even for numpy scalars
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


class RunContext:
    """Flag / manifest / convention resolution for one invocation."""

    def __init__(self, args):
        self.manifest: dict = {}
        self.manifest_dir: Path | None = None
        manifest_path = getattr(args, "manifest", None)
        if manifest_path:
            path = Path(manifest_path)
            if not path.is_file():
                raise CliError(f"manifest not found: {path}")
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"manifest {path}: {exc}") from None
            if not isinstance(doc, dict):
                raise CliError(f"manifest {path}: expected a JSON object")
            self.manifest = doc
            self.manifest_dir = path.parent
        self.workdir = Path(getattr(args, "workdir", None) or ".")

    def _resolve_manifest_path(self, raw) -> Path:
        p = Path(str(raw))
        if not p.is_absolute() and self.manifest_dir is not None:
            p = self.manifest_dir / p
        return p

    def input_path(self, name: str, flag_value, required: bool = True) -> Path | None:
        if flag_value:
            p = Path(flag_value)
            if not p.is_file():
                raise CliError(f"input file not found: {p}")
            return p
        inputs = self.manifest.get("inputs", {})
        if isinstance(inputs, dict) and name in inputs:
            p = self._resolve_manifest_path(inputs[name])
            if not p.is_file():
                raise CliError(f"manifest input '{name}' not found: {p}")
            return p
        conv = _CONVENTION.get(name)
        if conv is not None:
            cand = self.workdir / conv
            if cand.is_file():
                return cand
        if required:
            hint = f" (flag, manifest inputs.{name}, or {_CONVENTION.get(name)} in --workdir)"
            raise CliError(f"missing input '{name}'{hint}")
        return None

    def option(self, name: str, flag_value, default):
        if flag_value is not None:
            return flag_value
        opts = self.manifest.get("options", {})
        if isinstance(opts, dict) and name in opts:
            return opts[name]
        return default

    def outdir(self, flag_value) -> Path:
        if flag_value:
            d = Path(flag_value)
        elif "outputs" in self.manifest:
            d = self._resolve_manifest_path(self.manifest["outputs"])
        else:
            d = Path(".")
        d.mkdir(parents=True, exist_ok=True)
        return d


def _parse_grid(text) -> tuple[int, int, int]:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).lower().split("x")
    if len(parts) != 3:
        raise CliError(f"grid must be NXxNYxNZ, got {text!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise CliError(f"grid must be NXxNYxNZ, got {text!r}") from None
    if any(d < 2 for d in dims):
        raise CliError("grid dimensions must be at least 2")
    return dims  # type: ignore[return-value]


def _parse_floats(text: str, n: int, what: str) -> list[float]:
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if len(parts) != n:
        raise CliError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise CliError(f"{what}: could not parse {text!r}") from None


def _grid_options(ctx: RunContext, args):
    dims = _parse_grid(ctx.option("grid", args.grid, "x".join(map(str, DEFAULT_DIMS))))
    iso = float(ctx.option("iso", args.iso, ISO_LEVEL))
    support = float(ctx.option("kernel_support", args.kernel_support, SUPPORT_SCALE))
    jobs = ctx.option("jobs", args.jobs, None)
    jobs = int(jobs) if jobs is not None else None
    if not (0.0 < iso < 1.0):
        raise CliError("iso level must be in (0, 1)")
    if support <= 1.0:
        raise CliError("kernel support scale must exceed 1")
    if jobs is not None and jobs < 1:
        raise CliError("jobs must be at least 1")
    return dims, iso, support, jobs


def _figures_enabled(ctx: RunContext, args) -> bool:
    return bool(ctx.option("figures", getattr(args, "figures", None), False))


# ---------------------------------------------------------------------------
# voxelize


def cmd_voxelize(args) -> int:
    ctx = RunContext(args)
    dims, iso, support, jobs = _grid_options(ctx, args)
    pack_path = ctx.input_path("tooth", args.pack)
    outdir = ctx.outdir(args.outdir)

    volume = load_sphere_pack(pack_path)
    _note(f"loaded {len(volume)} spheres from {pack_path}")
    field = build_field(volume, support_scale=support, iso_level=iso)
    box = default_grid_box(field, dims)
    grid = voxelize(field, dims=dims, box=box, jobs=jobs)
    mesh = extract_mesh(field, dims=dims, box=box, jobs=jobs)

    grid_path = Path(args.out_grid) if args.out_grid else outdir / "grid.json"
    mesh_path = Path(args.out_mesh) if args.out_mesh else outdir / "mesh.ply"
    save_voxel_grid(grid, grid_path)
    save_ply(mesh, mesh_path)

    w = _writer()
    _section("voxelize")
    w.writerow(["key", "value"])
    w.writerow(["spheres", len(volume)])
    w.writerow(["grid_dims", "x".join(map(str, dims))])
    w.writerow(["occupied_voxels", grid.occupied_count])
    w.writerow(["vertices", mesh.n_vertices])
    w.writerow(["triangles", mesh.n_triangles])
    w.writerow(["watertight", _fmt(is_watertight(mesh))])
    w.writerow(["grid_file", str(grid_path)])
    w.writerow(["mesh_file", str(mesh_path)])
    return 0


# ---------------------------------------------------------------------------
# drill-replay


def cmd_drill_replay(args) -> int:
    ctx = RunContext(args)
    pack_path = ctx.input_path("tooth", args.pack)
    script_path = ctx.input_path("script", args.script)
    outdir = ctx.outdir(args.outdir)

    volume = load_sphere_pack(pack_path)
    script = load_drill_script(script_path)
    log = replay(volume, script)

    out_pack = Path(args.out_pack) if args.out_pack else outdir / "drilled.json"
    save_sphere_pack(volume, out_pack)
    _note(f"replayed {len(script)} steps; drilled pack written to {out_pack}")

    w = _writer()
    _section("drill-replay")
    w.writerow(["step", "t", "removed", "cumulative"])
    for i, (t, r, c) in enumerate(zip(log.times, log.removed_per_step, log.cumulative)):
        w.writerow([i, _fmt(float(t)), int(r), int(c)])
    _section("summary")
    w.writerow(["key", "value"])
    w.writerow(["steps", len(script)])
    w.writerow(["total_removed", log.total_removed])
    w.writerow(["drilled_pack", str(out_pack)])
    return 0


# ---------------------------------------------------------------------------
# score


@dataclass(frozen=True)
class TrialRecord:
    """One scored run in the four-group study design."""

    participant_id: str
    group: str
    trial_index: int
    script: Path
    gaze: Path | None = None

    def __post_init__(self):
        if self.group not in fx.STUDY_GROUPS:
            raise ValueError(
                f"unknown group {self.group!r}; expected one of {fx.STUDY_GROUPS}")
        if not (1 <= self.trial_index <= 6):
            raise ValueError("trialIndex must be in 1..6")

    @property
    def label(self) -> str:
        return f"{self.participant_id}/{self.trial_index}"


def load_trials_table(path, base_dir: Path) -> list[TrialRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = [h.strip() for h in header]
        needed = ["participantId", "group", "trialIndex", "script"]
        if cols[: len(needed)] != needed:
            raise ValueError(f"unexpected trials header: {header}")
        has_gaze = len(cols) > 4 and cols[4] == "gaze"
        out = []
        for rownum, r in enumerate(reader, start=1):
            try:
                script = Path(r[3])
                if not script.is_absolute():
                    script = base_dir / script
                gaze_path = None
                if has_gaze and len(r) > 4 and r[4].strip():
                    gaze_path = Path(r[4])
                    if not gaze_path.is_absolute():
                        gaze_path = base_dir / gaze_path
                out.append(TrialRecord(
                    participant_id=r[0], group=r[1], trial_index=int(r[2]),
                    script=script, gaze=gaze_path,
                ))
            except (IndexError, ValueError) as exc:
                raise ValueError(f"trials row {rownum}: {exc}") from None
    return out


_SCORE_HEADER = ["id", "tp", "tn", "fp", "fn", "precision", "sensitivity",
                 "dentist", "dentist_out_of_range", "f1",
                 *[f"battery_{name}" for name in BATTERY_METRICS]]


def _score_row(label: str, counts: ClassificationCounts) -> list:
    d = dentist_score(counts)
    try:
        f1 = f1_score(counts)
    except ValueError:
        f1 = math.nan
    battery = metric_battery(counts)
    return [label, counts.tp, counts.tn, counts.fp, counts.fn,
            _fmt(d.precision), _fmt(d.sensitivity), _fmt(d.value),
            _fmt(d.out_of_range), _fmt(f1),
            *[_fmt(m.value) for m in battery]]


def cmd_score(args) -> int:
    ctx = RunContext(args)
    dims, iso, support, jobs = _grid_options(ctx, args)
    outdir = ctx.outdir(args.outdir)
    figures = _figures_enabled(ctx, args)

    outcomes_path = ctx.input_path("outcomes", args.outcomes, required=False) \
        if (args.outcomes or not (args.script or args.trials or args.outcome_pack)) else None
    reports: list[dict] = []
    rows: list[list] = []
    slice_args = None

    if args.outcomes or outcomes_path:
        # batch of classification counts straight from a CSV
        path = ctx.input_path("outcomes", args.outcomes)
        batch = fx.load_outcomes_table(path)
        _note(f"scoring {len(batch)} outcome count rows from {path}")
        for i, counts in enumerate(batch):
            rows.append(_score_row(str(i), counts))
            reports.append({"id": str(i), **outcome_report(counts)})
    else:
        pack_path = ctx.input_path("tooth", args.pack)
        ideal_path = ctx.input_path("ideal", args.ideal)
        volume = load_sphere_pack(pack_path)
        ideal_volume = load_sphere_pack(ideal_path)
        field = build_field(volume, support_scale=support, iso_level=iso)
        box = default_grid_box(field, dims)
        pristine = voxelize(field, dims=dims, box=box, jobs=jobs)
        ideal_grid = voxelize(
            build_field(ideal_volume, support_scale=support, iso_level=iso),
            dims=dims, box=box, jobs=jobs)

        def outcome_grid_for(script_path=None, outcome_pack=None):
            if outcome_pack is not None:
                drilled = load_sphere_pack(outcome_pack)
            else:
                drilled = volume.copy()
                replay(drilled, load_drill_script(script_path))
            return voxelize(
                build_field(drilled, support_scale=support, iso_level=iso),
                dims=dims, box=box, jobs=jobs)

        if args.trials:
            trials_path = ctx.input_path("trials", args.trials)
            records = load_trials_table(trials_path, Path(trials_path).parent)
            _note(f"scoring {len(records)} trials from {trials_path}")

            def score_one(idx_rec):
                idx, rec = idx_rec
                grid = outcome_grid_for(script_path=rec.script)
                counts = classify(grid, ideal_grid, pristine)
                return idx, rec, counts

            workers = jobs or 1
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(score_one, enumerate(records)))
            else:
                results = [score_one(p) for p in enumerate(records)]
            results.sort(key=lambda r: r[0])
            for _, rec, counts in results:
                rows.append(_score_row(rec.label, counts))
                reports.append({
                    "id": rec.label, "group": rec.group, **outcome_report(counts)})
        else:
            outcome_pack = ctx.input_path("outcome_pack", args.outcome_pack,
                                          required=False) if not args.script else None
            if args.script or not outcome_pack:
                script_path = ctx.input_path("script", args.script)
                grid = outcome_grid_for(script_path=script_path)
                label = Path(script_path).stem
            else:
                grid = outcome_grid_for(outcome_pack=outcome_pack)
                label = Path(outcome_pack).stem
            counts = classify(grid, ideal_grid, pristine)
            rows.append(_score_row(label, counts))
            reports.append({"id": label, **outcome_report(counts)})
            slice_args = (pristine.occupancy, ideal_grid.occupancy, grid.occupancy)

    w = _writer()
    _section("score")
    w.writerow(_SCORE_HEADER)
    for row in rows:
        w.writerow(row)

    if args.out:
        out_path = Path(args.out)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(reports, fh, indent=2)
            fh.write("\n")
        _note(f"report written to {out_path}")

    if figures:
        figdir = outdir / "figures"
        figdir.mkdir(parents=True, exist_ok=True)
        if slice_args is not None:
            p = figs.classification_slice_figure(*slice_args,
                                                 figdir / "classification_slice.png")
            _note(f"figure written to {p}")
        if len(reports) == 1:
            rep = reports[0]
            p = figs.battery_figure(
                [m["name"] for m in rep["battery"]],
                [m["value"] for m in rep["battery"]],
                [m["orientation"] for m in rep["battery"]],
                figdir / "battery.png",
                dentist_value=rep["dentist"]["value"])
            _note(f"figure written to {p}")
        else:
            matrix = np.array([
                [m["value"] for m in rep["battery"]] for rep in reports])
            p = figs.metric_distributions_figure(
                list(BATTERY_METRICS), matrix, figdir / "metric_distributions.png")
            _note(f"figure written to {p}")
    return 0


# ---------------------------------------------------------------------------
# compare-metrics


def cmd_compare_metrics(args) -> int:
    ctx = RunContext(args)
    outdir = ctx.outdir(args.outdir)
    figures = _figures_enabled(ctx, args)
    k = int(ctx.option("k", args.k, 20))
    weighting = str(ctx.option("kappa_weighting", args.kappa_weighting, "linear"))

    outcomes_path = ctx.input_path("outcomes", args.outcomes)
    batch = fx.load_outcomes_table(outcomes_path)
    n = len(batch)
    if n == 0:
        raise CliError(f"no outcome rows in {outcomes_path}")
    _note(f"comparing metrics over {n} outcomes from {outcomes_path}")

    experts_path = ctx.input_path("experts", args.experts, required=False)
    experts = None
    if experts_path is not None:
        experts = fx.load_experts_table(experts_path)
        if experts.size != n:
            raise CliError(
                f"experts table has {experts.size} rows, outcomes have {n}")
    else:
        _note("expert scores absent; correlation ranking skipped")

    names = ["dentist", *BATTERY_METRICS]
    matrix = np.empty((n, len(names)), dtype=np.float64)
    for i, counts in enumerate(batch):
        matrix[i, 0] = dentist_score(counts).value
        matrix[i, 1:] = [m.value for m in metric_battery(counts)]

    shapiro_w = np.full(len(names), np.nan)
    shapiro_p = np.full(len(names), np.nan)
    pearson_r = np.full(len(names), np.nan)
    for j, name in enumerate(names):
        col = matrix[:, j]
        finite = col[np.isfinite(col)]
        try:
            res = st.normality(finite)
            shapiro_w[j], shapiro_p[j] = res.statistic, res.p_value
        except ValueError as exc:
            _note(f"normality unavailable for {name}: {exc}")
        if experts is not None:
            ok = np.isfinite(col)
            try:
                pearson_r[j] = st.pearson(col[ok], experts[ok]).r
            except ValueError as exc:
                _note(f"correlation unavailable for {name}: {exc}")

    abs_r = np.abs(pearson_r)
    if experts is not None:
        order = np.argsort(np.where(np.isfinite(abs_r), abs_r, -1.0))[::-1]
    else:
        order = np.argsort(np.where(np.isfinite(shapiro_p), shapiro_p, -1.0))[::-1]

    w = _writer()
    _section("metric-comparison")
    w.writerow(["rank", "metric", "n", "shapiro_w", "shapiro_p", "pearson_r", "abs_r"])
    for rank, j in enumerate(order, start=1):
        w.writerow([rank, names[j], n, _fmt(shapiro_w[j]), _fmt(shapiro_p[j]),
                    _fmt(pearson_r[j]), _fmt(abs_r[j])])

    chosen_j = int(order[0]) if experts is not None else 0
    chosen_name = names[chosen_j]
    chosen_col = matrix[:, chosen_j]

    if experts is not None:
        ok = np.isfinite(chosen_col)
        _section("expert-agreement")
        w.writerow(["key", "value"])
        w.writerow(["chosen_metric", chosen_name])
        try:
            kappa = st.cohen_kappa(chosen_col[ok], experts[ok], weighting=weighting)
            w.writerow([f"cohen_kappa_{weighting}", _fmt(kappa)])
        except ValueError as exc:
            _note(f"kappa unavailable for {chosen_name}: {exc}")
            w.writerow([f"cohen_kappa_{weighting}", "nan"])
        try:
            disagreement = st.ibmd(np.abs(chosen_col[ok]), np.abs(experts[ok]))
            w.writerow(["ibmd", _fmt(disagreement)])
        except ValueError as exc:
            _note(f"ibmd unavailable for {chosen_name}: {exc}")
            w.writerow(["ibmd", "nan"])

    cov_col = np.where(np.isfinite(chosen_col), chosen_col, 0.0)
    k_eff = min(k, n)
    if k_eff < k:
        _note(f"coverage subset reduced to {k_eff} (only {n} outcomes)")
    chosen_ids = st.uniform_coverage_select(cov_col, k_eff)
    _section(f"coverage k={k_eff} metric={chosen_name}")
    w.writerow(["id", "value"])
    for i in chosen_ids:
        w.writerow([int(i), _fmt(float(chosen_col[int(i)]))])

    if figures:
        figdir = outdir / "figures"
        figdir.mkdir(parents=True, exist_ok=True)
        paths = [figs.metric_distributions_figure(
            names, matrix, figdir / "metric_distributions.png")]
        if experts is not None:
            paths.append(figs.ranking_figure(names, abs_r, figdir / "metric_ranking.png"))
        paths.append(figs.coverage_figure(
            cov_col, chosen_ids, figdir / "coverage.png", label=chosen_name))
        for p in paths:
            _note(f"figure written to {p}")
    return 0


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args) -> int:
    ctx = RunContext(args)
    w = _writer()
    did_anything = False

    if args.measured or args.reference:
        if not (args.measured and args.reference):
            raise CliError("--measured and --reference must be given together")
        mv = _parse_floats(args.measured, 6, "--measured")
        rv = _parse_floats(args.reference, 6, "--reference")
        measured = cal.Pose(mv[:3], mv[3:])
        reference = cal.Pose(rv[:3], rv[3:])
        corr = cal.camera_correction(measured, reference)
        res_pos, res_ang = cal.alignment_residual(
            cal.apply_correction(measured, corr), reference)
        _section("camera-correction")
        w.writerow(["key", "value"])
        for axis, v in zip("xyz", corr.position_offset):
            w.writerow([f"position_offset_{axis}", _fmt(float(v))])
        for axis, v in zip("xyz", corr.orientation_offset_deg):
            w.writerow([f"orientation_offset_{axis}_deg", _fmt(float(v))])
        w.writerow(["residual_position", _fmt(res_pos)])
        w.writerow(["residual_angle_deg", _fmt(res_ang)])
        if args.save_config:
            cal.save_calibration(args.save_config, corr)
            _note(f"calibration written to {args.save_config}")
        did_anything = True

    if args.pose:
        config_path = ctx.input_path("config", args.config)
        corr = cal.load_calibration(config_path)
        pv = _parse_floats(args.pose, 6, "--pose")
        pose = cal.Pose(pv[:3], pv[3:])
        fixed = cal.apply_correction(pose, corr)
        _section("corrected-pose")
        w.writerow(["key", "value"])
        for axis, v in zip("xyz", fixed.position):
            w.writerow([f"position_{axis}", _fmt(float(v))])
        for axis, v in zip("xyz", fixed.orientation_deg):
            w.writerow([f"orientation_{axis}_deg", _fmt(float(v))])
        did_anything = True

    if args.grip:
        gv = _parse_floats(args.grip, 3, "--grip")
        try:
            frame = cal.ToolFrame(down=args.down, forward=args.forward)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        tip = cal.apply_misalignment(gv, frame, down_mm=args.down_mm,
                                     forward_mm=args.forward_mm)
        _section("tool-tip")
        w.writerow(["key", "value"])
        for axis, v in zip("xyz", tip):
            w.writerow([f"tip_{axis}", _fmt(float(v))])
        did_anything = True

    if not did_anything:
        raise CliError(
            "nothing to do: pass --measured/--reference, --pose, or --grip")
    return 0


# ---------------------------------------------------------------------------
# gaze-stats


def cmd_gaze_stats(args) -> int:
    ctx = RunContext(args)
    dims, iso, support, jobs = _grid_options(ctx, args)
    outdir = ctx.outdir(args.outdir)
    figures = _figures_enabled(ctx, args)

    gaze_path = ctx.input_path("gaze", args.gaze)
    log = gz.load_gaze_log(gaze_path)
    if len(log) == 0:
        raise CliError(f"gaze log {gaze_path} holds no samples")

    mesh_path = ctx.input_path("mesh", args.mesh, required=False)
    if mesh_path is not None:
        mesh = load_ply(mesh_path)
    else:
        pack_path = ctx.input_path("tooth", args.pack)
        _note(f"meshing {pack_path} for hit testing")
        volume = load_sphere_pack(pack_path)
        field = build_field(volume, support_scale=support, iso_level=iso)
        mesh = extract_mesh(field, dims=dims, box=default_grid_box(field, dims),
                            jobs=jobs)

    distances, hits = gz.hit_test_log(log, mesh)
    n_hits = int(hits.sum())
    hmd = gz.DEFAULT_HMD

    w = _writer()
    _section("gaze-stats")
    w.writerow(["key", "value"])
    w.writerow(["samples", len(log)])
    w.writerow(["hits", n_hits])
    w.writerow(["hit_rate", _fmt(n_hits / len(log))])

    if n_hits:
        mean_mm = float(distances[hits].mean())
        w.writerow(["mean_eye_tooth_distance_mm", _fmt(mean_mm)])
        distance_cm = mean_mm / 10.0
    elif args.distance_cm is not None:
        distance_cm = float(args.distance_cm)
        _note("no fixation: no gaze ray hits the surface; "
              "using --distance-cm for the footprint")
    else:
        raise CliError("no fixation: no gaze ray hits the surface "
                       "(pass --distance-cm to compute the footprint anyway)")
    if args.distance_cm is not None:
        distance_cm = float(args.distance_cm)

    extent = float(args.extent_cm)
    share = gz.screen_share(extent, distance_cm, hmd)
    w.writerow(["extent_cm", _fmt(extent)])
    w.writerow(["distance_cm", _fmt(distance_cm)])
    w.writerow(["pixel_footprint_px", _fmt(share["footprint_px"])])
    w.writerow(["per_eye_share", _fmt(share["per_eye_share"])])
    w.writerow(["combined_share", _fmt(share["combined_share"])])

    if figures:
        figdir = outdir / "figures"
        figdir.mkdir(parents=True, exist_ok=True)
        p = figs.gaze_figure(distances, hits, figdir / "gaze.png")
        _note(f"figure written to {p}")
    return 0


# ---------------------------------------------------------------------------
# study-report


def _corr_rows(w, name: str, x, y):
    try:
        res = st.pearson(x, y)
        w.writerow([name, _fmt(res.r), _fmt(res.p_value), res.n])
        return res
    except ValueError as exc:
        _note(f"correlation '{name}' skipped: {exc}")
        w.writerow([name, "nan", "nan", len(np.asarray(x))])
        return None


def cmd_study_report(args) -> int:
    ctx = RunContext(args)
    outdir = ctx.outdir(args.outdir)
    figures = _figures_enabled(ctx, args)
    tails = st.Tails.parse(ctx.option("tails", args.tails, "one"))

    study_path = ctx.input_path("study", args.study)
    cols, skipped = fx.load_study_table(study_path, strict=False)
    for rownum, reason in skipped:
        _note(f"study row {rownum} skipped: {reason}")
    n = cols["e0"].size
    if n < 4:
        raise CliError(f"study table {study_path} has too few usable rows ({n})")
    _note(f"analyzing {n} participants from {study_path}"
          + (f" ({len(skipped)} rows skipped)" if skipped else ""))

    gains = cols["e1"] - cols["e0"]
    screen = st.iqr_outliers(gains)
    kept = screen.kept_values
    kept_idx = screen.kept_indices

    w = _writer()
    _section("outlier-screen")
    w.writerow(["key", "value"])
    w.writerow(["q1", _fmt(screen.q1)])
    w.writerow(["q3", _fmt(screen.q3)])
    w.writerow(["lower_fence", _fmt(screen.lower_fence)])
    w.writerow(["upper_fence", _fmt(screen.upper_fence)])
    w.writerow(["kept", kept.size])
    w.writerow(["removed", screen.removed_values.size])

    _section("removed-participants")
    w.writerow(["participantId", "gain"])
    for i in screen.removed_indices:
        w.writerow([cols["participantId"][int(i)], _fmt(float(gains[int(i)]))])

    _section("learning-gain-test")
    w.writerow(["key", "value"])
    w.writerow(["n", kept.size])
    w.writerow(["mean_gain", _fmt(float(kept.mean()))])
    w.writerow(["sd_gain", _fmt(float(kept.std(ddof=1)))])
    t_res = st.paired_ttest(kept, tails)
    w.writerow(["t", _fmt(t_res.statistic)])
    w.writerow(["dof", _fmt(t_res.dof)])
    w.writerow(["p", _fmt(t_res.p_value)])
    w.writerow(["tails", tails.value])
    try:
        norm = st.normality(kept)
        w.writerow(["shapiro_w", _fmt(norm.statistic)])
        w.writerow(["shapiro_p", _fmt(norm.p_value)])
    except ValueError as exc:
        _note(f"normality unavailable for gains: {exc}")

    groups_kept = cols["group"][kept_idx]
    group_names = [g for g in dict.fromkeys(cols["group"].tolist())]
    _section("groups")
    w.writerow(["group", "n", "mean_gain", "sd_gain", "mean_e0", "mean_e1"])
    group_stats = []
    for g in group_names:
        sel = groups_kept == g
        gk = kept[sel]
        e0g = cols["e0"][kept_idx][sel]
        e1g = cols["e1"][kept_idx][sel]
        sd = float(gk.std(ddof=1)) if gk.size > 1 else math.nan
        group_stats.append((g, gk.mean() if gk.size else math.nan, sd))
        w.writerow([g, int(gk.size),
                    _fmt(float(gk.mean()) if gk.size else math.nan), _fmt(sd),
                    _fmt(float(e0g.mean()) if e0g.size else math.nan),
                    _fmt(float(e1g.mean()) if e1g.size else math.nan)])

    _section("group-tests")
    w.writerow(["test", "statistic", "dof", "p"])
    try:
        groups_data = [kept[groups_kept == g] for g in group_names]
        anova = st.one_way_anova(groups_data)
        w.writerow(["anova_gain_by_group", _fmt(anova.f_statistic),
                    f"{anova.dof_between};{anova.dof_within}", _fmt(anova.p_value)])
    except ValueError as exc:
        _note(f"anova skipped: {exc}")
    for margin_name, predicate in (
        ("welch_stereo_vs_mono", lambda g: str(g).split("/")[0] == "stereo"),
        ("welch_aligned_vs_misaligned", lambda g: str(g).split("/")[-1] == "aligned"),
    ):
        sel = np.array([predicate(g) for g in groups_kept], dtype=bool)
        if 2 <= sel.sum() <= sel.size - 2:
            try:
                res = st.welch_ttest(kept[sel], kept[~sel], st.Tails.TWO)
                w.writerow([margin_name, _fmt(res.statistic), _fmt(res.dof),
                            _fmt(res.p_value)])
            except ValueError as exc:
                _note(f"{margin_name} skipped: {exc}")
        else:
            _note(f"{margin_name} skipped: group margin too small")

    _section("correlations")
    w.writerow(["pair", "r", "p", "n"])
    e0k = cols["e0"][kept_idx]
    trial1k = cols["trial1"][kept_idx]
    virtual_gain = (cols["trial6"] - cols["trial1"])[kept_idx]
    dist_k = cols["meanEyeToothDistance"][kept_idx]
    r1 = _corr_rows(w, "pre_error_vs_trial1", e0k, trial1k)
    r2 = _corr_rows(w, "real_gain_vs_virtual_gain", kept, virtual_gain)
    r3 = _corr_rows(w, "eye_tooth_distance_vs_gain", dist_k, kept)

    if figures:
        figdir = outdir / "figures"
        figdir.mkdir(parents=True, exist_ok=True)
        paths = [
            figs.gains_figure(gains, (screen.lower_fence, screen.upper_fence),
                              figdir / "gains.png"),
            figs.group_means_figure(
                [g for g, _, _ in group_stats],
                [m for _, m, _ in group_stats],
                [s for _, _, s in group_stats],
                figdir / "group_means.png"),
            figs.trials_figure(
                np.column_stack([cols[f"trial{j}"] for j in range(1, 7)])[kept_idx],
                groups_kept, figdir / "trials.png"),
            figs.scatter_figure(e0k, trial1k, "pre-test error", "trial 1 score",
                                figdir / "pre_vs_trial1.png",
                                r=r1.r if r1 else None),
            figs.scatter_figure(kept, virtual_gain, "real gain", "virtual gain",
                                figdir / "real_vs_virtual.png",
                                r=r2.r if r2 else None),
            figs.scatter_figure(dist_k, kept, "mean eye-tooth distance (cm)",
                                "gain", figdir / "distance_vs_gain.png",
                                r=r3.r if r3 else None),
        ]
        for p in paths:
            _note(f"figure written to {p}")
    return 0


# ---------------------------------------------------------------------------
# make-fixtures


def cmd_make_fixtures(args) -> int:
    ctx = RunContext(args)
    outdir = ctx.outdir(args.outdir)
    seed = int(ctx.option("seed", args.seed, 7))

    w = _writer()
    _section("make-fixtures")
    w.writerow(["kind", "path"])

    def emit(kind, path):
        w.writerow([kind, str(path)])

    _note("building reference tooth (280k spheres)")
    tooth = fx.reference_tooth()
    save_sphere_pack(tooth, outdir / "tooth.json")
    emit("tooth_pack", outdir / "tooth.json")
    save_sphere_pack(fx.ideal_outcome_volume(tooth), outdir / "ideal.json")
    emit("ideal_pack", outdir / "ideal.json")

    script = fx.cavity_drill_script()
    save_drill_script(script, outdir / "cavity.drill")
    emit("drill_script", outdir / "cavity.drill")

    # a small per-trial batch: two participants, three runs each, in which
    # later runs complete more of the cavity
    trial_rows = []
    for pid, group in (("P01", "stereo/aligned"), ("P02", "mono/misaligned")):
        for trial_index, fraction in ((1, 0.35), (2, 0.7), (3, 1.0)):
            name = f"trial_{pid}_{trial_index}.drill"
            save_drill_script(fx.truncate_script(script, fraction), outdir / name)
            trial_rows.append([pid, group, trial_index, name])
    with open(outdir / "trials.csv", "w", encoding="utf-8", newline="") as fh:
        tw = csv.writer(fh)
        tw.writerow(["participantId", "group", "trialIndex", "script"])
        tw.writerows(trial_rows)
    emit("trials_table", outdir / "trials.csv")

    fx.write_study_table(fx.study_table(seed), outdir / "study.csv")
    emit("study_table", outdir / "study.csv")

    outcomes = fx.synthetic_outcomes()
    fx.write_outcomes_table(outcomes, outdir / "outcomes.csv")
    emit("outcomes_table", outdir / "outcomes.csv")
    fx.write_experts_table(fx.synthetic_experts(outcomes), outdir / "experts.csv")
    emit("experts_table", outdir / "experts.csv")

    gz.save_gaze_log(outdir / "gaze.log", fx.synthetic_gaze_log())
    emit("gaze_log", outdir / "gaze.log")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p, grid=False, outdir=True):
    p.add_argument("--manifest", help="run manifest JSON")
    p.add_argument("--workdir", help="directory searched for conventional input names")
    if outdir:
        p.add_argument("--outdir", help="directory for output files")
    if grid:
        p.add_argument("--grid", help="lattice dims NXxNYxNZ (default 90x135x90)")
        p.add_argument("--iso", type=float, help="iso level in (0,1), default 0.5")
        p.add_argument("--kernel-support", type=float, dest="kernel_support",
                       help="kernel support as a multiple of sphere radius (default 2)")
        p.add_argument("--jobs", type=int, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drillsim",
        description="Volumetric drilling simulation core: voxelize, replay, "
                    "score, and analyze.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="sphere pack to voxel grid and surface mesh")
    _add_common(p, grid=True)
    p.add_argument("--pack", help="sphere pack JSON")
    p.add_argument("--out-grid", help="voxel grid output path")
    p.add_argument("--out-mesh", help="mesh PLY output path")
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("drill-replay", help="apply a drill script to a pack")
    _add_common(p)
    p.add_argument("--pack", help="sphere pack JSON")
    p.add_argument("--script", help="drill script file")
    p.add_argument("--out-pack", help="drilled pack output path")
    p.set_defaults(func=cmd_drill_replay)

    p = sub.add_parser("score", help="score outcomes against the ideal cavity")
    _add_common(p, grid=True)
    p.add_argument("--pack", help="pristine sphere pack JSON")
    p.add_argument("--ideal", help="ideal outcome pack JSON")
    p.add_argument("--script", help="drill script to replay and score")
    p.add_argument("--outcome-pack", dest="outcome_pack",
                   help="already-drilled pack to score")
    p.add_argument("--trials", help="trials CSV (participantId,group,trialIndex,script)")
    p.add_argument("--outcomes", help="CSV of tp,tn,fp,fn rows to score directly")
    p.add_argument("--out", help="write the full JSON report here")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="write PNG figures next to the report")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare-metrics",
                       help="rank candidate metrics over an outcome batch")
    _add_common(p)
    p.add_argument("--outcomes", help="CSV of tp,tn,fp,fn rows")
    p.add_argument("--experts", help="CSV of expert scores (column 'expert')")
    p.add_argument("--k", type=int, help="coverage subset size (default 20)")
    p.add_argument("--kappa-weighting", dest="kappa_weighting",
                   choices=("none", "linear", "quadratic"),
                   help="agreement weighting (default linear)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="write PNG figures")
    p.set_defaults(func=cmd_compare_metrics)

    p = sub.add_parser("calibrate", help="camera correction and tool-tip offsets")
    _add_common(p, outdir=False)
    p.add_argument("--measured", help="measured pose x,y,z,rx,ry,rz")
    p.add_argument("--reference", help="reference pose x,y,z,rx,ry,rz")
    p.add_argument("--save-config", dest="save_config",
                   help="write the correction JSON here")
    p.add_argument("--config", help="correction JSON to apply")
    p.add_argument("--pose", help="pose x,y,z,rx,ry,rz to correct with --config")
    p.add_argument("--grip", help="gripped tracker position x,y,z")
    p.add_argument("--down", default="-y", help="tool down axis label (default -y)")
    p.add_argument("--forward", default="+z", help="tool forward axis label (default +z)")
    p.add_argument("--down-mm", dest="down_mm", type=float,
                   default=cal.DEFAULT_DOWN_OFFSET_MM,
                   help="grip-to-tip down offset in mm")
    p.add_argument("--forward-mm", dest="forward_mm", type=float,
                   default=cal.DEFAULT_FORWARD_OFFSET_MM,
                   help="grip-to-tip forward offset in mm")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("gaze-stats", help="hit rates, distances, screen coverage")
    _add_common(p, grid=True)
    p.add_argument("--gaze", help="gaze log file")
    p.add_argument("--mesh", help="surface mesh PLY (else meshed from --pack)")
    p.add_argument("--pack", help="sphere pack JSON to mesh for hit testing")
    p.add_argument("--extent-cm", dest="extent_cm", type=float, default=3.26,
                   help="physical extent of the viewed object in cm (default 3.26)")
    p.add_argument("--distance-cm", dest="distance_cm", type=float,
                   help="override the viewing distance in cm")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="write PNG figures")
    p.set_defaults(func=cmd_gaze_stats)

    p = sub.add_parser("study-report", help="full analysis of a study table")
    _add_common(p)
    p.add_argument("--study", help="study CSV")
    p.add_argument("--tails", help="one|two|less|greater (default one)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   help="write PNG figures")
    p.set_defaults(func=cmd_study_report)

    p = sub.add_parser("make-fixtures",
                       help="write the synthetic demo dataset into a directory")
    _add_common(p)
    p.add_argument("--seed", type=int, help="study table seed (default 7)")
    p.set_defaults(func=cmd_make_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
