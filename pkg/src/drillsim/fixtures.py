"""Deterministic synthetic datasets: the reference tooth sphere pack, the
ideal cavity, a plausible drill run, a participant study table, scored-outcome
batches, and a gaze recording. Everything is seeded, so repeated calls (and
the files the CLI writes from them) are reproducible bit for bit.
"""
from __future__ import annotations

import csv
import math

import numpy as np

from .drill import DrillScript, DrillStep
from .field import DEFAULT_DIMS, build_field, default_grid_box
from .gaze import GazeLog, GazeSample
from .scoring import ClassificationCounts
from .volume import BoundingBox, SpherePackVolume, Tissue
from .voxelgrid import VoxelGrid, voxelize

__all__ = [
    "ENAMEL_SPHERES",
    "DENTIN_SPHERES",
    "PULP_SPHERES",
    "OUTER_SEMI_AXES",
    "ENAMEL_INNER_SCALE",
    "PULP_SEMI_AXES",
    "PULP_CENTER",
    "CAVITY_HALF_WIDTH",
    "CAVITY_FLOOR_Y",
    "reference_tooth",
    "ideal_removal_mask",
    "ideal_outcome_volume",
    "reference_grids",
    "cavity_drill_script",
    "study_gains",
    "study_table",
    "STUDY_COLUMNS",
    "STUDY_GROUPS",
    "write_study_table",
    "load_study_table",
    "synthetic_outcomes",
    "write_outcomes_table",
    "load_outcomes_table",
    "synthetic_experts",
    "write_experts_table",
    "load_experts_table",
    "truncate_script",
    "synthetic_gaze_log",
]

# Tooth geometry (millimetres). The crown is an ellipsoid; enamel is the
# upper outer shell, the pulp chamber is a small interior ellipsoid, dentin
# fills the rest.
OUTER_SEMI_AXES = (5.2, 8.0, 5.2)
ENAMEL_INNER_SCALE = 0.87
PULP_SEMI_AXES = (1.3, 3.5, 1.3)
PULP_CENTER = (0.0, 1.0, 0.0)

ENAMEL_SPHERES = 100_000
DENTIN_SPHERES = 170_000
PULP_SPHERES = 10_000

# The ideal cavity: a square shaft down the crown's axis that just reaches
# the pulp roof (which sits at y = 4.5).
CAVITY_HALF_WIDTH = 1.6
CAVITY_FLOOR_Y = 4.0

_RADIUS_PER_PITCH = 0.75
_JITTER_PER_PITCH = 0.25


def _ellipsoid_s2(points: np.ndarray, semi, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    q = (points - np.asarray(center)) / np.asarray(semi)
    return np.einsum("ij,ij->i", q, q)


def _in_enamel(points: np.ndarray) -> np.ndarray:
    s2 = _ellipsoid_s2(points, OUTER_SEMI_AXES)
    return (points[:, 1] > 0.0) & (s2 <= 1.0) & (s2 >= ENAMEL_INNER_SCALE ** 2)


def _in_pulp(points: np.ndarray) -> np.ndarray:
    return _ellipsoid_s2(points, PULP_SEMI_AXES, PULP_CENTER) <= 1.0


def _in_dentin(points: np.ndarray) -> np.ndarray:
    outer = _ellipsoid_s2(points, OUTER_SEMI_AXES) <= 1.0
    return outer & ~_in_enamel(points) & ~_in_pulp(points)


def _region_cloud(membership, bbox_lo, bbox_hi, count: int, volume_mm3: float,
                  seed_key) -> tuple[np.ndarray, float]:
    """Jittered-grid points filling a region, thinned to an exact count.

    A plain uniform draw leaves Poisson voids that read as holes in the
    reconstructed surface; a jittered grid keeps spacing tight. We start from
    a pitch slightly denser than the target count needs, drop points outside
    the region, then keep an evenly strided subset of exactly `count`.
    """
    lo = np.asarray(bbox_lo, dtype=np.float64)
    hi = np.asarray(bbox_hi, dtype=np.float64)
    pitch = (volume_mm3 / (count * 1.10)) ** (1.0 / 3.0)
    for attempt in range(16):
        rng = np.random.default_rng([*seed_key, attempt])
        steps = np.maximum(np.ceil((hi - lo) / pitch).astype(int), 1)
        axes = [lo[a] + (np.arange(steps[a]) + 0.5) * pitch for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        pts = pts + rng.uniform(-_JITTER_PER_PITCH, _JITTER_PER_PITCH,
                                size=pts.shape) * pitch
        pts = pts[membership(pts)]
        if pts.shape[0] >= count:
            keep = np.round(np.linspace(0, pts.shape[0] - 1, count)).astype(np.int64)
            return np.ascontiguousarray(pts[keep]), pitch
        pitch *= 0.97
    raise RuntimeError("could not fill the region at the requested density")


def reference_tooth(seed: int = 20260501) -> SpherePackVolume:
    """The standard synthetic tooth: 280k tissue-labelled spheres.

    Enamel, dentin, and pulp are packed separately (enamel first, then
    dentin, then pulp, so indices group by tissue) on jittered grids whose
    pitch matches each tissue's share of the crown volume. Sphere radius is
    0.75 of the local pitch.
    """
    a, b, c = OUTER_SEMI_AXES
    v_outer = 4.0 / 3.0 * math.pi * a * b * c
    v_pulp = 4.0 / 3.0 * math.pi * math.prod(PULP_SEMI_AXES)
    v_enamel = v_outer * (1.0 - ENAMEL_INNER_SCALE ** 3) / 2.0
    v_dentin = v_outer - v_enamel - v_pulp

    regions = [
        (Tissue.ENAMEL, _in_enamel, (-a, 0.0, -c), (a, b, c), ENAMEL_SPHERES, v_enamel),
        (Tissue.DENTIN, _in_dentin, (-a, -b, -c), (a, b, c), DENTIN_SPHERES, v_dentin),
        (
            Tissue.PULP,
            _in_pulp,
            tuple(np.asarray(PULP_CENTER) - np.asarray(PULP_SEMI_AXES)),
            tuple(np.asarray(PULP_CENTER) + np.asarray(PULP_SEMI_AXES)),
            PULP_SPHERES,
            v_pulp,
        ),
    ]
    all_centers = []
    all_radii = []
    all_codes = []
    for tissue, member, blo, bhi, count, vol in regions:
        pts, pitch = _region_cloud(member, blo, bhi, count, vol, (seed, tissue.value))
        all_centers.append(pts)
        all_radii.append(np.full(count, _RADIUS_PER_PITCH * pitch))
        all_codes.append(np.full(count, tissue.value, dtype=np.uint8))
    centers = np.concatenate(all_centers)
    radii = np.concatenate(all_radii)
    codes = np.concatenate(all_codes)
    rmax = float(radii.max())
    box = BoundingBox(np.array([-a, -b, -c]) - rmax, np.array([a, b, c]) + rmax)
    return SpherePackVolume(centers, radii, codes, box)


def ideal_removal_mask(volume: SpherePackVolume) -> np.ndarray:
    """Spheres the ideal cavity takes out: the square shaft down the crown."""
    c = volume.centers
    return (
        (np.abs(c[:, 0]) < CAVITY_HALF_WIDTH)
        & (np.abs(c[:, 2]) < CAVITY_HALF_WIDTH)
        & (c[:, 1] > CAVITY_FLOOR_Y)
    )


def ideal_outcome_volume(volume: SpherePackVolume) -> SpherePackVolume:
    """Copy of the pack with the ideal cavity's spheres flagged removed."""
    out = volume.copy()
    out.removed |= ideal_removal_mask(out)
    return out


def reference_grids(volume: SpherePackVolume, dims=DEFAULT_DIMS,
                    jobs=None) -> tuple[VoxelGrid, VoxelGrid, BoundingBox]:
    """(pristine grid, ideal-outcome grid, shared sampling box).

    Both grids are voxelized over the same box (computed from the full
    sphere set, removal flags ignored) so they stay voxel-compatible with any
    drilled outcome of the same pack.
    """
    pristine_field = build_field(volume)
    box = default_grid_box(pristine_field, dims)
    pristine = voxelize(pristine_field, dims=dims, box=box, jobs=jobs)
    ideal = voxelize(build_field(ideal_outcome_volume(volume)),
                     dims=dims, box=box, jobs=jobs)
    return pristine, ideal, box


def cavity_drill_script(bur_radius: float = 0.65) -> DrillScript:
    """A plausible (deliberately imperfect) milling of the ideal cavity.

    Nine-tip serpentine passes descend in eight layers. The bur undercuts
    the cavity corners (leaving material that should have gone) and the
    lowest pass dips below the ideal floor (taking material that should have
    stayed), so scoring a replay yields nonzero counts in every bucket.
    """
    steps = [DrillStep(t=0.0, position=(0.0, 12.0, 0.0),
                       orientation_deg=(0.0, 0.0, 0.0),
                       bur_radius=bur_radius, active=False)]
    t = 0.1
    lateral = (-0.9, 0.0, 0.9)
    for li, y in enumerate(np.linspace(7.5, 4.3, 8)):
        xs = lateral if li % 2 == 0 else lateral[::-1]
        for xi, x in enumerate(xs):
            zs = lateral if xi % 2 == 0 else lateral[::-1]
            for z in zs:
                steps.append(DrillStep(t=t, position=(float(x), float(y), float(z)),
                                       orientation_deg=(0.0, 0.0, 0.0),
                                       bur_radius=bur_radius, active=True))
                t = round(t + 0.1, 6)
    steps.append(DrillStep(t=t, position=(0.0, 12.0, 0.0),
                           orientation_deg=(0.0, 0.0, 0.0),
                           bur_radius=bur_radius, active=False))
    return DrillScript(steps=tuple(steps))


# ---------------------------------------------------------------------------
# Study data


_GAIN_OUTLIERS = (-5.0, -5.0, 4.0)
_GAIN_OUTLIER_INDICES = (7, 19, 33)
_KEPT_GAIN_MEAN = -0.2432
_KEPT_GAIN_SD = 1.43
_N_PARTICIPANTS = 40


def study_gains(seed: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Forty learning gains with three planted fence-breaking outliers.

    The 37 regular gains are affine-standardized to mean -0.2432 and sample
    standard deviation 1.43 exactly, so the downstream paired test statistic
    is pinned by construction. Returns (gains, planted outlier indices);
    quartile fences recovered from the full forty must remove exactly the
    planted three, and the generator retries seeds until they do.
    """
    from .stats import iqr_outliers

    planted = np.array(_GAIN_OUTLIER_INDICES, dtype=np.int64)
    for attempt in range(64):
        rng = np.random.default_rng([seed, attempt])
        raw = rng.normal(size=_N_PARTICIPANTS - len(_GAIN_OUTLIERS))
        z = (raw - raw.mean()) / raw.std(ddof=1)
        kept = _KEPT_GAIN_MEAN + _KEPT_GAIN_SD * z
        gains = np.empty(_N_PARTICIPANTS, dtype=np.float64)
        mask = np.ones(_N_PARTICIPANTS, dtype=bool)
        mask[planted] = False
        gains[mask] = kept
        gains[planted] = _GAIN_OUTLIERS
        screened = iqr_outliers(gains)
        if np.array_equal(screened.removed_indices, planted):
            return gains, planted
    raise RuntimeError("no seed attempt produced the planted outlier split")


STUDY_COLUMNS = (
    "participantId", "group", "e0", "e1",
    "trial1", "trial2", "trial3", "trial4", "trial5", "trial6",
    "meanEyeToothDistance",
)


#: The study's four-group design: viewing mode crossed with tool alignment.
STUDY_GROUPS = (
    "stereo/aligned", "mono/aligned", "stereo/misaligned", "mono/misaligned",
)

# per-trial improvement rate by group: stereo helps, misalignment hurts
_GROUP_RATE = {
    "stereo/aligned": (1.1, 1.5),
    "mono/aligned": (0.7, 1.1),
    "stereo/misaligned": (0.5, 0.9),
    "mono/misaligned": (0.3, 0.6),
}


def study_table(seed: int = 7) -> list[dict]:
    """Synthetic participant table for the analysis pipeline.

    Forty rows, ten per group: id, group, pre and post error counts whose
    difference reproduces study_gains, six per-trial scores, and a mean
    viewing distance in centimetres.
    """
    gains, _ = study_gains(seed)
    rng = np.random.default_rng([seed, 999])
    rows = []
    per_group = _N_PARTICIPANTS // len(STUDY_GROUPS)
    for i in range(_N_PARTICIPANTS):
        group = STUDY_GROUPS[i // per_group]
        e0 = round(float(rng.uniform(8.0, 14.0)), 2)
        e1 = e0 + float(gains[i])
        base = float(rng.uniform(6.0, 12.0))
        rate = float(rng.uniform(*_GROUP_RATE[group]))
        trials = [
            max(0.05, base - rate * j + float(rng.normal(0.0, 0.35)))
            for j in range(6)
        ]
        row = {
            "participantId": f"P{i + 1:02d}",
            "group": group,
            "e0": e0,
            "e1": e1,
            "meanEyeToothDistance": float(np.clip(rng.normal(23.0, 1.5), 18.0, 28.0)),
        }
        for j, v in enumerate(trials, start=1):
            row[f"trial{j}"] = v
        rows.append(row)
    return rows


def write_study_table(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STUDY_COLUMNS)
        for row in rows:
            writer.writerow([
                row[c] if c in ("participantId", "group") else repr(float(row[c]))
                for c in STUDY_COLUMNS
            ])


def load_study_table(path, strict: bool = True):
    """Columns of the study CSV; numeric columns come back as float arrays.

    With strict=False, malformed data rows are skipped instead of raising,
    and the return value becomes (columns, skipped) where skipped lists
    (1-based data row number, reason) pairs.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != STUDY_COLUMNS:
            raise ValueError(f"unexpected study table header: {header}")
        raw = list(reader)
    rows = []
    skipped: list[tuple[int, str]] = []
    for rownum, r in enumerate(raw, start=1):
        if len(r) != len(STUDY_COLUMNS):
            problem = f"expected {len(STUDY_COLUMNS)} fields, got {len(r)}"
            if strict:
                raise ValueError(f"row {rownum}: {problem}")
            skipped.append((rownum, problem))
            continue
        try:
            parsed = [
                r[j] if name in ("participantId", "group") else float(r[j])
                for j, name in enumerate(STUDY_COLUMNS)
            ]
        except ValueError as exc:
            if strict:
                raise ValueError(f"row {rownum}: {exc}") from None
            skipped.append((rownum, str(exc)))
            continue
        rows.append(parsed)
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(STUDY_COLUMNS):
        vals = [r[j] for r in rows]
        if name in ("participantId", "group"):
            cols[name] = np.array(vals, dtype=object)
        else:
            cols[name] = np.array(vals, dtype=np.float64)
    if strict:
        return cols
    return cols, skipped


def synthetic_outcomes(seed: int = 11, n: int = 240) -> list[ClassificationCounts]:
    """Classification-count tuples spanning a realistic quality range.

    Mimics 40 participants x 6 trials of cavity outcomes: most of the tooth
    is correctly kept, the drilled fraction varies in completeness, and a
    little over-drilling creeps in on bad runs.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(int(n)):
        should_keep = int(rng.integers(38_000, 42_000))
        should_drill = int(rng.integers(6_000, 9_000))
        missed = int(round(should_drill * float(rng.uniform(0.0, 0.35))))   # under-drill
        overshot = int(round(should_keep * float(rng.uniform(0.0, 0.02))))  # over-drill
        out.append(ClassificationCounts(
            tp=should_keep - overshot,
            tn=should_drill - missed,
            fp=missed,
            fn=overshot,
        ))
    return out


def write_outcomes_table(counts: list[ClassificationCounts], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tp", "tn", "fp", "fn"])
        for c in counts:
            writer.writerow([c.tp, c.tn, c.fp, c.fn])


def load_outcomes_table(path) -> list[ClassificationCounts]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["tp", "tn", "fp", "fn"]:
            raise ValueError(f"unexpected outcomes header: {header}")
        return [
            ClassificationCounts(tp=int(r[0]), tn=int(r[1]), fp=int(r[2]), fn=int(r[3]))
            for r in reader
        ]


def synthetic_experts(counts: list[ClassificationCounts], seed: int = 13,
                      noise_sd: float = 0.35) -> np.ndarray:
    """Expert panel scores: a monotone reading of outcome quality plus noise.

    Experts grade on the same 0..15 error scale as the automated score, in
    half-point steps, so rank agreement with the automated value should be
    near-perfect and rank agreement with unrelated metrics should not be.
    """
    from .scoring import dentist_closed_form

    rng = np.random.default_rng(seed)
    base = np.array([dentist_closed_form(c) for c in counts])
    noisy = base + rng.normal(0.0, noise_sd, size=base.size)
    return np.clip(np.round(noisy * 2.0) / 2.0, 0.0, 15.0)


def write_experts_table(scores: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["expert"])
        for v in scores:
            writer.writerow([repr(float(v))])


def load_experts_table(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["expert"]:
            raise ValueError(f"unexpected experts header: {header}")
        return np.array([float(r[0]) for r in reader], dtype=np.float64)


def truncate_script(script: DrillScript, fraction: float) -> DrillScript:
    """The first part of a drill run: an unfinished (lower-quality) outcome."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError("fraction must be in (0, 1]")
    n = max(1, int(round(len(script) * fraction)))
    return DrillScript(steps=tuple(list(script)[:n]))


def synthetic_gaze_log(seed: int = 3, n: int = 120,
                       miss_every: int = 7) -> GazeLog:
    """A gaze recording around 23 cm from the tooth at the origin.

    Eyes sit 63 mm apart, about 230 mm out; gaze aims near the crown with a
    little scatter, and every `miss_every`-th sample looks away so hit
    testing has genuine misses to report.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(int(n)):
        mid = np.array([0.0, 40.0, 230.0]) + rng.normal(0.0, 3.0, size=3)
        half_ipd = np.array([31.5, 0.0, 0.0])
        target = rng.normal(0.0, 2.0, size=3)
        direction = target - mid
        if miss_every and i % miss_every == miss_every - 1:
            direction = np.array([0.0, 1.0, 0.2])  # up and away: a miss
        samples.append(GazeSample(
            t=0.02 * i,
            left_eye=mid - half_ipd,
            right_eye=mid + half_ipd,
            direction=direction,
        ))
    return GazeLog(samples=tuple(samples))
