"""Eye-tracking analytics: cyclops ray casting against the tooth surface,
fixation distance summaries, and headset screen-coverage math.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh

__all__ = [
    "HmdSpec",
    "DEFAULT_HMD",
    "GazeSample",
    "GazeLog",
    "parse_gaze_log",
    "load_gaze_log",
    "save_gaze_log",
    "cyclops_ray",
    "ray_mesh_distance",
    "hit_test_log",
    "mean_eye_tooth_distance",
    "pixel_footprint",
    "screen_share",
]


@dataclass(frozen=True)
class HmdSpec:
    """Headset display geometry. Defaults match the study hardware:
    1440x1600 per eye (2880x1600 combined) behind a 98 degree field of view.
    """

    per_eye_width_px: int = 1440
    per_eye_height_px: int = 1600
    fov_deg: float = 98.0

    def __post_init__(self):
        if self.per_eye_width_px <= 0 or self.per_eye_height_px <= 0:
            raise ValueError("display dimensions must be positive")
        if not (0.0 < self.fov_deg < 360.0):
            raise ValueError("field of view must be in (0, 360) degrees")

    @property
    def combined_width_px(self) -> int:
        return 2 * self.per_eye_width_px


DEFAULT_HMD = HmdSpec()


def _vec3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have exactly 3 components")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GazeSample:
    """One tracker frame: both eye positions plus the combined gaze direction."""

    t: float
    left_eye: np.ndarray
    right_eye: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("sample time must be finite")
        object.__setattr__(self, "left_eye", _vec3(self.left_eye, "left_eye"))
        object.__setattr__(self, "right_eye", _vec3(self.right_eye, "right_eye"))
        d = _vec3(self.direction, "direction")
        if float(np.linalg.norm(d)) == 0.0:
            raise ValueError("gaze direction must be nonzero")
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class GazeLog:
    samples: tuple

    def __post_init__(self):
        samples = tuple(self.samples)
        for s in samples:
            if not isinstance(s, GazeSample):
                raise TypeError("GazeLog holds GazeSample items")
        for prev, cur in zip(samples, samples[1:]):
            if cur.t <= prev.t:
                raise ValueError("gaze log timestamps must be strictly increasing")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def parse_gaze_log(text: str) -> GazeLog:
    """Parse whitespace-delimited rows: t lx ly lz rx ry rz dx dy dz.

    Blank lines and '#' comments are skipped.
    """
    samples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 10:
            raise ValueError(f"line {lineno}: expected 10 fields, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        samples.append(
            GazeSample(t=vals[0], left_eye=vals[1:4], right_eye=vals[4:7],
                       direction=vals[7:10])
        )
    return GazeLog(samples=tuple(samples))


def load_gaze_log(path) -> GazeLog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_gaze_log(fh.read())


def save_gaze_log(path, log: GazeLog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# t lx ly lz rx ry rz dx dy dz\n")
        for s in log:
            row = [s.t, *s.left_eye, *s.right_eye, *s.direction]
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def cyclops_ray(sample: GazeSample) -> tuple[np.ndarray, np.ndarray]:
    """Single viewing ray: origin midway between the eyes, unit direction."""
    origin = 0.5 * (sample.left_eye + sample.right_eye)
    d = sample.direction
    return origin, d / float(np.linalg.norm(d))


def ray_mesh_distance(origin, direction, mesh: TriangleMesh):
    """Distance along the ray to the nearest triangle hit, or None.

    Moller-Trumbore over every triangle, vectorized; the direction is
    normalized first so the return value is a euclidean distance.
    """
    if mesh.n_triangles == 0:
        return None
    o = np.asarray(origin, dtype=np.float64).reshape(3)
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("ray direction must be nonzero")
    d = d / norm

    tri = mesh.vertices[mesh.triangles]          # (m, 3, 3)
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0
    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    eps = 1e-12
    ok = np.abs(det) > eps
    inv_det = np.zeros_like(det)
    inv_det[ok] = 1.0 / det[ok]
    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,j->i", qvec, d) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = ok & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= 0.0)
    if not np.any(hit):
        return None
    return float(t[hit].min())


def hit_test_log(log: GazeLog, mesh: TriangleMesh):
    """Cast every sample's cyclops ray at the mesh.

    Returns (distances, hit_mask); distances hold nan where the ray missed.
    """
    n = len(log)
    distances = np.full(n, np.nan, dtype=np.float64)
    hits = np.zeros(n, dtype=bool)
    for i, sample in enumerate(log):
        origin, direction = cyclops_ray(sample)
        dist = ray_mesh_distance(origin, direction, mesh)
        if dist is not None:
            distances[i] = dist
            hits[i] = True
    return distances, hits


def mean_eye_tooth_distance(log: GazeLog, mesh: TriangleMesh) -> float:
    """Mean viewing distance over the samples whose gaze ray hits the tooth."""
    distances, hits = hit_test_log(log, mesh)
    if not np.any(hits):
        raise ValueError("no fixation: no gaze ray hits the surface")
    return float(distances[hits].mean())


def pixel_footprint(extent_cm: float, distance_cm: float,
                    hmd: HmdSpec = DEFAULT_HMD) -> float:
    """Width in pixels an object of the given physical extent covers on one eye.

    The object's angular size 2*atan(extent / (2*distance)) is converted at
    the display's pixels-per-radian rate.
    """
    extent = float(extent_cm)
    distance = float(distance_cm)
    if extent <= 0.0 or distance <= 0.0:
        raise ValueError("extent and distance must be positive")
    angular = 2.0 * math.atan(extent / (2.0 * distance))
    fov_rad = math.radians(hmd.fov_deg)
    return hmd.per_eye_width_px * angular / fov_rad


def screen_share(extent_cm: float, distance_cm: float,
                 hmd: HmdSpec = DEFAULT_HMD) -> dict:
    """Fraction of the display a square footprint of the object occupies.

    Reported against one eye's panel and against the combined two-eye canvas;
    the combined figure is exactly half the per-eye one.
    """
    side = pixel_footprint(extent_cm, distance_cm, hmd)
    area = side * side
    per_eye = area / (hmd.per_eye_width_px * hmd.per_eye_height_px)
    combined = area / (hmd.combined_width_px * hmd.per_eye_height_px)
    return {
        "footprint_px": side,
        "per_eye_share": per_eye,
        "combined_share": combined,
    }
