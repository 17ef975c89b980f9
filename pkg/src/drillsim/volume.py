"""Tissue-labeled sphere packs: the volumetric tooth representation.

A tooth is a pack of small spheres, each labeled enamel, dentin, or pulp.
Drilling removes spheres; the implicit surface and voxel grids are derived
from whatever spheres remain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "Tissue",
    "Sphere",
    "BoundingBox",
    "SpherePackVolume",
    "load_sphere_pack",
    "save_sphere_pack",
]


class Tissue(Enum):
    ENAMEL = 0
    DENTIN = 1
    PULP = 2

    @property
    def label(self) -> str:
        return self.name.lower()


_TISSUE_BY_LABEL = {t.label: t for t in Tissue}
_TISSUE_BY_CODE = {t.value: t for t in Tissue}

# tissue code stored in voxel grids for empty space
NO_TISSUE = 255


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    tissue: Tissue

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.shape != (3,) or not np.all(np.isfinite(c)):
            raise ValueError("sphere center must be a finite 3-vector")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("sphere radius must be finite and positive")
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class BoundingBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounding box must be finite")
        if np.any(hi <= lo):
            raise ValueError("bounding box must have positive extent on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=1)


class SpherePackVolume:
    """Mutable-by-drilling sphere pack.

    Sphere order is part of the volume's identity: indices are stable, and
    every derived quantity (tissue tie-breaks, file round trips) refers to
    them. Removal flips a flag; spheres are never reordered or dropped.
    """

    def __init__(self, centers, radii, tissues, bounding_box: BoundingBox | None = None):
        centers = np.ascontiguousarray(centers, dtype=np.float64)
        radii = np.ascontiguousarray(radii, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != 3:
            raise ValueError("centers must have shape (n, 3)")
        n = centers.shape[0]
        if radii.shape != (n,):
            raise ValueError("radii must have shape (n,)")
        if not np.all(np.isfinite(centers)):
            raise ValueError("sphere centers must be finite")
        if not (np.all(np.isfinite(radii)) and np.all(radii > 0)):
            raise ValueError("sphere radii must be finite and positive")
        codes = np.empty(n, dtype=np.uint8)
        tissues = list(tissues) if not isinstance(tissues, np.ndarray) else tissues
        if isinstance(tissues, np.ndarray) and tissues.dtype != object:
            codes[:] = tissues.astype(np.uint8)
            if not np.all(np.isin(codes, [t.value for t in Tissue])):
                raise ValueError("unknown tissue code")
        else:
            if len(tissues) != n:
                raise ValueError("tissues must have length n")
            for i, t in enumerate(tissues):
                codes[i] = t.value if isinstance(t, Tissue) else _TISSUE_BY_LABEL[str(t)].value
        self.centers = centers
        self.radii = radii
        self.tissue_codes = codes
        self.removed = np.zeros(n, dtype=bool)
        if bounding_box is None:
            bounding_box = BoundingBox(
                centers.min(axis=0) - radii.max(),
                centers.max(axis=0) + radii.max(),
            )
        self.bounding_box = bounding_box

    @classmethod
    def from_spheres(cls, spheres, bounding_box: BoundingBox | None = None) -> "SpherePackVolume":
        spheres = list(spheres)
        if not spheres:
            raise ValueError("a sphere pack needs at least one sphere")
        centers = np.array([s.center for s in spheres], dtype=np.float64)
        radii = np.array([s.radius for s in spheres], dtype=np.float64)
        codes = np.array([s.tissue.value for s in spheres], dtype=np.uint8)
        return cls(centers, radii, codes, bounding_box)

    def __len__(self) -> int:
        return self.centers.shape[0]

    def sphere(self, i: int) -> Sphere:
        return Sphere(self.centers[i].copy(), float(self.radii[i]),
                      _TISSUE_BY_CODE[int(self.tissue_codes[i])])

    def counts(self, include_removed: bool = True) -> dict[str, int]:
        """Per-tissue sphere counts; by default counts the pristine pack."""
        sel = slice(None) if include_removed else ~self.removed
        codes = self.tissue_codes[sel]
        return {t.label: int(np.count_nonzero(codes == t.value)) for t in Tissue}

    @property
    def n_removed(self) -> int:
        return int(np.count_nonzero(self.removed))

    def copy(self) -> "SpherePackVolume":
        out = SpherePackVolume(self.centers.copy(), self.radii.copy(),
                               self.tissue_codes.copy(), self.bounding_box)
        out.removed = self.removed.copy()
        return out


def save_sphere_pack(volume: SpherePackVolume, path) -> None:
    doc = {
        "counts": volume.counts(include_removed=True),
        "bounding_box": {
            "min": [float(v) for v in volume.bounding_box.lo],
            "max": [float(v) for v in volume.bounding_box.hi],
        },
        "spheres": [
            {
                "center": [float(c) for c in volume.centers[i]],
                "radius": float(volume.radii[i]),
                "tissue": _TISSUE_BY_CODE[int(volume.tissue_codes[i])].label,
            }
            for i in range(len(volume))
        ],
    }
    if volume.n_removed:
        doc["removed"] = [int(i) for i in np.nonzero(volume.removed)[0]]
    with open(path, "w") as f:
        json.dump(doc, f, separators=(",", ":"))
        f.write("\n")


def load_sphere_pack(path) -> SpherePackVolume:
    """Load a sphere-pack JSON file, validating the header against the payload."""
    with open(path) as f:
        doc = json.load(f)
    try:
        declared = {k: int(v) for k, v in doc["counts"].items()}
        bb = doc["bounding_box"]
        box = BoundingBox(np.array(bb["min"], dtype=float), np.array(bb["max"], dtype=float))
        raw = doc["spheres"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed sphere pack file: missing {exc}") from exc

    n = len(raw)
    centers = np.empty((n, 3), dtype=np.float64)
    radii = np.empty(n, dtype=np.float64)
    codes = np.empty(n, dtype=np.uint8)
    for i, s in enumerate(raw):
        try:
            centers[i] = s["center"]
            radii[i] = s["radius"]
            codes[i] = _TISSUE_BY_LABEL[s["tissue"]].value
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"malformed sphere entry {i}: {exc}") from exc

    volume = SpherePackVolume(centers, radii, codes, box)
    actual = volume.counts(include_removed=True)
    for label in _TISSUE_BY_LABEL:
        if declared.get(label, 0) != actual.get(label, 0):
            raise ValueError(
                f"header count mismatch for {label}: "
                f"declared {declared.get(label, 0)}, found {actual.get(label, 0)}"
            )
    inside = box.contains(centers, slack=float(radii.max()))
    if not np.all(inside):
        bad = int(np.nonzero(~inside)[0][0])
        raise ValueError(f"sphere {bad} lies outside the declared bounding box")
    removed = doc.get("removed", [])
    for idx in removed:
        i = int(idx)
        if not (0 <= i < n):
            raise ValueError(f"removed index {i} out of range")
        volume.removed[i] = True
    return volume
