"""Voxel grids: occupancy plus tissue label per voxel.

A voxel is occupied when the field at its center reaches the iso level; an
occupied voxel carries the tissue of its strongest kernel contributor.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .field import DEFAULT_DIMS, LatticeSample, ScalarField, sample_lattice
from .volume import NO_TISSUE, BoundingBox

__all__ = [
    "VoxelGrid",
    "voxelize",
    "grid_from_sample",
    "save_voxel_grid",
    "load_voxel_grid",
    "grids_compatible",
]


@dataclass(frozen=True)
class VoxelGrid:
    occupancy: np.ndarray  # bool (nx, ny, nz)
    tissue: np.ndarray     # uint8, NO_TISSUE where empty
    origin: np.ndarray     # world position of the grid's lower corner
    cell: np.ndarray       # per-axis voxel edge length

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        tis = np.asarray(self.tissue, dtype=np.uint8)
        if occ.ndim != 3 or tis.shape != occ.shape:
            raise ValueError("occupancy and tissue must be matching 3-d arrays")
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        cell = np.asarray(self.cell, dtype=np.float64).reshape(3)
        if not np.all(cell > 0):
            raise ValueError("cell size must be positive")
        for name, arr in (("occupancy", occ), ("tissue", tis),
                          ("origin", origin), ("cell", cell)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def voxel_centers_axis(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.cell[axis]


def grids_compatible(a: VoxelGrid, b: VoxelGrid) -> bool:
    return (a.dims == b.dims
            and np.array_equal(a.origin, b.origin)
            and np.array_equal(a.cell, b.cell))


def grid_from_sample(sample: LatticeSample, tissue_codes: np.ndarray) -> VoxelGrid:
    occ = sample.inside
    best = sample.best_index
    tissue = np.full(occ.shape, NO_TISSUE, dtype=np.uint8)
    hit = occ  # occupied voxels always have a contributor
    tissue[hit] = tissue_codes[best[hit]]
    return VoxelGrid(occupancy=occ, tissue=tissue,
                     origin=sample.origin, cell=sample.cell)


def voxelize(field: ScalarField, dims=DEFAULT_DIMS,
             box: BoundingBox | None = None,
             jobs: int | None = None) -> VoxelGrid:
    """Occupancy + tissue grid of the field at the given resolution."""
    sample = sample_lattice(field, dims, box, jobs)
    return grid_from_sample(sample, field.tissue_codes)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def save_voxel_grid(grid: VoxelGrid, path) -> None:
    """Write a grid as JSON (bit-packed payload; byte-stable across runs)."""
    doc = {
        "dims": list(grid.dims),
        "origin": [float(v) for v in grid.origin],
        "cell": [float(v) for v in grid.cell],
        "occupancy": _b64(np.packbits(grid.occupancy.ravel()).tobytes()),
        "tissue": _b64(np.ascontiguousarray(grid.tissue).tobytes()),
    }
    with open(path, "w") as f:
        json.dump(doc, f, separators=(",", ":"))
        f.write("\n")


def load_voxel_grid(path) -> VoxelGrid:
    with open(path) as f:
        doc = json.load(f)
    try:
        dims = tuple(int(d) for d in doc["dims"])
        origin = np.array(doc["origin"], dtype=np.float64)
        cell = np.array(doc["cell"], dtype=np.float64)
        occ_bits = np.frombuffer(base64.b64decode(doc["occupancy"]), dtype=np.uint8)
        tissue = np.frombuffer(base64.b64decode(doc["tissue"]), dtype=np.uint8)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed voxel grid file: {exc}") from exc
    n = int(np.prod(dims))
    occ = np.unpackbits(occ_bits, count=n).astype(bool).reshape(dims)
    if tissue.size != n:
        raise ValueError("voxel grid payload size mismatch")
    return VoxelGrid(occupancy=occ, tissue=tissue.reshape(dims).copy(),
                     origin=origin, cell=cell)
