"""Metaball scalar field over a sphere pack.

Each sphere contributes a compact-support quartic kernel

    k(d) = (1 - (d/R)^2)^2   for d < R,  else 0,      R = support_scale * radius

and the field is the sum of contributions. Contributions are quantized to
2**-52 and summed in int64 so the field value is independent of summation
order; the float value is the quantized sum times 2**-52. The surface is the
iso level 0.5 contour; a single sphere's iso surface therefore sits at
R * sqrt(1 - sqrt(1/2)) ~= 1.082 * radius.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fast
from .volume import BoundingBox, SpherePackVolume

__all__ = [
    "SUPPORT_SCALE",
    "ISO_LEVEL",
    "DEFAULT_DIMS",
    "ScalarField",
    "LatticeSample",
    "build_field",
    "default_grid_box",
    "sample_lattice",
    "kernel_weight",
    "kernel_quantum",
    "single_sphere_iso_radius",
]

SUPPORT_SCALE = 2.0
ISO_LEVEL = 0.5
DEFAULT_DIMS = (90, 135, 90)

_QUANT = _fast.QUANT  # 2**52


def kernel_quantum(d2: np.ndarray, inv_support2: np.ndarray) -> np.ndarray:
    """Quantized kernel contribution(s) for squared distance d2, as int64.

    This is the normative definition of a contribution: t = 1 - d2 * (1/R^2)
    evaluated in float64 with the precomputed reciprocal, clipped at zero,
    then floor(t*t * 2**52 + 0.5).
    """
    t = 1.0 - np.asarray(d2, dtype=np.float64) * inv_support2
    t = np.maximum(t, 0.0)
    return (t * t * _QUANT + 0.5).astype(np.int64)


def kernel_weight(d2, inv_support2) -> np.ndarray:
    """Kernel contribution(s) as float (the quantized value scaled back)."""
    return kernel_quantum(d2, inv_support2) * (1.0 / _QUANT)


def single_sphere_iso_radius(radius: float, support_scale: float = SUPPORT_SCALE,
                             iso_level: float = ISO_LEVEL) -> float:
    """Analytic radius of the iso surface of one isolated sphere."""
    return support_scale * radius * float(np.sqrt(1.0 - np.sqrt(iso_level)))


@dataclass(frozen=True)
class ScalarField:
    """Snapshot of a sphere pack as an implicit field.

    The removed mask is copied at build time; drilling the source volume
    afterwards does not change an existing field object.
    """

    centers: np.ndarray
    radii: np.ndarray
    tissue_codes: np.ndarray
    removed: np.ndarray
    support_scale: float = SUPPORT_SCALE
    iso_level: float = ISO_LEVEL

    @property
    def supports(self) -> np.ndarray:
        return self.support_scale * self.radii

    @property
    def inv_support2(self) -> np.ndarray:
        s = self.supports
        return 1.0 / (s * s)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Field value at one point or an (m, 3) batch. Reference path.

        Sums the quantized contributions of every non-removed sphere; for
        bulk lattice work use sample_lattice instead.
        """
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if p.shape[1] != 3:
            raise ValueError("points must be 3-vectors")
        active = ~self.removed
        c = self.centers[active]
        inv = self.inv_support2[active]
        out = np.empty(p.shape[0], dtype=np.float64)
        for i in range(p.shape[0]):
            d2 = np.sum((c - p[i]) ** 2, axis=1)
            out[i] = np.sum(kernel_quantum(d2, inv)) * (1.0 / _QUANT)
        return out[0] if np.ndim(points) == 1 else out

    def dominant_tissue(self, points: np.ndarray) -> np.ndarray:
        """Tissue code of the strongest contributor (lowest index on ties);
        255 where no sphere contributes."""
        from .volume import NO_TISSUE

        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        active_idx = np.nonzero(~self.removed)[0]
        out = np.full(p.shape[0], NO_TISSUE, dtype=np.uint8)
        for i in range(p.shape[0]):
            d2 = np.sum((self.centers[active_idx] - p[i]) ** 2, axis=1)
            q = kernel_quantum(d2, self.inv_support2[active_idx])
            if q.size and q.max() > 0:
                out[i] = self.tissue_codes[active_idx[np.argmax(q)]]
        return out[0] if np.ndim(points) == 1 else out


def build_field(volume: SpherePackVolume, support_scale: float = SUPPORT_SCALE,
                iso_level: float = ISO_LEVEL) -> ScalarField:
    if support_scale <= 0:
        raise ValueError("support scale must be positive")
    return ScalarField(
        centers=volume.centers,
        radii=volume.radii,
        tissue_codes=volume.tissue_codes,
        removed=volume.removed.copy(),
        support_scale=float(support_scale),
        iso_level=float(iso_level),
    )


def default_grid_box(field: ScalarField, dims=DEFAULT_DIMS) -> BoundingBox:
    """Tight box around the field's support plus a one-cell margin.

    Uses every sphere, removed or not, so grids of a drilled volume stay
    aligned with grids of the pristine one.
    """
    sup = field.supports
    lo = (field.centers - sup[:, None]).min(axis=0)
    hi = (field.centers + sup[:, None]).max(axis=0)
    cell = (hi - lo) / np.asarray(dims, dtype=np.float64)
    return BoundingBox(lo - cell, hi + cell)


@dataclass(frozen=True)
class LatticeSample:
    """Field sampled at the voxel centers of a grid."""

    quanta: np.ndarray      # int64 (nx, ny, nz), field value in units of 2**-52
    best_index: np.ndarray  # int32, strongest contributing sphere, -1 if none
    origin: np.ndarray
    cell: np.ndarray
    iso_level: float

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.quanta.shape

    @property
    def iso_quanta(self) -> int:
        return int(round(self.iso_level * _QUANT))

    @property
    def values(self) -> np.ndarray:
        return self.quanta * (1.0 / _QUANT)

    @property
    def inside(self) -> np.ndarray:
        return self.quanta >= self.iso_quanta

    def centers_axis(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.cell[axis]


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 2 for d in dims):
        raise ValueError("grid dims must be three integers >= 2")
    return dims


def sample_lattice(field: ScalarField, dims=DEFAULT_DIMS,
                   box: BoundingBox | None = None,
                   jobs: int | None = None) -> LatticeSample:
    """Sample the field at every voxel center of the grid.

    Partitioned over disjoint x-slabs; the result is bitwise identical for
    any slab/thread count.
    """
    dims = _check_dims(dims)
    if box is None:
        box = default_grid_box(field, dims)
    nx, ny, nz = dims
    origin = box.lo.copy()
    cell = box.size / np.asarray(dims, dtype=np.float64)
    sup = field.supports
    inv = field.inv_support2
    nslab = min(nx, 4 * _fast.get_num_threads() if jobs is None else max(1, 4 * jobs))
    nslab = max(nslab, 1)
    bounds, orders, offsets = _fast.build_slabs(field.centers, sup, origin[0],
                                                cell[0], nx, nslab)
    with _fast.thread_scope(jobs):
        acc, _best, besti = _fast.accumulate_lattice(
            field.centers, inv, sup, field.removed,
            origin[0], origin[1], origin[2], cell[0], cell[1], cell[2],
            nx, ny, nz, bounds, orders, offsets)
    return LatticeSample(
        quanta=acc.reshape(dims),
        best_index=besti.reshape(dims),
        origin=origin,
        cell=cell,
        iso_level=field.iso_level,
    )
