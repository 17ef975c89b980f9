"""File formats: round trips, byte stability, and validation errors."""
import json

import numpy as np
import pytest

from drillsim import (
    SpherePackVolume,
    Tissue,
    build_field,
    extract_mesh,
    load_ply,
    load_sphere_pack,
    load_voxel_grid,
    save_ply,
    save_sphere_pack,
    save_voxel_grid,
    voxelize,
)
from drillsim.voxelgrid import VoxelGrid, grids_compatible

from conftest import small_random_volume


def _pack(seed=0, n=12):
    rng = np.random.default_rng(seed)
    return small_random_volume(rng, n_min=n, n_max=n)


# --- sphere packs ----------------------------------------------------------

def test_sphere_pack_round_trip(tmp_path):
    vol = _pack()
    p = tmp_path / "pack.json"
    save_sphere_pack(vol, p)
    back = load_sphere_pack(p)
    assert np.array_equal(back.centers, vol.centers)
    assert np.array_equal(back.radii, vol.radii)
    assert np.array_equal(back.tissue_codes, vol.tissue_codes)
    assert back.n_removed == 0


def test_sphere_pack_preserves_removal_state(tmp_path):
    vol = _pack()
    vol.removed[[2, 5, 7]] = True
    p = tmp_path / "drilled.json"
    save_sphere_pack(vol, p)
    back = load_sphere_pack(p)
    assert np.array_equal(back.removed, vol.removed)
    # the header still describes the pristine pack
    assert back.counts(include_removed=True) == vol.counts(include_removed=True)


def test_sphere_pack_save_is_byte_stable(tmp_path):
    vol = _pack()
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    save_sphere_pack(vol, a)
    save_sphere_pack(vol, b)
    assert a.read_bytes() == b.read_bytes()


def test_sphere_pack_header_mismatch_is_caught(tmp_path):
    vol = _pack()
    p = tmp_path / "pack.json"
    save_sphere_pack(vol, p)
    doc = json.loads(p.read_text())
    doc["counts"]["dentin"] += 1
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="header count mismatch"):
        load_sphere_pack(p)


def test_sphere_pack_out_of_box_sphere_is_caught(tmp_path):
    vol = _pack()
    p = tmp_path / "pack.json"
    save_sphere_pack(vol, p)
    doc = json.loads(p.read_text())
    doc["spheres"][3]["center"] = [99.0, 0.0, 0.0]
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="outside the declared bounding box"):
        load_sphere_pack(p)


def test_sphere_pack_bad_removed_index_is_caught(tmp_path):
    vol = _pack()
    p = tmp_path / "pack.json"
    save_sphere_pack(vol, p)
    doc = json.loads(p.read_text())
    doc["removed"] = [len(vol)]
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="removed index"):
        load_sphere_pack(p)


def test_sphere_pack_missing_key_is_caught(tmp_path):
    p = tmp_path / "pack.json"
    p.write_text(json.dumps({"spheres": []}))
    with pytest.raises(ValueError, match="malformed sphere pack"):
        load_sphere_pack(p)


def test_sphere_pack_bad_tissue_label(tmp_path):
    vol = _pack()
    p = tmp_path / "pack.json"
    save_sphere_pack(vol, p)
    doc = json.loads(p.read_text())
    doc["spheres"][0]["tissue"] = "bone"
    p.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="malformed sphere entry 0"):
        load_sphere_pack(p)


# --- voxel grids -----------------------------------------------------------

def test_voxel_grid_round_trip(tmp_path):
    grid = voxelize(build_field(_pack()), (9, 9, 9))
    p = tmp_path / "grid.json"
    save_voxel_grid(grid, p)
    back = load_voxel_grid(p)
    assert np.array_equal(back.occupancy, grid.occupancy)
    assert np.array_equal(back.tissue, grid.tissue)
    assert np.array_equal(back.origin, grid.origin)
    assert np.array_equal(back.cell, grid.cell)
    assert grids_compatible(grid, back)


def test_voxel_grid_save_is_byte_stable(tmp_path):
    """Two saves of the same grid produce identical bytes.

    The format deliberately avoids anything stateful (timestamps, zip
    metadata) so repeated runs can be compared with cmp.
    """
    grid = voxelize(build_field(_pack(seed=4)), (11, 8, 10))
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    save_voxel_grid(grid, a)
    save_voxel_grid(grid, b)
    assert a.read_bytes() == b.read_bytes()


def test_voxel_grid_validation():
    with pytest.raises(ValueError, match="matching 3-d arrays"):
        VoxelGrid(np.zeros((2, 2, 2), dtype=bool),
                  np.zeros((2, 2), dtype=np.uint8),
                  np.zeros(3), np.ones(3))
    with pytest.raises(ValueError, match="cell size"):
        VoxelGrid(np.zeros((2, 2, 2), dtype=bool),
                  np.zeros((2, 2, 2), dtype=np.uint8),
                  np.zeros(3), np.zeros(3))


def test_grids_compatible_is_strict():
    occ = np.zeros((3, 3, 3), dtype=bool)
    tis = np.full((3, 3, 3), 255, dtype=np.uint8)
    a = VoxelGrid(occ, tis, np.zeros(3), np.ones(3))
    b = VoxelGrid(occ, tis, np.zeros(3) + 1e-12, np.ones(3))
    c = VoxelGrid(occ, tis, np.zeros(3), np.ones(3))
    assert grids_compatible(a, c)
    assert not grids_compatible(a, b)


# --- PLY meshes ------------------------------------------------------------

def test_ply_round_trip(tmp_path):
    mesh = extract_mesh(build_field(_pack(seed=2)), (14, 14, 14))
    assert mesh.n_triangles > 0
    p = tmp_path / "m.ply"
    save_ply(mesh, p)
    back = load_ply(p)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.normals, mesh.normals)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_ply_rejects_other_files(tmp_path):
    p = tmp_path / "not.ply"
    p.write_text("OFF\n0 0 0\n")
    with pytest.raises(ValueError, match="not a PLY file"):
        load_ply(p)


def test_ply_rejects_non_triangle_faces(tmp_path):
    p = tmp_path / "quad.ply"
    p.write_text(
        "ply\nformat ascii 1.0\n"
        "element vertex 4\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property float nx\nproperty float ny\nproperty float nz\n"
        "element face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n"
        "0 0 0 0 0 1\n1 0 0 0 0 1\n1 1 0 0 0 1\n0 1 0 0 0 1\n"
        "4 0 1 2 3\n")
    with pytest.raises(ValueError, match="triangle"):
        load_ply(p)
