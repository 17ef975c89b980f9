"""Shared fixtures.

The 280k-sphere reference tooth and its grids are expensive enough to build
once per session; everything downstream treats them as read-only.
"""
import numpy as np
import pytest

from drillsim import _fast
from drillsim import fixtures as fx
from drillsim.drill import replay
from drillsim.field import build_field
from drillsim.voxelgrid import voxelize


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    # Compile every jitted loop on a micro problem up front so no test
    # (in particular no timed test) pays for compilation.
    _fast.warm_up()


@pytest.fixture(scope="session")
def tooth():
    return fx.reference_tooth()


@pytest.fixture(scope="session")
def reference(tooth):
    """(pristine grid, ideal-outcome grid, shared sampling box)."""
    return fx.reference_grids(tooth)


@pytest.fixture(scope="session")
def drilled(tooth, reference):
    """Cavity script replayed on a copy: (drilled volume, outcome grid)."""
    _, _, box = reference
    vol = tooth.copy()
    replay(vol, fx.cavity_drill_script())
    grid = voxelize(build_field(vol), box=box)
    return vol, grid


def small_random_volume(rng, n_min=5, n_max=40):
    """A loose random sphere pack for oracle comparisons."""
    from drillsim.volume import SpherePackVolume

    n = int(rng.integers(n_min, n_max + 1))
    centers = rng.uniform(-1.0, 1.0, size=(n, 3))
    radii = rng.uniform(0.05, 0.4, size=n)
    tissues = rng.integers(0, 3, size=n).astype(np.uint8)
    return SpherePackVolume(centers, radii, tissues)
