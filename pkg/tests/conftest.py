import numpy as np
import pytest

import clothlayers as cl
from clothlayers.layering import GarmentClass
from clothlayers.scene import sample_outfit, sample_scene


@pytest.fixture(scope="session")
def overlap_scene():
    """T-shirt over trousers with a clear overlap band."""
    outfit = sample_outfit(GarmentClass.T_SHIRT, GarmentClass.LONG_PANTS,
                           0.08, np.random.default_rng(7))
    return sample_scene(outfit, seed=3)


@pytest.fixture(scope="session")
def gap_scene():
    """Top and skirt with a bare midriff (negative band)."""
    outfit = sample_outfit(GarmentClass.TOP, GarmentClass.SKIRT,
                           -0.05, np.random.default_rng(8))
    return sample_scene(outfit, seed=4)


@pytest.fixture(scope="session")
def overlap_scan(overlap_scene):
    return cl.scan(overlap_scene, cl.ScanConfig(rays_per_view=700, seed=11))


@pytest.fixture(scope="session")
def small_scan(overlap_scene):
    scan = cl.scan(overlap_scene, cl.ScanConfig(rays_per_view=500, seed=12))
    return cl.resample(scan, 512, seed=0)
