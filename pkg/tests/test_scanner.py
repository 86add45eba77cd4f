import numpy as np
import pytest

import clothlayers as cl
from clothlayers.errors import InvalidArgumentError
from clothlayers.layering import GarmentClass
from clothlayers.scanner import ScanConfig, default_view_directions
from clothlayers.scene import sample_outfit, sample_scene


class TestConfig:
    def test_default_rig_is_13_views(self):
        dirs = default_view_directions(13)
        assert dirs.shape == (13, 3)
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0,
                                   atol=1e-12)
        np.testing.assert_allclose(dirs[-1], [0, 0, 1])
        elevations = np.rad2deg(np.arcsin(dirs[:12, 2]))
        assert (np.isclose(elevations, 25.0) | np.isclose(elevations, -10.0)).all()

    def test_under_feet_views_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScanConfig(num_views=1, view_directions=[[0.0, 0.0, -1.0]])

    def test_grazing_low_view_accepted(self):
        ScanConfig(num_views=1, view_directions=[[0.866, 0.0, -0.5]])

    def test_negative_sigma_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ScanConfig(noise_sigma=-0.1)


class TestScan:
    def test_single_view_sees_only_front_faces(self, overlap_scene):
        cfg = ScanConfig(num_views=1, rays_per_view=800, noise_sigma=0.0,
                         seed=0, view_directions=[[1.0, 0.0, 0.0]])
        s = cl.scan(overlap_scene, cfg)
        # an orthographic +x view cannot see surface elements facing away
        assert (s.cloud.normals[:, 0] > -1e-9).all()

    def test_deterministic(self, overlap_scene):
        cfg = ScanConfig(rays_per_view=300, seed=9)
        a = cl.scan(overlap_scene, cfg)
        b = cl.scan(overlap_scene, cfg)
        np.testing.assert_array_equal(a.cloud.positions, b.cloud.positions)
        np.testing.assert_array_equal(a.labels.visible, b.labels.visible)

    def test_labels_unaffected_by_noise(self, overlap_scene):
        clean = cl.scan(overlap_scene, ScanConfig(rays_per_view=300, seed=3,
                                                  noise_sigma=0.0))
        noisy = cl.scan(overlap_scene, ScanConfig(rays_per_view=300, seed=3,
                                                  noise_sigma=0.004))
        np.testing.assert_array_equal(clean.labels.visible,
                                      noisy.labels.visible)
        np.testing.assert_array_equal(clean.labels.hidden, noisy.labels.hidden)
        # displacement happens along the ray and stays within 3 sigma
        delta = noisy.cloud.positions - clean.cloud.positions
        assert np.linalg.norm(delta, axis=1).max() <= 3 * 0.004 + 1e-9

    def test_covered_waistband_never_scanned(self, overlap_scene):
        """Surfaces enclosed by an outer shell emit no points.

        Rays from the low ring can graze a few millimeters up under the open
        hem, so the check targets the waistband-adjacent upper half of the
        overlap band, which no exterior ray can reach.
        """
        s = cl.scan(overlap_scene, ScanConfig(rays_per_view=1200, seed=5))
        body = overlap_scene.body
        waist_rise = overlap_scene.outfit.lower.coverage["waist_rise"]
        waist_z = body.crotch_z + waist_rise * (body.trunk_top_z - body.crotch_z)
        band = overlap_scene.outfit.overlap_band
        hem_z = waist_z - band
        z = s.cloud.positions[:, 2]
        at_waistband = (z > hem_z + band / 2) & (z < waist_z - 1e-3)
        radial = np.linalg.norm(s.cloud.positions[:, :2], axis=1)
        near_trunk = radial < body.trunk_radius + 0.1
        lower_visible = (s.labels.visible >= 3)
        assert not (at_waistband & near_trunk & lower_visible).any()
        # while the same heights on the shirt do carry the hidden label
        assert (at_waistband & (s.labels.hidden >= 0)).any()

    def test_every_label_valid(self, overlap_scan):
        overlap_scan.labels.validate()

    def test_point_count_monotone_in_rays(self, overlap_scene):
        counts = []
        for rays in (200, 400, 800):
            s = cl.scan(overlap_scene, ScanConfig(rays_per_view=rays, seed=1))
            counts.append(len(s))
        assert counts[0] < counts[1] < counts[2]

    def test_views_concatenated_in_order(self, overlap_scan):
        sv = overlap_scan.cloud.source_view
        assert (np.diff(sv) >= 0).all()
        assert set(np.unique(sv)) <= set(range(13))


class TestResample:
    def test_same_size_is_identity(self, overlap_scan):
        out = cl.resample(overlap_scan, len(overlap_scan), seed=0)
        assert out is overlap_scan

    def test_single_point_keeps_label(self, overlap_scan):
        out = cl.resample(overlap_scan, 1, seed=4)
        i = 4 % len(overlap_scan)
        assert len(out) == 1
        np.testing.assert_array_equal(out.cloud.positions[0],
                                      overlap_scan.cloud.positions[i])
        assert out.labels.visible[0] == overlap_scan.labels.visible[i]

    def test_downsample_covers_clusters(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 0.05, size=(300, 3))
        b = rng.normal(0, 0.05, size=(300, 3)) + [4, 0, 0]
        pos = np.concatenate([a, b])
        nrm = np.tile([0, 0, 1.0], (600, 1))
        labels = cl.CanonicalLabels(np.ones(600, bool),
                                    np.full(600, -1, np.int8),
                                    np.full(600, -1, np.int8))
        scan_ = cl.LabeledScan(cloud=cl.PointCloud(pos, nrm,
                                                   np.zeros(600, np.int64)),
                               labels=labels,
                               config=ScanConfig(num_views=1,
                                                 view_directions=[[1, 0, 0]]))
        out = cl.resample(scan_, 300, seed=0)
        sides = out.cloud.positions[:, 0] > 2
        assert 100 < sides.sum() < 200  # both clusters survive

    def test_upsample_jitter_bounded(self, overlap_scan):
        n = len(overlap_scan)
        out = cl.resample(overlap_scan, n + 500, seed=1)
        assert len(out) == n + 500
        sigma = overlap_scan.config.noise_sigma
        base = overlap_scan.cloud.positions
        np.testing.assert_array_equal(out.cloud.positions[:n], base)
        # duplicated points moved at most noise_sigma
        for i in range(n, n + 500):
            d = np.linalg.norm(base - out.cloud.positions[i], axis=1).min()
            assert d <= sigma + 1e-12


class TestVisibility:
    def test_generated_scans_have_zero_violations(self, overlap_scene,
                                                  overlap_scan):
        assert cl.check_visibility(overlap_scan, overlap_scene) == 0

    def test_occluded_point_detected(self, overlap_scene, overlap_scan):
        scan_ = overlap_scan.take(np.arange(len(overlap_scan)))
        pos = scan_.cloud.positions.copy()
        v = int(scan_.cloud.source_view[0])
        d = -scan_.config.view_directions[v]
        pos[0] = pos[0] + d * 0.5  # push the point behind the surface
        moved = cl.LabeledScan(
            cloud=cl.PointCloud(pos, scan_.cloud.normals,
                                scan_.cloud.source_view),
            labels=scan_.labels, config=scan_.config)
        assert cl.check_visibility(moved, overlap_scene) >= 1

    def test_missing_views_rejected(self, overlap_scene, overlap_scan):
        bare = cl.LabeledScan(
            cloud=cl.PointCloud(overlap_scan.cloud.positions,
                                overlap_scan.cloud.normals, None),
            labels=overlap_scan.labels, config=overlap_scan.config)
        with pytest.raises(InvalidArgumentError):
            cl.check_visibility(bare, overlap_scene)


def test_scan_of_every_outfit_combination_is_sound():
    uppers = (GarmentClass.LONG_SHIRT, GarmentClass.T_SHIRT, GarmentClass.TOP)
    lowers = (GarmentClass.LONG_PANTS, GarmentClass.SHORTS, GarmentClass.SKIRT)
    k = 0
    for up in uppers:
        for lo in lowers:
            band = 0.06 if k % 2 == 0 else -0.03
            outfit = sample_outfit(up, lo, band, np.random.default_rng(k))
            scene = sample_scene(outfit, seed=k)
            s = cl.scan(scene, ScanConfig(rays_per_view=500, seed=k))
            s.labels.validate()
            assert cl.check_visibility(s, scene) == 0
            hidden = (s.labels.hidden >= 0).sum()
            assert (hidden > 0) == (band > 0)
            k += 1
