import numpy as np
import pytest

from cliquefit.geometry import geodesic_distance, log_so3
from cliquefit.invariants import vee_project
from cliquefit.synth import (
    BOUND_FACTOR,
    IMAGE_H,
    IMAGE_W,
    ExperimentSpec,
    gen_crossratio,
    gen_registration,
    gen_registration_all_to_all,
    gen_rotavg,
    load_points_file,
    project_pinhole,
)


class TestExperimentSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec("bogus", 10, 0.0, 0.1)
        with pytest.raises(ValueError):
            ExperimentSpec("rotavg", 10, 1.0, 0.1)
        with pytest.raises(ValueError):
            ExperimentSpec("rotavg", 0, 0.5, 0.1)
        with pytest.raises(ValueError):
            ExperimentSpec("rotavg", 10, 0.5, 0.1, mode="fastest")

    def test_default_bounds(self):
        assert ExperimentSpec("registration", 10, 0.0, 0.01).beta == pytest.approx(0.0554)
        assert ExperimentSpec("crossratio", 10, 0.0, 0.1).beta == pytest.approx(0.25)
        assert ExperimentSpec("rotavg", 10, 0.0, 0.1, noise_bound=0.3).beta == 0.3
        with pytest.raises(ValueError):
            ExperimentSpec("rotavg", 10, 0.0, 0.0).beta

    def test_normal_bound_defaults_to_point_bound(self):
        spec = ExperimentSpec("registration_normals", 10, 0.0, 0.01)
        assert spec.beta_normal == spec.beta
        spec2 = ExperimentSpec("registration_normals", 10, 0.0, 0.01, noise_bound_normal=0.02)
        assert spec2.beta_normal == 0.02


class TestGenRotavg:
    def test_zero_noise_zero_outliers_gives_constant_samples(self):
        gt, ms, mask = gen_rotavg(ExperimentSpec("rotavg", 12, 0.0, 0.0, noise_bound=0.1))
        assert mask.all()
        for r in ms.rotations:
            np.testing.assert_allclose(r, gt.m, atol=1e-12)

    def test_inlier_count_is_rounded(self):
        for n, rate in [(1000, 0.5), (500, 0.976), (100, 0.33)]:
            _, _, mask = gen_rotavg(ExperimentSpec("rotavg", n, rate, np.radians(5.0)))
            assert int(mask.sum()) == round(n * (1 - rate))

    def test_inlier_noise_is_bounded(self):
        gt, ms, mask = gen_rotavg(ExperimentSpec("rotavg", 200, 0.3, np.radians(5.0), rng_seed=1))
        for i in np.flatnonzero(mask):
            angle = np.linalg.norm(log_so3(gt.m.T @ ms.rotations[i]))
            assert angle <= ms.beta + 1e-12

    def test_seed_determinism(self):
        spec = ExperimentSpec("rotavg", 50, 0.4, np.radians(5.0), rng_seed=9)
        a = gen_rotavg(spec)
        b = gen_rotavg(spec)
        np.testing.assert_array_equal(a[1].rotations, b[1].rotations)
        np.testing.assert_array_equal(a[2], b[2])
        c = gen_rotavg(spec.with_seed(10))
        assert not np.array_equal(a[1].rotations, c[1].rotations)


class TestGenRegistration:
    def test_zero_noise_recovers_exactly_with_horn(self):
        from cliquefit.estimators import horn_registration

        gt, pairs, mask = gen_registration(
            ExperimentSpec("registration", 50, 0.0, 0.0, noise_bound=0.01, rng_seed=2)
        )
        assert mask.all()
        est = horn_registration(pairs)
        np.testing.assert_allclose(est.rotation.m, gt.rotation.m, atol=1e-9)
        np.testing.assert_allclose(est.translation, gt.translation, atol=1e-9)

    def test_bound_exceedance_probability(self):
        # P(||eps|| > 5.54 sigma) for 3D Gaussian noise is < 1e-4 (designed ~1e-6)
        rng = np.random.default_rng(3)
        sigma = 0.01
        draws = sigma * rng.standard_normal((1_000_000, 3))
        exceed = np.linalg.norm(draws, axis=1) > BOUND_FACTOR * sigma
        assert exceed.mean() < 1e-4

    def test_inlier_noise_bounded_and_outliers_in_sphere(self):
        gt, pairs, mask = gen_registration(
            ExperimentSpec("registration", 300, 0.5, 0.01, rng_seed=4)
        )
        resid = np.linalg.norm(pairs.b - gt.apply(pairs.a), axis=1)
        assert (resid[mask] <= pairs.beta + 1e-12).all()
        assert (np.linalg.norm(pairs.b[~mask], axis=1) <= 5.0 + 1e-12).all()
        assert np.linalg.norm(gt.translation) <= 1.0 + 1e-12

    def test_normals_are_consistent(self):
        gt, pairs, mask = gen_registration(
            ExperimentSpec("registration_normals", 100, 0.4, 0.01, rng_seed=5), with_normals=True
        )
        np.testing.assert_allclose(np.linalg.norm(pairs.nb, axis=1), 1.0, atol=1e-12)
        rotated = pairs.ma[mask] @ gt.rotation.m.T
        dots = np.clip(np.sum(rotated * pairs.nb[mask], axis=1), -1, 1)
        assert (np.arccos(dots) <= pairs.beta_normal + 1e-9).all()

    def test_source_points_pass_through(self):
        pts = np.random.default_rng(6).uniform(0, 1, (37, 3))
        gt, pairs, mask = gen_registration(
            ExperimentSpec("registration", 10, 0.0, 0.01, rng_seed=7), source_points=pts
        )
        assert len(pairs) == 37
        np.testing.assert_array_equal(pairs.a, pts)


class TestGenAllToAll:
    def test_constructive_pair_count_and_mask(self):
        gt, pairs, mask = gen_registration_all_to_all(
            n_source=20, overlap=0.8, noise_sigma=0.005, noise_bound=0.03, rng_seed=8
        )
        n_keep = round(0.8 * 20)
        assert len(pairs) == 20 * n_keep
        assert int(mask.sum()) == n_keep
        resid = np.linalg.norm(pairs.b[mask] - gt.apply(pairs.a[mask]), axis=1)
        assert (resid <= 0.03 + 1e-12).all()

    def test_full_overlap(self):
        _, pairs, mask = gen_registration_all_to_all(10, 1.0, 0.0, 0.01, rng_seed=9)
        assert len(pairs) == 100
        assert int(mask.sum()) == 10

    def test_with_normals(self):
        _, pairs, mask = gen_registration_all_to_all(
            12, 0.5, 0.005, 0.03, rng_seed=10, with_normals=True
        )
        assert len(pairs) == 12 * 6
        np.testing.assert_allclose(np.linalg.norm(pairs.nb, axis=1), 1.0, atol=1e-12)

    def test_overlap_validation(self):
        with pytest.raises(ValueError):
            gen_registration_all_to_all(10, 0.0, 0.01, 0.05)


class TestGenCrossratio:
    def test_zero_noise_pixel_cross_ratio_matches_3d(self):
        ms, mask = gen_crossratio(
            ExperimentSpec("crossratio", 50, 0.0, 0.0, noise_bound=0.25, rng_seed=11)
        )
        assert mask.all()
        v = vee_project(ms.p)
        rng = np.random.default_rng(12)
        for _ in range(200):
            i, j, k, l = rng.permutation(50)[:4]
            dv = lambda a, b: np.linalg.norm(v[a] - v[b])
            dy = lambda a, b: np.linalg.norm(ms.y[a] - ms.y[b])
            if min(dv(i, k), dv(j, l), dy(i, k), dy(j, l)) < 1e-9:
                continue
            tau3 = dv(i, j) * dv(k, l) / (dv(i, k) * dv(j, l))
            tau2 = dy(i, j) * dy(k, l) / (dy(i, k) * dy(j, l))
            assert tau3 == pytest.approx(tau2, rel=1e-9)

    def test_paper_scale_setup(self):
        ms, mask = gen_crossratio(ExperimentSpec("crossratio", 100, 0.5, 0.1, rng_seed=13))
        assert len(ms) == 100
        assert ms.beta == pytest.approx(0.25)
        assert int(mask.sum()) == 50
        assert (ms.p[:, 2] > 0).all()
        # inlier pixels stay within beta of the exact projection
        exact = project_pinhole(ms.p)
        err = np.linalg.norm(ms.y - exact, axis=1)
        assert (err[mask] <= ms.beta + 1e-12).all()
        assert (ms.y[:, 0] >= 0).all() and (ms.y[:, 0] <= IMAGE_W).all()
        assert (ms.y[:, 1] >= 0).all() and (ms.y[:, 1] <= IMAGE_H).all()

    def test_seed_determinism(self):
        spec = ExperimentSpec("crossratio", 30, 0.5, 0.1, rng_seed=14)
        a, am = gen_crossratio(spec)
        b, bm = gen_crossratio(spec)
        np.testing.assert_array_equal(a.p, b.p)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(am, bm)


class TestPointsFile:
    def test_round_trip_plain_points(self, tmp_path):
        path = tmp_path / "cloud.txt"
        path.write_text("# comment\n0 0 0\n1 2 3\n4 5 6\n")
        pts, normals = load_points_file(path)
        assert pts.shape == (3, 3)
        assert normals is None

    def test_with_normals(self, tmp_path):
        path = tmp_path / "cloud.txt"
        path.write_text("0 0 0 0 0 2\n1 1 1 3 0 0\n")
        pts, normals = load_points_file(path)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0)

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "cloud.txt"
        path.write_text("0 0\n")
        with pytest.raises(ValueError, match="line 1"):
            load_points_file(path)

    def test_inconsistent_columns(self, tmp_path):
        path = tmp_path / "cloud.txt"
        path.write_text("0 0 0\n1 1 1 0 0 1\n")
        with pytest.raises(ValueError, match="line 2"):
            load_points_file(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "cloud.txt"
        path.write_text("0 0 zebra\n")
        with pytest.raises(ValueError, match="line 1"):
            load_points_file(path)
