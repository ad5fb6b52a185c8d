import numpy as np
import pytest

from cliquefit.errors import DegenerateGeometryError
from cliquefit.estimators import (
    GncConfig,
    PnConfig,
    PointNormalProblem,
    RegistrationProblem,
    RotationAveragingProblem,
    gnc_tls,
    horn_registration,
    point_normal_registration,
    rotation_mean_chordal,
    rotavg_residual,
    tls_cost,
)
from cliquefit.geometry import (
    RigidTransform,
    Rotation,
    exp_so3,
    geodesic_distance,
    random_rotation,
    random_unit_vector,
)
from cliquefit.measurements import PointNormalPairs, PointPairs, RotationSamples
from cliquefit.synth import ExperimentSpec, gen_registration, gen_rotavg

from oracles import quat_angle_between


def random_pairs(rng, n=40, sigma=0.0):
    a = rng.uniform(0, 1, (n, 3))
    gt = RigidTransform(Rotation(random_rotation(rng)), rng.standard_normal(3))
    b = gt.apply(a) + sigma * rng.standard_normal((n, 3))
    return gt, PointPairs(a, b, beta=max(5.54 * sigma, 1e-3))


def random_pn_pairs(rng, n=30, kappa=1.0):
    a = rng.uniform(0, 1, (n, 3))
    m = random_unit_vector(rng, n)
    gt = RigidTransform(Rotation(random_rotation(rng)), rng.standard_normal(3))
    b = gt.apply(a)
    nb = m @ gt.rotation.m.T
    return gt, PointNormalPairs(a, m, b, nb, beta=0.01), PnConfig(kappa=kappa)


def pn_objective(pairs, weights, cfg, transform):
    eta, kappa = cfg.resolved(len(pairs))
    pt = np.sum((pairs.b - transform.apply(pairs.a)) ** 2, axis=1)
    nm = np.sum((pairs.nb - transform.rotation.apply(pairs.ma)) ** 2, axis=1)
    return float(np.sum(weights * (eta * pt + kappa * nm)))


class TestHorn:
    def test_identity_problem(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(0, 1, (20, 3))
        est = horn_registration(PointPairs(a, a.copy(), beta=0.01))
        np.testing.assert_allclose(est.rotation.m, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(est.translation, np.zeros(3), atol=1e-12)

    def test_exact_transform_recovered(self):
        rng = np.random.default_rng(1)
        gt, pairs = random_pairs(rng)
        est = horn_registration(pairs)
        np.testing.assert_allclose(est.rotation.m, gt.rotation.m, atol=1e-9)
        np.testing.assert_allclose(est.translation, gt.translation, atol=1e-9)

    def test_beats_random_search(self):
        rng = np.random.default_rng(2)
        gt, pairs = random_pairs(rng, sigma=0.01)
        w = rng.uniform(0.2, 1.0, len(pairs))
        est = horn_registration(pairs, w)

        def objective(r, t):
            res = pairs.b - pairs.a @ r.T - t
            return float(np.sum(w * np.sum(res * res, axis=1)))

        best = objective(est.rotation.m, est.translation)
        rots = random_rotation(rng, 10_000)
        ts = gt.translation + 0.1 * rng.standard_normal((10_000, 3))
        for k in range(10_000):
            assert best <= objective(rots[k], ts[k]) + 1e-12

    def test_equivariance(self):
        rng = np.random.default_rng(3)
        gt, pairs = random_pairs(rng, sigma=0.005)
        g = RigidTransform(Rotation(random_rotation(rng)), rng.standard_normal(3))
        est = horn_registration(pairs)
        moved = PointPairs(g.apply(pairs.a), g.apply(pairs.b), pairs.beta)
        est_moved = horn_registration(moved)
        conjugated = g.compose(est).compose(g.inverse())
        np.testing.assert_allclose(est_moved.rotation.m, conjugated.rotation.m, atol=1e-9)
        np.testing.assert_allclose(est_moved.translation, conjugated.translation, atol=1e-9)

    def test_collinear_support_raises(self):
        t = np.linspace(0, 1, 10)
        a = np.column_stack([t, t, t])
        with pytest.raises(DegenerateGeometryError):
            horn_registration(PointPairs(a, a.copy(), beta=0.01))

    def test_needs_three_positive_weights(self):
        rng = np.random.default_rng(4)
        _, pairs = random_pairs(rng, n=10)
        w = np.zeros(10)
        w[:2] = 1.0
        with pytest.raises(DegenerateGeometryError):
            horn_registration(pairs, w)


class TestPointNormalRegistration:
    def test_identity_problem(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(0, 1, (15, 3))
        m = random_unit_vector(rng, 15)
        est = point_normal_registration(PointNormalPairs(a, m, a.copy(), m.copy(), beta=0.01))
        np.testing.assert_allclose(est.rotation.m, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(est.translation, np.zeros(3), atol=1e-12)

    def test_exact_transform_recovered(self):
        rng = np.random.default_rng(6)
        gt, pairs, cfg = random_pn_pairs(rng)
        est = point_normal_registration(pairs, cfg=cfg)
        np.testing.assert_allclose(est.rotation.m, gt.rotation.m, atol=1e-9)
        np.testing.assert_allclose(est.translation, gt.translation, atol=1e-9)

    def test_kappa_zero_limit_equals_horn(self):
        rng = np.random.default_rng(7)
        gt, pairs, _ = random_pn_pairs(rng)
        noisy_b = pairs.b + 0.01 * rng.standard_normal(pairs.b.shape)
        pairs = PointNormalPairs(pairs.a, pairs.ma, noisy_b, pairs.nb, pairs.beta)
        est_pn = point_normal_registration(pairs, cfg=PnConfig(kappa=0.0))
        est_horn = horn_registration(PointPairs(pairs.a, pairs.b, pairs.beta))
        np.testing.assert_allclose(est_pn.rotation.m, est_horn.rotation.m, atol=1e-9)
        np.testing.assert_allclose(est_pn.translation, est_horn.translation, atol=1e-9)

    def test_optimality_against_random_candidates(self):
        rng = np.random.default_rng(8)
        gt, pairs, cfg = random_pn_pairs(rng, n=20, kappa=0.7)
        w = rng.uniform(0.1, 1.0, len(pairs))
        est = point_normal_registration(pairs, w, cfg)
        best = pn_objective(pairs, w, cfg, est)
        rots = random_rotation(rng, 2000)
        for k in range(2000):
            cand = RigidTransform(Rotation(rots[k]), gt.translation + 0.2 * rng.standard_normal(3))
            assert best <= pn_objective(pairs, w, cfg, cand) + 1e-12

    def test_two_pair_minimum(self):
        rng = np.random.default_rng(9)
        gt, pairs, cfg = random_pn_pairs(rng, n=5)
        w = np.zeros(5)
        w[0] = 1.0
        with pytest.raises(DegenerateGeometryError):
            point_normal_registration(pairs, w, cfg)


class TestChordalMean:
    def test_all_samples_equal(self):
        rng = np.random.default_rng(10)
        r0 = random_rotation(rng)
        est = rotation_mean_chordal(np.stack([r0] * 6))
        assert geodesic_distance(est, r0) < 1e-12

    def test_symmetric_pair_averages_to_center(self):
        rng = np.random.default_rng(11)
        r0 = random_rotation(rng)
        z = np.array([0.0, 0.0, 1.0])
        samples = np.stack([r0 @ exp_so3(0.4 * z), r0 @ exp_so3(-0.4 * z)])
        est = rotation_mean_chordal(samples)
        np.testing.assert_allclose(est.m, r0, atol=1e-9)

    def test_beats_random_search(self):
        rng = np.random.default_rng(12)
        samples = random_rotation(rng, 15)
        w = rng.uniform(0.1, 1.0, 15)
        est = rotation_mean_chordal(samples, w)

        def objective(r):
            return float(np.sum(w * np.sum((samples - r) ** 2, axis=(1, 2))))

        best = objective(est.m)
        for cand in random_rotation(rng, 10_000):
            assert best <= objective(cand) + 1e-12

    def test_residual_is_geodesic(self):
        rng = np.random.default_rng(13)
        r1, r2 = random_rotation(rng), random_rotation(rng)
        # arccos of the float trace resolves angles only down to ~3e-8
        assert rotavg_residual(r1, r1) <= 5e-8
        assert rotavg_residual(np.eye(3), exp_so3([0, 0, np.pi])) == pytest.approx(np.pi)
        assert rotavg_residual(r1, r2) == pytest.approx(quat_angle_between(r1, r2), abs=1e-9)


class _ConstantResidualProblem:
    """Stub whose residuals all sit exactly at the inlier threshold."""

    def __init__(self, n, value):
        self.n = n
        self.value = value

    def __len__(self):
        return self.n

    def solve_weighted(self, weights):
        return None

    def residuals(self, estimate):
        return np.full(self.n, self.value)


class TestGncTls:
    def test_no_outliers_reduces_to_least_squares(self):
        rng = np.random.default_rng(14)
        for seed in range(5):
            _, samples, _ = gen_rotavg(ExperimentSpec("rotavg", 60, 0.0, np.radians(5.0), rng_seed=seed))
            problem = RotationAveragingProblem(samples)
            result = gnc_tls(problem, GncConfig(zeta=samples.beta))
            assert result.converged
            assert (result.weights >= 0.99).all()
            baseline = problem.solve_weighted(np.ones(len(samples)))
            assert geodesic_distance(result.estimate, baseline) < 1e-6

    def test_planted_outliers_get_zero_weight(self):
        for seed in range(50):
            gt, pairs, mask = gen_registration(
                ExperimentSpec("registration", 60, 0.2, 0.01, rng_seed=seed)
            )
            result = gnc_tls(RegistrationProblem(pairs), GncConfig(zeta=pairs.beta))
            assert (result.weights[~mask] < 1e-6).all(), f"seed {seed}"
            assert (result.weights[mask] > 1 - 1e-6).all(), f"seed {seed}"
            assert geodesic_distance(result.estimate.rotation, gt.rotation) < np.radians(1.0)

    def test_boundary_weight_approaches_half(self):
        problem = _ConstantResidualProblem(4, value=1.0)
        cfg = GncConfig(zeta=1.0, max_iterations=200, convergence_tol=1e-9)
        result = gnc_tls(problem, cfg)
        # r^2 == eps^2 exactly: the interpolated weight sqrt(mu(mu+1)) - mu -> 1/2
        np.testing.assert_allclose(result.weights, 0.5, atol=1e-3)

    def test_final_cost_not_worse_than_all_ones(self):
        for seed in range(10):
            _, pairs, _ = gen_registration(
                ExperimentSpec("registration", 50, 0.3, 0.01, rng_seed=100 + seed)
            )
            problem = RegistrationProblem(pairs)
            cfg = GncConfig(zeta=pairs.beta)
            result = gnc_tls(problem, cfg)
            all_ones = problem.solve_weighted(np.ones(len(pairs)))
            assert tls_cost(problem.residuals(result.estimate), cfg) <= tls_cost(
                problem.residuals(all_ones), cfg
            ) + 1e-9

    def test_deterministic(self):
        _, samples, _ = gen_rotavg(ExperimentSpec("rotavg", 80, 0.4, np.radians(5.0), rng_seed=21))
        cfg = GncConfig(zeta=samples.beta)
        r1 = gnc_tls(RotationAveragingProblem(samples), cfg)
        r2 = gnc_tls(RotationAveragingProblem(samples), cfg)
        np.testing.assert_array_equal(r1.weights, r2.weights)
        np.testing.assert_array_equal(r1.estimate.m, r2.estimate.m)

    def test_point_normal_problem_runs_under_gnc(self):
        gt, pairs, mask = gen_registration(
            ExperimentSpec("registration_normals", 50, 0.2, 0.01, rng_seed=22), with_normals=True
        )
        cfg_pn = PnConfig.from_bounds(pairs.beta, pairs.beta_normal)
        result = gnc_tls(PointNormalProblem(pairs, cfg_pn), GncConfig(zeta=np.sqrt(2.0)))
        assert geodesic_distance(result.estimate.rotation, gt.rotation) < np.radians(1.0)
        assert (result.weights[~mask] < 0.01).all()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GncConfig(zeta=0.0)
        with pytest.raises(ValueError):
            GncConfig(zeta=1.0, mu_update_factor=1.0)
        with pytest.raises(ValueError):
            GncConfig(zeta=1.0, c_bar=-1.0)
