import math
from itertools import combinations

import numpy as np
import pytest

from cliquefit.compatgraph import (
    CompatGraph,
    SubsetBudget,
    build_graph,
    enumerate_subsets,
    subset_array,
)
from cliquefit.errors import TooFewMeasurementsError
from cliquefit.geometry import exp_so3, random_rotation, random_unit_vector
from cliquefit.measurements import Camera2D3D, PointPairs, RotationSamples
from cliquefit.synth import ExperimentSpec, gen_crossratio, gen_registration, gen_rotavg, project_pinhole


def complete_edges(n):
    return {(i, j) for i in range(n) for j in range(i + 1, n)}


def edge_set(graph):
    return {(int(i), int(j)) for i, j in graph.edges}


class TestEnumerateSubsets:
    def test_pairs_lexicographic(self):
        subs = list(enumerate_subsets(4, 2))
        assert subs == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

    def test_choose_four_of_five(self):
        subs = list(enumerate_subsets(5, 4))
        assert len(subs) == 5
        assert subs == list(combinations(range(5), 4))

    def test_budgeted_sampling_deterministic_and_distinct(self):
        budget = SubsetBudget(max_subsets=100_000, rng_seed=7)
        a = subset_array(100, 4, budget)
        b = subset_array(100, 4, budget)
        assert a.shape == (100_000, 4)
        np.testing.assert_array_equal(a, b)
        codes = ((a[:, 0] * 100 + a[:, 1]) * 100 + a[:, 2]) * 100 + a[:, 3]
        assert np.unique(codes).size == 100_000
        assert (np.diff(a, axis=1) > 0).all()  # sorted rows, valid subsets

    def test_budget_above_total_is_exhaustive(self):
        a = subset_array(6, 2, SubsetBudget(max_subsets=1000, rng_seed=3))
        assert a.shape == (15, 2)

    def test_different_seeds_differ(self):
        a = subset_array(50, 4, SubsetBudget(1000, rng_seed=1))
        b = subset_array(50, 4, SubsetBudget(1000, rng_seed=2))
        assert not np.array_equal(a, b)

    def test_arity_larger_than_n_rejected(self):
        with pytest.raises(ValueError):
            subset_array(3, 4)


class TestBuildGraphPairs:
    def test_identity_pointpairs_give_complete_graph(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(0, 1, (10, 3))
        g = build_graph(PointPairs(a, a.copy(), beta=0.01))
        assert edge_set(g) == complete_edges(10)

    def test_rotation_outlier_is_isolated(self):
        # 3 exact inliers + 1 random outlier: outlier degree 0 nearly always
        isolated = 0
        trials = 1000
        for seed in range(trials):
            rng = np.random.default_rng(seed)
            r0 = random_rotation(rng)
            rots = np.stack([r0, r0, r0, random_rotation(rng)])
            g = build_graph(RotationSamples(rots, beta=0.1))
            inlier_edges = {(0, 1), (0, 2), (1, 2)}
            assert inlier_edges <= edge_set(g)
            if g.degree()[3] == 0:
                isolated += 1
        assert isolated / trials >= 0.99

    def test_too_few_measurements_raises(self):
        rng = np.random.default_rng(1)
        with pytest.raises(TooFewMeasurementsError):
            build_graph(RotationSamples(random_rotation(rng, 1), beta=0.1))
        ms, _ = gen_crossratio(ExperimentSpec("crossratio", 3, 0.0, 0.1))
        with pytest.raises(TooFewMeasurementsError):
            build_graph(ms)

    def test_monotone_in_beta(self):
        gt, ms, _ = gen_registration(ExperimentSpec("registration", 40, 0.5, 0.01, rng_seed=2))
        for smaller, larger in [(0.01, 0.02), (0.02, 0.1), (0.1, 0.5)]:
            g_small = build_graph(PointPairs(ms.a, ms.b, smaller))
            g_large = build_graph(PointPairs(ms.a, ms.b, larger))
            assert edge_set(g_small) <= edge_set(g_large)

    def test_build_is_pure(self):
        gt, ms, _ = gen_registration(ExperimentSpec("registration", 30, 0.3, 0.01, rng_seed=3))
        g1, g2 = build_graph(ms), build_graph(ms)
        np.testing.assert_array_equal(g1.edges, g2.edges)

    def test_budgeted_pair_build_subset_of_full(self):
        gt, ms, _ = gen_registration(ExperimentSpec("registration", 60, 0.5, 0.01, rng_seed=4))
        full = build_graph(ms)
        part = build_graph(ms, SubsetBudget(max_subsets=500, rng_seed=5))
        assert part.budget_truncated
        assert not full.budget_truncated
        assert edge_set(part) <= edge_set(full)
        assert part.n_subsets_tested == 500


class TestBuildGraphCrossRatio:
    def test_all_inlier_sextet_is_complete(self):
        # N=6 inliers: all C(6,4)=15 subsets pass, giving K6
        ms, _ = gen_crossratio(ExperimentSpec("crossratio", 6, 0.0, 0.1, rng_seed=6))
        g = build_graph(ms)
        assert g.n_subsets_tested == 15
        assert edge_set(g) == complete_edges(6)

    def test_exact_quadruple_via_projection(self):
        pts = np.array([[0.0, 0.0, 2.0], [0.2, 0.1, 2.2], [0.4, 0.2, 2.4], [0.8, 0.4, 2.8]])
        y = project_pinhole(pts)
        g = build_graph(Camera2D3D(pts, y, beta=0.25))
        assert edge_set(g) == complete_edges(4)

    def test_planted_inliers_form_clique(self):
        for seed in range(5):
            ms, mask = gen_crossratio(ExperimentSpec("crossratio", 20, 0.5, 0.1, rng_seed=seed))
            g = build_graph(ms)
            members = np.flatnonzero(mask)
            for i, j in combinations(members.tolist(), 2):
                assert g.has_edge(i, j)


class TestTheoremOneAllProblems:
    """Planted inliers always induce a complete subgraph (small-scale version;
    the acceptance suite runs the full 100-seed sweep)."""

    @pytest.mark.parametrize("problem,n", [
        ("rotavg", 30), ("registration", 30), ("registration_normals", 30), ("crossratio", 14),
    ])
    def test_inliers_induce_complete_subgraph(self, problem, n):
        for seed in range(5):
            spec = ExperimentSpec(problem, n, 0.5,
                                  np.radians(5.0) if problem == "rotavg" else 0.01
                                  if problem != "crossratio" else 0.1,
                                  rng_seed=seed)
            if problem == "rotavg":
                _, ms, mask = gen_rotavg(spec)
            elif problem == "crossratio":
                ms, mask = gen_crossratio(spec)
            else:
                _, ms, mask = gen_registration(spec, with_normals=problem.endswith("normals"))
            g = build_graph(ms)
            members = np.flatnonzero(mask)
            for i, j in combinations(members.tolist(), 2):
                assert g.has_edge(i, j), f"{problem} seed {seed}: missing inlier edge ({i},{j})"


class TestCompatGraphStructure:
    def test_adjacency_is_symmetric_sorted(self):
        g = CompatGraph(5, np.array([[3, 1], [0, 4], [1, 0]]))
        assert edge_set(g) == {(1, 3), (0, 4), (0, 1)}
        np.testing.assert_array_equal(g.neighbors(0), [1, 4])
        np.testing.assert_array_equal(g.neighbors(1), [0, 3])
        assert g.n_edges == 3
        assert int(g.degree().sum()) == 2 * g.n_edges

    def test_rejects_self_loops_and_out_of_range(self):
        with pytest.raises(ValueError):
            CompatGraph(3, np.array([[1, 1]]))
        with pytest.raises(ValueError):
            CompatGraph(3, np.array([[0, 3]]))

    def test_edge_list_round_trip(self):
        rng = np.random.default_rng(7)
        gt, ms, _ = gen_registration(ExperimentSpec("registration", 25, 0.4, 0.01, rng_seed=8))
        g = build_graph(ms)
        text = g.to_edge_list_text()
        for line in text.splitlines():
            i, j = map(int, line.split())
            assert i < j
        back = CompatGraph.from_edge_list_text(text, n_vertices=g.n_vertices)
        np.testing.assert_array_equal(back.edges, g.edges)

    def test_edge_list_text_is_lexicographic(self):
        g = CompatGraph(4, np.array([[2, 3], [0, 1], [0, 3]]))
        assert g.to_edge_list_text() == "0 1\n0 3\n2 3\n"

    def test_from_edge_list_rejects_bad_lines(self):
        with pytest.raises(ValueError):
            CompatGraph.from_edge_list_text("0 1\n2\n")
