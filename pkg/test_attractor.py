import math
from pathlib import Path
import sys
import unittest

import numpy as np

APP_ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(APP_ROOT))

from attractor import (  # noqa: E402
    build_attractor_cloud,
    burn_in_steps,
    cloud_norm,
    collection_spacing,
    convergence_sweep,
    expand_cloud,
    hausdorff_full,
    hausdorff_semi,
    invariance_gap,
    sample_ball,
    trend_bounds,
    trend_holds,
)
from lattice import compute_constants  # noqa: E402
from models import (  # noqa: E402
    CloudKnobs,
    CloudRecipe,
    ConfigError,
    DimensionError,
    LatticeState,
    ModelParams,
    PointCloud,
    REF_SUBSTEPS,
)


def cloud_of(*rows) -> PointCloud:
    return PointCloud(np.array(rows, dtype=np.complex128))


def brute_force_semi(A: PointCloud, B: PointCloud) -> float:
    worst = 0.0
    for a in A.points:
        nearest = math.inf
        for b in B.points:
            diff = a - b
            nearest = min(nearest, math.sqrt(float(np.sum(diff.real**2 + diff.imag**2))))
        worst = max(worst, nearest)
    return worst


class HausdorffTests(unittest.TestCase):
    def test_hand_example(self) -> None:
        A = cloud_of([0, 0, 0], [0, 3, 0])
        B = cloud_of([0, 1, 0])
        self.assertEqual(hausdorff_semi(A, B), 2.0)
        self.assertEqual(hausdorff_semi(B, A), 1.0)
        self.assertEqual(hausdorff_full(A, B), 2.0)
        self.assertEqual(hausdorff_full(A, A), 0.0)

    def test_matches_brute_force(self) -> None:
        rng = np.random.default_rng(41)
        for _ in range(200):
            dim = 2 * int(rng.integers(1, 8)) + 1
            A = PointCloud(sample_ball(int(rng.integers(1, 33)), dim, 2.0, rng))
            B = PointCloud(sample_ball(int(rng.integers(1, 33)), dim, 2.0, rng))
            self.assertEqual(hausdorff_semi(A, B), brute_force_semi(A, B))
            self.assertEqual(hausdorff_full(A, B), max(brute_force_semi(A, B), brute_force_semi(B, A)))

    def test_blocks_and_threads_do_not_change_result(self) -> None:
        rng = np.random.default_rng(42)
        A = PointCloud(sample_ball(600, 3, 1.0, rng))
        B = PointCloud(sample_ball(50, 3, 1.0, rng))
        self.assertEqual(hausdorff_semi(A, B, threads=1), hausdorff_semi(A, B, threads=3))

    def test_enlarging_target_never_increases_distance(self) -> None:
        rng = np.random.default_rng(43)
        for _ in range(20):
            A = PointCloud(sample_ball(8, 3, 1.0, rng))
            B = PointCloud(sample_ball(5, 3, 1.0, rng))
            bigger = PointCloud(np.concatenate([B.points, sample_ball(5, 3, 1.0, rng)]))
            self.assertLessEqual(hausdorff_semi(A, bigger), hausdorff_semi(A, B))

    def test_triangle_inequality(self) -> None:
        rng = np.random.default_rng(44)
        for _ in range(20):
            A, B, C = (PointCloud(sample_ball(6, 3, 1.0, rng)) for _ in range(3))
            self.assertLessEqual(
                hausdorff_full(A, C), hausdorff_full(A, B) + hausdorff_full(B, C) + 1e-12
            )

    def test_dimension_mismatch(self) -> None:
        with self.assertRaises(DimensionError):
            hausdorff_semi(cloud_of([0, 0, 0]), cloud_of([0, 0, 0, 0, 0]))

    def test_cloud_norm(self) -> None:
        A = cloud_of([0, 1, 0], [0, 0, 2])
        self.assertEqual(cloud_norm(A), 2.0)
        self.assertEqual(cloud_norm(A), hausdorff_full(A, cloud_of([0, 0, 0])))
        self.assertEqual(cloud_norm(cloud_of([0, 0, 0])), 0.0)

    def test_expand_cloud(self) -> None:
        cloud = PointCloud(np.array([[1, 2, 3]], dtype=complex), m=1)
        expanded = expand_cloud(cloud, 2)
        np.testing.assert_array_equal(expanded.points, [[0, 1, 2, 3, 0]])
        self.assertIsNone(expanded.m)
        with self.assertRaises(DimensionError):
            expand_cloud(cloud, 0)

    def test_cloud_states_round_trip(self) -> None:
        states = [LatticeState.delta(0, 2), LatticeState.delta(1, 2, amplitude=1j)]
        cloud = PointCloud.from_states(states)
        self.assertEqual(len(cloud), 2)
        np.testing.assert_array_equal(cloud.states()[1].values, states[1].values)


class CloudTests(unittest.TestCase):
    def setUp(self) -> None:
        self.params = ModelParams.reference(window=4)
        self.constants = compute_constants(self.params)
        self.recipe = CloudRecipe(n_init=6, collect=3)

    def test_burn_in_formula(self) -> None:
        eps = 0.01
        expected = math.ceil(math.log(1e6) / math.log(1 + 2 * eps * self.constants.gap))
        self.assertEqual(burn_in_steps(eps, self.constants, 1e6), expected)

    def test_sampler_stays_in_ball(self) -> None:
        rng = np.random.default_rng(45)
        points = sample_ball(200, 9, 1.3, rng)
        self.assertLessEqual(float(np.linalg.norm(points, axis=1).max()), 1.3 * (1 + 1e-12))

    def test_forced_cloud_respects_attractor_bound(self) -> None:
        cloud = build_attractor_cloud("ies", self.params, self.recipe, CloudKnobs(seed=1))
        self.assertEqual(len(cloud), 18)
        self.assertEqual(cloud.meta.burn_in, burn_in_steps(self.constants.eps_star, self.constants, 1e6))
        self.assertLessEqual(cloud_norm(cloud) ** 2, self.constants.c1 / self.constants.gap + 0.01)

    def test_unforced_cloud_collapses(self) -> None:
        params = ModelParams(window=4)
        recipe = self.recipe.with_updated(contraction=1e14)
        cloud = build_attractor_cloud("ies", params, recipe, CloudKnobs(seed=2))
        self.assertLessEqual(cloud_norm(cloud), 1e-6)

    def test_truncated_cloud_respects_truncated_bound(self) -> None:
        cloud = build_attractor_cloud("truncated_ies", self.params, self.recipe, CloudKnobs(m=2, seed=3))
        self.assertEqual(cloud.dimension, 5)
        self.assertLessEqual(cloud_norm(cloud) ** 2, self.constants.c1_m(2) / self.constants.gap + 0.01)

    def test_thread_count_does_not_change_cloud(self) -> None:
        knobs = CloudKnobs(seed=4)
        recipe = self.recipe.with_updated(burn_in=25)
        serial = build_attractor_cloud("ies", self.params, recipe, knobs, threads=1)
        parallel = build_attractor_cloud("ies", self.params, recipe, knobs, threads=3)
        np.testing.assert_array_equal(serial.points, parallel.points)

    def test_zero_noise_pullback_reproduces_orbit_cloud(self) -> None:
        recipe = self.recipe.with_updated(burn_in=20)
        knobs = CloudKnobs(seed=5)
        orbit = build_attractor_cloud("ies", self.params, recipe, knobs)
        pullback = build_attractor_cloud("random_pullback", self.params, recipe, knobs)
        self.assertLessEqual(hausdorff_full(orbit, pullback), 1e-9)

    def test_noisy_pullback_is_seed_deterministic(self) -> None:
        recipe = self.recipe.with_updated(burn_in=20)
        knobs = CloudKnobs(seed=6, a=0.1)
        first = build_attractor_cloud("random_pullback", self.params, recipe, knobs)
        second = build_attractor_cloud("random_pullback", self.params, recipe, knobs)
        np.testing.assert_array_equal(first.points, second.points)

    def test_invariance_gap_is_within_collection_spacing(self) -> None:
        cloud = build_attractor_cloud("ies", self.params, self.recipe, CloudKnobs(seed=7))
        gap = invariance_gap(cloud, self.params)
        self.assertLessEqual(gap, 2 * collection_spacing(cloud) + 1e-12)

    def test_reference_substeps_are_converged(self) -> None:
        self.assertEqual(CloudKnobs().ref_substeps, REF_SUBSTEPS)
        self.assertGreaterEqual(REF_SUBSTEPS, 100)
        recipe = self.recipe.with_updated(n_init=4, collect=2, burn_in=30)
        knobs = CloudKnobs(seed=8)
        coarse = build_attractor_cloud("continuous_ref", self.params, recipe, knobs)
        halved = build_attractor_cloud(
            "continuous_ref", self.params, recipe, knobs.with_updated(ref_substeps=2 * REF_SUBSTEPS)
        )
        self.assertLess(hausdorff_full(coarse, halved), 1e-10)

    def test_inconsistent_knobs(self) -> None:
        with self.assertRaises(ConfigError):
            build_attractor_cloud("truncated_ies", self.params, self.recipe, CloudKnobs())
        with self.assertRaises(ConfigError):
            build_attractor_cloud("ies", self.params, self.recipe, CloudKnobs(m=2))
        with self.assertRaises(ConfigError):
            build_attractor_cloud("ies", self.params, self.recipe, CloudKnobs(a=0.1))
        with self.assertRaises(ConfigError):
            build_attractor_cloud("truncated_ies", self.params, self.recipe, CloudKnobs(m=9))
        with self.assertRaises(ConfigError):
            build_attractor_cloud("spiral", self.params, self.recipe, CloudKnobs())  # type: ignore[arg-type]


class SweepTests(unittest.TestCase):
    def setUp(self) -> None:
        self.params = ModelParams.reference(window=6)
        self.constants = compute_constants(self.params)
        self.recipe = CloudRecipe(n_init=4, collect=2, burn_in=30)

    def test_same_step_gives_zero_distance(self) -> None:
        eps = self.constants.eps_star
        rows = convergence_sweep(
            "eps_to_eps", [eps / 2, eps], self.params, CloudKnobs(seed=1), self.recipe
        )
        self.assertEqual([row.knob for row in rows], [eps / 2, eps])
        self.assertGreater(rows[0].distance, 0.0)
        self.assertEqual(rows[1].distance, 0.0)

    def test_dimension_sweep_rows_in_grid_order(self) -> None:
        rows = convergence_sweep("dimension", [2, 4, 6], self.params, CloudKnobs(seed=2), self.recipe)
        self.assertEqual([row.knob for row in rows], [2.0, 4.0, 6.0])
        for row in rows:
            self.assertTrue(math.isfinite(row.distance))
            self.assertGreaterEqual(row.distance, 0.0)

    def test_empty_grid(self) -> None:
        with self.assertRaises(ConfigError):
            convergence_sweep("noise", [], self.params, CloudKnobs(), self.recipe)


class ConvergenceTrendTests(unittest.TestCase):
    def setUp(self) -> None:
        self.recipe = CloudRecipe(n_init=4, collect=2, contraction=1e14)

    def test_truncated_clouds_approach_full_window(self) -> None:
        params = ModelParams.reference(window=16)
        rows = convergence_sweep("dimension", [2, 4, 8], params, CloudKnobs(seed=3), self.recipe)
        distances = [row.distance for row in rows]
        self.assertTrue(trend_holds(distances, 0.1, 1e-6), distances)
        self.assertLess(distances[0], 0.1)
        self.assertLess(distances[-1], 1e-3)

    def test_ies_clouds_approach_reference_as_eps_shrinks(self) -> None:
        params = ModelParams.reference(window=4)
        eps_star = compute_constants(params).eps_star
        grid = [eps_star / 4, eps_star / 8]
        rows = convergence_sweep("epsilon", grid, params, CloudKnobs(seed=4), self.recipe)
        distances = [row.distance for row in rows]
        self.assertTrue(trend_holds(distances, 0.1, 1e-6), distances)
        self.assertLess(distances[0], 0.05)

    def test_random_clouds_approach_deterministic_as_noise_vanishes(self) -> None:
        params = ModelParams.reference(window=8)
        grid = [0.4, 0.2, 0.1, 0.05]
        for m in (None, 4):
            with self.subTest(m=m):
                rows = convergence_sweep("noise", grid, params, CloudKnobs(m=m, seed=5), self.recipe)
                distances = [row.distance for row in rows]
                self.assertTrue(trend_holds(distances, 0.1, 1e-6), distances)
                self.assertLess(distances[-1], distances[0])


class TrendTests(unittest.TestCase):
    def test_bounds(self) -> None:
        self.assertEqual(trend_bounds([1.0, 0.5, 0.2], 0.1, 0.0), [math.inf, 1.1, 0.55])

    def test_slack_and_floor(self) -> None:
        self.assertTrue(trend_holds([1.0, 0.9, 0.95]))
        self.assertFalse(trend_holds([1.0, 1.2]))
        self.assertTrue(trend_holds([1e-8, 5e-7], 0.1, 1e-6))
        self.assertFalse(trend_holds([1e-8, 5e-6], 0.1, 1e-6))
        self.assertTrue(trend_holds([]))


if __name__ == "__main__":
    unittest.main()
