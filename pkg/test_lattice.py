import math
from pathlib import Path
import sys
import unittest

import numpy as np

APP_ROOT = Path(__file__).resolve().parent
sys.path.insert(0, str(APP_ROOT))

from lattice import (  # noqa: E402
    absorbing_time,
    apply_laplacian,
    compute_constants,
    energy_bound,
    forward_difference,
    laplacian_values,
    lipschitz_gap,
    state_field,
    tail_mass,
    tail_sum,
    vector_field,
)
from models import (  # noqa: E402
    CutoffProfile,
    DimensionError,
    LatticeState,
    ModelParams,
    ParameterError,
    ValidationError,
    force_from_entries,
)


def real_params(window: int = 8, **changes) -> ModelParams:
    values = dict(lam=0.1, mu=0.0, gamma=1.0, beta=0.0, k=1.0, nu=0.0, p=2.0, eta=0.0)
    values.update(changes)
    return ModelParams.reference(window=window, **values)


class LatticeStateTests(unittest.TestCase):
    def test_state_is_read_only(self) -> None:
        state = LatticeState.delta(0, 2)
        with self.assertRaises(ValueError):
            state.values[0] = 1.0

    def test_even_or_mismatched_sizes_are_rejected(self) -> None:
        with self.assertRaises(DimensionError):
            LatticeState(np.zeros(4))
        with self.assertRaises(DimensionError):
            LatticeState(np.zeros(5), m=3)
        with self.assertRaises(ValidationError):
            LatticeState(np.array([0.0, math.nan, 0.0]))

    def test_sites_and_lookup(self) -> None:
        state = LatticeState.delta(-1, 2, amplitude=2j)
        self.assertEqual(state.sites.tolist(), [-2, -1, 0, 1, 2])
        self.assertEqual(state.at(-1), 2j)
        self.assertEqual(state.at(5), 0j)
        self.assertEqual(state.kind, "full")
        self.assertEqual(LatticeState.zeros(3, truncated=True).kind, "truncated")

    def test_force_outside_window_is_rejected(self) -> None:
        with self.assertRaises(DimensionError):
            force_from_entries({3: 1.0}, 2)

    def test_gamma_must_exceed_four_lambda(self) -> None:
        with self.assertRaises(ParameterError) as ctx:
            ModelParams(lam=0.3, gamma=1.0)
        self.assertIn("gamma must exceed 4*lambda", str(ctx.exception))
        with self.assertRaises(ParameterError):
            ModelParams(lam=0.25, gamma=1.0)


class OperatorTests(unittest.TestCase):
    def test_laplacian_of_delta(self) -> None:
        out = apply_laplacian(LatticeState.delta(0, 2))
        np.testing.assert_array_equal(out.values.real, [0, -1, 2, -1, 0])

    def test_laplacian_uses_zero_padding_at_window_edge(self) -> None:
        out = apply_laplacian(LatticeState.delta(2, 2))
        np.testing.assert_array_equal(out.values.real, [0, 0, 0, -1, 2])

    def test_forward_difference_of_delta(self) -> None:
        out = forward_difference(LatticeState.delta(0, 2))
        np.testing.assert_array_equal(out.values.real, [0, 1, -1, 0, 0])

    def test_laplacian_pairing_matches_difference_norm(self) -> None:
        rng = np.random.default_rng(11)
        values = rng.normal(size=9) + 1j * rng.normal(size=9)
        values[0] = 0.0
        u = LatticeState(values)
        pairing = np.vdot(u.values, apply_laplacian(u).values)
        self.assertAlmostEqual(pairing.imag, 0.0, places=12)
        self.assertAlmostEqual(pairing.real, forward_difference(u).norm() ** 2, places=12)

    def test_periodic_laplacian_kills_constants(self) -> None:
        np.testing.assert_allclose(laplacian_values(np.ones(7, dtype=complex), periodic=True), 0.0)

    def test_laplacian_is_bounded_by_four(self) -> None:
        rng = np.random.default_rng(3)
        for _ in range(20):
            u = LatticeState(rng.normal(size=11) + 1j * rng.normal(size=11))
            self.assertLessEqual(apply_laplacian(u).norm(), 4 * u.norm() + 1e-12)

    def test_truncated_state_rejected_by_full_operators(self) -> None:
        with self.assertRaises(DimensionError):
            apply_laplacian(LatticeState.zeros(2, truncated=True))


class VectorFieldTests(unittest.TestCase):
    def test_unforced_field_at_delta(self) -> None:
        params = real_params(window=3, g=np.zeros(7))
        out = vector_field(LatticeState.delta(0, 3), params)
        self.assertAlmostEqual(out.at(0).real, -1.8, places=14)
        self.assertAlmostEqual(out.at(1).real, -0.1, places=14)
        self.assertAlmostEqual(out.at(-1).real, -0.1, places=14)
        self.assertEqual(out.at(2), 0j)
        self.assertAlmostEqual(float(np.abs(out.values.imag).max()), 0.0)

    def test_field_at_zero_is_force(self) -> None:
        params = ModelParams.reference(window=4)
        out = vector_field(LatticeState.zeros(4), params)
        np.testing.assert_array_equal(out.values, params.g)

    def test_window_mismatch(self) -> None:
        with self.assertRaises(DimensionError):
            vector_field(LatticeState.zeros(3), ModelParams.reference(window=4))

    def test_field_growth_and_lipschitz_bounds_on_ball(self) -> None:
        params = ModelParams.reference(window=6)
        constants = compute_constants(params)
        rng = np.random.default_rng(5)
        r = 1.7
        for _ in range(30):
            u_raw = rng.normal(size=13) + 1j * rng.normal(size=13)
            v_raw = rng.normal(size=13) + 1j * rng.normal(size=13)
            u = LatticeState(u_raw / np.linalg.norm(u_raw) * r * rng.uniform())
            v = LatticeState(v_raw / np.linalg.norm(v_raw) * r * rng.uniform())
            self.assertLessEqual(vector_field(u, params).norm(), constants.M(r))
            gap = lipschitz_gap(u, v, params)
            self.assertLessEqual(gap, constants.L(r) * np.linalg.norm(u.values - v.values) + 1e-12)

    def test_state_field_dispatches_on_kind(self) -> None:
        params = real_params(window=4, g=np.zeros(9))
        truncated = LatticeState.delta(1, 1, truncated=True)
        out = state_field(truncated, params)
        # wrap-around neighbour of site 1 is site -1
        self.assertAlmostEqual(out.at(-1).real, -0.1, places=14)
        self.assertAlmostEqual(out.at(1).real, -1.8, places=14)


class ConstantsTests(unittest.TestCase):
    def test_reference_constants(self) -> None:
        params = real_params()
        c = compute_constants(params)
        self.assertAlmostEqual(c.c3, 0.75 * 4 ** (-1 / 3), places=12)
        self.assertAlmostEqual(c.c1, 0.47247, places=5)
        self.assertAlmostEqual(c.r_star, 0.88738, places=4)
        self.assertAlmostEqual(c.r_star**2, c.c1 / 0.6, places=12)
        self.assertAlmostEqual(c.eps_star, 0.0421, places=3)
        self.assertEqual(c.c2, 1.5)

    def test_eps_star_controls_growth_and_lipschitz(self) -> None:
        c = compute_constants(ModelParams.reference(window=8))
        radius = c.r_star + 1
        self.assertLessEqual(c.eps_star * c.M(radius), 1.0 + 1e-12)
        self.assertLessEqual(c.eps_star * (1 + c.L(radius)), 1.0 + 1e-12)
        self.assertAlmostEqual(
            c.eps_star, min(1 / c.M(radius), 1 / (1 + c.L(radius))), places=15
        )

    def test_truncated_constants_grow_with_m(self) -> None:
        g = force_from_entries({0: 1.0, 2: 0.5, -3: 0.25j}, 4)
        c = compute_constants(ModelParams(g=g, window=4))
        values = [c.c1_m(m) for m in range(1, 5)]
        self.assertEqual(values, sorted(values))
        self.assertAlmostEqual(values[-1], c.c1, places=14)
        self.assertLessEqual(c.r_star_m(1), c.r_star)
        self.assertLessEqual(c.attractor_bound_m(2), c.attractor_bound())
        self.assertAlmostEqual(c.attractor_bound_m(4), c.attractor_bound(), places=14)
        with self.assertRaises(DimensionError):
            c.c1_m(5)

    def test_force_free_attractor_bound_is_zero(self) -> None:
        c = compute_constants(ModelParams(window=3))
        self.assertEqual(c.c1, 0.0)
        self.assertEqual(c.attractor_bound(), 0.0)


class CutoffAndTailTests(unittest.TestCase):
    def test_profile_shape(self) -> None:
        xi = CutoffProfile.xi
        self.assertEqual(float(xi(0.5)), 0.0)
        self.assertEqual(float(xi(1.0)), 0.0)
        self.assertAlmostEqual(float(xi(1.5)), 0.5)
        self.assertEqual(float(xi(2.0)), 1.0)
        self.assertEqual(float(xi(7.0)), 1.0)
        grid = np.linspace(1.0, 2.0, 201)
        slopes = np.diff(xi(grid)) / np.diff(grid)
        self.assertLessEqual(float(slopes.max()), CutoffProfile(1).c2 + 1e-9)

    def test_weights_and_tail_mass(self) -> None:
        cutoff = CutoffProfile(2)
        u = LatticeState(np.ones(9))
        np.testing.assert_allclose(cutoff.weights(u.sites), [1, 0.5, 0, 0, 0, 0, 0, 0.5, 1])
        self.assertAlmostEqual(tail_mass(u, cutoff), 3.0)
        self.assertEqual(tail_sum(u, 3), 4.0)
        self.assertEqual(tail_sum(u, 5), 0.0)

    def test_invalid_cutoff_scale(self) -> None:
        with self.assertRaises(ParameterError):
            CutoffProfile(0)


class AbsorptionTests(unittest.TestCase):
    def test_absorbing_time_inside_ball_is_zero(self) -> None:
        params = ModelParams.reference(window=4)
        c = compute_constants(params)
        self.assertEqual(absorbing_time(c.r_star, params, c), 0.0)

    def test_absorbing_time_at_radius_is_zero_across_parameters(self) -> None:
        cases = [
            ModelParams.reference(window=4),
            ModelParams.reference(window=16, eta=0.3),
            ModelParams.reference(window=8, eta=2.5, gamma=1.7),
            real_params(window=8, eta=1.0, g=force_from_entries({0: 0.7, 1: 0.2j}, 8)),
        ]
        for params in cases:
            with self.subTest(params=params):
                c = compute_constants(params)
                self.assertEqual(absorbing_time(c.r_star, params, c), 0.0)
                self.assertEqual(absorbing_time(c.r_star * (1 - 1e-15), params, c), 0.0)
                self.assertGreater(absorbing_time(c.r_star * 1.01, params, c), 0.0)

    def test_absorbing_time_without_eta_at_radius(self) -> None:
        params = real_params(window=4, g=force_from_entries({0: 1.0}, 4))
        c = compute_constants(params)
        self.assertEqual(absorbing_time(c.r_star, params, c), 0.0)
        self.assertEqual(absorbing_time(c.r_star * 1.01, params, c), math.inf)

    def test_absorbing_time_brings_envelope_to_radius(self) -> None:
        params = ModelParams.reference(window=4)
        c = compute_constants(params)
        r = 5.0
        t = absorbing_time(r, params, c)
        self.assertGreater(t, 0.0)
        excess = (r * r - c.c1 / c.gap) * math.exp(-2 * c.gap * t)
        self.assertAlmostEqual(excess, params.eta, places=12)
        self.assertAlmostEqual(energy_bound(r * r, t, params, c), c.r_star**2, places=10)

    def test_absorbing_time_without_margin_is_infinite(self) -> None:
        params = real_params(window=4)
        self.assertEqual(absorbing_time(2.0, params), math.inf)

    def test_energy_bound_limits(self) -> None:
        params = ModelParams.reference(window=4)
        c = compute_constants(params)
        self.assertAlmostEqual(energy_bound(3.0, 0.0, params, c), 3.0, places=14)
        self.assertAlmostEqual(energy_bound(3.0, 200.0, params, c), c.c1 / c.gap, places=10)


if __name__ == "__main__":
    unittest.main()
