import unittest

import numpy as np

from common import grid_quadrature
from common.grid_quadrature import Density, Field, Grid
from dynamics.systems import rd_weight


class TestGrid(unittest.TestCase):
    def test_quad_weights_sum_to_length(self):
        for n_points in (3, 51, 201):
            grid = Grid(n_points)
            self.assertAlmostEqual(grid.quad_weights.sum(), 2.0, delta=1e-12)

    def test_coordinates_are_exactly_antisymmetric(self):
        grid = Grid(201)
        self.assertTrue(np.array_equal(grid.x, -grid.x[::-1]))
        self.assertEqual(grid.x[100], 0.0)

    def test_rejects_tiny_grid(self):
        with self.assertRaises(grid_quadrature.DomainError):
            Grid(2)

    def test_trapezoid_exact_for_linear_functions(self):
        grid = Grid(51, x_min=0.0, x_max=3.0)
        u = Field.from_function(grid, lambda x: 2.0 * x - 1.0)
        self.assertAlmostEqual(grid_quadrature.integrate(u), 6.0, delta=1e-12)

    def test_json_round_trip(self):
        grid = Grid(41, x_min=-2.0, x_max=0.5)
        self.assertEqual(Grid.from_json(grid.to_json()), grid)


class TestFieldAndDensity(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(51)

    def test_field_rejects_wrong_length(self):
        with self.assertRaises(grid_quadrature.GridMismatchError):
            Field(self.grid, np.zeros(50))

    def test_field_rejects_non_finite(self):
        values = np.zeros(51)
        values[3] = np.nan
        with self.assertRaises(grid_quadrature.DomainError):
            Field(self.grid, values)

    def test_field_values_are_read_only(self):
        u = Field.constant(self.grid, 1.0)
        with self.assertRaises(ValueError):
            u.values[0] = 2.0

    def test_density_rejects_negative_values(self):
        values = np.ones(51)
        values[10] = -1e-3
        with self.assertRaises(grid_quadrature.DomainError):
            Density(self.grid, values)

    def test_zero_density_requires_flag(self):
        with self.assertRaises(grid_quadrature.DomainError):
            Density(self.grid, np.zeros(51))
        self.assertTrue(Density(self.grid, np.zeros(51), zero=True).zero)

    def test_max_normalized(self):
        phi = Density(self.grid, np.linspace(0.0, 4.0, 51))
        self.assertEqual(phi.max_normalized().max(), 1.0)


class TestNorms(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(201)
        self.rng = np.random.default_rng(7)

    def test_constant_inner_product(self):
        one = Field.constant(self.grid, 1.0)
        self.assertAlmostEqual(
            grid_quadrature.weighted_inner_product(one, one, Density.constant(self.grid, 1.0)),
            2.0, delta=1e-12)

    def test_weight_function_integral(self):
        one = Field.constant(self.grid, 1.0)
        w = rd_weight(self.grid)
        self.assertAlmostEqual(
            grid_quadrature.weighted_inner_product(one, one, w), 1.4, delta=1e-3)
        self.assertAlmostEqual(grid_quadrature.intrinsic_norm_sq(one, w), 1.4, delta=1e-3)

    def test_zero_density_gives_zero(self):
        u = Field(self.grid, self.rng.standard_normal(201))
        self.assertEqual(grid_quadrature.weighted_norm_sq(u, Density.constant(self.grid, 0.0)), 0.0)

    def test_weighted_norm_matches_direct_loop(self):
        u = Field(self.grid, self.rng.standard_normal(201))
        phi = Density(self.grid, self.rng.uniform(0.0, 2.0, 201))
        expected = 0.0
        for k in range(201):
            expected += u.values[k] ** 2 * phi.values[k] * self.grid.quad_weights[k]
        self.assertAlmostEqual(grid_quadrature.weighted_norm_sq(u, phi), expected, delta=1e-12)

    def test_intrinsic_norm_with_unit_weight_is_l2(self):
        u = Field(self.grid, self.rng.standard_normal(201))
        self.assertAlmostEqual(
            grid_quadrature.intrinsic_norm_sq(u, Field.constant(self.grid, 1.0)),
            grid_quadrature.l2_norm_sq(u), delta=1e-12)

    def test_intrinsic_norm_rejects_nonpositive_weight(self):
        u = Field.constant(self.grid, 1.0)
        with self.assertRaises(grid_quadrature.DomainError):
            grid_quadrature.intrinsic_norm_sq(u, Field.constant(self.grid, 0.0))

    def test_grid_mismatch(self):
        u = Field.constant(self.grid, 1.0)
        v = Field.constant(Grid(51), 1.0)
        with self.assertRaises(grid_quadrature.GridMismatchError):
            grid_quadrature.weighted_inner_product(u, v, Density.constant(self.grid, 1.0))

    def test_pseudo_norm_axioms(self):
        values = self.rng.uniform(0.0, 1.0, 201)
        values[::3] = 0.0
        phi = Density(self.grid, values)
        for _ in range(20):
            u, v = (Field(self.grid, self.rng.standard_normal(201)) for _ in range(2))
            norm_u = np.sqrt(grid_quadrature.weighted_norm_sq(u, phi))
            norm_v = np.sqrt(grid_quadrature.weighted_norm_sq(v, phi))
            norm_sum = np.sqrt(grid_quadrature.weighted_norm_sq(
                Field(self.grid, u.values + v.values), phi))
            norm_scaled = np.sqrt(grid_quadrature.weighted_norm_sq(
                Field(self.grid, -3.0 * u.values), phi))
            self.assertLessEqual(norm_sum, norm_u + norm_v + 1e-12)
            self.assertAlmostEqual(norm_scaled, 3.0 * norm_u, delta=1e-10)


class TestEnergyFunctional(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(201)
        self.w = rd_weight(self.grid)

    def test_stable_constants_have_zero_energy(self):
        for value in (0.0, 1.0):
            for stencil in ('central', 'flux'):
                self.assertAlmostEqual(grid_quadrature.energy_functional(
                    Field.constant(self.grid, value), self.w, 1e-2, stencil=stencil), 0.0,
                    delta=1e-14)

    def test_unstable_constant(self):
        half = Field.constant(self.grid, 0.5)
        self.assertAlmostEqual(grid_quadrature.energy_functional(
            half, Field.constant(self.grid, 1.0), 1e-2), 2.0 / 64, delta=1e-12)

    def test_antiderivative(self):
        u = np.linspace(-1.0, 2.0, 31)
        h = 1e-6
        numeric = (grid_quadrature.reaction_antiderivative(u + h)
                   - grid_quadrature.reaction_antiderivative(u - h)) / (2 * h)
        np.testing.assert_allclose(numeric, grid_quadrature.reaction(u), atol=1e-8)

    def test_stencils_agree_on_smooth_fields(self):
        grid = Grid(2001)
        u = Field.from_function(grid, lambda x: 0.5 + 0.3 * np.cos(np.pi * x))
        one = Field.constant(grid, 1.0)
        central = grid_quadrature.energy_functional(u, one, 1e-2, stencil='central')
        flux = grid_quadrature.energy_functional(u, one, 1e-2, stencil='flux')
        self.assertAlmostEqual(central, flux, delta=1e-6)

    def test_rejects_bad_inputs(self):
        u = Field.constant(self.grid, 0.2)
        with self.assertRaises(grid_quadrature.DomainError):
            grid_quadrature.energy_functional(u, self.w, 0.0)
        with self.assertRaises(grid_quadrature.DomainError):
            grid_quadrature.energy_functional(u, Field.constant(self.grid, -1.0), 1e-2)
        with self.assertRaises(ValueError):
            grid_quadrature.energy_functional(u, self.w, 1e-2, stencil='upwind')


if __name__ == '__main__':
    unittest.main()
