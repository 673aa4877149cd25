import functools
import os
import tempfile
import unittest

import numpy as np

from common.grid_quadrature import Grid
from dynamics import attractors, integrator, systems

SLOW_TESTS = bool(os.environ.get('SPML_SLOW_TESTS'))


def near_constant_ic(system, seed):
    """Perturbed constant that settles quickly: 0.2 or 0.8 depending on the seed parity."""
    base = 0.2 if seed % 2 else 0.8
    return system.constant_state(base) + 0.01 * np.cos(np.pi * system.grid.x)


def front_ic(system, seed):
    return 0.5 + 0.3 * np.cos(np.pi * system.grid.x)


def constant_or_left_front_ic(system, seed):
    """Near-constant for two seeds in three, otherwise a front at x = 0 with u ~ 1 on the left."""
    if seed % 3 == 2:
        x = system.grid.x
        width = np.sqrt(2 * system.nu)
        return 0.5 - 0.5 * np.tanh(x / (2 * width)) + 0.01 * np.cos(np.pi * x)
    return near_constant_ic(system, seed)


class TestConstantCatalog(unittest.TestCase):
    def test_reaction_diffusion(self):
        catalog = attractors.constant_attractor_catalog(
            systems.RDSystem.build(Grid(51), weighted=False))
        self.assertEqual([a.tag for a in catalog], ['constant-0', 'constant-1'])
        self.assertEqual([a.id for a in catalog], [0, 1])
        self.assertTrue(all(a.is_constant() for a in catalog))

    def test_fitzhugh_nagumo(self):
        system = systems.FHNSystem.build(Grid(51))
        catalog = attractors.constant_attractor_catalog(system)
        self.assertEqual(len(catalog), 2)
        self.assertAlmostEqual(catalog[1].representative.values[0], 0.9791, delta=1e-3)
        self.assertEqual(len(catalog[1].v_values), 51)
        for attractor in catalog:
            self.assertLess(attractors.rhs_sup_norm(attractor.state, system), 1e-6)


class TestClassifyAttractor(unittest.TestCase):
    def setUp(self):
        self.system = systems.RDSystem.build(Grid(51), weighted=False)
        self.catalog = attractors.constant_attractor_catalog(self.system)

    def test_constant_one(self):
        self.assertEqual(attractors.classify_attractor(
            self.system.constant_state(1.0), self.system, self.catalog), 1)

    def test_unstable_equilibrium_is_unconverged(self):
        self.assertEqual(attractors.classify_attractor(
            self.system.constant_state(0.5), self.system, self.catalog, t_max=100.0),
            attractors.UNCONVERGED)

    def test_small_perturbation_of_zero(self):
        state = self.system.constant_state(0.2) + 0.05 * np.cos(np.pi * self.system.grid.x)
        self.assertEqual(attractors.classify_attractor(state, self.system, self.catalog), 0)

    def test_empty_catalog(self):
        with self.assertRaises(ValueError):
            attractors.classify_attractor(self.system.constant_state(1.0), self.system, [])


class TestDiscoverAttractors(unittest.TestCase):
    def setUp(self):
        self.system = systems.RDSystem.build(Grid(51), weighted=False)

    def test_two_constant_attractors(self):
        catalog = attractors.discover_attractors(
            self.system, functools.partial(near_constant_ic, self.system), t_long=50.0)
        self.assertEqual([a.tag for a in catalog], ['constant-0', 'constant-1'])
        for attractor in catalog:
            self.assertLess(attractors.rhs_sup_norm(attractor.state, self.system), 1e-6)

    def test_requires_enough_pilots(self):
        with self.assertRaises(attractors.AttractorDiscoveryError):
            attractors.discover_attractors(
                self.system, functools.partial(near_constant_ic, self.system), n_pilot=10)

    def test_nothing_converged(self):
        with self.assertRaises(attractors.AttractorDiscoveryError):
            attractors.discover_attractors(
                self.system, functools.partial(front_ic, self.system), t_long=1.0,
                t_polish_max=1.0)


class TestNewtonPolish(unittest.TestCase):
    def setUp(self):
        self.system = systems.RDSystem.build(Grid(51), weighted=False)
        self.wave = np.cos(np.pi * self.system.grid.x)

    def test_converges_to_nearby_stable_constant(self):
        polished = attractors.newton_equilibrium(
            self.system.constant_state(0.98) + 0.005 * self.wave, self.system)
        self.assertIsNotNone(polished)
        np.testing.assert_allclose(polished, 1.0, atol=1e-6)

    def test_rejects_unstable_equilibrium(self):
        self.assertIsNone(attractors.newton_equilibrium(
            self.system.constant_state(0.5) + 1e-3 * self.wave, self.system))

    def test_polish_needs_no_extra_integration_near_equilibrium(self):
        state = self.system.constant_state(0.02) + 0.005 * self.wave
        polished = attractors._polish(state, self.system, 10.0, 10.0,
                                      integrator.IntegratorConfig())
        self.assertIsNotNone(polished)
        self.assertLess(attractors.rhs_sup_norm(polished, self.system), 1e-6)

    def test_constant_states_are_stable(self):
        for value in (0.0, 1.0):
            self.assertTrue(attractors.is_stable(self.system.constant_state(value), self.system))
        self.assertFalse(attractors.is_stable(self.system.constant_state(0.5), self.system))


class TestWithReflections(unittest.TestCase):
    def test_adds_missing_mirror_image(self):
        system = systems.RDSystem.build(Grid(51))
        step = 0.5 - 0.5 * np.tanh(system.grid.x / 0.1)
        completed = attractors.with_reflections(
            [system.constant_state(0.0), step], system, merge_tol=0.05)
        self.assertEqual(len(completed), 3)
        np.testing.assert_array_equal(completed[2], step[::-1])

    def test_symmetric_states_are_not_duplicated(self):
        system = systems.RDSystem.build(Grid(51))
        states = [system.constant_state(0.0), system.constant_state(1.0)]
        self.assertEqual(len(attractors.with_reflections(states, system, merge_tol=0.05)), 2)

    def test_asymmetric_grid_is_left_alone(self):
        system = systems.RDSystem.build(Grid(51, 0.0, 1.0), weighted=False)
        step = 0.5 - 0.5 * np.tanh((system.grid.x - 0.5) / 0.1)
        self.assertEqual(len(attractors.with_reflections([step], system, merge_tol=0.05)), 1)


class TestDiscoverWeightedAttractors(unittest.TestCase):
    """Weighted reaction-diffusion on a coarse grid: two constants and a mirrored pair of steps."""

    def test_four_attractors(self):
        system = systems.RDSystem.build(Grid(51))
        catalog = attractors.discover_attractors(
            system, functools.partial(constant_or_left_front_ic, system), t_long=50.0,
            t_polish_max=100.0)
        self.assertEqual([a.tag for a in catalog],
                         ['constant-0', 'constant-1', 'left-step', 'right-step'])
        for attractor in catalog:
            self.assertLess(attractors.rhs_sup_norm(attractor.state, system), 1e-6)
            self.assertTrue(attractors.is_stable(attractor.state, system))
        np.testing.assert_allclose(catalog[3].state, catalog[2].state[::-1], atol=1e-8)

    def test_without_reflections_only_the_seeded_step(self):
        system = systems.RDSystem.build(Grid(51))
        catalog = attractors.discover_attractors(
            system, functools.partial(constant_or_left_front_ic, system), t_long=50.0,
            t_polish_max=100.0, reflect=False)
        self.assertEqual([a.tag for a in catalog], ['constant-0', 'constant-1', 'left-step'])


class TestCatalogStorage(unittest.TestCase):
    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp_dir.name, 'attractors.json')

    def tearDown(self):
        self.tmp_dir.cleanup()

    def test_round_trip(self):
        for system in (systems.RDSystem.build(Grid(51)), systems.FHNSystem.build(Grid(51))):
            catalog = attractors.constant_attractor_catalog(system)
            attractors.save_attractors(self.path, system, catalog)
            loaded_system, loaded = attractors.load_attractors(self.path)
            self.assertEqual(loaded_system.params(), system.params())
            self.assertEqual([a.tag for a in loaded], [a.tag for a in catalog])
            for original, restored in zip(catalog, loaded):
                np.testing.assert_array_equal(original.state, restored.state)

    def test_wrong_version(self):
        with open(self.path, 'w', encoding='UTF-8') as open_file:
            open_file.write('{"version": "spml-lib/1"}')
        with self.assertRaises(attractors.CatalogFormatError):
            attractors.load_attractors(self.path)


@unittest.skipUnless(SLOW_TESTS, 'set SPML_SLOW_TESTS to run experiment-scale checks')
class TestDiscoverModelAttractors(unittest.TestCase):
    """Full-resolution discovery for both model systems."""

    def discover(self, system):
        from library import generation
        spec = generation.default_ic_spec(system)
        return attractors.discover_attractors(
            system, generation.discovery_sampler(system, spec), n_pilot=50,
            threads=os.cpu_count())

    def test_weighted_reaction_diffusion_has_four(self):
        catalog = self.discover(systems.RDSystem.build(Grid(201)))
        self.assertEqual(len(catalog), 4)
        self.assertEqual([a.tag for a in catalog[:2]], ['constant-0', 'constant-1'])
        self.assertGreater(catalog[2].state[0], catalog[3].state[0])

    def test_unweighted_reaction_diffusion_has_two(self):
        catalog = self.discover(systems.RDSystem.build(Grid(201), weighted=False))
        self.assertEqual([a.tag for a in catalog], ['constant-0', 'constant-1'])

    def test_fitzhugh_nagumo_has_two(self):
        catalog = self.discover(systems.FHNSystem.build(Grid(201)))
        self.assertEqual(len(catalog), 2)
        self.assertAlmostEqual(catalog[0].representative.values.mean(), 0.0, delta=1e-3)
        self.assertAlmostEqual(catalog[1].representative.values.mean(), 0.9791, delta=1e-3)


if __name__ == '__main__':
    unittest.main()
