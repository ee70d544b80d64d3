"""The test suite for the Monte-Carlo approximation of the true bounds."""

import unittest
from dataclasses import replace

import numpy as np

from censbounds import InvalidArgumentException
from censbounds.core import ParameterBox
from censbounds.oracle import (
    MonteCarloFeasibility,
    OracleConfig,
    adaptive_grid_search,
    draw_mc_sample,
    mc_moments,
    oracle_bounds,
)
from censbounds.simulation import DESIGN_PRESETS, SimDesign
from censbounds.workers import substream

from .util import slow_tests_enabled


def ball(center, radius):
    """Scores radius - |beta - center|: feasible exactly on the closed ball with slack 0."""
    center = np.asarray(center, dtype=float)

    def scores(betas):
        return radius - np.linalg.norm(np.asarray(betas) - center, axis=1)

    return scores


class TestAdaptiveGrid(unittest.TestCase):
    """Test lattice refinement on synthetic feasible sets."""

    BOX = ParameterBox.cube(2.0, 2)

    def test_ball(self):
        """Test the projections of a disc and the level schedule."""
        res = adaptive_grid_search(ball((0.3, -0.2), 0.5), self.BOX, error=0.05, initial_points=21, slack=0.0)
        self.assertFalse(res.empty)
        self.assertEqual([level.h[0] for level in res.levels], [0.2, 0.1, 0.05])
        self.assertEqual(res.h, (0.05, 0.05))
        for ((lo, hi), c) in zip(res.bounds, (0.3, -0.2), strict=True):
            self.assertGreaterEqual(lo, c - 0.5 - 1e-9)
            self.assertLessEqual(hi, c + 0.5 + 1e-9)
            self.assertLess(lo, c - 0.5 + 0.06)
            self.assertGreater(hi, c + 0.5 - 0.06)

    def test_refinement_tightens(self):
        """Test each level's bounds sit inside the true projection and widen toward it."""
        res = adaptive_grid_search(ball((0.0, 0.0), 0.77), self.BOX, error=0.02, slack=0.0)
        widths = [level.bounds[0][1] - level.bounds[0][0] for level in res.levels]
        self.assertTrue(all(w <= 1.54 + 1e-9 for w in widths))
        self.assertGreater(widths[-1], 1.54 - 0.05)
        self.assertEqual(res.evaluations, sum(level.evaluated for level in res.levels))

    def test_thin_set_found_by_fallback(self):
        """Test a set between coarse lattice points is found by refining the best scores."""
        res = adaptive_grid_search(ball((0.1, 0.1), 0.03), self.BOX, error=0.05, slack=0.0)
        self.assertEqual(res.levels[0].feasible, 0)
        self.assertFalse(res.empty)
        for (lo, hi) in res.bounds:
            self.assertAlmostEqual(lo, 0.1, delta=0.03)
            self.assertAlmostEqual(hi, 0.1, delta=0.03)

    def test_empty(self):
        """Test nothing feasible anywhere."""
        res = adaptive_grid_search(lambda b: -np.ones(len(b)), self.BOX, error=0.1, slack=0.5)
        self.assertTrue(res.empty)
        self.assertIsNone(res.as_dict()['bounds'])
        self.assertTrue(all(level.feasible == 0 for level in res.levels))

    def test_anchor_is_on_the_lattice(self):
        """Test a tiny set around the anchor is hit at the first level."""
        anchor = (0.33, -0.77)
        res = adaptive_grid_search(ball(anchor, 1e-6), self.BOX, error=0.1, slack=0.0, anchor=anchor)
        self.assertEqual(res.levels[0].feasible, 1)
        np.testing.assert_allclose([b[0] for b in res.bounds], anchor)
        with self.assertRaises(InvalidArgumentException):
            adaptive_grid_search(ball(anchor, 0.1), self.BOX, anchor=(3.0, 0.0))

    def test_thread_invariant(self):
        """Test chunked parallel scoring gives the same result."""
        one = adaptive_grid_search(ball((0.2, 0.4), 0.6), self.BOX, error=0.05, slack=0.0)
        four = adaptive_grid_search(ball((0.2, 0.4), 0.6), self.BOX, error=0.05, slack=0.0, threads=4, chunk=37)
        self.assertEqual(one.bounds, four.bounds)
        self.assertEqual(one.evaluations, four.evaluations)


class TestMonteCarloMoments(unittest.TestCase):
    """Test the large-sample moments."""

    @classmethod
    def setUpClass(cls):
        cls.design = SimDesign(censoring_rate=0.3, seed=3)
        cls.sample = draw_mc_sample(cls.design, 20000, substream(3, 13), 0.3)

    def test_truth_feasible(self):
        """Test the true coefficients satisfy every moment."""
        mom = mc_moments(self.sample, self.design.beta_true)
        self.assertTrue(mom.feasible, mom.score)
        self.assertEqual(mom.mbar.shape, (2 * self.sample.J,))

    def test_far_point_infeasible(self):
        """Test beta_1 = 9 violates some moment by many standard errors."""
        mom = mc_moments(self.sample, [0.0, 9.0, -1.0])
        self.assertFalse(mom.feasible)
        self.assertLess(mom.score, -10.0)

    def test_batched_scores(self):
        """Test batched scores match one-at-a-time moments."""
        betas = np.array([[0.0, 1.0, -1.0], [0.5, 0.2, 0.0], [0.0, 9.0, -1.0]])
        scores = MonteCarloFeasibility(self.sample, batch=2)(betas)
        expected = [mc_moments(self.sample, b).score for b in betas]
        np.testing.assert_allclose(scores, expected, rtol=1e-10, atol=1e-9)


class TestOracleBounds(unittest.TestCase):
    """Test the driver on a coarse configuration."""

    def test_config_validation(self):
        """Test the config limits."""
        for kwargs in ({'n_mc': 10}, {'error': 0.0}, {'initial_points': 1}, {'draws': 0}, {'slack': -1.0}):
            with self.assertRaises(InvalidArgumentException, msg=str(kwargs)):
                OracleConfig(**kwargs)

    def test_coarse_run(self):
        """Test a single coarse draw brackets the truth."""
        design = SimDesign(censoring_rate=0.3, seed=5)
        config = OracleConfig(n_mc=3000, error=0.5, initial_points=5, draws=1, box=3.0)
        res = oracle_bounds(design, config)
        self.assertFalse(res.empty)
        self.assertEqual(res.empty_draws, 0)
        (lo, hi) = res.projection(1)
        self.assertLessEqual(lo, 1.0)
        self.assertGreaterEqual(hi, 1.0)
        doc = res.as_dict()
        self.assertEqual(doc['config']['box'], 3.0)
        self.assertEqual(len(doc['draws']), 1)

    @unittest.skipUnless(slow_tests_enabled(), 'set CENSBOUNDS_SLOW to run')
    def test_independent_design(self):
        """Test the full-size oracle for both links of the independent 30% design."""
        for (link, (lower, upper)) in (('cox', (0.64, 1.24)), ('aft', (0.89, 1.24))):
            design = replace(DESIGN_PRESETS['indep-30'], link=link)
            res = oracle_bounds(design, OracleConfig(n_mc=50000, error=0.05, draws=5, threads=4))
            (lo, hi) = res.projection(1)
            self.assertAlmostEqual(lo, lower, delta=0.10, msg=link)
            self.assertAlmostEqual(hi, upper, delta=0.10, msg=link)
            self.assertEqual(res.empty_draws, 0)


# vim: sw=4 ts=4 et si:
