"""The test suite for the censbounds core types: links, observations and boxes."""

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from censbounds import InvalidArgumentException
from censbounds.core import LinkKind, Observation, ParameterBox, link_deriv, link_eval, link_inverse

LINKS = (LinkKind.COX, LinkKind.PROPODDS)


class TestLinkFunctions(unittest.TestCase):
    """Test the two link functions and their derivatives."""

    def test_cox_at_zero(self):
        """Test Lambda_cox(0) = 1 - 1/e."""
        self.assertAlmostEqual(link_eval(LinkKind.COX, 0.0), 1.0 - math.exp(-1.0), places=12)

    def test_propodds_at_zero(self):
        """Test the logistic link is 1/2 at zero."""
        self.assertAlmostEqual(link_eval('aft', 0.0), 0.5, places=15)

    def test_cox_far_left(self):
        """Test the Cox link goes to zero without being clamped."""
        value = link_eval('cox', -30.0)
        self.assertLess(value, 1e-12)
        self.assertGreater(value, 0.0)

    def test_derivatives_at_zero(self):
        """Test closed form derivatives at zero."""
        self.assertAlmostEqual(link_deriv('cox', 0.0), math.exp(-1.0), places=12)
        self.assertAlmostEqual(link_deriv('propodds', 0.0), 0.25, places=15)

    def test_derivative_matches_finite_differences(self):
        """Test Lambda' against central differences at v = 0.7."""
        h = 1e-6
        for link in LINKS:
            fd = (link_eval(link, 0.7 + h) - link_eval(link, 0.7 - h)) / (2 * h)
            self.assertAlmostEqual(link_deriv(link, 0.7) / fd, 1.0, delta=1e-6, msg=link.name)

    def test_non_finite_argument(self):
        """Test non-finite arguments are rejected."""
        for bad in (math.nan, math.inf, -math.inf):
            with self.assertRaises(InvalidArgumentException):
                link_eval('cox', bad)
            with self.assertRaises(InvalidArgumentException):
                link_deriv('aft', bad)

    def test_inverse(self):
        """Test the inverse link undoes the link."""
        for link in LINKS:
            for v in (-3.0, -0.2, 0.0, 1.5):
                self.assertAlmostEqual(link_inverse(link, link_eval(link, v)), v, places=9)
        with self.assertRaises(InvalidArgumentException):
            link_inverse('cox', 1.0)
        with self.assertRaises(InvalidArgumentException):
            link_inverse('aft', 0.0)

    def test_unknown_link(self):
        """Test an unknown link name."""
        with self.assertRaises(InvalidArgumentException):
            LinkKind.from_name('weibull')

    def test_array_arguments(self):
        """Test vector evaluation returns arrays."""
        values = link_eval('cox', np.array([-1.0, 0.0, 1.0]))
        self.assertEqual(values.shape, (3,))

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-20, 1), st.floats(1e-3, 2))
    def test_strictly_increasing(self, v, step):
        """Test both links are strictly increasing into (0,1)."""
        for link in LINKS:
            (a, b) = (link_eval(link, v), link_eval(link, v + step))
            self.assertLess(a, b)
            self.assertGreater(a, 0.0)
            self.assertLess(b, 1.0)
            self.assertGreater(link_deriv(link, v), 0.0)


class TestObservation(unittest.TestCase):
    """Test Observation validation."""

    def test_valid(self):
        """Test a valid observation."""
        obs = Observation(y=2.5, delta=1, x=(1.0, 0.3))
        self.assertEqual(obs.x[0], 1.0)

    def test_invalid(self):
        """Test each field is checked."""
        with self.assertRaises(InvalidArgumentException):
            Observation(y=-1.0, delta=1, x=(1.0,))
        with self.assertRaises(InvalidArgumentException):
            Observation(y=math.nan, delta=0, x=(1.0,))
        with self.assertRaises(InvalidArgumentException):
            Observation(y=1.0, delta=2, x=(1.0,))
        with self.assertRaises(InvalidArgumentException):
            Observation(y=1.0, delta=0, x=(0.5, 1.0))


class TestParameterBox(unittest.TestCase):
    """Test ParameterBox geometry."""

    def test_cube(self):
        """Test the symmetric cube."""
        box = ParameterBox.cube(10.0, 3)
        self.assertEqual(box.dim, 3)
        self.assertEqual(box.interval(1), (-10.0, 10.0))
        self.assertEqual(box.width(2), 20.0)
        np.testing.assert_array_equal(box.center(), np.zeros(3))
        self.assertTrue(box.contains([0.0, 10.0, -10.0]))
        self.assertFalse(box.contains([0.0, 10.1, 0.0]))
        np.testing.assert_array_equal(box.free_indices(1), [0, 2])

    def test_invalid(self):
        """Test degenerate boxes are rejected."""
        with self.assertRaises(InvalidArgumentException):
            ParameterBox([0.0, 1.0], [0.0, 2.0])
        with self.assertRaises(InvalidArgumentException):
            ParameterBox([0.0], [1.0, 2.0])
        with self.assertRaises(InvalidArgumentException):
            ParameterBox.cube(0.0, 2)

    def test_shrunk_keeps_pinned_coordinate(self):
        """Test shrinking leaves coordinate k alone."""
        box = ParameterBox.cube(1.0, 3)
        (lo, hi) = box.shrunk(0.1, k=1)
        np.testing.assert_allclose(lo, [-0.9, -1.0, -0.9])
        np.testing.assert_allclose(hi, [0.9, 1.0, 0.9])

    def test_read_only(self):
        """Test the bounds cannot be modified."""
        box = ParameterBox.cube(1.0, 2)
        with self.assertRaises(ValueError):
            box.lower[0] = 5.0


# vim: sw=4 ts=4 et si:
