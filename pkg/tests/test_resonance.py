import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemoments.core import capillary_system, power_law_system
from wavemoments.resonance import (angular_weight, mc_angular_oracle, resonant_partner,
                                   sum_partner, triad_geometry, triangle_factor, twice_area)


def heron_area(a, b, c):
    s = 0.5 * (a + b + c)
    return math.sqrt(max(0.0, s * (s - a) * (s - b) * (s - c)))


class TestTriangleFactor:
    def test_equilateral(self):
        assert triangle_factor(1, 1, 1) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
        assert angular_weight(1, 1, 1) == pytest.approx(4 / math.sqrt(3), rel=1e-15)

    def test_right_triangle(self):
        assert triangle_factor(5, 4, 3) == pytest.approx(12.0, rel=1e-15)

    def test_degenerate_and_outside(self):
        assert triangle_factor(2, 1, 1) == 0.0
        assert angular_weight(2, 1, 1) == math.inf
        assert triangle_factor(3, 1, 1) is None
        assert angular_weight(3, 1, 1) is None
        assert triad_geometry(3, 1, 1) is None

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            triangle_factor(0.0, 1.0, 1.0)

    @given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.05, 0.95))
    def test_twice_heron_area(self, k1, k2, u):
        k = abs(k1 - k2) + u * (k1 + k2 - abs(k1 - k2))
        assert triangle_factor(k, k1, k2) == pytest.approx(2 * heron_area(k, k1, k2), rel=1e-9)

    def test_needle_triangle_stays_accurate(self):
        # sides 1, 1, 1e-8: S ~ 1e-8, naive Heron loses all digits
        s = float(twice_area(1.0, 1.0, 1e-8))
        assert s == pytest.approx(1e-8, rel=1e-12)


class TestPartners:
    @given(st.floats(1e-3, 1e3), st.floats(1e-6, 0.999))
    def test_resonance_condition(self, k, r):
        s = capillary_system()
        k1 = k * r
        p = resonant_partner(s, k, k1)
        w = float(s.omega(k))
        assert float(s.omega(k1)) + float(s.omega(p.k2)) == pytest.approx(w, rel=1e-12)
        assert p.jacobian == pytest.approx(1 / float(s.dispersion_derivative(p.k2)), rel=1e-14)

    def test_no_partner_above_k(self):
        assert resonant_partner(capillary_system(), 1.0, 1.0) is None
        assert resonant_partner(capillary_system(), 1.0, 2.0) is None

    @given(st.floats(1e-3, 1e3), st.floats(1e-4, 1e4))
    def test_sum_partner(self, k, k1):
        s = capillary_system()
        p = sum_partner(s, k, k1)
        assert float(s.omega(p.k2)) == pytest.approx(float(s.omega(k)) + float(s.omega(k1)), rel=1e-12)

    def test_generic_dispersion_uses_root_finder(self):
        import dataclasses
        base = power_law_system(2.0)
        generic = dataclasses.replace(base, dispersion_exponent=None, dispersion_coefficient=None)
        a = resonant_partner(base, 2.0, 1.0)
        b = resonant_partner(generic, 2.0, 1.0)
        assert b.k2 == pytest.approx(a.k2, rel=1e-12)
        assert sum_partner(generic, 2.0, 1.0).k2 == pytest.approx(math.sqrt(5.0), rel=1e-12)


class TestAngularOracle:
    @pytest.mark.parametrize("tri", [(1.0, 1.0, 1.0), (5.0, 4.0, 3.0), (1.0, 0.3, 0.9)])
    def test_agrees_with_analytic(self, tri):
        o = mc_angular_oracle(*tri, samples=2**18, seed=3)
        assert o.converged
        assert abs(o.estimate - angular_weight(*tri)) < 4 * o.stderr

    def test_degenerate_flagged(self):
        o = mc_angular_oracle(2.0, 1.0, 1.0, samples=2**18, seed=1)
        assert not o.converged

    def test_seeded(self):
        a = mc_angular_oracle(1.0, 0.8, 0.7, samples=2**16, seed=5)
        b = mc_angular_oracle(1.0, 0.8, 0.7, samples=2**16, seed=5)
        assert a == b

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            mc_angular_oracle(1, 1, 1, samples=100)
