import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemoments.core import (CapillaryVertex, DeviationField, IsotropicSpectrum,
                              MomentHierarchy, PhysicalParams, PowerLawDispersion,
                              PowerLawSpectrum, RateField, capillary_system, geometric_grid,
                              power_law_system, zf_spectrum)


def naive_capillary_vertex(k, k1, k2):
    """Direct evaluation from dot products, for comparison away from cancellation."""
    # place k along x; k1 at the angle closing the triangle k = k1 + k2
    c1 = (k * k + k1 * k1 - k2 * k2) / (2 * k * k1)
    kv = np.array([k, 0.0])
    k1v = k1 * np.array([c1, math.sqrt(max(0.0, 1 - c1 * c1))])
    k2v = kv - k1v
    L = lambda a, b: a @ b + np.linalg.norm(a) * np.linalg.norm(b)
    pref = 1 / (8 * math.pi * math.sqrt(2))
    return pref * (L(k1v, k2v) * (k1 * k2 / k) ** 0.25
                   - L(-kv, k1v) * (k * k1 / k2) ** 0.25
                   - L(-kv, k2v) * (k * k2 / k1) ** 0.25)


class TestDispersion:
    def test_power_law_and_inverse(self):
        d = PowerLawDispersion(2.0, 1.5)
        k = np.array([0.1, 1.0, 7.0])
        assert np.allclose(d.inverse(d(k)), k, rtol=1e-14)
        assert np.allclose(d.derivative(k), 3.0 * k**0.5)

    def test_capillary_system_dispersion(self):
        s = capillary_system(sigma=4.0, rho=1.0)
        assert s.omega(4.0) == pytest.approx(2.0 * 8.0)
        assert s.vertex_homogeneity == 2.25

    def test_rejects_other_dimensions(self):
        s = power_law_system(2.0)
        with pytest.raises(ValueError):
            type(s)(s.dispersion, s.dispersion_derivative, s.vertex, 0.0, dimension=3)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            capillary_system(sigma=0.0)
        with pytest.raises(ValueError):
            power_law_system(-1.0)


class TestCapillaryVertex:
    @pytest.mark.parametrize("k,k1,k2", [(1.0, 0.7, 0.6), (2.0, 1.5, 0.9), (1.0, 0.5, 0.5)])
    def test_matches_direct_evaluation(self, k, k1, k2):
        v = capillary_system().vertex
        assert float(v(k, k1, k2)) == pytest.approx(naive_capillary_vertex(k, k1, k2), rel=1e-10)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.2, 5.0))
    def test_symmetric_in_partners(self, a, u, lam):
        k1 = a
        k2 = abs(1 - k1) + u * (1 + k1 - abs(1 - k1))
        v = capillary_system().vertex
        assert float(v(1.0, k1, k2)) == pytest.approx(float(v(1.0, k2, k1)), rel=1e-12, abs=1e-300)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.2, 5.0))
    def test_homogeneous_of_degree_nine_quarters(self, a, u, lam):
        k1 = a
        k2 = abs(1 - k1) + u * (1 + k1 - abs(1 - k1))
        v = capillary_system().vertex
        assert float(v(lam, lam * k1, lam * k2)) == pytest.approx(
            lam**2.25 * float(v(1.0, k1, k2)), rel=1e-11, abs=1e-300)

    def test_small_partner_scaling(self):
        # |V|^2 ~ q^(7/2) as one partner vanishes on the resonant manifold
        s = capillary_system()
        vals = []
        for q in (1e-6, 1e-8):
            t = math.log1p(-q**1.5) / 1.5
            p, gap = math.exp(t), -math.expm1(t)
            vals.append(float(s.vertex(1.0, q, p, gap=gap)) ** 2)
        slope = math.log(vals[0] / vals[1]) / math.log(100.0)
        assert slope == pytest.approx(3.5, abs=1e-3)

    @pytest.mark.parametrize("k,k1,k2", [(1.0, 0.7, 0.6), (2.0, 1.5, 0.9), (1.0, 0.999, 0.01)])
    def test_explicit_gap_matches_implicit(self, k, k1, k2):
        v = CapillaryVertex(1.0)
        assert float(v(k, k1, k2, gap=k - max(k1, k2))) == float(v(k, k1, k2))

    def test_collinear_limit(self):
        # only the L(k1, k2) term survives when k1 and k2 are parallel
        k1, k2 = 0.4, 0.6
        expected = 2 * k1 * k2 * (k1 * k2 / 1.0) ** 0.25
        assert float(CapillaryVertex(1.0)(1.0, k1, k2)) == pytest.approx(expected, rel=1e-14)


class TestSpectrum:
    def test_log_log_interpolation_exact_on_power_law(self):
        grid = geometric_grid(1.0, 100.0, 9)
        spec = PowerLawSpectrum(2.0, 4.25).on_grid(grid)
        k = np.array([1.3, 7.7, 55.0, 0.5, 300.0])
        assert np.allclose(spec(k), 2.0 * k**-4.25, rtol=1e-12)

    @given(st.floats(0.5, 6.0), st.floats(1.01, 99.0))
    def test_power_law_exact_property(self, x, k):
        spec = PowerLawSpectrum(1.0, x).on_grid(geometric_grid(1.0, 100.0, 7))
        assert float(spec(k)) == pytest.approx(k**-x, rel=1e-11)

    def test_zero_extrapolation(self):
        spec = IsotropicSpectrum([1.0, 2.0, 4.0], [1.0, 0.5, 0.25], extrapolation="zero")
        assert spec(0.5) == 0.0 and spec(5.0) == 0.0
        assert spec.support == (1.0, 4.0)

    def test_zero_neighbour_falls_back_to_linear(self):
        spec = IsotropicSpectrum([1.0, 2.0], [1.0, 0.0], extrapolation="zero")
        assert float(spec(1.5)) == pytest.approx(0.5)

    def test_immutable(self):
        spec = IsotropicSpectrum([1.0, 2.0], [1.0, 0.5])
        with pytest.raises(ValueError):
            spec.values[0] = 3.0

    @pytest.mark.parametrize("grid,vals", [([1.0, 1.0], [1, 1]), ([2.0, 1.0], [1, 1]),
                                           ([1.0, 2.0], [1, -1]), ([1.0, 2.0], [1, np.nan]),
                                           ([1.0], [1.0])])
    def test_rejects_invalid(self, grid, vals):
        with pytest.raises(ValueError):
            IsotropicSpectrum(grid, vals)

    def test_csv_roundtrip(self, tmp_path):
        spec = zf_spectrum(PhysicalParams(), geometric_grid(1.0, 10.0, 5))
        path = tmp_path / "s.csv"
        text = spec.to_csv(path)
        assert text.splitlines()[0] == "k,n"
        back = IsotropicSpectrum.from_csv(path)
        assert np.array_equal(back.values, spec.values) and np.array_equal(back.grid, spec.grid)

    def test_zf_amplitude(self):
        p = PhysicalParams(sigma=16.0, rho=4.0, flux=9.0, kz_constant=2.0)
        assert p.amplitude == pytest.approx(3.0 * 8.0 * 2.0 / 2.0)
        spec = zf_spectrum(p, [1.0, 2.0])
        assert spec.values[1] == pytest.approx(p.amplitude * 2.0**-4.25)

    def test_params_must_be_positive(self):
        with pytest.raises(ValueError):
            PhysicalParams(flux=0.0)


class TestHierarchyTypes:
    def test_moment_zero_is_one(self):
        h = MomentHierarchy([1.0, 2.0], [[1.0, 2.0], [2.0, 8.0]])
        assert np.array_equal(h.moment(0), [1.0, 1.0])
        assert h.max_order == 2

    def test_rejects_negative_moments(self):
        with pytest.raises(ValueError):
            MomentHierarchy([1.0, 2.0], [[1.0, -2.0]])

    def test_log_convexity(self):
        h = MomentHierarchy([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0], [6.0, 3.0]])
        flags = h.log_convexity_violations()
        assert flags.shape == (1, 2)
        assert not flags[0, 0] and flags[0, 1]

    def test_hierarchy_csv_roundtrip(self, tmp_path):
        h = MomentHierarchy([1.0, 2.0], [[1.0, 2.0], [2.0, 8.0]])
        h.to_csv(tmp_path / "h.csv")
        back = MomentHierarchy.from_csv(tmp_path / "h.csv")
        assert np.array_equal(back.values, h.values)

    def test_deviation_floor(self):
        DeviationField([1.0], [[-0.5]])
        with pytest.raises(ValueError):
            DeviationField([1.0], [[-0.6]])

    def test_rate_field(self):
        f = RateField([1.0, 2.0], [1.0, 2.0], [0.5, 0.5], [1e-9, 1e-9], [1e-8, 1e-10])
        assert np.allclose(f.quadrature_error, [1e-8, 1e-9])
        assert f.to_csv().splitlines()[0] == "k,gamma,eta,gamma_err,eta_err"
        with pytest.raises(ValueError):
            RateField([1.0], [1.0], [-1.0], [0.0], [0.0])
