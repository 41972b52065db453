import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavemoments.core import (IsotropicSpectrum, PowerLawSpectrum, capillary_system,
                              geometric_grid, power_law_system)
from wavemoments.rates import (TOLERANCE_PROFILES, QuadratureSettings, dimensionless_rate_constant,
                               eta, gamma, kz_constant, kz_exponent, mc_rate_oracle,
                               node_components, rate_components, rate_field)

CAP = capillary_system()
ZF = PowerLawSpectrum(1.0, 17 / 4)


def toy_spectrum():
    grid = geometric_grid(1e-4, 10.0, 161)
    return IsotropicSpectrum(grid, np.exp(-grid), extrapolation="zero")


class TestBasics:
    def test_zero_spectrum_gives_zero_rates(self):
        spec = IsotropicSpectrum([0.1, 1.0, 10.0], [0.0, 0.0, 0.0], extrapolation="zero")
        rc = rate_components(CAP, spec, 1.0)
        assert rc.eta == 0.0 and rc.gamma == 0.0 and rc.collision == 0.0

    def test_rejects_nonpositive_k(self):
        with pytest.raises(ValueError):
            rate_components(CAP, ZF, 0.0)

    def test_collision_is_eta_minus_gamma_n(self):
        spec = PowerLawSpectrum(1.0, 3.5)
        rc = rate_components(CAP, spec, 2.0)
        assert rc.collision == pytest.approx(rc.eta - rc.gamma * rc.n_k,
                                             abs=10 * rc.abs_error + 1e-12 * rc.eta)

    def test_estimates_carry_small_errors(self):
        assert eta(CAP, ZF, 1.0).rel_error < 1e-6
        assert gamma(CAP, ZF, 1.0).rel_error < 1e-6

    def test_fast_profile_is_close_to_strict(self):
        strict = gamma(CAP, ZF, 1.0).value
        fast = gamma(CAP, ZF, 1.0, TOLERANCE_PROFILES["fast"]).value
        assert fast == pytest.approx(strict, rel=1e-5)

    def test_refined_settings_change_less_than_reported_error(self):
        base = rate_components(CAP, toy_like_bump(), 1.0)
        fine = rate_components(CAP, toy_like_bump(), 1.0, QuadratureSettings().refined())
        assert abs(fine.eta - base.eta) <= max(base.abs_error, 1e-12 * base.eta)


def toy_like_bump():
    grid = geometric_grid(0.01, 100.0, 81)
    return IsotropicSpectrum(grid, np.exp(-0.5 * np.log(grid) ** 2), extrapolation="zero")


class TestScaling:
    @pytest.mark.parametrize("x", [3.5, 17 / 4, 5.0])
    def test_gamma_scaling_law(self, x):
        # gamma(lambda k) / gamma(k) = lambda^(2m + d - x - alpha) on n = k^-x
        lam = 3.0
        g1 = gamma(CAP, PowerLawSpectrum(1.0, x), 1.0).value
        g2 = gamma(CAP, PowerLawSpectrum(1.0, x), lam).value
        assert g2 / g1 == pytest.approx(lam ** (2 * 2.25 + 2 - x - 1.5), rel=1e-7)

    def test_rate_constant_is_k_independent(self):
        vals = [dimensionless_rate_constant(CAP, k=k).value for k in (0.01, 1.0, 50.0)]
        assert max(vals) / min(vals) - 1 < 1e-6

    def test_rate_constant_independent_of_surface_tension(self):
        a = dimensionless_rate_constant(capillary_system(sigma=1.0)).value
        b = dimensionless_rate_constant(capillary_system(sigma=7.0, rho=2.0)).value
        assert b == pytest.approx(a, rel=1e-7)

    def test_kz_exponent(self):
        assert kz_exponent(CAP) == pytest.approx(17 / 4)

    def test_zf_spectrum_is_stationary(self):
        rc = rate_components(CAP, ZF, 1.0)
        assert abs(rc.collision) < 1e-8 * rc.eta

    def test_flux_sign_selects_forward_cascade(self):
        # spectra slightly steeper than ZF lose waveaction at fixed k, and vice versa
        steep = rate_components(CAP, PowerLawSpectrum(1.0, 17 / 4 + 0.1), 1.0).collision
        shallow = rate_components(CAP, PowerLawSpectrum(1.0, 17 / 4 - 0.1), 1.0).collision
        assert steep * shallow < 0

    def test_kz_constant_positive(self):
        c = kz_constant(CAP)
        assert math.isfinite(c) and c > 0


def test_divergent_spectrum_is_flagged():
    # equipartition n = T / omega is ultraviolet-divergent for capillary waves
    rc = rate_components(CAP, PowerLawSpectrum(1.0, 1.5), 1.0)
    assert any("does not decay" in w for w in rc.warnings)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 3.0), st.floats(0.3, 3.0))
def test_eta_nonnegative(k, centre, width):
    grid = geometric_grid(0.01, 100.0, 41)
    spec = IsotropicSpectrum(grid, np.exp(-0.5 * (np.log(grid / centre) / width) ** 2),
                             extrapolation="zero")
    rc = rate_components(CAP, spec, k, TOLERANCE_PROFILES["fast"])
    assert rc.eta >= 0.0


class TestField:
    def test_field_matches_single_nodes(self):
        grid = geometric_grid(1.0, 10.0, 5)
        spec = PowerLawSpectrum(1.0, 17 / 4).on_grid(grid)
        field = rate_field(CAP, spec, grid)
        for i, k in enumerate(grid):
            assert field.gamma[i] == pytest.approx(gamma(CAP, spec, k).value, rel=1e-14)

    def test_threads_do_not_change_results(self):
        grid = geometric_grid(1.0, 10.0, 4)
        spec = PowerLawSpectrum(1.0, 4.0)
        serial = node_components(CAP, spec, grid, threads=1)
        parallel = node_components(CAP, spec, grid, threads=2)
        assert [c.gamma for c in serial] == [c.gamma for c in parallel]


class TestMonteCarloOracle:
    @pytest.mark.parametrize("k", [0.3, 1.0, 3.0])
    def test_toy_system_agrees_with_full_integral(self, k):
        system = power_law_system(2.0)
        spec = toy_spectrum()
        rc = rate_components(system, spec, k)
        mc = mc_rate_oracle(system, spec, k, samples=2**20, seed=1)
        assert abs(mc.eta - rc.eta) < 4 * mc.eta_stderr
        assert abs(mc.gamma - rc.gamma) < 4 * mc.gamma_stderr

    def test_capillary_agrees_with_full_integral(self):
        spec = toy_like_bump()
        rc = rate_components(CAP, spec, 1.0)
        mc = mc_rate_oracle(CAP, spec, 1.0, samples=2**20, seed=2, r_range=(1e-2, 1e2))
        assert abs(mc.eta - rc.eta) < 4 * mc.eta_stderr
        assert abs(mc.gamma - rc.gamma) < 4 * mc.gamma_stderr
        assert mc.eta_stderr < 0.02 * mc.eta
