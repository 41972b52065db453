import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavemoments.core import (IsotropicSpectrum, PhysicalParams, PowerLawSpectrum,
                              capillary_system, geometric_grid, zf_spectrum)
from wavemoments.integrate import IntegratorControls
from wavemoments.kinetic import (FrozenRates, SelfConsistentRates, collision_term,
                                 consistency_check, energy, evolve_ke, kinetic_rate,
                                 rayleigh_jeans_kernel)
from wavemoments.rates import TOLERANCE_PROFILES, rate_field

CAP = capillary_system()


class TestCollision:
    def test_zero_spectrum(self):
        spec = IsotropicSpectrum([0.1, 10.0], [0.0, 0.0], extrapolation="zero")
        assert collision_term(CAP, spec, 1.0).value == 0.0

    def test_zf_is_stationary(self):
        est = collision_term(CAP, PowerLawSpectrum(1.0, 17 / 4), 2.0)
        assert abs(est.value) <= max(est.abs_error, 1e-15)

    @given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
    def test_rayleigh_jeans_kernel_vanishes_on_resonance(self, frac, temperature):
        w = 1.7
        w1, w2 = frac * w, (1 - frac) * w
        n, n1, n2 = temperature / w, temperature / w1, temperature / w2
        assert abs(rayleigh_jeans_kernel(n, n1, n2)) <= 1e-12 * n1 * n2

    def test_consistency_of_both_routes(self):
        grid = geometric_grid(1.0, 10.0, 5)
        spec = IsotropicSpectrum(grid, grid ** -3.5)
        field = rate_field(CAP, spec, grid)
        report = consistency_check(field, spec, CAP)
        assert report.ok


def _stationary_setup(nodes=5):
    grid = geometric_grid(1.0, 10.0, nodes)
    spec = zf_spectrum(PhysicalParams(), grid)
    field = rate_field(CAP, spec, grid, TOLERANCE_PROFILES["fast"])
    return spec, FrozenRates.stationary(field.gamma, spec.values)


class TestEvolution:
    def test_fixed_point_is_constant(self):
        spec, rates = _stationary_setup()
        traj = evolve_ke(CAP, spec, 5.0, rates=rates)
        drift = max(np.max(np.abs(s.values / spec.values - 1)) for s in traj.spectra)
        assert drift < 1e-10

    def test_perturbation_relaxes_monotonically(self):
        spec, rates = _stationary_setup()
        start = IsotropicSpectrum(spec.grid, 1.5 * spec.values)
        traj = evolve_ke(CAP, start, 5.0 / rates.gamma.min(), rates=rates)
        dev = np.array([np.abs(s.values / spec.values - 1) for s in traj.spectra])
        assert np.all(np.diff(dev, axis=0) <= 0)
        expected = 0.5 * np.exp(-rates.gamma[None, :] * traj.times[:, None])
        assert np.allclose(dev, expected, rtol=1e-8)

    def test_kinetic_rate(self):
        assert kinetic_rate(2.0, 3.0, 0.5) == 2.0

    def test_positivity_preserved(self):
        grid = geometric_grid(1.0, 10.0, 4)
        # strong damping, no source: n decays towards zero but never below
        rates = FrozenRates(np.full(4, 50.0), np.zeros(4))
        traj = evolve_ke(CAP, IsotropicSpectrum(grid, np.ones(4)), 2.0, rates=rates)
        assert all(np.all(s.values >= 0) for s in traj.spectra)

    def test_self_consistent_short_run(self):
        grid = geometric_grid(1.0, 10.0, 4)
        spec = IsotropicSpectrum(grid, 1.2 * grid ** -4.25)
        rates = SelfConsistentRates(CAP, grid, TOLERANCE_PROFILES["fast"])
        traj = evolve_ke(CAP, spec, 0.05, IntegratorControls(rtol=1e-6, checkpoints=3), rates)
        assert len(traj.spectra) == 3
        assert all(np.all(np.isfinite(s.values)) and np.all(s.values >= 0) for s in traj.spectra)
        assert traj.energy_drift < 0.5

    def test_energy_of_power_law(self):
        grid = geometric_grid(1.0, 10.0, 201)
        e = energy(CAP, grid, grid ** -3.5)
        # 2 pi int k^2 k^1.5 k^-3.5 dk / k over [1, 10] = 2 pi ln 10
        assert e == pytest.approx(2 * np.pi * np.log(10.0), rel=1e-12)

    def test_trajectory_write(self, tmp_path):
        spec, rates = _stationary_setup(3)
        traj = evolve_ke(CAP, spec, 1.0, IntegratorControls(checkpoints=3), rates)
        files = traj.write(tmp_path)
        assert files[-1] == "trajectory.json"
        meta = json.loads((tmp_path / "trajectory.json").read_text())
        assert meta["files"] == ["spectrum_0000.csv", "spectrum_0001.csv", "spectrum_0002.csv"]
        assert meta["times"] == [0.0, 0.5, 1.0]
        back = IsotropicSpectrum.from_csv(tmp_path / "spectrum_0002.csv")
        assert np.allclose(back.values, spec.values, rtol=1e-10)
