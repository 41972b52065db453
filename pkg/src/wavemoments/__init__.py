"""Fluctuation statistics of weak three-wave turbulence.

Resonant-manifold quadrature of the damping/forcing rates, the kinetic
equation for the mean spectrum, and the hierarchy of higher moments of the
waveaction with its exact and approximate solutions.
"""

__version__ = "0.1.0"

from .core import (CapillaryVertex, DeviationField, IsotropicSpectrum, MomentHierarchy,
                   PhysicalParams, PowerLawSpectrum, RateField, WaveSystem, capillary_system,
                   geometric_grid, power_law_system, zf_spectrum)
from .integrate import IntegratorControls, StiffnessError
from .kinetic import (FrozenRates, SelfConsistentRates, collision_term, consistency_check,
                      evolve_ke)
from .moments import (DeviationTrajectory, HierarchySolution, cumulant_q, deviations,
                      evolve_deviations, evolve_hierarchy, exact_deviation_solution,
                      init_hierarchy, truncated_closed_form, pdf_probe, transport_wave_diagnostic,
                      xi, xi_growth_curve)
from .rates import (QuadratureSettings, dimensionless_rate_constant, eta, gamma, kz_constant,
                    mc_rate_oracle, rate_field)
from .resonance import (angular_weight, mc_angular_oracle, resonant_partner, sum_partner,
                        triangle_factor)

__all__ = [name for name in dir() if not name.startswith("_")]
