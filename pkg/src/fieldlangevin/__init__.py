"""Colored-noise Langevin dynamics of particles coupled to a quantum
scalar field, with fluctuation-dissipation verification tools."""

__version__ = "0.1.0"

from .bogolubov import (BogolubovTrajectory, OscillatorSchedule, SpectralDensity,
                        evolve_bogolubov, kernels_from_bogolubov)
from .config import ScenarioConfig, load_config
from .dynamics import (DipoleModel, LinearizedSystem, LocalFriction,
                       MonopoleModel, first_cumulant, fluctuation_dynamics,
                       integrate_langevin, linearize, semiclassical_trajectory)
from .fdr import (FdrReport, ResponseOracle, analytic_symmetrized_correlator,
                  dissipation_matrix, fdr_kernel_K, gamma_kernel, noise_matrix,
                  qbm_fdr_check, verify_fdr)
from .kernels import (KernelGrid, causal_green, hadamard_green, retarded_green,
                      thermal_influence_kernel)
from .modes import FieldState, Mode, ModeSet
from .noise import (CovarianceFactor, NoiseRealization, build_covariance,
                    mode_factors, project_force, sample_noise,
                    stochastic_field_at)
from .worldline import (CurrentFunctional, DipoleCoupling, MonopoleCoupling,
                        Worldline, mode_current, static_worldline)
