"""Discrete Dirac Hamiltonians on stationary spacetimes with chiral boundary faces.

The package assembles a Hermitian finite-difference Hamiltonian on a radial
collar (optionally with a polar angle and an azimuthal Fourier mode), solves
it spectrally near the inner face, and glues that solution to a time-stepped
interior solution with a smooth cut-off.
"""

from .geometry import (GeometryError, InfeasibleMixError, MetricClosure, MetricSample,
                       ef_charged_3d, ef_schwarzschild, find_timelike_mix, flat_cartesian,
                       flat_polar, flat_spherical, horizon_radii, kerr_ef, killing_norm)
from .spinor import (CliffordRep, build_vielbein, curved_gammas, flat_clifford_rep, slash,
                     spin_connection)
from .hamiltonian import (DiscreteHamiltonian, Grid, assemble_hamiltonian, boundary_projector,
                          locate_horizons, make_bump_data, periodic_grid, principal_symbol,
                          radial_grid, scalar_potential, zero_potential)
from .spectral import (SpectralError, boundary_operator_A, build_region_X, eigendecompose_X,
                       ellipticity_certificate, garding_estimate, series_evolve)
from .evolution import (EvolutionConfig, InstabilityError, SplitSolver, WindowViolation,
                        evolve_cauchy, reference_evolve)
from .config import ConfigError, RunConfig, load_config, parse_config

__version__ = "0.1.0"
