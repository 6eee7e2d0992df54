"""Numerical laboratory for heat-semigroup harmonic analysis with
reflection-group-invariant weights: root systems and Weyl groups, weighted
quadrature grids, heat kernels and their time derivatives, maximal /
Littlewood-Paley / variation / oscillation operators, BMO-type spaces,
atoms and stopping-time decompositions, plus reproducible experiment
drivers with CSV and figure output.
"""

from .reflection import (RootSystem, WeylGroup, RootSystemError,
                         GroupClosureError, build_root_system,
                         z2_root_system, dihedral_root_system,
                         direct_sum_root_system, validate_root_system,
                         generate_group, scalar_invariants, weight,
                         orbit_distance, orbit_ball_membership, reflect)
from .grids import (WeightedGrid, SampledFunction, GridError, build_grid,
                    sample, integrate, lp_norm, grid_to_table,
                    grid_from_table)
from .volumes import (QuadratureError, adaptive_quad, ball_volume,
                      orbit_ball_volume)
from .heat import (HeatKernelModel, HeatKernelError, SemigroupSampler,
                   KernelBoundFit, kernel, kernel_rank1, kernel_mass,
                   kernel_time_derivative, apply_semigroup, dunkl_laplacian,
                   fit_gaussian_bound, fit_lipschitz_bound)
from .pde_reference import ReferenceEvolution, evolve_rank_one, \
    propagate_with_kernel
from .operators import (TimeGrid, OscillationBrackets, OperatorError,
                        TruncationWarning, variation_core,
                        variation_core_batch, oscillation_core,
                        oscillation_core_batch, maximal_operator,
                        littlewood_paley_g, variation_operator,
                        oscillation_operator, rho_maximal,
                        hardy_littlewood_maximal, default_radii)
from .spaces import (BallFamily, SpaceError, CZError, Atom, CZDecomposition,
                     lattice_ball_family, bmo_norm, bmo_rho_norm, blo_norm,
                     make_atom_size, make_atom_laplacian, cz_decompose,
                     cz_check)
from .config import (ExperimentConfig, ConfigError, default_config,
                     load_config, parse_config_text, config_to_text,
                     worker_count)
from .reporting import CaseRow, ExperimentReport, write_report
from .experiments import (build_context, apply_named_operator, exp_weak_11,
                          exp_h1_atoms, exp_bmo_blo, exp_kernel_bounds, run)

__version__ = "0.1.0"
