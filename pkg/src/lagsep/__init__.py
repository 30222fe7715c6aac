"""lagsep: spectral separation of natural Lagrangian dynamics.

Given a potential U on R^n, find the constant symmetric kinetic matrices
whose weighted Lagrangian generates the same equations of motion, rotate to
the coordinates adapted to such a matrix, split the dynamics into
independent blocks with their conserved energies, and validate the whole
construction by symplectic integration.  A companion inverse analysis
handles constant non-symmetric kinetic matrices.
"""

from .expr import (DomainError, ExprNode, ParseError, ParsedPotential,
                   differentiate, evaluate, fd_hessian, gradient, hessian,
                   parse, render)
from .linalg import (EigenDecomposition, SingularMatrixError,
                     cluster_eigenvalues, nullspace, singular_values,
                     solve_linear, sym_eigen)
from .commutant import (CommutantBasis, SampleSet, assemble_commutant_system,
                        center_basis, commutation_residual, compute_commutant,
                        default_sample_count, sample_points,
                        select_generic_element, solve_commutant)
from .spectral import (SpectralFrame, SpectralPotential, build_frame,
                       from_spectral, hh_pointwise_frame, hh_pointwise_matrix,
                       pullback, to_spectral)
from .separation import (BlockPotential, DegenerateSpectrumError,
                         NonConservativeFieldError, SeparatedTilde,
                         SeparationReport, SeparationUnsoundError,
                         extract_block_potentials, full_separation,
                         grid_values, path_disagreement, reconstruct_tilde,
                         verify_block_separation, verify_gradient_relation)
from .dynamics import (EnergyTrace, IntegrationAborted, State, Trajectory,
                       energies, equivalence_gap, export_trace_csv,
                       integrate_canonical, integrate_weighted,
                       relative_drift)
from .inverse import (InverseReport, SeparabilityCheck, build_tilde_potential,
                      check_inverse_separability, forced_quadratic_set,
                      separated_potential, solve_alpha_constraints)
from .models import (ModelSpec, build_model, henon_heiles, henon_heiles_case,
                     r4_transcendental, sawada_kotera)
from .cli import AnalysisReport, AnalysisRequest, run_analysis

__version__ = "0.1.0"
