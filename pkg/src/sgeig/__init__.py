"""Polynomial chaos expansions of the rightmost eigenpair of random nonsymmetric pencils."""

from .deig import EigenPair, align_eigvec, rightmost, rightmost_pair, solve_generalized
from .gpc import (GpcBasis, QuadratureRule, TripleProductTensor, eval_basis, gauss_rule,
                  multi_index_set, smolyak_grid, triple_product_tensor)
from .operators import (AffineOperator, load_bundle, sample_operator, save_bundle, shift_mass,
                        synth_convection_diffusion, synth_random_pencil)
from .precond import PrecondConfig, build_preconditioner
from .problems import synthetic_problem
from .randomfield import (CovarianceKernel, affine_viscosity, covariance, discrete_kl,
                          lognormal_coeffs, lognormal_viscosity, node_grid)
from .sampling import (GpcCoefficients, SampleSet, kde, moments, project_coefficients, run_mc,
                       run_sc, sample_gpc)
from .sgcore import (SGEigenState, SGProblem, apply_jacobian, apply_jacobian_transpose,
                     init_from_mean, reduce_to_real, residual)
from .solver import IterationLog, NewtonOptions, gmres, newton_solve

__version__ = "0.1.0"
