from ._prototype import (
    FactorizationPrototype, BANDED, SPARSE_LU, ITERATIVE,
    GreenboundError, DomainError, OutOfRangeError, AssemblyError, EllipticityError,
    SolverError, PreconditionError, ConvergenceError, ConfigError,
)
from .banded import BandedFactorization
from .sparse import SparseLUFactorization
from .iterative import ConjugateGradientFactorization
from .nonlinearity import PsiSpec, psi_eval, psi_derivative, verify_submultiplicative, minimal_c_estimate
from .phi_transform import PhiTransform, theta, ell, phi, phi_closed_form
from .discrete_domain import (
    Grid, OperatorSpec, DomainChain, AssembledOperator,
    build_interval_grid, build_rect_grid, build_disk_grid,
    assemble_operator, check_ellipticity, exhaustion_chain,
)
from .green import (
    Field, GreenSystem,
    harmonic_extension, green_apply, green_matrix_column, apply_operator, s_datum,
    restriction_identity_check, green_limit_check, harmonicity_off_support_check,
    gamma_bound_diagnostic, green_selftest,
)
from .semilinear import (
    SolveConfig, SolveResult,
    solve_integral_equation, solve_dirichlet, pde_residual, fixed_point_residual,
    comparison_check, monotone_limits_check, monotone_data_limits_check,
    exhaustion_solve, uniqueness_probe,
)
from .estimates import (
    EstimateReport,
    lower_bound_field, supersolution_bound_field, closed_form_bound,
    verify_sandwich, verify_supersolution, closed_form_cross_check,
)
from .init import experiment_init
