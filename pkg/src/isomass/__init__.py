"""Kronecker-structured mass-matrix preconditioners for isogeometric Galerkin discretizations."""

__version__ = "0.1.0"

from .assembly import (
    assemble_load_vector,
    assemble_parametric_mass,
    assemble_physical_diagonal,
    assemble_physical_mass,
    assemble_univariate_mass,
    check_spd,
    diagonal_of,
)
from .catalog import catalog, list_geometries
from .exceptions import (
    AssemblyError,
    BreakdownError,
    ConfigError,
    ConformityError,
    ConvergenceError,
    DataError,
    DomainError,
    FactorizationError,
    IsoMassError,
    KnotVectorError,
    SingularGeometryError,
)
from .geometry import (
    MultipatchGeometry,
    Patch,
    WeightField,
    eval_geometry,
    identity_patch,
    weight_from_function,
    weight_from_geometry,
    weight_inverse_jacobian,
)
from .kron import Banded, FlopCounter, KronOperator, banded_cholesky, kron_matvec, kron_solve, mode_product
from .multipatch import (
    AdditiveSchwarzPreconditioner,
    MultipatchSpace,
    apply_additive_schwarz,
    assemble_global_mass,
    build_multipatch_space,
)
from .precond import (
    ChanEvansPreconditioner,
    IdentityPreconditioner,
    JacobiPreconditioner,
    MassPreconditioner,
    apply_inverse,
    apply_inverse_chan_evans,
    setup_mass_preconditioner,
)
from .solver import (
    PcgReport,
    condition_number_dense,
    condition_number_lanczos,
    pcg,
    reduction_factor,
)
from .splines import (
    KnotVector,
    QuadRule,
    TensorBasis,
    basis_matrix,
    eval_basis,
    eval_basis_deriv,
    gauss_rule,
    make_uniform_knots,
    tensor_gauss_rule,
)

__all__ = [name for name in dir() if not name.startswith("_")]
