"""Empirical orthogonal function bases of historical sound speed profiles."""

from eof.basis import (
    BasisError,
    CoeffVector,
    EmptyMatrixError,
    EofBasis,
    OrderError,
    ProfileMatrix,
    decompose_profiles,
    eof_decompose,
    fix_sign,
    mean_profile,
    project,
    reconstruct,
    residual_matrix,
)
from eof.jacobi import jacobi_eigh, off_diagonal_norm
from eof.store import (
    BASIS_SCOPES,
    BasisSet,
    compute_bases,
    export_explained_variance,
    export_modes,
    read_basis,
    read_basis_set,
    write_basis,
    write_basis_set,
)

__all__ = [
    "BASIS_SCOPES",
    "BasisError",
    "BasisSet",
    "CoeffVector",
    "EmptyMatrixError",
    "EofBasis",
    "OrderError",
    "ProfileMatrix",
    "compute_bases",
    "decompose_profiles",
    "eof_decompose",
    "export_explained_variance",
    "export_modes",
    "fix_sign",
    "jacobi_eigh",
    "mean_profile",
    "off_diagonal_norm",
    "project",
    "read_basis",
    "read_basis_set",
    "reconstruct",
    "residual_matrix",
    "write_basis",
    "write_basis_set",
]
