"""EOF bases: mean profile, residuals, decomposition, projection, reconstruction.

For ``J`` profiles on an ``H``-layer grid the residual matrix ``R`` is
``H x J`` and the covariance is ``C = R R^T / J``. When ``J < H`` the
eigenproblem is solved on the ``J x J`` Gram matrix ``R^T R / J`` and each
eigenvector ``u`` is mapped back as ``e = R u / ||R u||``; the two problems
share their non-zero eigenvalues.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from common.errors import InputDataError, SspFusionError
from config.defaults import EofDefaults
from eof.jacobi import jacobi_eigh
from geogrid.types import DepthGrid, Profile

logger = logging.getLogger(__name__)

_COMPLETION_THRESHOLD = 1e-3


class BasisError(SspFusionError):
    """Raised when a decomposition violates the basis invariants."""


class EmptyMatrixError(InputDataError):
    """Raised when a profile matrix holds no columns."""


class OrderError(InputDataError):
    """Raised when an EOF order is outside ``1..K_max``."""


@dataclass(frozen=True, eq=False)
class ProfileMatrix:
    """Historical profiles of one grid as columns of an ``H x J`` matrix."""

    grid: DepthGrid
    columns: np.ndarray

    def __post_init__(self) -> None:
        """Check the column length against the grid."""
        columns = np.asarray(self.columns, dtype=np.float64)
        if columns.ndim != 2 or columns.shape[0] != self.grid.H:
            raise InputDataError(
                f"profile matrix has shape {columns.shape}, "
                f"grid expects ({self.grid.H}, J)"
            )
        if not np.isfinite(columns).all():
            raise InputDataError("profile matrix contains non-finite values")
        object.__setattr__(self, "columns", columns)

    @property
    def J(self) -> int:
        """Column count."""
        return int(self.columns.shape[1])

    @classmethod
    def from_profiles(cls, profiles: Sequence[Profile]) -> "ProfileMatrix":
        """Stack profiles sharing one grid."""
        if not profiles:
            raise EmptyMatrixError("no profiles to stack")
        grid = profiles[0].grid
        if any(p.grid != grid for p in profiles):
            raise InputDataError("profiles do not share a depth grid")
        return cls(grid, np.column_stack([p.speeds for p in profiles]))

    @classmethod
    def from_history(cls, grid: DepthGrid, history: np.ndarray) -> "ProfileMatrix":
        """Build from a ``[J, H]`` history array, one profile per row."""
        return cls(grid, np.asarray(history, dtype=np.float64).T)


@dataclass(frozen=True)
class CoeffVector:
    """EOF coefficients ``alpha_1..alpha_K``."""

    alpha: tuple[float, ...]

    def __post_init__(self) -> None:
        """Reject non-finite coefficients."""
        if not np.isfinite(np.asarray(self.alpha, dtype=np.float64)).all():
            raise InputDataError("EOF coefficients must be finite")

    @property
    def K(self) -> int:
        """Order."""
        return len(self.alpha)

    def as_array(self) -> np.ndarray:
        """Coefficients as a float64 vector."""
        return np.asarray(self.alpha, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class EofBasis:
    """Mean profile plus ranked orthonormal eigenvectors and eigenvalues."""

    grid: DepthGrid
    mean: Profile
    eigvecs: np.ndarray
    eigvals: np.ndarray
    J: int

    def __post_init__(self) -> None:
        """Validate shapes, orthonormality and eigenvalue ordering."""
        vecs = np.asarray(self.eigvecs, dtype=np.float64)
        vals = np.asarray(self.eigvals, dtype=np.float64)
        object.__setattr__(self, "eigvecs", vecs)
        object.__setattr__(self, "eigvals", vals)
        H = self.grid.H
        if self.mean.grid != self.grid:
            raise BasisError("mean profile grid differs from basis grid")
        if vecs.ndim != 2 or vecs.shape[0] != H or vals.shape != (vecs.shape[1],):
            raise BasisError(
                f"eigvecs {vecs.shape} and eigvals {vals.shape} inconsistent "
                f"with H={H}"
            )
        if vecs.shape[1] > min(H, self.J):
            raise BasisError(f"K_max {vecs.shape[1]} exceeds min(H, J)")
        if not (np.isfinite(vecs).all() and np.isfinite(vals).all()):
            raise BasisError("basis contains non-finite values")
        gram = vecs.T @ vecs
        drift = float(np.abs(gram - np.eye(vecs.shape[1])).max(initial=0.0))
        if drift > EofDefaults.ORTHONORMAL_TOLERANCE:
            raise BasisError(f"eigenvectors not orthonormal (max drift {drift:.3e})")
        if (vals < 0).any() or (np.diff(vals) > 0).any():
            raise BasisError("eigenvalues must be non-negative and non-increasing")

    @property
    def K_max(self) -> int:
        """Number of stored eigenvectors."""
        return int(self.eigvecs.shape[1])

    @property
    def H(self) -> int:
        """Layer count."""
        return self.grid.H

    def mode(self, k: int) -> np.ndarray:
        """Eigenvector ``e_k`` (1-based)."""
        if not 1 <= k <= self.K_max:
            raise OrderError(f"mode {k} outside 1..{self.K_max}")
        return self.eigvecs[:, k - 1]

    def explained_variance(self) -> np.ndarray:
        """Fraction of total variance carried by each mode."""
        total = float(self.eigvals.sum())
        if total == 0.0:
            return np.zeros_like(self.eigvals)
        return self.eigvals / total


def mean_profile(m: ProfileMatrix) -> Profile:
    """Row-wise mean of the profile matrix.

    Raises:
        EmptyMatrixError: If the matrix has no columns.
    """
    if m.J == 0:
        raise EmptyMatrixError("cannot average an empty profile matrix")
    return Profile(m.grid, m.columns.mean(axis=1))


def residual_matrix(m: ProfileMatrix, mean: Profile) -> np.ndarray:
    """Columns minus the mean profile (``R = S - S_0``).

    Raises:
        InputDataError: If ``mean`` is on a different grid.
    """
    if mean.grid != m.grid or mean.speeds.shape != (m.grid.H,):
        raise InputDataError(
            f"mean of length {mean.speeds.size} does not match H={m.grid.H}"
        )
    return m.columns - mean.speeds[:, None]


def fix_sign(vector: np.ndarray) -> np.ndarray:
    """Flip ``vector`` so its largest-magnitude entry is positive.

    Ties go to the first (shallowest) entry.
    """
    idx = int(np.argmax(np.abs(vector)))
    return -vector if vector[idx] < 0 else vector


def _orthogonalise(vector: np.ndarray, accepted: list[np.ndarray]) -> np.ndarray:
    # modified Gram-Schmidt, applied twice
    out = vector.copy()
    for _ in range(2):
        for e in accepted:
            out = out - (e @ out) * e
    return out


def _gram_eigvecs(
    resid: np.ndarray, vals: np.ndarray, gram_vecs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map Gram-space eigenvectors back to depth space and complete the basis."""
    H = resid.shape[0]
    K = gram_vecs.shape[1]
    floor = EofDefaults.NULL_DIRECTION_TOLERANCE * max(
        float(np.linalg.norm(resid)), 1.0
    )
    accepted: list[np.ndarray] = []
    slots: list[int] = []
    out_vals = vals.copy()
    for k in range(K):
        mapped = resid @ gram_vecs[:, k]
        if np.linalg.norm(mapped) <= floor:
            out_vals[k] = 0.0
            continue
        mapped = _orthogonalise(mapped / np.linalg.norm(mapped), accepted)
        norm = np.linalg.norm(mapped)
        if norm <= _COMPLETION_THRESHOLD:
            out_vals[k] = 0.0
            continue
        accepted.append(mapped / norm)
        slots.append(k)

    vecs: list[np.ndarray] = [np.zeros(H)] * K
    for k, e in zip(slots, accepted):
        vecs[k] = e
    missing = [k for k in range(K) if k not in slots]
    if missing:
        logger.debug(f"Completing {len(missing)} null EOF directions")
    basis_index = 0
    for k in missing:
        while True:
            unit = np.zeros(H)
            unit[basis_index] = 1.0
            basis_index += 1
            candidate = _orthogonalise(unit, accepted)
            norm = np.linalg.norm(candidate)
            if norm > _COMPLETION_THRESHOLD:
                break
        e = candidate / norm
        accepted.append(e)
        vecs[k] = e
    return out_vals, np.column_stack(vecs)


def eof_decompose(
    resid: np.ndarray,
    mean: Profile,
    tolerance: float = EofDefaults.JACOBI_TOLERANCE,
) -> EofBasis:
    """Eigen-decompose the residual covariance ``C = R R^T / J``.

    Returns ``K_max = min(H, J)`` eigenpairs with eigenvalues descending and
    each eigenvector's largest-magnitude entry positive.

    Raises:
        InputDataError: If ``J < 2``, shapes disagree or values are non-finite.
        BasisError: If the result fails the orthonormality checks.
    """
    R = np.asarray(resid, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != mean.grid.H:
        raise InputDataError(
            f"residual matrix shape {R.shape} does not match H={mean.grid.H}"
        )
    if not np.isfinite(R).all():
        raise InputDataError("residual matrix contains non-finite values")
    H, J = R.shape
    if J < 2:
        raise InputDataError(f"EOF decomposition needs J >= 2 profiles, got {J}")

    if J < H:
        vals, gram_vecs = jacobi_eigh(R.T @ R / J, tolerance=tolerance)
        order = np.argsort(-vals, kind="stable")
        vals = np.maximum(vals[order], 0.0)
        vals, vecs = _gram_eigvecs(R, vals, gram_vecs[:, order])
        # null directions were zeroed; keep the ordering non-increasing
        order = np.argsort(-vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
    else:
        vals, vecs = jacobi_eigh(R @ R.T / J, tolerance=tolerance)
        order = np.argsort(-vals, kind="stable")
        vals = np.maximum(vals[order], 0.0)
        vecs = vecs[:, order]

    vecs = np.column_stack([fix_sign(vecs[:, k]) for k in range(vecs.shape[1])])
    basis = EofBasis(grid=mean.grid, mean=mean, eigvecs=vecs, eigvals=vals, J=J)
    logger.debug(
        f"EOF basis H={H} J={J} K_max={basis.K_max} "
        f"leading eigenvalue {vals[0]:.6g}"
    )
    return basis


def decompose_profiles(m: ProfileMatrix) -> EofBasis:
    """Mean, residuals and decomposition in one call."""
    mean = mean_profile(m)
    return eof_decompose(residual_matrix(m, mean), mean)


def project(basis: EofBasis, target: Profile, K: int) -> CoeffVector:
    """Coefficients ``alpha_k = e_k . (target - mean)`` for ``k = 1..K``.

    Raises:
        OrderError: If ``K`` is outside ``1..K_max``.
        InputDataError: If ``target`` is on a different grid.
    """
    if not 1 <= K <= basis.K_max:
        raise OrderError(f"order K={K} outside 1..{basis.K_max}")
    if target.grid != basis.grid:
        raise InputDataError("target profile grid differs from basis grid")
    alpha = basis.eigvecs[:, :K].T @ (target.speeds - basis.mean.speeds)
    return CoeffVector(tuple(float(a) for a in alpha))


def reconstruct(basis: EofBasis, alpha: CoeffVector) -> Profile:
    """``S = S_0 + sum_k alpha_k e_k``.

    Raises:
        OrderError: If ``alpha`` has more coefficients than the basis has modes.
    """
    if alpha.K > basis.K_max:
        raise OrderError(f"{alpha.K} coefficients for a basis of order {basis.K_max}")
    speeds = basis.mean.speeds + basis.eigvecs[:, : alpha.K] @ alpha.as_array()
    return Profile(basis.grid, speeds)
