"""Cyclic Jacobi eigensolver for small dense symmetric matrices."""

import logging

import numpy as np

from common.errors import InputDataError
from config.defaults import EofDefaults

logger = logging.getLogger(__name__)


def off_diagonal_norm(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part of ``a``."""
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def jacobi_eigh(
    matrix: np.ndarray,
    tolerance: float = EofDefaults.JACOBI_TOLERANCE,
    max_sweeps: int = EofDefaults.JACOBI_MAX_SWEEPS,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit every ``(p, q)`` pair with ``p < q`` in row-major order and
    stop once the off-diagonal Frobenius norm is at most
    ``tolerance * ||matrix||_F`` or ``max_sweeps`` sweeps have run.

    Args:
        matrix: Square symmetric array.
        tolerance: Relative off-diagonal stopping threshold.
        max_sweeps: Hard limit on sweeps.

    Returns:
        ``(eigvals, eigvecs)`` unsorted; column ``k`` of ``eigvecs`` pairs
        with ``eigvals[k]``.

    Raises:
        InputDataError: If the matrix is not square, symmetric or finite.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputDataError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InputDataError("matrix contains non-finite values")
    scale = float(np.linalg.norm(a))
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise InputDataError("matrix is not symmetric")

    n = a.shape[0]
    v = np.eye(n)
    threshold = tolerance * scale
    sweeps = 0
    while sweeps < max_sweeps and off_diagonal_norm(a) > threshold:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    residual = off_diagonal_norm(a)
    if residual > threshold:
        logger.warning(
            f"Jacobi stopped after {sweeps} sweeps with off-diagonal norm "
            f"{residual:.3e} (target {threshold:.3e})"
        )
    else:
        logger.debug(f"Jacobi converged in {sweeps} sweeps on a {n}x{n} matrix")
    return np.diag(a).copy(), v
