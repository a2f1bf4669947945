"""Cyclic Jacobi eigendecomposition for small dense symmetric matrices."""

from __future__ import annotations

import numpy as np

from ..errors import DetectionError

SYMMETRY_TOL = 1e-9
OFFDIAG_TOL = 1e-12
MAX_SWEEPS = 100


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def eigendecompose_symmetric(m, tol: float = OFFDIAG_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues and eigenvectors of a real symmetric matrix.

    Parameters
    ----------
    m : array_like, shape (p, p)
        Symmetric matrix. Asymmetry larger than ``1e-9`` relative to the
        largest entry is rejected.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol`` times the Frobenius norm of ``m``.
    max_sweeps : int
        Upper bound on full cyclic sweeps.

    Returns
    -------
    latents : ndarray, shape (p,)
        Eigenvalues in descending order.
    vectors : ndarray, shape (p, p)
        Orthonormal eigenvectors as columns, ordered like ``latents``. Each
        column is signed so that its largest-magnitude entry is positive.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DetectionError("not-symmetric", f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and float(np.max(np.abs(a - a.T))) > SYMMETRY_TOL * scale:
        raise DetectionError("not-symmetric")
    a = 0.5 * (a + a.T)
    p = a.shape[0]
    v = np.eye(p)

    target = tol * float(np.sqrt(np.sum(a * a)))
    for _ in range(max_sweeps):
        if _off_norm(a) <= target:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = a[i, j]
                if aij == 0.0:
                    continue
                diff = a[j, j] - a[i, i]
                if abs(diff) * 1e-150 > abs(aij):
                    t = aij / diff  # theta**2 would overflow; t ~ 1 / (2 theta)
                else:
                    theta = diff / (2.0 * aij)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- R^T A R with R the (i, j) plane rotation
                ci = a[:, i].copy()
                cj = a[:, j].copy()
                a[:, i] = c * ci - s * cj
                a[:, j] = s * ci + c * cj
                ri = a[i, :].copy()
                rj = a[j, :].copy()
                a[i, :] = c * ri - s * rj
                a[j, :] = s * ri + c * rj
                a[i, j] = a[j, i] = 0.0
                vi = v[:, i].copy()
                vj = v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj

    latents = np.diag(a).copy()
    order = np.argsort(-latents, kind="stable")
    latents = latents[order]
    v = v[:, order]
    for col in range(p):
        k = int(np.argmax(np.abs(v[:, col])))
        if v[k, col] < 0:
            v[:, col] = -v[:, col]
    return latents, v
