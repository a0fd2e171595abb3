"""Dense symmetric eigensolver by cyclic Jacobi rotations.

Used as an independent test oracle for the spectral estimator; never on any
training path.  Intended for matrices up to a few hundred rows.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError


def symmetric_eigh(M: np.ndarray, off_tol: float = 1e-12,
                   max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
    symmetric matrix, via cyclic Jacobi sweeps until the off-diagonal norm
    drops below off_tol."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError("symmetric_eigh expects a square matrix")
    n = A.shape[0]
    if n > 256:
        raise ContractError("symmetric_eigh is a small-matrix oracle (n <= 256)")
    if np.abs(A - A.T).max() > 1e-10:
        raise ContractError("matrix is not symmetric within 1e-10")
    A = (A + A.T) / 2.0
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V

    def offnorm():
        off = A - np.diag(A.diagonal())
        return np.sqrt((off * off).sum())

    for _ in range(max_sweeps):
        if offnorm() < off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < off_tol / (n * n):
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    eigvals = A.diagonal().copy()
    order = np.argsort(eigvals, kind="stable")
    return eigvals[order], V[:, order]
