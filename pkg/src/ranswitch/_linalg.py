"""Self-contained symmetric eigenvalue solver (cyclic Jacobi rotations)."""

from __future__ import annotations

import numpy as np


def jacobi_eigenvalues(a, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix via cyclic Jacobi rotations.

    Sweeps over all off-diagonal pairs, annihilating each entry with a
    Givens rotation, until the off-diagonal Frobenius norm drops below
    ``tol`` relative to the matrix norm.

    Parameters
    ----------
    a : (n, n) array_like
        Symmetric matrix (symmetry is assumed, not checked).
    tol : float
        Relative convergence tolerance on the off-diagonal norm.
    max_sweeps : int
        Safety cap on the number of full sweeps.

    Returns
    -------
    (n,) ndarray
        Eigenvalues sorted in ascending order.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 1:
        return a[0, :1].copy()

    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 0.25 * tol * scale / n:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # smaller-magnitude root for numerical stability
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    return np.sort(np.diag(a))


def symmetric_eig_bounds(a, tol: float = 1e-12) -> tuple[float, float]:
    """(min, max) eigenvalue of a symmetric matrix."""
    w = jacobi_eigenvalues(a, tol=tol)
    return float(w[0]), float(w[-1])
