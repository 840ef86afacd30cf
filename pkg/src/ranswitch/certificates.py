"""Multiple Lyapunov-function certificates: evaluation, extraction, checking.

A certificate family pairs one Lyapunov function per mode with per-mode
decay/growth rates (or a full rate matrix), a pairwise comparison constant
``mu > 1``, and quadratic sandwich bounds ``c1 r^2 <= V_i(x) <= c2 r^2``.
For quadratic functions and linear drifts the tight constants are computed
exactly (symmetric eigenvalue problems); otherwise user-declared constants
are verified pointwise on sample sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._linalg import jacobi_eigenvalues, symmetric_eig_bounds
from .dynamics import VectorField

__all__ = [
    "LyapunovSpec",
    "QuadraticLyapunov",
    "PolynomialLyapunov",
    "CertificateFamily",
    "Violation",
    "lyapunov_value",
    "lie_derivative",
    "extract_lambda_quadratic",
    "extract_lambda_matrix",
    "extract_mu",
    "strictify_mu",
    "verify_pointwise",
    "default_sample_points",
]

MU_STRICT_EPS = 1e-9
_SYM_TOL = 1e-12


class LyapunovSpec:
    """Interface: a continuously differentiable positive-definite function."""

    dim: int

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class QuadraticLyapunov(LyapunovSpec):
    """V(x) = x' P x with P symmetric positive definite."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        scale = max(1.0, float(np.max(np.abs(P))))
        if np.max(np.abs(P - P.T)) > _SYM_TOL * scale:
            raise ValueError("P must be symmetric within 1e-12")
        P = 0.5 * (P + P.T)
        lo, hi = symmetric_eig_bounds(P)
        if lo <= 0.0:
            raise ValueError("P must be positive definite")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "eig_min", lo)
        object.__setattr__(self, "eig_max", hi)

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum((x @ self.P) * x, axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * (x @ self.P)


@dataclass(frozen=True, eq=False)
class PolynomialLyapunov(LyapunovSpec):
    """Positive-definite even polynomial form given as a monomial list.

    ``terms`` is a list of (exponent vector, coefficient) pairs; there must
    be no constant monomial (V(0) = 0) and positivity is spot-checked on a
    sample sphere at construction.
    """

    n: int
    terms: tuple

    def __post_init__(self):
        E = np.zeros((len(self.terms), self.n))
        a = np.zeros(len(self.terms))
        for k, (e, coeff) in enumerate(self.terms):
            e = np.asarray(e, dtype=float)
            if e.shape != (self.n,) or np.any(e < 0) or np.any(e != np.round(e)):
                raise ValueError(f"bad exponent vector {e}")
            if coeff != 0.0 and not np.any(e > 0):
                raise ValueError("constant monomial breaks V(0) = 0")
            E[k] = e
            a[k] = float(coeff)
        object.__setattr__(self, "_exps", E)
        object.__setattr__(self, "_coeffs", a)
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((64, self.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        if np.any(self.value(dirs) <= 0.0):
            raise ValueError("polynomial form is not positive on the sample sphere")

    @property
    def dim(self) -> int:
        return self.n

    def value(self, x):
        x = np.asarray(x, dtype=float)
        mono = np.prod(x[..., None, :] ** self._exps, axis=-1)
        return mono @ self._coeffs

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        grad = np.zeros(x.shape)
        for d in range(self.n):
            ed = self._exps[:, d]
            active = ed > 0
            if not np.any(active):
                continue
            E = self._exps[active].copy()
            E[:, d] -= 1.0
            mono = np.prod(x[..., None, :] ** E, axis=-1)
            grad[..., d] = mono @ (self._coeffs[active] * ed[active])
        return grad


def lyapunov_value(spec: LyapunovSpec, x):
    return spec.value(x)


def lie_derivative(spec: LyapunovSpec, field: VectorField, x):
    """<grad V(x), f(x)> with exact closed-form gradients."""
    x = np.asarray(x, dtype=float)
    return np.sum(spec.gradient(x) * field(x), axis=-1)


def extract_lambda_quadratic(P, A) -> float:
    """Tight rate lambda with A'P + PA + lambda P negative semidefinite.

    Equals ``-max eig(L^-1 (A'P + PA) L^-T)`` for the Cholesky factor L of
    P, so the per-mode decay inequality holds with equality in the worst
    direction.
    """
    P = np.asarray(P, dtype=float)
    A = np.asarray(A, dtype=float)
    if P.shape != A.shape or P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P and A must be square with matching shape")
    try:
        L = np.linalg.cholesky(0.5 * (P + P.T))
    except np.linalg.LinAlgError as exc:
        raise ValueError("P must be symmetric positive definite") from exc
    M = A.T @ P + P @ A
    Y = np.linalg.solve(L, M)
    B = np.linalg.solve(L, Y.T).T
    B = 0.5 * (B + B.T)
    return float(-jacobi_eigenvalues(B)[-1])


def extract_lambda_matrix(Ps: Sequence, As: Sequence) -> np.ndarray:
    """Rate matrix: entry (i, j) is the tight rate of V_i along drift j."""
    N = len(Ps)
    if len(As) != N:
        raise ValueError("need one drift per certificate")
    out = np.empty((N, N))
    for i in range(N):
        for j in range(N):
            out[i, j] = extract_lambda_quadratic(Ps[i], As[j])
    return out


def extract_mu(Ps: Sequence) -> float:
    """Tightest constant with V_i(x) <= mu V_j(x) for all pairs and x.

    For quadratic forms this is the largest eigenvalue of any pencil
    L_j^-1 P_i L_j^-T over ordered pairs (i, j).  The returned value can
    equal 1 (identical functions); callers needing strict mu > 1 should
    apply :func:`strictify_mu`.
    """
    mats = [np.asarray(P, dtype=float) for P in Ps]
    mu = 0.0
    for j, Pj in enumerate(mats):
        L = np.linalg.cholesky(0.5 * (Pj + Pj.T))
        for Pi in mats:
            Y = np.linalg.solve(L, Pi)
            B = np.linalg.solve(L, Y.T).T
            mu = max(mu, jacobi_eigenvalues(0.5 * (B + B.T))[-1])
    return float(mu)


def strictify_mu(mu_star: float, eps: float = MU_STRICT_EPS) -> float:
    """Perturb a tight comparison constant to satisfy the strict mu > 1."""
    return max(mu_star, 1.0 + eps)


@dataclass(frozen=True, eq=False)
class CertificateFamily:
    """Lyapunov functions, rates, comparison constant, and sandwich bounds.

    ``lam`` is either a per-mode vector (rate of V_i along its own drift)
    or a full matrix (rate of V_i along every drift j, as needed for
    Markov jump chains); the matrix diagonal plays the vector's role.
    ``alpha1``/``alpha2`` are the quadratic envelopes ``c r^2`` induced by
    the extreme eigenvalues of the quadratic certificates.
    """

    V: tuple
    lam: np.ndarray
    mu: float
    alpha1_coeff: float
    alpha2_coeff: float

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        N = len(self.V)
        if lam.shape not in ((N,), (N, N)):
            raise ValueError("lam must be a length-N vector or an N x N matrix")
        if not self.mu > 1.0:
            raise ValueError("mu must be strictly greater than 1")
        if not (self.alpha1_coeff > 0.0 and self.alpha2_coeff >= self.alpha1_coeff):
            raise ValueError("need 0 < alpha1 coefficient <= alpha2 coefficient")
        object.__setattr__(self, "lam", lam)

    @property
    def n_modes(self) -> int:
        return len(self.V)

    @property
    def lambda_vector(self) -> np.ndarray:
        return np.diagonal(self.lam).copy() if self.lam.ndim == 2 else self.lam

    @property
    def lambda_matrix(self) -> np.ndarray:
        if self.lam.ndim != 2:
            raise ValueError("certificate carries per-mode rates only, not a rate matrix")
        return self.lam

    def alpha1(self, r):
        return self.alpha1_coeff * np.square(r)

    def alpha2(self, r):
        return self.alpha2_coeff * np.square(r)

    @classmethod
    def from_quadratic(
        cls,
        Ps: Sequence,
        drifts: Optional[Sequence] = None,
        lam=None,
        mu: Optional[float] = None,
        matrix: bool = False,
    ) -> "CertificateFamily":
        """Build a quadratic certificate, extracting whatever is not given.

        ``drifts`` (linear fields or plain matrices) enable rate
        extraction; ``lam`` overrides extraction with declared rates;
        ``matrix=True`` extracts the full rate matrix.
        """
        specs = tuple(
            P if isinstance(P, QuadraticLyapunov) else QuadraticLyapunov(np.asarray(P, float))
            for P in Ps
        )
        if lam is None:
            if drifts is None:
                raise ValueError("need drifts to extract rates, or declared rates")
            mats = [d.A if hasattr(d, "A") else np.asarray(d, float) for d in drifts]
            Pmats = [s.P for s in specs]
            if matrix:
                lam = extract_lambda_matrix(Pmats, mats)
            else:
                lam = np.array(
                    [extract_lambda_quadratic(Pmats[i], mats[i]) for i in range(len(specs))]
                )
        if mu is None:
            mu = strictify_mu(extract_mu([s.P for s in specs]))
        c1 = min(s.eig_min for s in specs)
        c2 = max(s.eig_max for s in specs)
        return cls(V=specs, lam=np.asarray(lam, float), mu=float(mu),
                   alpha1_coeff=c1, alpha2_coeff=c2)


@dataclass(frozen=True, eq=False)
class Violation:
    """One pointwise certificate-inequality failure (violations are data)."""

    condition: str
    i: int
    j: Optional[int]
    x: np.ndarray
    residual: float


def default_sample_points(
    dim: int,
    count: int = 1000,
    seed: int = 0,
    r_min: float = 1e-2,
    r_max: float = 1e2,
    include_origin: bool = True,
) -> np.ndarray:
    """Log-uniform radii times uniform directions, plus the origin."""
    rng = np.random.default_rng(seed)
    radii = np.exp(rng.uniform(np.log(r_min), np.log(r_max), count))
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radii[:, None] * dirs
    if include_origin:
        pts = np.vstack([np.zeros((1, dim)), pts])
    return pts


def verify_pointwise(family, cert: CertificateFamily, samples, tol: float = 1e-9):
    """Check the certificate inequalities at every sample point.

    Evaluates the sandwich bounds, the decay inequalities (per-mode or
    full-matrix, matching the certificate's rate shape), and the pairwise
    comparison at each sample; returns the list of violations with
    residual above ``tol`` (empty list = consistent on the samples).  All
    inequalities hold trivially at the origin.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    N = cert.n_modes
    r2 = np.sum(X * X, axis=1)
    out: list[Violation] = []

    vals = np.stack([cert.V[i].value(X) for i in range(N)], axis=0)
    for i in range(N):
        lower = cert.alpha1_coeff * r2 - vals[i]
        upper = vals[i] - cert.alpha2_coeff * r2
        for k in np.nonzero(lower > tol)[0]:
            out.append(Violation("V1-lower", i, None, X[k], float(lower[k])))
        for k in np.nonzero(upper > tol)[0]:
            out.append(Violation("V1-upper", i, None, X[k], float(upper[k])))

    if cert.lam.ndim == 1:
        for i in range(N):
            resid = lie_derivative(cert.V[i], family.drift[i], X) + cert.lam[i] * vals[i]
            for k in np.nonzero(resid > tol)[0]:
                out.append(Violation("V2", i, i, X[k], float(resid[k])))
    else:
        for i in range(N):
            for j in range(N):
                resid = lie_derivative(cert.V[i], family.drift[j], X) + cert.lam[i, j] * vals[i]
                for k in np.nonzero(resid > tol)[0]:
                    out.append(Violation("V2'", i, j, X[k], float(resid[k])))

    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            resid = vals[i] - cert.mu * vals[j]
            for k in np.nonzero(resid > tol)[0]:
                out.append(Violation("V3", i, j, X[k], float(resid[k])))
    return out
