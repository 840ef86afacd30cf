"""Feedback synthesis for control-affine switched systems.

Implements the explicit damping feedback for unbounded controls: per mode,
``k_j(x) = -L_{g_j}V(x) * phi(Wbar(x), Wtil(x))`` with
``Wbar = L_f V + lam V`` and ``Wtil = sum_j (L_{g_j}V)^2``, which achieves
``L_f V + sum_j k_j L_{g_j}V = -lam V - sqrt(Wbar^2 + Wtil^2)`` wherever
``Wtil > 0``.  Also provides shared (mode-independent) controllers, the
closed-loop field composition, and the pointwise verifications that turn a
controller plus certificate back into a condition check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .certificates import CertificateFamily
from .dynamics import ClosedLoopField, SubsystemFamily, VectorField

__all__ = [
    "phi",
    "universal_control",
    "UniversalController",
    "LinearGainController",
    "PolynomialMap",
    "PolynomialController",
    "closed_loop_field",
    "verify_clf_condition",
    "verify_closed_loop_decrease",
    "small_control_probe",
    "ClfViolation",
    "DecreaseViolation",
]


def phi(a, b):
    """(a + sqrt(a^2 + b^2)) / b when b != 0, else 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.where(b == 0.0, 1.0, b)
    val = (a + np.sqrt(a * a + b * b)) / denom
    out = np.where(b == 0.0, 0.0, val)
    return float(out) if out.ndim == 0 else out


def _gains(family: SubsystemFamily, cert: CertificateFamily, mode: int, x, rates):
    """(V, LfV, LgV stack, Wbar, Wtil) at x for one mode."""
    V = cert.V[mode]
    x = np.asarray(x, dtype=float)
    grad = V.gradient(x)
    v = V.value(x)
    LfV = np.sum(grad * family.drift[mode](x), axis=-1)
    LgV = np.stack([np.sum(grad * g(x), axis=-1) for g in family.control[mode]], axis=-1)
    Wbar = LfV + rates[mode] * v
    Wtil = np.sum(LgV * LgV, axis=-1)
    return v, LfV, LgV, Wbar, Wtil


def universal_control(
    family: SubsystemFamily,
    cert: CertificateFamily,
    mode: int,
    x,
    rates=None,
) -> np.ndarray:
    """Input vector of the damping feedback for one mode at ``x``.

    ``rates`` defaults to the certificate's per-mode rates.  The control
    vanishes at the origin (every L_{g_j}V does) and wherever every
    L_{g_j}V vanishes.
    """
    if family.control is None:
        raise ValueError("family has no control fields")
    rates = cert.lambda_vector if rates is None else np.asarray(rates, dtype=float)
    _, _, LgV, Wbar, Wtil = _gains(family, cert, mode, x, rates)
    return -LgV * np.asarray(phi(Wbar, Wtil))[..., None]


@dataclass(frozen=True, eq=False)
class UniversalController:
    """Mode-dependent damping feedback built from a certificate family."""

    family: SubsystemFamily
    cert: CertificateFamily
    rates: np.ndarray

    mode_dependent = True

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if rates.shape != (self.family.n_modes,):
            raise ValueError("need one target rate per mode")
        if self.family.control is None:
            raise ValueError("family has no control fields")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_certificate(cls, family, cert, rates=None) -> "UniversalController":
        rates = cert.lambda_vector if rates is None else rates
        return cls(family=family, cert=cert, rates=np.asarray(rates, float))

    def control(self, mode: int, x) -> np.ndarray:
        return universal_control(self.family, self.cert, mode, x, self.rates)

    def mode_control(self, mode: int):
        return lambda x: self.control(mode, x)

    def to_json_dict(self) -> dict:
        return {
            "kind": "universal",
            "mode_dependent": True,
            "rates": [float(r) for r in self.rates],
            "P": [np.asarray(V.P).tolist() for V in self.cert.V],
        }


@dataclass(frozen=True, eq=False)
class LinearGainController:
    """Shared linear feedback u = K x for every mode."""

    K: np.ndarray

    mode_dependent = False

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2:
            raise ValueError("K must be an m x n matrix")
        object.__setattr__(self, "K", K)

    def control(self, mode: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.K.T

    def mode_control(self, mode: int):
        return lambda x: self.control(mode, x)

    def to_json_dict(self) -> dict:
        return {"kind": "linear_gain", "mode_dependent": False, "K": self.K.tolist()}


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Polynomial map R^n -> R^m given by per-output monomial lists.

    No constant monomials, so the map vanishes at the origin.
    """

    n_in: int
    n_out: int
    terms: tuple

    def __post_init__(self):
        if len(self.terms) != self.n_out:
            raise ValueError("need one monomial list per output")
        exps, coeffs = [], []
        for c, mono_list in enumerate(self.terms):
            E = np.zeros((len(mono_list), self.n_in))
            a = np.zeros(len(mono_list))
            for k, (e, coeff) in enumerate(mono_list):
                e = np.asarray(e, dtype=float)
                if e.shape != (self.n_in,) or np.any(e < 0) or np.any(e != np.round(e)):
                    raise ValueError(f"output {c}: bad exponent vector {e}")
                if coeff != 0.0 and not np.any(e > 0):
                    raise ValueError(f"output {c}: constant monomial breaks k(0) = 0")
                E[k] = e
                a[k] = float(coeff)
            exps.append(E)
            coeffs.append(a)
        object.__setattr__(self, "_exps", tuple(exps))
        object.__setattr__(self, "_coeffs", tuple(coeffs))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.n_out,))
        for c in range(self.n_out):
            E = self._exps[c]
            if E.shape[0] == 0:
                continue
            mono = np.prod(x[..., None, :] ** E, axis=-1)
            out[..., c] = mono @ self._coeffs[c]
        return out


@dataclass(frozen=True, eq=False)
class PolynomialController:
    """Shared polynomial feedback u = kbar(x) for every mode."""

    kbar: PolynomialMap

    mode_dependent = False

    def control(self, mode: int, x) -> np.ndarray:
        return self.kbar(x)

    def mode_control(self, mode: int):
        return lambda x: self.kbar(x)

    def to_json_dict(self) -> dict:
        return {
            "kind": "polynomial",
            "mode_dependent": False,
            "terms": [
                [[list(map(int, e)), float(c)] for e, c in zip(E, a)]
                for E, a in zip(self.kbar._exps, self.kbar._coeffs)
            ],
        }


def closed_loop_field(family: SubsystemFamily, controller, mode: int) -> VectorField:
    """Composite field f_i(x) + sum_j g_{i,j}(x) k_j(x) for one mode."""
    if controller is None:
        return family.drift[mode]
    if family.control is None:
        raise ValueError("family has no control fields")
    return ClosedLoopField(
        family.drift[mode], tuple(family.control[mode]), controller.mode_control(mode)
    )


@dataclass(frozen=True, eq=False)
class ClfViolation:
    mode: int
    x: np.ndarray
    wbar: float
    wtil: float


@dataclass(frozen=True, eq=False)
class DecreaseViolation:
    mode: int
    x: np.ndarray
    residual: float


def verify_clf_condition(
    family: SubsystemFamily,
    cert: CertificateFamily,
    mode: int,
    samples,
    tol: float = 1e-9,
    rates=None,
) -> list:
    """Find genuine control-Lyapunov violations for one mode.

    With unbounded inputs the decrease infimum is -inf unless every
    L_{g_j}V vanishes, so a sample violates only when ``Wtil <= tol`` and
    ``Wbar >= -tol`` simultaneously.  Origin samples are skipped (the
    condition is quantified away from 0).
    """
    rates = cert.lambda_vector if rates is None else np.asarray(rates, dtype=float)
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    X = X[np.linalg.norm(X, axis=1) > 0.0]
    _, _, _, Wbar, Wtil = _gains(family, cert, mode, X, rates)
    hits = np.nonzero((Wtil <= tol) & (Wbar >= -tol))[0]
    return [ClfViolation(mode, X[k], float(Wbar[k]), float(Wtil[k])) for k in hits]


def verify_closed_loop_decrease(
    family: SubsystemFamily,
    cert: CertificateFamily,
    controller,
    samples,
    tol: float = 1e-9,
    rates=None,
) -> list:
    """Check ``L_f V_i + sum_j k_j L_{g_j} V_i <= -lam_i V_i + tol`` at samples.

    Works for mode-dependent and shared controllers alike; for a shared
    controller an empty report certifies the per-mode rates that feed the
    switching-condition check.
    """
    rates = cert.lambda_vector if rates is None else np.asarray(rates, dtype=float)
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    out: list[DecreaseViolation] = []
    for mode in range(family.n_modes):
        V = cert.V[mode]
        grad = V.gradient(X)
        v = V.value(X)
        LfV = np.sum(grad * family.drift[mode](X), axis=-1)
        total = LfV.copy()
        if family.control is not None:
            u = np.asarray(controller.control(mode, X), dtype=float)
            for j, g in enumerate(family.control[mode]):
                total = total + u[..., j] * np.sum(grad * g(X), axis=-1)
        resid = total + rates[mode] * v
        for k in np.nonzero(resid > tol)[0]:
            out.append(DecreaseViolation(mode, X[k], float(resid[k])))
    return out


def small_control_probe(
    family: SubsystemFamily,
    cert: CertificateFamily,
    radii: Sequence[float],
    rates=None,
    directions: int = 100,
    seed: int = 0,
) -> list:
    """Probe the feedback magnitude near the origin.

    For each radius, reports the maximum of ``||u||`` over sampled
    directions and all modes.  A monotone-to-zero column is evidence for
    the small-control property; a column bounded away from zero falsifies
    it (the formula is still emitted, discontinuous at 0).
    """
    rates = cert.lambda_vector if rates is None else np.asarray(rates, dtype=float)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((directions, family.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rows = []
    for r in radii:
        if r == 0.0:
            rows.append((0.0, 0.0))
            continue
        worst = 0.0
        for mode in range(family.n_modes):
            u = universal_control(family, cert, mode, r * dirs, rates)
            worst = max(worst, float(np.max(np.linalg.norm(u, axis=-1))))
        rows.append((float(r), worst))
    return rows
