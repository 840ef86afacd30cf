"""Stability-condition arithmetic for the three switching-signal classes.

Each checker evaluates its per-switch contraction sum exactly and returns a
verdict carrying the margin to 1 and the per-mode term breakdown, so a user
can see which instability/activation-probability trade-off dominates.  A
divergent holding-time transform makes a certificate inapplicable rather
than merely unsatisfied, and the verdict says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .switching import HoldingDistribution, SwitchingLaw, _expm1_ratio

__all__ = [
    "ConditionVerdict",
    "check_eh",
    "check_uh",
    "check_gh",
    "eta_kappa",
    "mean_bound_uh",
]


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of a stability-condition check.

    ``satisfied`` holds exactly when the margin is positive and no
    inapplicability reason is set.  ``terms`` carries the per-mode
    contributions (per-current-mode row sums for the Markov-chain check).
    """

    condition: str
    satisfied: bool
    margin: Optional[float]
    terms: tuple = ()
    inapplicable_reason: Optional[str] = None

    def __post_init__(self):
        ok = (
            self.inapplicable_reason is None
            and self.margin is not None
            and self.margin > 0.0
        )
        if self.satisfied != ok:
            raise ValueError("verdict inconsistent: satisfied must match margin/reason")

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "satisfied": self.satisfied,
            "margin": self.margin,
            "terms": list(self.terms),
            "inapplicable_reason": self.inapplicable_reason,
        }


def _check_prob_vector(q: np.ndarray) -> None:
    if np.any(q < 0.0) or abs(float(q.sum()) - 1.0) > 1e-12:
        raise ValueError("q must be a probability vector")


def check_eh(lam, mu: float, q, rate: float) -> ConditionVerdict:
    """Exponential-holding check: positivity of every shifted rate and
    ``sum_i mu q_i / (1 + lam_i / rate) < 1``.

    If some ``lam_i + rate <= 0`` the sum is meaningless (the per-switch
    expectation diverges) and the verdict is inapplicable.
    """
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    if lam.shape != q.shape or lam.ndim != 1:
        raise ValueError("lam and q must be matching vectors")
    _check_prob_vector(q)
    if not rate > 0.0:
        raise ValueError("rate must be positive")

    bad = np.nonzero(lam + rate <= 0.0)[0]
    if bad.size:
        reason = "shifted rate lambda_i + rate <= 0 for mode index " + ", ".join(
            str(int(i)) for i in bad
        )
        return ConditionVerdict("EH", False, None, (), reason)

    terms = tuple(float(mu * qi / (1.0 + li / rate)) for qi, li in zip(q, lam))
    margin = 1.0 - sum(terms)
    return ConditionVerdict("EH", margin > 0.0, margin, terms)


def check_uh(lam, mu: float, q, T: float) -> ConditionVerdict:
    """Uniform-holding check: ``sum_i mu q_i (1 - e^{-lam_i T})/(lam_i T) < 1``.

    The ``lam_i = 0`` term equals ``mu q_i`` (the analytic limit, taken by
    series below ``|lam_i T| = 1e-6``).  Always applicable: the transform
    of a bounded holding time is finite for every rate.
    """
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    if lam.shape != q.shape or lam.ndim != 1:
        raise ValueError("lam and q must be matching vectors")
    _check_prob_vector(q)
    if not T > 0.0:
        raise ValueError("T must be positive")

    terms = tuple(float(mu * qi * _expm1_ratio(li * T)) for qi, li in zip(q, lam))
    margin = 1.0 - sum(terms)
    return ConditionVerdict("UH", margin > 0.0, margin, terms)


def check_gh(lam_matrix, mu: float, P, holding: HoldingDistribution) -> ConditionVerdict:
    """Markov-jump check: worst current mode of the transform-weighted rows.

    Computes ``theta = max_i sum_j mu P[i,j] E[exp(-lam[j,i] S)]``: from
    current mode i, the chain picks destination j with probability
    ``P[i,j]`` and the destination's function V_j evolves along the still
    active drift i at rate ``lam[j,i]`` for the holding duration.
    Satisfied when ``theta < 1`` and every transform is finite.
    """
    lam = np.asarray(lam_matrix, dtype=float)
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    if P.shape != (N, N) or lam.shape != (N, N):
        raise ValueError("lam_matrix and P must be square with matching shape")
    for i in range(N):
        _check_prob_vector(P[i])

    mgf = np.empty((N, N))
    divergent = []
    for j in range(N):
        for i in range(N):
            mgf[j, i] = holding.mgf(float(lam[j, i]))
            if not math.isfinite(mgf[j, i]):
                divergent.append((j, i))
    if divergent:
        pairs = ", ".join(f"(j={j}, i={i})" for j, i in divergent)
        reason = f"holding-time transform E[exp(-lam[j,i] S)] diverges for {pairs}"
        return ConditionVerdict("GH", False, None, (), reason)

    rows = tuple(
        float(sum(mu * P[i, j] * mgf[j, i] for j in range(N))) for i in range(N)
    )
    theta = max(rows)
    margin = 1.0 - theta
    return ConditionVerdict("GH", margin > 0.0, margin, rows)


def eta_kappa(kind: str, kappa: float, lam, mu: float, q, scale: float) -> float:
    """Per-switch contraction factor of E[V^(1+kappa)] at switching instants.

    ``kind`` selects the form: "EH" (``scale`` is the switching rate,
    requires ``(1+kappa) lam_j + rate > 0`` for every mode, returning
    ``math.inf`` otherwise) or "UH" (``scale`` is the holding bound T).
    ``eta(0)`` reproduces the corresponding condition sum exactly.
    """
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    lam = np.asarray(lam, dtype=float)
    q = np.asarray(q, dtype=float)
    c = 1.0 + kappa
    if kind == "EH":
        rate = scale
        if np.any(c * lam + rate <= 0.0):
            return math.inf
        return float(sum(mu**c * qj / (1.0 + lj * c / rate) for qj, lj in zip(q, lam)))
    if kind == "UH":
        T = scale
        return float(sum(mu**c * qj * _expm1_ratio(lj * c * T) for qj, lj in zip(q, lam)))
    raise ValueError("kind must be 'EH' or 'UH'")


def _mean_bound_term(lam: float, T: float) -> float:
    """One mode's contribution 1/lam - (1 - e^{-lam T})/(lam^2 T).

    Equals ``(1 - (1 - e^{-z})/z)/lam`` with z = lam T; the limit at
    lam = 0 is T/2, taken by series below |z| = 1e-6.
    """
    z = lam * T
    if abs(z) < 1e-6:
        return T * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0)
    return (1.0 - _expm1_ratio(z)) / lam


def mean_bound_uh(cert, law: SwitchingLaw, x0_norm: float) -> float:
    """Upper bound on ``sup_t E[V_sigma(t)(x(t))]`` under uniform holding.

    Returns ``M * alpha2(x0_norm) / (1 - eta(0))`` with
    ``M = max_i (1/lam_i - (1 - e^{-lam_i T})/(lam_i^2 T))``; requires the
    uniform-holding condition to hold (``eta(0) < 1``).
    """
    if law.cls != "UH":
        raise ValueError("mean bound requires a uniform-holding law")
    lam = cert.lambda_vector
    T = law.holding.T
    q = law.jumps.q
    eta0 = eta_kappa("UH", 0.0, lam, cert.mu, q, T)
    if not eta0 < 1.0:
        raise ValueError(f"condition unsatisfied: eta(0) = {eta0} >= 1")
    M = max(_mean_bound_term(float(li), T) for li in lam)
    return float(M * cert.alpha2(x0_norm) / (1.0 - eta0))
