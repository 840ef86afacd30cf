"""Random switching signals: holding-time laws, jump laws, and sampled paths.

A switching signal is piecewise constant and right-continuous: it holds a
mode for a random duration, then jumps to a random destination mode.  Three
signal classes are supported:

* ``EH`` -- i.i.d. exponential holding times, i.i.d. jump destinations;
* ``UH`` -- i.i.d. uniform holding times, i.i.d. jump destinations;
* ``GH`` -- i.i.d. holding times of any supported law with finite mean,
  jump destinations forming a discrete-time Markov chain.

Mode indices are 0-based everywhere (code, config files, CSV exports).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ExponentialHolding",
    "UniformHolding",
    "PointMassHolding",
    "TabulatedHolding",
    "IidJumps",
    "MarkovJumps",
    "SwitchingLaw",
    "SwitchingPath",
    "sample_path",
]

_PROB_TOL = 1e-12


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _expm1_ratio(z: float) -> float:
    """(1 - exp(-z)) / z with the removable singularity at z = 0 filled in.

    A 4-term Taylor series is used below ``|z| = 1e-6`` to avoid the
    catastrophic cancellation in the direct formula.
    """
    if abs(z) < 1e-6:
        return 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0
    return -math.expm1(-z) / z


class HoldingDistribution:
    """Interface for laws of the (strictly positive) holding times.

    Subclasses provide the mean, the transform ``mgf(s) = E[exp(-s S)]``
    (returning ``math.inf`` when the expectation diverges), the CDF, and
    reproducible sampling from an explicit generator.
    """

    def mean(self) -> float:
        raise NotImplementedError

    def mgf(self, s: float) -> float:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialHolding(HoldingDistribution):
    """Exponential holding times with the given rate (mean ``1/rate``)."""

    rate: float

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError("exponential holding requires rate > 0")

    def mean(self) -> float:
        return 1.0 / self.rate

    def mgf(self, s: float) -> float:
        # E[exp(-s S)] = rate / (rate + s) only when s > -rate; otherwise
        # the integrand grows faster than the density decays.
        if s <= -self.rate:
            return math.inf
        return self.rate / (self.rate + s)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, -np.expm1(-self.rate * x), 0.0)

    def sample(self, rng, size):
        u = rng.random(size)
        s = -np.log1p(-u) / self.rate
        # u == 0.0 has probability 2**-53 per draw but would break the
        # strictly-increasing jump times; redraw those lanes.
        while np.any(s <= 0.0):
            bad = s <= 0.0
            s[bad] = -np.log1p(-rng.random(int(bad.sum()))) / self.rate
        return s


@dataclass(frozen=True)
class UniformHolding(HoldingDistribution):
    """Uniform holding times on the half-open interval ``(0, T]``."""

    T: float

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError("uniform holding requires T > 0")

    def mean(self) -> float:
        return self.T / 2.0

    def mgf(self, s: float) -> float:
        return _expm1_ratio(s * self.T)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(x / self.T, 0.0, 1.0)

    def sample(self, rng, size):
        # 1 - U with U in [0, 1) lands in (0, T]: keeps holding times > 0.
        return self.T * (1.0 - rng.random(size))


@dataclass(frozen=True)
class PointMassHolding(HoldingDistribution):
    """Deterministic holding times of duration ``T``."""

    T: float

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError("point-mass holding requires T > 0")

    def mean(self) -> float:
        return self.T

    def mgf(self, s: float) -> float:
        try:
            return math.exp(-s * self.T)
        except OverflowError:
            return math.inf

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.T, 1.0, 0.0)

    def sample(self, rng, size):
        # no randomness consumed
        return np.full(size, self.T, dtype=float)


@dataclass(frozen=True, eq=False)
class TabulatedHolding(HoldingDistribution):
    """Holding times given by a tabulated inverse CDF.

    The grid is a strictly increasing sequence of (probability, duration)
    pairs with ``probabilities[0] == 0`` and ``probabilities[-1] == 1``,
    so the whole unit interval of probability levels is covered.  The
    quantile function is interpolated linearly between grid points, which
    is the simplest monotone interpolant (and introduces a documented
    piecewise-linear bias for curved CDFs).
    """

    probabilities: np.ndarray
    durations: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        d = np.asarray(self.durations, dtype=float)
        if p.ndim != 1 or p.shape != d.shape or p.size < 2:
            raise ValueError("tabulated grid needs matching 1-d arrays of length >= 2")
        if not (np.all(np.diff(p) > 0.0) and np.all(np.diff(d) > 0.0)):
            raise ValueError("tabulated grid must be strictly increasing in both coordinates")
        if p[0] != 0.0 or p[-1] != 1.0:
            raise ValueError("tabulated grid must cover probability levels from 0 to 1")
        if not np.all(d > 0.0):
            raise ValueError("tabulated durations must be strictly positive")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "durations", d)

    def quantile(self, u):
        return np.interp(u, self.probabilities, self.durations)

    def mean(self) -> float:
        dp = np.diff(self.probabilities)
        mid = 0.5 * (self.durations[:-1] + self.durations[1:])
        return float(np.sum(dp * mid))

    def mgf(self, s: float) -> float:
        # E[exp(-s S)] = integral over u in [0,1] of exp(-s Q(u)) du,
        # evaluated by adaptive quadrature on the quantile representation.
        val, _ = quad(
            lambda u: math.exp(-s * float(self.quantile(u))),
            0.0,
            1.0,
            points=list(self.probabilities[1:-1]),
            limit=200,
            epsabs=1e-14,
            epsrel=1e-10,
        )
        return float(val)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.durations, self.probabilities, left=0.0, right=1.0)

    def sample(self, rng, size):
        return self.quantile(rng.random(size))


def _validate_probability_vector(q: np.ndarray, what: str) -> None:
    if np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError(f"{what} entries must lie in [0, 1]")
    if abs(float(q.sum()) - 1.0) > _PROB_TOL:
        raise ValueError(f"{what} must sum to 1 within {_PROB_TOL}")


@dataclass(frozen=True, eq=False)
class IidJumps:
    """Jump destinations drawn i.i.d. from a fixed probability vector."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 1 or q.size < 1:
            raise ValueError("q must be a nonempty 1-d probability vector")
        _validate_probability_vector(q, "q")
        object.__setattr__(self, "q", q)

    @property
    def n_modes(self) -> int:
        return int(self.q.size)

    def sample_sequence(self, rng, start: int, count: int) -> np.ndarray:
        cum = np.cumsum(self.q)
        cum[-1] = 1.0
        return np.searchsorted(cum, rng.random(count), side="right").astype(np.int64)


@dataclass(frozen=True, eq=False)
class MarkovJumps:
    """Jump destinations forming a discrete-time Markov chain with matrix P."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise ValueError("P must be a square matrix")
        for i, row in enumerate(P):
            _validate_probability_vector(row, f"P row {i}")
        object.__setattr__(self, "P", P)

    @property
    def n_modes(self) -> int:
        return int(self.P.shape[0])

    def sample_sequence(self, rng, start: int, count: int) -> np.ndarray:
        cum = np.cumsum(self.P, axis=1)
        cum[:, -1] = 1.0
        u = rng.random(count)
        out = np.empty(count, dtype=np.int64)
        mode = int(start)
        for j in range(count):
            mode = int(np.searchsorted(cum[mode], u[j], side="right"))
            out[j] = mode
        return out


@dataclass(frozen=True, eq=False)
class SwitchingLaw:
    """A switching-signal law: holding-time law, jump law, initial mode.

    ``cls`` tags the signal class and is validated against the component
    kinds: EH forces exponential + i.i.d., UH forces uniform + i.i.d., GH
    pairs any holding law with a Markov jump chain.  Holding times and
    jump destinations are always sampled independently of each other.
    """

    holding: HoldingDistribution
    jumps: IidJumps | MarkovJumps
    sigma0: int
    cls: str

    def __post_init__(self):
        if self.cls not in ("EH", "UH", "GH"):
            raise ValueError("cls must be one of 'EH', 'UH', 'GH'")
        if self.cls == "EH" and not (
            isinstance(self.holding, ExponentialHolding) and isinstance(self.jumps, IidJumps)
        ):
            raise ValueError("class EH requires exponential holding and iid jumps")
        if self.cls == "UH" and not (
            isinstance(self.holding, UniformHolding) and isinstance(self.jumps, IidJumps)
        ):
            raise ValueError("class UH requires uniform holding and iid jumps")
        if self.cls == "GH" and not isinstance(self.jumps, MarkovJumps):
            raise ValueError("class GH requires a Markov jump chain")
        if not (0 <= int(self.sigma0) < self.jumps.n_modes):
            raise ValueError("sigma0 out of range")
        object.__setattr__(self, "sigma0", int(self.sigma0))

    @property
    def n_modes(self) -> int:
        return self.jumps.n_modes

    @classmethod
    def eh(cls, rate: float, q, sigma0: int = 0) -> "SwitchingLaw":
        return cls(ExponentialHolding(rate), IidJumps(np.asarray(q, float)), sigma0, "EH")

    @classmethod
    def uh(cls, T: float, q, sigma0: int = 0) -> "SwitchingLaw":
        return cls(UniformHolding(T), IidJumps(np.asarray(q, float)), sigma0, "UH")

    @classmethod
    def gh(cls, holding: HoldingDistribution, P, sigma0: int = 0) -> "SwitchingLaw":
        return cls(holding, MarkovJumps(np.asarray(P, float)), sigma0, "GH")


@dataclass(frozen=True, eq=False)
class SwitchingPath:
    """One realized switching signal on ``[0, horizon]``.

    ``times[0] == 0`` and ``modes[i]`` is the active mode on
    ``[times[i], times[i+1])`` (on ``[times[-1], horizon]`` for the last
    entry): the path is right-continuous piecewise constant.
    """

    times: np.ndarray
    modes: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        modes = np.asarray(self.modes, dtype=np.int64)
        if times.ndim != 1 or times.shape != modes.shape or times.size < 1:
            raise ValueError("times and modes must be matching nonempty 1-d arrays")
        if times[0] != 0.0:
            raise ValueError("paths must start at time 0")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("switching times must be strictly increasing")
        if self.horizon < times[-1]:
            raise ValueError("horizon must not precede the last switching time")
        if np.any(modes < 0):
            raise ValueError("modes must be nonnegative indices")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def jump_count(self) -> int:
        return int(self.times.size - 1)

    def mode_at(self, t: float) -> int:
        """Active mode at time ``t`` (right-continuous at switches)."""
        if t < 0.0 or t > self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.modes[i])

    def to_csv(self, fileobj) -> None:
        """Write the path as CSV rows ``index,time,mode``."""
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(["index", "time", "mode"])
        for i, (t, m) in enumerate(zip(self.times, self.modes)):
            writer.writerow([i, repr(float(t)), int(m)])


def sample_path(law: SwitchingLaw, horizon: float, seed) -> SwitchingPath:
    """Sample one switching path on ``[0, horizon]``.

    Holding times are drawn i.i.d. from ``law.holding``; destinations from
    ``law.jumps``.  Jump generation stops at the first jump instant that
    would exceed the horizon (that overshooting jump is discarded, and the
    final mode is held through the horizon).  The result is a deterministic
    function of ``seed``: holding times are drawn first in deterministic
    chunks, destinations afterwards.

    Parameters
    ----------
    law : SwitchingLaw
    horizon : float
        Nonnegative end time.
    seed : int, sequence of int, numpy.random.SeedSequence or Generator
        Source of randomness; anything accepted by ``default_rng``.
    """
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    rng = _as_generator(seed)

    chunk = max(16, int(1.5 * horizon / law.holding.mean()) + 16)
    draws = law.holding.sample(rng, chunk)
    cum = np.cumsum(draws)
    while cum[-1] <= horizon:
        draws = np.concatenate([draws, law.holding.sample(rng, chunk)])
        cum = np.cumsum(draws)
    count = int(np.searchsorted(cum, horizon, side="right"))

    times = np.concatenate([[0.0], cum[:count]])
    # guard against a floating-point tie from a microscopic holding time
    for i in range(1, times.size):
        if times[i] <= times[i - 1]:
            times[i] = np.nextafter(times[i - 1], np.inf)

    modes = np.empty(count + 1, dtype=np.int64)
    modes[0] = law.sigma0
    if count:
        modes[1:] = law.jumps.sample_sequence(rng, law.sigma0, count)
    return SwitchingPath(times=times, modes=modes, horizon=horizon)
