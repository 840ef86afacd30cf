"""Trajectory ensembles and the empirical statistics behind the stability notions.

The ensemble runner integrates all trajectories in lockstep with the same
RK4 discretization as :func:`ranswitch.dynamics.integrate` (full steps plus
a shortened substep landing exactly on each switching instant), vectorized
across trajectories, while recording:

* per-trajectory sup/terminal/tail norms (almost-sure and in-probability
  statistics),
* the empirical mean of ``alpha1(||x(t)||)`` and of ``V_sigma(t)(x(t))`` on
  a fixed time grid (in-the-mean statistics),
* the empirical mean of ``V_sigma(tau_j)(x(tau_j))`` per jump index
  (the geometric per-switch decay).

Everything is a deterministic function of the master seed: trajectory k
draws from a stream derived from ``(master_seed, k)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import conditions
from .certificates import CertificateFamily
from .dynamics import DEFAULT_STEP, DIVERGENCE_THRESHOLD, SubsystemFamily, mode_fields
from .switching import SwitchingLaw, sample_path

__all__ = [
    "Scenario",
    "EnsembleStats",
    "run_ensemble",
    "decay_check",
    "DecayReport",
    "DecayRow",
    "gasp_estimate",
    "GaspEstimate",
    "wilson_interval",
]

_Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete simulation setup: family, law, initial state, run shape."""

    family: SubsystemFamily
    law: SwitchingLaw
    x0: np.ndarray
    horizon: float
    step: float = DEFAULT_STEP
    cert: Optional[CertificateFamily] = None
    controller: Optional[object] = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if x0.size != self.family.n:
            raise ValueError("x0 dimension mismatch")
        if self.law.n_modes != self.family.n_modes:
            raise ValueError("switching law and family disagree on the mode count")
        if self.cert is not None and self.cert.n_modes != self.family.n_modes:
            raise ValueError("certificate and family disagree on the mode count")
        if not (self.horizon >= 0.0 and self.step > 0.0):
            raise ValueError("need horizon >= 0 and step > 0")
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Statistics of one seeded ensemble.

    Per-trajectory arrays are indexed by trajectory; divergent
    realizations carry ``inf`` sup/terminal/tail sentinels and stop
    contributing to the mean curves and switch statistics from their
    divergence time on.  ``switch_v_mean[j]`` averages
    ``V_sigma(tau_j)(x(tau_j))`` over the ``switch_counts[j]`` trajectories
    that reach jump j within the horizon.
    """

    trials: int
    master_seed: int
    tail_start: float
    seeds: np.ndarray
    jumps: np.ndarray
    sup_norm: np.ndarray
    terminal_norm: np.ndarray
    tail_sup: np.ndarray
    divergent: np.ndarray
    grid_times: np.ndarray
    mean_alpha1: np.ndarray
    mean_v: np.ndarray
    grid_counts: np.ndarray
    switch_counts: np.ndarray
    switch_v_mean: np.ndarray
    switch_v_sqmean: np.ndarray

    @property
    def divergent_count(self) -> int:
        return int(self.divergent.sum())

    def summary_dict(self, eps: Optional[float] = None) -> dict:
        finite_sup = self.sup_norm[np.isfinite(self.sup_norm)]
        out = {
            "trials": int(self.trials),
            "master_seed": int(self.master_seed),
            "tail_start": float(self.tail_start),
            "divergent_count": self.divergent_count,
            "jumps": {
                "min": int(self.jumps.min()),
                "mean": float(self.jumps.mean()),
                "max": int(self.jumps.max()),
            },
            "sup_norm": {
                "median": float(np.median(self.sup_norm)),
                "max_finite": float(finite_sup.max()) if finite_sup.size else None,
            },
            "terminal_norm": {
                "min": float(self.terminal_norm.min()),
                "median": float(np.median(self.terminal_norm)),
                "max": float(self.terminal_norm.max()),
            },
            "mean_v_sup": float(np.nanmax(self.mean_v)),
            "mean_alpha1_sup": float(np.nanmax(self.mean_alpha1)),
        }
        if eps is not None:
            below = np.isfinite(self.terminal_norm) & (self.terminal_norm < eps)
            out["fraction_terminal_below_eps"] = float(below.sum() / self.trials)
            out["eps"] = float(eps)
        return out

    def to_csv(self, fileobj) -> None:
        """Per-trajectory table: index,seed,sup_norm,terminal_norm,tail_sup,jumps,divergent."""
        writer = csv.writer(fileobj, lineterminator="\n")
        writer.writerow(
            ["index", "seed", "sup_norm", "terminal_norm", "tail_sup", "jumps", "divergent"]
        )
        for k in range(self.trials):
            writer.writerow(
                [
                    k,
                    int(self.seeds[k]),
                    repr(float(self.sup_norm[k])),
                    repr(float(self.terminal_norm[k])),
                    repr(float(self.tail_sup[k])),
                    int(self.jumps[k]),
                    int(self.divergent[k]),
                ]
            )


def _trajectory_seed_sequences(master_seed: int, trials: int):
    return [
        np.random.SeedSequence(entropy=int(master_seed), spawn_key=(k,))
        for k in range(trials)
    ]


def run_ensemble(
    scn: Scenario,
    trials: int,
    master_seed: int,
    tail_start: float = 0.0,
    stats_points: int = 400,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
) -> EnsembleStats:
    """Integrate a seeded ensemble and collect its statistics.

    Trajectory ``k`` uses the stream derived from ``(master_seed, k)``;
    the result is bit-reproducible for identical inputs.  ``alpha1`` and
    the per-mode V come from the scenario certificate when present,
    falling back to the squared norm otherwise.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= tail_start <= scn.horizon:
        raise ValueError("tail_start must lie in [0, horizon]")
    K = int(trials)
    n = scn.family.n
    horizon = float(scn.horizon)
    step = float(scn.step)

    children = _trajectory_seed_sequences(master_seed, K)
    seeds = np.array([c.generate_state(1, np.uint64)[0] for c in children], dtype=np.uint64)
    paths = [sample_path(scn.law, horizon, np.random.default_rng(c)) for c in children]

    jumps = np.array([p.jump_count for p in paths], dtype=np.int64)
    max_j = int(jumps.max())
    # seg_ends[k, s]: end of segment s (switch s+1, or the horizon)
    seg_ends = np.full((K, max_j + 1), horizon)
    modes_pad = np.zeros((K, max_j + 1), dtype=np.int64)
    for k, p in enumerate(paths):
        J = p.jump_count
        seg_ends[k, :J] = p.times[1:]
        modes_pad[k, : J + 1] = p.modes
        modes_pad[k, J + 1 :] = p.modes[-1]

    grid = np.union1d(np.linspace(0.0, horizon, stats_points + 1), [float(tail_start)])
    M = grid.size

    if scn.cert is not None:
        alpha1 = lambda r: scn.cert.alpha1(r)
        v_specs = scn.cert.V
        v_eval = lambda m, X: v_specs[m].value(X)
    else:
        alpha1 = np.square
        v_eval = lambda m, X: np.sum(X * X, axis=-1)

    fields = mode_fields(scn.family, scn.controller)

    def rhs(X, mode_arr):
        out = np.empty_like(X)
        for m in range(scn.family.n_modes):
            sel = mode_arr == m
            if sel.any():
                out[sel] = fields[m](X[sel])
        return out

    def v_by_mode(mode_arr, X):
        out = np.empty(X.shape[0])
        for m in range(scn.family.n_modes):
            sel = mode_arr == m
            if sel.any():
                out[sel] = v_eval(m, X[sel])
        return out

    X = np.tile(scn.x0, (K, 1))
    t = np.zeros(K)
    seg = np.zeros(K, dtype=np.int64)
    gi = np.ones(K, dtype=np.int64)  # grid[0] = 0 is recorded below
    mode = modes_pad[:, 0].copy()
    nrm0 = float(np.linalg.norm(scn.x0))

    sup = np.full(K, nrm0)
    tail = np.full(K, nrm0 if tail_start <= 0.0 else 0.0)
    terminal = np.full(K, nrm0 if horizon == 0.0 else np.nan)
    divergent = np.zeros(K, dtype=bool)
    active = np.full(K, horizon > 0.0)

    acc_a1 = np.zeros(M)
    acc_v = np.zeros(M)
    cnt = np.zeros(M, dtype=np.int64)
    acc_a1[0] = K * float(alpha1(nrm0))
    acc_v[0] = float(np.sum(v_by_mode(mode, X)))
    cnt[0] = K

    v_cnt = np.zeros(max_j + 1, dtype=np.int64)
    v_sum = np.zeros(max_j + 1)
    v_sq = np.zeros(max_j + 1)
    v0 = v_by_mode(mode, X)
    v_cnt[0] = K
    v_sum[0] = float(v0.sum())
    v_sq[0] = float(np.sum(v0 * v0))

    rows = np.arange(K)
    while active.any():
        cur_end = seg_ends[rows, np.minimum(seg, max_j)]
        ge = grid[np.minimum(gi, M - 1)]
        d_seg = cur_end - t
        d_grd = ge - t
        h = np.minimum(step, np.minimum(d_seg, d_grd))
        h = np.where(active, h, 0.0)
        land_seg = active & (d_seg <= h)
        land_grd = active & (d_grd <= h)

        hc = h[:, None]
        k1 = rhs(X, mode)
        k2 = rhs(X + 0.5 * hc * k1, mode)
        k3 = rhs(X + 0.5 * hc * k2, mode)
        k4 = rhs(X + hc * k3, mode)
        X = X + (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        t = t + h
        t[land_grd] = ge[land_grd]
        t[land_seg] = cur_end[land_seg]

        with np.errstate(over="ignore", invalid="ignore"):
            nrm = np.linalg.norm(X, axis=1)
        dead = active & (~np.isfinite(nrm) | (nrm > divergence_threshold))
        if dead.any():
            X[dead] = 0.0
            nrm = np.where(dead, np.inf, nrm)
            sup[dead] = np.inf
            tail[dead] = np.inf
            terminal[dead] = np.inf
            divergent |= dead
            active &= ~dead

        alive = active
        sup = np.where(alive, np.maximum(sup, nrm), sup)
        in_tail = alive & (t >= tail_start)
        tail = np.where(in_tail, np.maximum(tail, nrm), tail)

        # switches first so grid records see the post-switch mode
        sw = land_seg & alive & (seg < jumps)
        if sw.any():
            seg[sw] += 1
            idx = rows[sw]
            mode[idx] = modes_pad[idx, seg[idx]]
            vv = v_by_mode(mode[idx], X[idx])
            np.add.at(v_cnt, seg[idx], 1)
            np.add.at(v_sum, seg[idx], vv)
            np.add.at(v_sq, seg[idx], vv * vv)

        lg = land_grd & alive
        if lg.any():
            idx = gi[lg]
            np.add.at(acc_a1, idx, alpha1(nrm[lg]))
            np.add.at(acc_v, idx, v_by_mode(mode[lg], X[lg]))
            np.add.at(cnt, idx, 1)
            gi[lg] += 1

        fin = land_seg & alive & (seg >= jumps) & (t >= horizon)
        if fin.any():
            terminal[fin] = nrm[fin]
            active &= ~fin

    with np.errstate(invalid="ignore", divide="ignore"):
        mean_a1 = np.where(cnt > 0, acc_a1 / np.maximum(cnt, 1), np.nan)
        mean_v = np.where(cnt > 0, acc_v / np.maximum(cnt, 1), np.nan)
        v_mean = np.where(v_cnt > 0, v_sum / np.maximum(v_cnt, 1), np.nan)
        v_sqmean = np.where(v_cnt > 0, v_sq / np.maximum(v_cnt, 1), np.nan)

    return EnsembleStats(
        trials=K,
        master_seed=int(master_seed),
        tail_start=float(tail_start),
        seeds=seeds,
        jumps=jumps,
        sup_norm=sup,
        terminal_norm=terminal,
        tail_sup=tail,
        divergent=divergent,
        grid_times=grid,
        mean_alpha1=mean_a1,
        mean_v=mean_v,
        grid_counts=cnt,
        switch_counts=v_cnt,
        switch_v_mean=v_mean,
        switch_v_sqmean=v_sqmean,
    )


@dataclass(frozen=True)
class DecayRow:
    j: int
    count: int
    mean: float
    stderr: float
    bound: float
    passed: bool


@dataclass(frozen=True, eq=False)
class DecayReport:
    """Empirical check of the geometric per-switch decay of E[V]."""

    law_class: str
    rate: float
    base: float
    min_count: int
    rows: tuple
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "law_class": self.law_class,
            "rate": self.rate,
            "base": self.base,
            "min_count": self.min_count,
            "passed": self.passed,
            "rows": [
                {
                    "j": r.j,
                    "count": r.count,
                    "mean": r.mean,
                    "stderr": r.stderr,
                    "bound": r.bound,
                    "passed": r.passed,
                }
                for r in self.rows
            ],
        }


def decay_check(
    stats: EnsembleStats,
    cert: CertificateFamily,
    law: SwitchingLaw,
    x0,
    min_count: int = 100,
) -> DecayReport:
    """Compare mean V at switch index j against its geometric bound.

    The bound is ``alpha2(||x0||) * eta(0)^j`` for i.i.d.-destination laws
    and ``V_sigma0(x0) * theta^j`` for Markov-destination laws.  Requires
    the matching condition to be satisfied (otherwise the lemma makes no
    claim and this raises).  A jump index passes when the empirical mean
    does not exceed the bound by more than three standard errors
    (``mean <= bound * (1 + 3 SE / mean)``).
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    x0_norm = float(np.linalg.norm(x0))
    if law.cls == "EH":
        rate = conditions.eta_kappa("EH", 0.0, cert.lambda_vector, cert.mu, law.jumps.q,
                                    law.holding.rate)
        base = float(cert.alpha2(x0_norm))
    elif law.cls == "UH":
        rate = conditions.eta_kappa("UH", 0.0, cert.lambda_vector, cert.mu, law.jumps.q,
                                    law.holding.T)
        base = float(cert.alpha2(x0_norm))
    else:
        verdict = conditions.check_gh(cert.lambda_matrix, cert.mu, law.jumps.P, law.holding)
        if not verdict.satisfied:
            raise ValueError("condition unsatisfied: the decay bound makes no claim")
        rate = 1.0 - verdict.margin
        base = float(cert.V[law.sigma0].value(x0))
    if not rate < 1.0:
        raise ValueError(f"condition unsatisfied: eta(0) = {rate} >= 1")

    rows = []
    for j in range(stats.switch_counts.size):
        count = int(stats.switch_counts[j])
        if count < min_count:
            continue
        mean = float(stats.switch_v_mean[j])
        var = max(0.0, (stats.switch_v_sqmean[j] - mean * mean) * count / max(count - 1, 1))
        se = math.sqrt(var / count)
        bound = base * rate**j
        passed = mean <= bound * (1.0 + 3.0 * se / mean) if mean > 0.0 else True
        rows.append(DecayRow(j, count, mean, se, bound, passed))
    return DecayReport(
        law_class=law.cls,
        rate=float(rate),
        base=base,
        min_count=min_count,
        rows=tuple(rows),
        passed=all(r.passed for r in rows),
    )


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (well-behaved at 0 and 1)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class GaspEstimate:
    """Empirical tail-exceedance probability with its Wilson 95% interval."""

    eps: float
    t_star: float
    estimate: float
    lower: float
    upper: float
    exceed_count: int
    trials: int

    def to_json_dict(self) -> dict:
        return {
            "eps": self.eps,
            "t_star": self.t_star,
            "estimate": self.estimate,
            "wilson_lower": self.lower,
            "wilson_upper": self.upper,
            "exceed_count": self.exceed_count,
            "trials": self.trials,
        }


def gasp_estimate(stats: EnsembleStats, eps: float, t_star: float) -> GaspEstimate:
    """Fraction of trajectories whose tail sup-norm exceeds ``eps``.

    ``t_star`` must match the tail window the ensemble was run with.
    Divergent trajectories count as exceedances (their tail sup is inf).
    """
    if float(t_star) != stats.tail_start:
        raise ValueError("t_star must equal the ensemble's tail_start")
    exceed = int(np.sum(stats.tail_sup > eps))
    lo, hi = wilson_interval(exceed, stats.trials)
    return GaspEstimate(
        eps=float(eps),
        t_star=float(t_star),
        estimate=exceed / stats.trials,
        lower=lo,
        upper=hi,
        exceed_count=exceed,
        trials=stats.trials,
    )
