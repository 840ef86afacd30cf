import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.stats import kstest

import ranswitch as rs
from ranswitch.switching import _expm1_ratio


# ---------------------------------------------------------------- transforms

def quad_mgf_exponential(rate, s):
    val, _ = quad(lambda t: math.exp(-s * t) * rate * math.exp(-rate * t), 0, np.inf,
                  limit=200)
    return val


def quad_mgf_uniform(T, s):
    val, _ = quad(lambda t: math.exp(-s * t) / T, 0, T, limit=200)
    return val


def test_mgf_exponential_closed_form():
    d = rs.ExponentialHolding(2.0)
    assert_allclose(d.mgf(1.0), 2.0 / 3.0, rtol=0, atol=1e-15)
    assert_allclose(d.mgf(1.0), quad_mgf_exponential(2.0, 1.0), atol=1e-10)


def test_mgf_exponential_divergence():
    d = rs.ExponentialHolding(2.0)
    assert d.mgf(-2.0) == math.inf
    assert d.mgf(-2.5) == math.inf
    assert math.isfinite(d.mgf(-1.999))


def test_mgf_uniform_values():
    d = rs.UniformHolding(2.0)
    assert d.mgf(0.0) == 1.0
    assert_allclose(d.mgf(1.0), (1.0 - math.exp(-2.0)) / 2.0, rtol=1e-14)
    assert_allclose(d.mgf(1.0), 0.4323323584, atol=1e-9)
    assert_allclose(d.mgf(1.0), quad_mgf_uniform(2.0, 1.0), atol=1e-10)


def test_mgf_uniform_series_matches_direct_formula():
    d = rs.UniformHolding(1.0)
    # straddle the series cutoff at |sT| = 1e-6; expm1 keeps the oracle
    # itself free of cancellation at tiny s
    for s in (1e-9, 5e-7, 2e-6, 1e-5):
        assert_allclose(d.mgf(s), -math.expm1(-s) / s, rtol=1e-12)
        assert_allclose(d.mgf(-s), -math.expm1(s) / (-s), rtol=1e-12)


def test_mgf_point_mass():
    d = rs.PointMassHolding(1.0)
    for s in (-1.0, 0.0, 0.5, 3.0):
        assert_allclose(d.mgf(s), math.exp(-s), rtol=1e-15)


def test_mgf_tabulated_matches_analytic_shifted_uniform():
    # quantile Q(u) = 1 + u is the uniform law on [1, 2]
    d = rs.TabulatedHolding([0.0, 1.0], [1.0, 2.0])
    for s in (-1.5, -0.3, 0.0, 0.7, 2.0, 5.0):
        if s == 0.0:
            exact = 1.0
        else:
            exact = math.exp(-s) * (1.0 - math.exp(-s)) / s
        assert_allclose(d.mgf(s), exact, rtol=1e-9)


@pytest.mark.parametrize(
    "dist",
    [
        rs.ExponentialHolding(2.0),
        rs.UniformHolding(2.0),
        rs.PointMassHolding(1.0),
        rs.TabulatedHolding([0.0, 0.25, 1.0], [0.5, 0.9, 2.0]),
    ],
    ids=["exp", "unif", "point", "tab"],
)
def test_mgf_at_zero_is_one(dist):
    assert abs(dist.mgf(0.0) - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "dist",
    [
        rs.ExponentialHolding(2.0),
        rs.UniformHolding(2.0),
        rs.PointMassHolding(1.0),
        rs.TabulatedHolding([0.0, 0.25, 1.0], [0.5, 0.9, 2.0]),
    ],
    ids=["exp", "unif", "point", "tab"],
)
def test_mgf_monotone_decreasing(dist):
    grid = np.linspace(-1.5, 6.0, 25)
    vals = [dist.mgf(float(s)) for s in grid]
    finite = [v for v in vals if math.isfinite(v)]
    assert all(a >= b - 1e-12 for a, b in zip(finite, finite[1:]))


def test_means():
    assert rs.ExponentialHolding(4.0).mean() == 0.25
    assert rs.UniformHolding(3.0).mean() == 1.5
    assert rs.PointMassHolding(0.7).mean() == 0.7
    # piecewise-linear quantile: exact trapezoid value
    tab = rs.TabulatedHolding([0.0, 0.5, 1.0], [1.0, 2.0, 4.0])
    assert_allclose(tab.mean(), 0.5 * 1.5 + 0.5 * 3.0, rtol=1e-15)


def test_expm1_ratio_limit():
    assert _expm1_ratio(0.0) == 1.0
    assert_allclose(_expm1_ratio(1e-8), 1.0 - 0.5e-8, rtol=1e-12)


# --------------------------------------------------------- distribution laws

def test_holding_samples_pass_ks():
    rng = np.random.default_rng(1234)
    n = 100_000
    for dist in (
        rs.ExponentialHolding(2.0),
        rs.UniformHolding(2.0),
        rs.TabulatedHolding([0.0, 1.0], [1.0, 2.0]),
    ):
        s = dist.sample(rng, n)
        assert np.all(s > 0.0)
        res = kstest(s, lambda x: dist.cdf(x))
        assert res.pvalue > 0.001, (dist, res)


def test_uniform_support_half_open():
    rng = np.random.default_rng(7)
    s = rs.UniformHolding(2.0).sample(rng, 50_000)
    assert np.all(s > 0.0) and np.all(s <= 2.0)


def test_tabulated_validation():
    with pytest.raises(ValueError):
        rs.TabulatedHolding([0.0, 0.5], [1.0, 0.5])  # durations not increasing
    with pytest.raises(ValueError):
        rs.TabulatedHolding([0.1, 1.0], [1.0, 2.0])  # does not start at 0
    with pytest.raises(ValueError):
        rs.TabulatedHolding([0.0, 0.9], [1.0, 2.0])  # does not reach 1
    with pytest.raises(ValueError):
        rs.TabulatedHolding([0.0, 1.0], [-1.0, 2.0])  # nonpositive duration


def test_jump_law_validation():
    with pytest.raises(ValueError):
        rs.IidJumps([0.5, 0.6])
    with pytest.raises(ValueError):
        rs.IidJumps([1.2, -0.2])
    with pytest.raises(ValueError):
        rs.MarkovJumps([[0.5, 0.4], [0.5, 0.5]])
    rs.IidJumps([0.8, 0.2])
    rs.MarkovJumps([[0.3, 0.7], [0.6, 0.4]])


def test_switching_law_class_tags():
    with pytest.raises(ValueError):
        rs.SwitchingLaw(rs.UniformHolding(1.0), rs.IidJumps([1.0]), 0, "EH")
    with pytest.raises(ValueError):
        rs.SwitchingLaw(rs.ExponentialHolding(1.0), rs.IidJumps([1.0]), 0, "GH")
    with pytest.raises(ValueError):
        rs.SwitchingLaw.eh(1.0, [0.5, 0.5], sigma0=2)
    law = rs.SwitchingLaw.gh(rs.PointMassHolding(1.0), [[0.5, 0.5], [0.1, 0.9]], 1)
    assert law.n_modes == 2 and law.sigma0 == 1


# ------------------------------------------------------------- path sampling

def test_sample_path_zero_horizon():
    law = rs.SwitchingLaw.eh(1.0, [0.3, 0.7], sigma0=1)
    p = rs.sample_path(law, 0.0, seed=3)
    assert p.times.tolist() == [0.0]
    assert p.modes.tolist() == [1]


def test_sample_path_reproducible_bit_exact():
    law = rs.SwitchingLaw.uh(2.0, [0.4, 0.6], sigma0=0)
    a = rs.sample_path(law, 50.0, seed=99)
    b = rs.sample_path(law, 50.0, seed=99)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.modes, b.modes)
    c = rs.sample_path(law, 50.0, seed=100)
    assert not np.array_equal(a.times, c.times)


def test_sample_path_respects_horizon_and_support():
    law = rs.SwitchingLaw.uh(2.0, [0.5, 0.5], sigma0=0)
    p = rs.sample_path(law, 10.0, seed=5)
    holds = np.diff(p.times)
    assert np.all(holds > 0.0) and np.all(holds <= 2.0)
    assert p.times[-1] <= 10.0
    assert p.times[0] == 0.0
    assert np.all(np.diff(p.times) > 0)


def test_sample_path_mean_jump_count_matches_poisson():
    # rate * horizon = 10 expected jumps; the band is far beyond 3 sigma
    law = rs.SwitchingLaw.eh(1.0, [1.0], sigma0=0)
    rng = np.random.default_rng(2024)
    counts = np.fromiter(
        (rs.sample_path(law, 10.0, rng).jump_count for _ in range(100_000)),
        dtype=np.int64,
    )
    assert 9.8 <= counts.mean() <= 10.2


def test_iid_mode_frequencies_converge():
    q = np.array([0.15, 0.25, 0.6])
    law = rs.SwitchingLaw.eh(1.0, q, sigma0=0)
    p = rs.sample_path(law, 100_000.0, seed=11)
    dest = p.modes[1:]
    n = dest.size
    assert n > 90_000
    for i, qi in enumerate(q):
        freq = np.mean(dest == i)
        band = 3.0 * math.sqrt(qi * (1 - qi) / n)
        assert abs(freq - qi) <= band, (i, freq, qi, band)


def test_markov_transition_frequencies_converge():
    P = np.array([[0.3, 0.7], [0.6, 0.4]])
    law = rs.SwitchingLaw.gh(rs.ExponentialHolding(1.0), P, sigma0=0)
    p = rs.sample_path(law, 100_000.0, seed=12)
    seq = p.modes
    for i in range(2):
        src = seq[:-1] == i
        n = int(src.sum())
        for j in range(2):
            freq = np.mean(seq[1:][src] == j)
            band = 3.0 * math.sqrt(P[i, j] * (1 - P[i, j]) / n)
            assert abs(freq - P[i, j]) <= band


def test_mode_at_right_continuity():
    p = rs.SwitchingPath(times=[0.0, 1.0], modes=[4, 7], horizon=2.0)
    assert p.mode_at(1.0) == 7
    assert p.mode_at(0.999) == 4
    assert p.mode_at(2.0) == 7
    single = rs.SwitchingPath(times=[0.0], modes=[3], horizon=10.0)
    assert single.mode_at(5.0) == 3
    with pytest.raises(ValueError):
        p.mode_at(-0.1)
    with pytest.raises(ValueError):
        p.mode_at(2.5)


def test_path_validation():
    with pytest.raises(ValueError):
        rs.SwitchingPath(times=[0.5, 1.0], modes=[0, 1], horizon=2.0)
    with pytest.raises(ValueError):
        rs.SwitchingPath(times=[0.0, 1.0, 1.0], modes=[0, 1, 0], horizon=2.0)
    with pytest.raises(ValueError):
        rs.SwitchingPath(times=[0.0, 3.0], modes=[0, 1], horizon=2.0)


def test_path_csv_export():
    p = rs.SwitchingPath(times=[0.0, 0.5], modes=[1, 0], horizon=1.0)
    buf = io.StringIO()
    p.to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "index,time,mode"
    assert lines[1] == "0,0.0,1"
    assert lines[2] == "1,0.5,0"
