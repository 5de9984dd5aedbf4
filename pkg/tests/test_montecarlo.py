import math

import numpy as np
import pytest
from scipy.stats import norm

from malaga_sum.channel import DEFAULT_CHANNEL, exact_cdf, exact_mgf, exact_moment
from malaga_sum.montecarlo import (
    SampleConfig,
    draw_branch,
    empirical_mgf,
    empirical_stats,
    ks_distance,
    sample_branch,
    simulate_mrc_ser,
    tabulated_cdf,
    wilson_interval,
)


@pytest.fixture(scope="module")
def samples():
    return draw_branch(SampleConfig(400_000, seed=5, batch_size=100_000), DEFAULT_CHANNEL.with_mu1(2.0))


def test_config_validation():
    with pytest.raises(ValueError):
        SampleConfig(n_samples=0)
    with pytest.raises(ValueError):
        SampleConfig(seed=-1)
    with pytest.raises(ValueError):
        SampleConfig(seed=2 ** 64)
    cfg = SampleConfig(n_samples=25, batch_size=10)
    assert cfg.n_batches == 3 and cfg.batch_len(2) == 5


def test_sampling_is_reproducible():
    cfg = SampleConfig(1000, seed=42, batch_size=300)
    a = draw_branch(cfg, DEFAULT_CHANNEL)
    b = np.concatenate(list(sample_branch(cfg, DEFAULT_CHANNEL)))
    assert a.size == 1000 and np.array_equal(a, b)
    c = draw_branch(cfg, DEFAULT_CHANNEL, branch=1)
    assert not np.array_equal(a, c)


def test_sample_mean(samples):
    se = samples.std() / math.sqrt(samples.size)
    assert abs(samples.mean() - 2.0) < 4 * se


def test_ks_against_exact_cdf(samples):
    p = DEFAULT_CHANNEL.with_mu1(2.0)
    cdf = tabulated_cdf(lambda x: exact_cdf(x, p), 2e-4, 2.0 * 80, 300)
    # 1.63 / sqrt(n) is the 1% critical value of the KS statistic
    assert ks_distance(samples, cdf) < 1.63 / math.sqrt(samples.size)


@pytest.mark.parametrize("i", [2, 3])
def test_sample_moments(samples, i):
    p = DEFAULT_CHANNEL.with_mu1(2.0)
    xi = samples ** i
    se = xi.std() / math.sqrt(xi.size)
    assert abs(xi.mean() - exact_moment(i, p)) < max(0.02 * exact_moment(i, p), 4 * se)


def test_empirical_mgf(samples):
    p = DEFAULT_CHANNEL.with_mu1(2.0)
    vals, errs = empirical_mgf(samples, [0.1, 1.0, 5.0])
    for s, v, e in zip([0.1, 1.0, 5.0], vals, errs):
        assert abs(v - exact_mgf(s, p)) < 4 * e
    with pytest.raises(ValueError):
        empirical_mgf(samples, [-1.0])


def test_empirical_stats(samples):
    st = empirical_stats(samples[:10_000], bins=50)
    assert st.densities.size == 50 and st.sample_moments[0] == 1.0
    assert st.ecdf(np.inf) == 1.0 and st.ks_stat is None


def test_tabulated_cdf_is_monotone():
    tab = tabulated_cdf(lambda x: 1 - np.exp(-x), 1e-3, 30.0, 100)
    x = np.concatenate([[0.0, 1e-4], np.geomspace(1e-3, 30, 50), [40.0]])
    y = tab(x)
    assert np.all(np.diff(y) >= 0) and y[0] == 0.0
    assert tab(np.array([1.0]))[0] == pytest.approx(1 - math.exp(-1), abs=1e-4)


def test_ks_distance_exact():
    assert ks_distance(np.array([0.5]), lambda x: x) == pytest.approx(0.5)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.19, abs=0.01)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert wilson_interval(0, 1000)[0] == pytest.approx(0.0, abs=1e-12)


def test_fixed_snr_ser_is_exact(bpsk):
    cfg = SampleConfig(50_000, seed=3, batch_size=10_000)
    r = simulate_mrc_ser(cfg, [1.5, 2.5], bpsk)
    assert r.value == pytest.approx(norm.sf(math.sqrt(8.0)), rel=1e-12)
    # no fading: the per-trial SER is constant, so only rounding is left
    assert r.stderr < 1e-9 * r.value
    # about 117 errors are expected in 5e4 trials
    assert 60 < r.error_events < 180


def test_ser_extends_until_enough_events(bpsk):
    p = DEFAULT_CHANNEL.with_mu1(10.0)
    cfg = SampleConfig(20_000, seed=1, batch_size=20_000)
    short = simulate_mrc_ser(cfg, [p, p], bpsk)
    long = simulate_mrc_ser(cfg, [p, p], bpsk, max_samples=400_000)
    assert short.n_samples == 20_000 and short.low_confidence
    assert long.error_events >= 100 and not long.low_confidence
    assert long.n_samples % 20_000 == 0
    assert long.ci_counted[0] < long.value < long.ci_counted[1]


def test_ser_counted_rate_agrees_with_mean(bpsk):
    p = DEFAULT_CHANNEL
    r = simulate_mrc_ser(SampleConfig(200_000, seed=9, batch_size=50_000), [p], bpsk)
    assert abs(r.counted_rate - r.value) < 4 * math.sqrt(r.value / r.n_samples)
    d = r.to_dict()
    assert d["seed"] == 9 and isinstance(d["ci"], list)


def test_ser_worker_count_does_not_matter(bpsk):
    p = DEFAULT_CHANNEL.with_mu1(3.0)
    cfg1 = SampleConfig(40_000, seed=11, batch_size=10_000, workers=1)
    cfg2 = SampleConfig(40_000, seed=11, batch_size=10_000, workers=3)
    assert simulate_mrc_ser(cfg1, [p, p], bpsk) == simulate_mrc_ser(cfg2, [p, p], bpsk)


def test_simulator_needs_branches(bpsk):
    with pytest.raises(ValueError):
        simulate_mrc_ser(SampleConfig(10), [], bpsk)


def test_mgf_at_zero_is_one(samples):
    v, _ = empirical_mgf(samples, [0.0])
    assert v[0] == 1.0


def test_fitted_mgf_matches_samples(samples):
    from malaga_sum.fit import fit_channel
    from malaga_sum.mgf import single_mgf_closed
    p = DEFAULT_CHANNEL.with_mu1(2.0)
    f, _ = fit_channel(p)
    s = np.array([1.0, 5.0, 25.0]) / f.a2
    v, se = empirical_mgf(samples, s)
    ref = np.array([single_mgf_closed(si, f).value for si in s])
    assert v == pytest.approx(ref, rel=0.01)
    assert abs(v[0] - ref[0]) <= 3 * se[0]


def test_two_branch_ser_near_series():
    from malaga_sum.aser import aser_iid, modulation_table
    from malaga_sum.fit import fit_channel
    mod = modulation_table("bpsk")
    p = DEFAULT_CHANNEL.with_mu1(10.0)
    est = simulate_mrc_ser(SampleConfig(400_000, seed=3, batch_size=200_000), [p, p], mod)
    ref = aser_iid(mod, fit_channel(p)[0], 2).value
    assert est.value == pytest.approx(ref, rel=0.10)


def test_higher_mean_snr_lowers_ser():
    from malaga_sum.aser import modulation_table
    mod = modulation_table("bpsk")
    cfg = SampleConfig(200_000, seed=4, batch_size=200_000)
    lo = simulate_mrc_ser(cfg, [DEFAULT_CHANNEL.with_mu1(2.0)] * 2, mod)
    hi = simulate_mrc_ser(cfg, [DEFAULT_CHANNEL.with_mu1(4.0)] * 2, mod)
    assert hi.value < lo.value


def test_ks_null_rejection_rate():
    # uniform samples against the uniform CDF: distance above the 5% critical
    # value should happen in about 5% of repetitions
    rng = np.random.default_rng(11)
    n, reps = 1000, 400
    crit = 1.358 / math.sqrt(n)
    hits = sum(ks_distance(rng.random(n), lambda x: np.clip(x, 0, 1)) > crit for _ in range(reps))
    assert 0.02 <= hits / reps <= 0.09


def test_histogram_integrates_to_one(samples):
    st = empirical_stats(samples[:100_000])
    assert np.sum(st.densities * np.diff(st.bin_edges)) == pytest.approx(1.0, rel=1e-12)
