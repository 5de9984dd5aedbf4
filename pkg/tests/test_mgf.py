import math

import mpmath as mp
import numpy as np
import pytest

from malaga_sum.channel import DEFAULT_CHANNEL
from malaga_sum.errors import ConvergenceError
from malaga_sum.fit import FittedApprox, fit_channel
from malaga_sum.mgf import (
    BranchSet,
    SeriesControl,
    bl_coefficients,
    cm_recurrence,
    series_coefficients,
    series_power,
    single_mgf_closed,
    single_mgf_quadrature,
    sum_mgf_iid,
    sum_mgf_inid,
    sum_mgf_product,
)

REAL_FIT = FittedApprox(log_a1=-3.0, a2=50.0, a3=4.2, a4=6.1, a5=0.3, a6=1.45)


def test_bl_coefficients_match_gamma_formula():
    f = REAL_FIT
    b = bl_coefficients(f, 1, 6)
    for l, v in enumerate(b):
        ref = ((-1) ** l * mp.gamma(1 + f.a5 + l) * mp.gamma(f.a6 - f.a5 - l)
               / (mp.factorial(l) * mp.gamma(f.a3 - f.a5 - l) * mp.gamma(f.a4 - f.a5 - l)) / f.a2 ** l)
        assert v == pytest.approx(float(ref), rel=1e-12)


def test_bl_coefficients_real_for_conjugate_pair():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    b = bl_coefficients(f, 2, 10)
    assert all(isinstance(v, float) and math.isfinite(v) for v in b)


def test_cm_recurrence_equals_power():
    b = [1.0, 0.5, -0.25, 0.125, 0.0625]
    for k in (1, 2, 3):
        ref = np.polynomial.polynomial.polypow(b, k)[: len(b)]
        assert np.allclose(cm_recurrence(b, k), ref, rtol=1e-13)
        assert np.allclose(series_power(b, k), ref, rtol=1e-13)


def test_cm_recurrence_singular_head():
    with pytest.raises(ConvergenceError):
        cm_recurrence([0.0, 1.0], 2)
    with pytest.raises(ValueError):
        series_power([1.0, 2.0], 0)


def test_series_coefficients_layout():
    co = series_coefficients(BranchSet.identical(REAL_FIT, 3), L=8)
    assert len(co.b_table) == 3 and len(co.b_table[0][0]) == 9
    assert len(co.c_table) == 2 and len(co.c_table[0]) == 3
    assert co.c_table[0][0] == pytest.approx(co.b_table[0][0])
    inid = series_coefficients(BranchSet((REAL_FIT, REAL_FIT.scaled(2.0))), L=4)
    assert inid.c_table is None


@pytest.mark.parametrize("s", [0.05, 0.5, 3.0])
def test_closed_form_matches_quadrature(s):
    f, _ = fit_channel(DEFAULT_CHANNEL)
    assert single_mgf_closed(s, f).value == pytest.approx(single_mgf_quadrature(s, f).value, rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [3.0, 5.0, 20.0])
def test_iid_series_matches_product(n, s):
    f, _ = fit_channel(DEFAULT_CHANNEL)
    r = sum_mgf_iid(s, f, n)
    assert r.converged and r.method == "residue_series"
    assert r.value == pytest.approx(single_mgf_closed(s, f).value ** n, rel=1e-9)


def test_n1_series_is_single_form():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    assert sum_mgf_iid(4.0, f, 1).value == pytest.approx(single_mgf_closed(4.0, f).value, rel=1e-10)


def test_small_s_falls_back_to_closed_form():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    r = sum_mgf_iid(0.05, f, 2)
    assert not r.converged and r.method == "closed_form"
    assert r.value == pytest.approx(single_mgf_closed(0.05, f).value ** 2, rel=1e-12)
    with pytest.raises(ConvergenceError):
        sum_mgf_iid(0.05, f, 2, fallback=False)


def test_inid_identical_equals_iid():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    for s in (3.0, 10.0):
        a = sum_mgf_inid(s, BranchSet((f, f, f))).value
        b = sum_mgf_iid(s, f, 3).value
        assert a == pytest.approx(b, rel=1e-9)


def test_inid_heterogeneous_matches_product():
    fits = tuple(fit_channel(DEFAULT_CHANNEL.replace(xi=x))[0] for x in (1.5, 2.553, 6.0))
    bs = BranchSet(fits)
    for s in (3.0, 10.0):
        r = sum_mgf_inid(s, bs)
        assert r.converged
        assert r.value == pytest.approx(sum_mgf_product(s, bs).value, rel=1e-9)


def test_mgf_monotone_in_s_and_n():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    grid = np.geomspace(0.05, 50, 12)
    prev_row = None
    for n in (1, 2, 3):
        row = [sum_mgf_iid(s, f, n).value for s in grid]
        assert all(a > b for a, b in zip(row, row[1:]))
        if prev_row is not None:
            assert all(a < b for a, b in zip(row, prev_row))
        prev_row = row


def test_custom_control_limits_terms():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    r = sum_mgf_iid(2.0, f, 2, SeriesControl(max_terms=10, rel_tol=1e-14))
    assert r.terms_used <= 11


def test_argument_validation():
    with pytest.raises(ValueError):
        single_mgf_closed(0.0, REAL_FIT)
    with pytest.raises(ValueError):
        sum_mgf_iid(1.0, REAL_FIT, 0)
    with pytest.raises(ValueError):
        BranchSet(())
    with pytest.raises(ValueError):
        BranchSet((REAL_FIT, REAL_FIT.scaled(2.0)), iid=True)


def test_closed_form_limits():
    f, _ = fit_channel(DEFAULT_CHANNEL)
    assert single_mgf_closed(1e6 / f.a2, f).value < 1e-3
    assert single_mgf_closed(1e-6 / f.a2, f).value == pytest.approx(1.0, abs=1e-5)


def test_power_rule_reference_points():
    b = [1.0, 2.0, 0.5, -0.3]
    assert cm_recurrence(b, 1) == pytest.approx(b, rel=1e-15)
    assert cm_recurrence([1.0, 1.0, 0.0, 0.0, 0.0], 2) == pytest.approx([1, 2, 1, 0, 0], abs=1e-15)
    # (1 + 0.5x - 0.2x^2)^3 expanded by hand
    ref = [1.0, 1.5, 0.15, -0.475, -0.03, 0.06, -0.008]
    assert cm_recurrence([1.0, 0.5, -0.2, 0, 0, 0, 0], 3) == pytest.approx(ref, abs=1e-14)
    assert series_power([1.0, 0.5, -0.2, 0, 0, 0, 0], 3) == pytest.approx(ref, abs=1e-14)


def test_power_matches_brute_force_triple_product():
    b = bl_coefficients(REAL_FIT, 1, 6)
    brute = np.zeros(7)
    for i in range(7):
        for j in range(7 - i):
            for k in range(7 - i - j):
                brute[i + j + k] += b[i] * b[j] * b[k]
    assert series_power(b, 3) == pytest.approx(brute, rel=1e-12)
    assert cm_recurrence(b, 3) == pytest.approx(brute, rel=1e-9)
