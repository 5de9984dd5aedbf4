"""MGF of one fitted variate and of sums of independent fitted variates.

For one branch with fit (a1, ..., a6),

    M(s) = (a1/s) G^{2,1}_{3,2}(1/(s a2) | 0, a3, a4; a5, a6)
         = (a1/s) sum_{k=1,2} (s a2)^{-a_{k+4}} sum_l b_l^{(k)} s^{-l},

and the MGF of a sum is the product of branch MGFs.  Expanding the product
gives a single series in powers of 1/s.  The residue series are large-s
(asymptotic) expansions: they are excellent when s * a2 is large and
diverge otherwise, in which case the product of closed forms is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import CoefficientError, ConvergenceError
from .fit import FittedApprox, approx_pdf
from .special import (
    COLLISION_SHIFT,
    COLLISION_TOL,
    GParams,
    SeriesControl,
    gauss_legendre,
    log_gamma_complex,
    meijer_g,
)

__all__ = [
    "BranchSet",
    "SeriesCoeffs",
    "MgfValue",
    "single_mgf_closed",
    "single_mgf_quadrature",
    "bl_coefficients",
    "cm_recurrence",
    "series_power",
    "series_coefficients",
    "sum_mgf_iid",
    "sum_mgf_inid",
    "sum_mgf_product",
    "DEFAULT_SUM_CONTROL",
    "MAX_INID_BRANCHES",
]

DEFAULT_SUM_CONTROL = SeriesControl(max_terms=60, rel_tol=1e-10, divergence_window=5)
MAX_INID_BRANCHES = 20
# largest term / |sum| accepted from the (extended precision) expansion
MAX_CANCELLATION = 1e20


@dataclass(frozen=True)
class BranchSet:
    fits: tuple
    iid: bool = False

    def __post_init__(self):
        fits = tuple(self.fits)
        object.__setattr__(self, "fits", fits)
        if not fits:
            raise ValueError("a branch set needs at least one branch")
        if self.iid and any(f != fits[0] for f in fits[1:]):
            raise ValueError("iid=True requires identical fits")

    @classmethod
    def identical(cls, f: FittedApprox, n: int) -> "BranchSet":
        return cls((f,) * n, iid=True)

    @property
    def n(self) -> int:
        return len(self.fits)


@dataclass(frozen=True)
class MgfValue:
    value: float
    terms_used: int
    converged: bool
    method: str

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class SeriesCoeffs:
    """Residue-series coefficients of a branch set.

    b_table[j][k-1] lists b_l^{(k)} (l = 0..L) of branch j.  c_table is only
    filled for i.i.d sets: c_table[k-1][p-1] holds the coefficients of the
    p-th power of branch series k.
    """

    b_table: tuple
    c_table: tuple | None
    L: int


def _lower_pair(f: FittedApprox):
    """(a5, a6) with an integer gap pulled apart, as the evaluator does."""
    a5, a6 = f.a5, f.a6
    gap = a6 - a5
    if abs(gap - round(gap)) <= COLLISION_TOL:
        a5 -= COLLISION_SHIFT
    return a5, a6


def _log_b(f: FittedApprox, k: int, L: int):
    """log|b_l^{(k)}| and sign for l = 0..L, via complex log-Gamma."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    a5, a6 = _lower_pair(f)
    own = a5 if k == 1 else a6
    other_gap = (a6 - a5) if k == 1 else (a5 - a6)
    l = np.arange(L + 1, dtype=float)
    lg = (log_gamma_complex(1.0 + own + l) + log_gamma_complex(other_gap - l)
          - log_gamma_complex(l + 1.0)
          - log_gamma_complex(complex(f.a3) - own - l) - log_gamma_complex(complex(f.a4) - own - l))
    bad = ~np.isfinite(lg.real) | np.isposinf(lg.real)
    if np.any(bad & np.isposinf(lg.real)):
        idx = int(np.argmax(np.isposinf(lg.real)))
        raise CoefficientError(f"Gamma pole in b_{idx}^({k})", index=idx)
    logmag = lg.real - l * math.log(f.a2)
    # phase must be a multiple of pi (the coefficient is real); add (-1)^l
    phase = lg.imag + math.pi * l
    sign = np.where(np.isneginf(lg.real), 0.0, np.round(np.cos(phase)))
    return logmag, sign


def bl_coefficients(f: FittedApprox, k: int, L: int) -> list:
    """b_l^{(k)}, l = 0..L, of the large-s series of one branch MGF."""
    logmag, sign = _log_b(f, k, L)
    with np.errstate(over="ignore", under="ignore"):
        vals = sign * np.exp(logmag)
    return [float(v) for v in vals]


def cm_recurrence(b, k: int) -> list:
    """Coefficients of (sum_l b_l x^l)^k by the power-series power rule."""
    b = [float(v) for v in b]
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    if b[0] == 0:
        raise ConvergenceError("b_0 = 0 makes the power recurrence singular")
    c = [b[0] ** k]
    for m in range(1, len(b)):
        acc = 0.0
        for l in range(1, m + 1):
            acc += (l * k - m + l) * b[l] * c[m - l]
        c.append(acc / (m * b[0]))
    return c


def series_power(b, k: int) -> np.ndarray:
    """Coefficients of (sum_l b_l x^l)^k, truncated to len(b), by repeated convolution.

    Equal to ``cm_recurrence`` in exact arithmetic.  The recurrence divides
    by b_0 at every step and amplifies rounding error geometrically when
    the series has large coefficient ratios (as residue series of fitted
    channels do), so sums use this form.
    """
    b = np.asarray(b, dtype=float)
    if k < 1 or int(k) != k:
        raise ValueError("k must be a positive integer")
    out = b.copy()
    for _ in range(int(k) - 1):
        out = np.convolve(out, b)[: b.size]
    out[0] = b[0] ** k
    return out


def _normalised(f: FittedApprox, k: int, L: int, ref: float):
    """(log|b_0|, sign b_0, [b_l/b_0 * (ref/a2)^l ... as series in 1/(s ref)])."""
    logmag, sign = _log_b(f, k, L)
    if sign[0] == 0:
        raise CoefficientError(f"b_0^({k}) vanishes", index=0)
    l = np.arange(L + 1)
    with np.errstate(over="ignore", under="ignore"):
        rel = sign * sign[0] * np.exp(logmag - logmag[0] + l * math.log(ref))
    return float(logmag[0]), float(sign[0]), rel


def series_coefficients(branches: BranchSet, L: int = 60) -> SeriesCoeffs:
    b_table = tuple((tuple(bl_coefficients(f, 1, L)), tuple(bl_coefficients(f, 2, L)))
                    for f in branches.fits)
    c_table = None
    if branches.iid:
        c_table = tuple(
            tuple(tuple(series_power(b_table[0][k - 1], p)) for p in range(1, branches.n + 1))
            for k in (1, 2)
        )
    return SeriesCoeffs(b_table, c_table, L)


def single_mgf_closed(s: float, f: FittedApprox, control: SeriesControl | None = None) -> MgfValue:
    """Closed-form MGF of the approximate density at s > 0."""
    if not s > 0:
        raise ValueError("s must be positive")
    g = GParams(2, 1, (0.0, f.a3, f.a4), (f.a5, f.a6), 1.0 / (s * f.a2))
    res = meijer_g(g, control, log_prefactor=f.log_a1 - math.log(s))
    return MgfValue(min(max(res.value, 0.0), 1.0), res.terms_used, True, "closed_form")


def single_mgf_quadrature(s: float, f: FittedApprox, upper: float | None = None) -> MgfValue:
    """Integral of e^{-sx} times the approximate density, on a log scale.

    The approximate density rises again just below a2 (its support edge),
    an artefact that carries no probability mass in the moment sense, so
    the integral stops at ``upper`` (default 0.85 a2).
    """
    hi = 0.85 * f.a2 if upper is None else upper

    def g(u):
        x = np.exp(u)
        return approx_pdf(x, f) * x * np.exp(-s * x)

    lo = math.log(f.a2) - 40.0 / max(f.a5 + 1.0, 0.1)
    val = gauss_legendre(g, lo, math.log(hi), nodes=20, rel_tol=1e-11)
    return MgfValue(float(val), 0, True, "quadrature")


def sum_mgf_product(s: float, branches: BranchSet, control: SeriesControl | None = None) -> MgfValue:
    """Product of closed-form branch MGFs; always available."""
    val = 1.0
    terms = 0
    cache = {}
    for f in branches.fits:
        key = id(f)
        if key not in cache:
            cache[key] = single_mgf_closed(s, f, control)
        val *= cache[key].value
        terms += cache[key].terms_used
    return MgfValue(val, terms, True, "closed_form")


# --- series machinery shared with the ASER -------------------------------
#
# Families of the expansion cancel against each other when s * a2 is only
# moderately large (terms of 1e9 summing to 0.3 are typical), so the
# coefficients and sums are carried in mpmath at SERIES_DPS digits.

SERIES_DPS = 34


@dataclass(frozen=True)
class _Family:
    """One term group: sign * exp(log_weight) * sum_l d_l ref^{-l} * kernel(exponent + l)."""

    log_weight: object
    sign: int
    exponent: object
    d: tuple


def _mp_branch_series(f: FittedApprox, k: int, L: int, ref: float):
    """(log|b_0|, sign b_0, (b_l / b_0 * ref^l)_l) in mpmath."""
    lb, sign, rel = _shape_series(f.a3, f.a4, f.a5, f.a6, k, L)
    with mp.workdps(SERIES_DPS):
        ratio = mp.mpf(ref) / mp.mpf(f.a2)
        if ratio != 1:
            rel = tuple(r * ratio ** l for l, r in enumerate(rel))
    return lb, sign, rel


@lru_cache(maxsize=256)
def _shape_series(a3, a4, a5, a6, k: int, L: int):
    """b_0 and b_l a2^l / b_0 by the term-ratio recurrence; depends on shape only."""
    shape = FittedApprox(0.0, 1.0, a3, a4, a5, a6)
    a5, a6 = _lower_pair(shape)
    with mp.workdps(SERIES_DPS):
        own, other = (mp.mpf(a5), mp.mpf(a6)) if k == 1 else (mp.mpf(a6), mp.mpf(a5))
        gap = other - own
        a3, a4 = mp.mpmathify(a3), mp.mpmathify(a4)
        b0 = mp.gamma(1 + own) * mp.gamma(gap) * mp.rgamma(a3 - own) * mp.rgamma(a4 - own)
        b0 = mp.re(b0)
        if b0 == 0:
            raise CoefficientError(f"b_0^({k}) vanishes", index=0)
        rel = [mp.mpf(1)]
        for l in range(1, L + 1):
            if gap - l == 0:
                raise CoefficientError(f"Gamma pole in b_{l}^({k})", index=l)
            ratio = -(own + l) * (a3 - own - l) * (a4 - own - l) / (l * (gap - l))
            rel.append(rel[-1] * mp.re(ratio))
        return mp.log(abs(b0)), (1 if b0 > 0 else -1), tuple(rel)


def _mp_convolve(x, y, L):
    out = []
    for m in range(L + 1):
        acc = mp.mpf(0)
        for i in range(max(0, m - len(y) + 1), min(m, len(x) - 1) + 1):
            acc += x[i] * y[m - i]
        out.append(acc)
    return tuple(out)


def _mp_power(x, k, L):
    out = x
    for _ in range(k - 1):
        out = _mp_convolve(out, x, L)
    return out


def _ref_scale(fits) -> float:
    return float(math.exp(np.mean([math.log(f.a2) for f in fits])))


@lru_cache(maxsize=128)
def _iid_shape_families(a3, a4, a5, a6, n: int, L: int):
    """Per (k1, k2): log multinomial * b_0 powers, sign, kappa, and coefficients."""
    shape = FittedApprox(0.0, 1.0, a3, a4, a5, a6)
    lower = _lower_pair(shape)
    with mp.workdps(SERIES_DPS):
        norm = [_shape_series(a3, a4, a5, a6, k, L) for k in (1, 2)]
        out = []
        for k1 in range(n + 1):
            k2 = n - k1
            d = None
            for k, power in ((1, k1), (2, k2)):
                if power:
                    part = _mp_power(norm[k - 1][2], power, L)
                    d = part if d is None else _mp_convolve(d, part, L)
            kappa = mp.mpf(lower[0]) * k1 + mp.mpf(lower[1]) * k2
            log_c = (mp.loggamma(n + 1) - mp.loggamma(k1 + 1) - mp.loggamma(k2 + 1)
                     + k1 * norm[0][0] + k2 * norm[1][0])
            out.append((log_c, norm[0][1] ** k1 * norm[1][1] ** k2, kappa, d))
    return tuple(out)


def iid_families(f: FittedApprox, n: int, L: int):
    """Families of the i.i.d expansion, grouped by (k1, k2) with multinomial weights."""
    with mp.workdps(SERIES_DPS):
        la1 = mp.mpf(f.log_a1)
        la2 = mp.log(f.a2)
        fams = tuple(_Family(log_c + n * la1 - kappa * la2, sign, n + kappa, d)
                     for log_c, sign, kappa, d in _iid_shape_families(f.a3, f.a4, f.a5, f.a6, n, L))
    return fams, f.a2


@lru_cache(maxsize=32)
def inid_families(branches: BranchSet, L: int):
    """Families of the i.n.i.d expansion: one per tuple (k_1, ..., k_N) in {1,2}^N."""
    n = branches.n
    if n > MAX_INID_BRANCHES:
        raise ValueError(f"i.n.i.d enumeration is limited to {MAX_INID_BRANCHES} branches; "
                         "use the product of closed forms")
    fits = branches.fits
    ref = _ref_scale(fits)
    with mp.workdps(SERIES_DPS):
        norm = [[_mp_branch_series(f, k, L, ref) for k in (1, 2)] for f in fits]
        lowers = [_lower_pair(f) for f in fits]
        fams = []
        # depth-first over branches so shared prefixes are convolved once
        stack = [(0, (mp.mpf(1),), mp.mpf(0), 1, mp.mpf(0))]
        while stack:
            j, d, log_w, sign, upsilon = stack.pop()
            if j == n:
                fams.append(_Family(log_w, sign, n + upsilon, d))
                continue
            for k in (2, 1):
                lw, sg, rel = norm[j][k - 1]
                b = mp.mpf(lowers[j][k - 1])
                stack.append((j + 1, _mp_convolve(d, rel, L) if j else rel,
                              log_w + mp.mpf(fits[j].log_a1) + lw - b * mp.log(fits[j].a2),
                              sign * sg, upsilon + b))
    return tuple(fams), ref


def sum_families(fams, ref: float, log_kernel, control: SeriesControl):
    """Sum the families with kernel(e) in place of s^{-e}; returns (value, terms, status).

    Terms of equal order l are pooled across families before the stopping
    test, so one rule governs the whole expansion.  ``log_kernel`` maps an
    mpmath exponent to the log of its kernel value.
    """
    L = control.max_terms
    with mp.workdps(SERIES_DPS):
        lref = mp.log(ref)
        total = [mp.mpf(0)] * (L + 1)
        for fam in fams:
            for l in range(min(L + 1, len(fam.d))):
                if fam.d[l] == 0:
                    continue
                total[l] += fam.sign * fam.d[l] * mp.exp(fam.log_weight + log_kernel(fam.exponent + l)
                                                         - l * lref)
        partial = mp.mpf(0)
        small = 0
        grow = 0
        prev = None
        decreasing = False
        biggest = mp.mpf(0)
        status = "max_terms"
        used = L + 1
        for i, t in enumerate(total):
            partial += t
            at = abs(t)
            biggest = max(biggest, at)
            small = small + 1 if at <= control.rel_tol * abs(partial) else 0
            if small >= 3:
                status, used = "converged", i + 1
                break
            # leading terms may rise before they fall; only growth after the
            # terms have started to shrink marks an asymptotic series turning
            if prev is not None and at < prev:
                decreasing = True
            grow = grow + 1 if (decreasing and at >= prev and at > 0) else 0
            if grow >= control.divergence_window:
                status, used = "diverged", i + 1
                break
            prev = at
        if status == "converged" and biggest > MAX_CANCELLATION * abs(partial):
            status = "cancellation"
        return float(partial), used, status


def _mgf_kernel(s):
    ls = mp.log(s)
    return lambda e: -e * ls


def sum_mgf_iid(s: float, f: FittedApprox, n: int, control: SeriesControl | None = None,
                fallback: bool = True) -> MgfValue:
    """MGF of the sum of n i.i.d fitted variates via the residue expansion.

    Falls back to the n-th power of the closed form if the expansion does
    not converge (``converged=False`` and ``method='closed_form'``).
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    control = control or DEFAULT_SUM_CONTROL
    fams, ref = iid_families(f, n, control.max_terms)
    value, terms, status = sum_families(fams, ref, _mgf_kernel(s), control)
    if status == "converged" and 0.0 < value <= 1.0:
        return MgfValue(value, terms, True, "residue_series")
    if not fallback:
        raise ConvergenceError(f"sum MGF series {status}", partial_value=value, terms=terms)
    single = single_mgf_closed(s, f)
    return MgfValue(single.value ** n, terms, False, "closed_form")


def sum_mgf_inid(s: float, branches: BranchSet, control: SeriesControl | None = None,
                 fallback: bool = True) -> MgfValue:
    """MGF of a sum of independent, non-identical fitted variates."""
    if not s > 0:
        raise ValueError("s must be positive")
    control = control or DEFAULT_SUM_CONTROL
    fams, ref = inid_families(branches, control.max_terms)
    value, terms, status = sum_families(fams, ref, _mgf_kernel(s), control)
    if status == "converged" and 0.0 < value <= 1.0:
        return MgfValue(value, terms, True, "residue_series")
    if not fallback:
        raise ConvergenceError(f"sum MGF series {status}", partial_value=value, terms=terms)
    prod = sum_mgf_product(s, branches)
    return MgfValue(prod.value, terms, False, "closed_form")
