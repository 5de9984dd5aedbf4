"""Average symbol error rate of an N-branch MRC receiver.

Conditional SER is rho * erfc(sqrt(theta * gamma)); averaging with Craig's
form gives

    P = (2 rho / pi) int_0^{pi/2} M(theta / sin^2 phi) dphi,

where M is the MGF of the combined SNR.  Substituting the residue expansion
of M term by term turns every power s^{-e} into

    (rho / pi) (4/theta)^e B(e + 1/2, e + 1/2),

which is the series evaluated here.  The leading term gives the high-SNR
asymptote (coding gain and diversity order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.special import erfc

from .errors import ConvergenceError, QuadratureError, TieError
from .fit import FittedApprox
from .mgf import (
    BranchSet,
    iid_families,
    inid_families,
    single_mgf_closed,
    sum_families,
    _mp_branch_series,
)
from .special import SeriesControl, gauss_legendre, log_beta

__all__ = [
    "ModulationSpec",
    "AserResult",
    "AsymptoticIID",
    "AsymptoticINID",
    "DEFAULT_ASER_CONTROL",
    "modulation_table",
    "conditional_ser",
    "aser_iid",
    "aser_inid",
    "aser_quadrature",
    "aser_from_mgf",
    "asymptotic_iid",
    "asymptotic_inid",
]

DEFAULT_ASER_CONTROL = SeriesControl(max_terms=300, rel_tol=1e-10, divergence_window=5)
TIE_TOL = 1e-9


@dataclass(frozen=True)
class ModulationSpec:
    name: str
    rho: float
    theta: float

    def __post_init__(self):
        if not (self.rho > 0 and self.theta > 0):
            raise ValueError("rho and theta must be positive")


_MODULATIONS = {
    "bpsk": ModulationSpec("bpsk", 0.5, 1.0),
    "bfsk": ModulationSpec("bfsk", 0.5, 0.5),
    # QPSK symbol error ~ 2 Q(sqrt(gamma)), dropping the Q^2 term
    "qpsk-approx": ModulationSpec("qpsk-approx", 1.0, 0.5),
}


def modulation_table(name: str) -> ModulationSpec:
    try:
        return _MODULATIONS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown modulation {name!r}; choose from {sorted(_MODULATIONS)}") from None


def conditional_ser(gamma, mod: ModulationSpec):
    """SER at a fixed (combined) SNR: rho * erfc(sqrt(theta * gamma))."""
    return mod.rho * erfc(np.sqrt(mod.theta * np.asarray(gamma, dtype=float)))


@dataclass(frozen=True)
class AserResult:
    value: float
    method: str
    terms_used: int
    converged: bool
    clamped: bool = False

    def __float__(self):
        return self.value


def _aser_kernel(mod: ModulationSpec):
    log_pref = mp.log(mp.mpf(mod.rho) / mp.pi)
    l4t = mp.log(4 / mp.mpf(mod.theta))

    def kernel(e):
        return log_pref + e * l4t + 2 * mp.loggamma(e + 0.5) - mp.loggamma(2 * e + 1)

    return kernel


def aser_from_mgf(mod: ModulationSpec, mgf, rel_tol: float = 1e-10) -> float:
    """(2 rho/pi) int_0^{pi/2} mgf(theta / sin^2 phi) dphi for any MGF callable."""

    def integrand(phi):
        phi = np.atleast_1d(phi)
        out = np.empty(phi.size)
        for i, ph in enumerate(phi):
            sn = math.sin(ph)
            if sn == 0.0:
                out[i] = 0.0
                continue
            try:
                out[i] = mgf(mod.theta / (sn * sn))
            except (ConvergenceError, ArithmeticError, ValueError) as exc:
                raise QuadratureError(f"MGF evaluation failed at phi = {ph!r}: {exc}", abscissa=ph) from exc
        return out

    return 2.0 * mod.rho / math.pi * gauss_legendre(integrand, 0.0, math.pi / 2, nodes=20,
                                                    rel_tol=rel_tol)


def aser_quadrature(mod: ModulationSpec, branches: BranchSet) -> float:
    """ASER by quadrature of the product of closed-form branch MGFs."""
    distinct = {}
    for f in branches.fits:
        distinct[f] = distinct.get(f, 0) + 1

    def mgf(s):
        val = 1.0
        for f, count in distinct.items():
            val *= single_mgf_closed(s, f).value ** count
        return val

    return aser_from_mgf(mod, mgf, rel_tol=1e-8)


def _finish(value, terms, status, mod, branches, fallback):
    if status == "converged":
        clamped = not 0.0 <= value <= 1.0
        return AserResult(min(max(value, 0.0), 1.0), "residue_series", terms, True, clamped)
    if not fallback:
        raise ConvergenceError(f"ASER series {status}", partial_value=value, terms=terms)
    return AserResult(aser_quadrature(mod, branches), "quadrature", terms, False)


def aser_iid(mod: ModulationSpec, f: FittedApprox, n: int, control: SeriesControl | None = None,
             fallback: bool = True) -> AserResult:
    """ASER of n-branch MRC over i.i.d branches, by the residue series.

    If the series does not converge (low SNR, where it is only asymptotic)
    the quadrature value is returned with ``method='quadrature'``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    control = control or DEFAULT_ASER_CONTROL
    fams, ref = iid_families(f, n, control.max_terms)
    value, terms, status = sum_families(fams, ref, _aser_kernel(mod), control)
    return _finish(value, terms, status, mod, BranchSet.identical(f, n), fallback)


def aser_inid(mod: ModulationSpec, branches: BranchSet, control: SeriesControl | None = None,
              fallback: bool = True) -> AserResult:
    """ASER of MRC over independent, non-identical branches, by the residue series."""
    control = control or DEFAULT_ASER_CONTROL
    fams, ref = inid_families(branches, control.max_terms)
    value, terms, status = sum_families(fams, ref, _aser_kernel(mod), control)
    return _finish(value, terms, status, mod, branches, fallback)


@dataclass(frozen=True)
class AsymptoticIID:
    """High-SNR asymptote P ~ gc * a2^(-gd) of the i.i.d ASER."""

    gc: float
    gd: float
    m_branch: int
    tau: float
    log_gc: float = math.nan

    def value(self, a2: float) -> float:
        return math.exp(self.log_gc - self.gd * math.log(a2))


@dataclass(frozen=True)
class AsymptoticINID:
    """High-SNR asymptote of the i.n.i.d ASER at the branches' current mean SNRs."""

    zeta: float
    g_indices: tuple
    prefactor: float
    log_prefactor: float = math.nan

    @property
    def diversity(self) -> float:
        return self.zeta + len(self.g_indices)


def _dominant(f: FittedApprox) -> int:
    if abs(f.a5 - f.a6) <= TIE_TOL:
        raise TieError(f"a5 = {f.a5} and a6 = {f.a6} tie; the diversity order is ambiguous")
    return 1 if f.a5 < f.a6 else 2


def _log_b0(f: FittedApprox, k: int):
    lb, sign, _ = _mp_branch_series(f, k, 0, f.a2)
    return float(lb), sign


def asymptotic_iid(mod: ModulationSpec, f: FittedApprox, n: int) -> AsymptoticIID:
    """Coding gain and diversity order of the i.i.d ASER."""
    m = _dominant(f)
    a_m = f.a5 if m == 1 else f.a6
    log_b0, sign = _log_b0(f, m)
    log_tau = f.log_a1 + math.log(f.a2)
    e = n * (a_m + 1.0)
    log_gc = (math.log(mod.rho / math.pi) + n * ((a_m + 1.0) * math.log(4.0 / mod.theta) + log_tau + log_b0)
              + log_beta(e + 0.5, e + 0.5))
    if sign ** n < 0:
        raise ArithmeticError("leading coefficient is negative; no positive asymptote")
    return AsymptoticIID(math.exp(log_gc), e, m, math.exp(log_tau), log_gc)


def asymptotic_inid(mod: ModulationSpec, branches: BranchSet) -> AsymptoticINID:
    """High-SNR asymptote of the i.n.i.d ASER."""
    n = branches.n
    g = tuple(_dominant(f) for f in branches.fits)
    zeta = 0.0
    log_p = 0.0
    sign = 1
    for f, gj in zip(branches.fits, g):
        a_min = f.a5 if gj == 1 else f.a6
        zeta += a_min
        log_b0, sg = _log_b0(f, gj)
        sign *= sg
        log_p += log_b0 + f.log_a1 + math.log(f.a2) - (a_min + 1.0) * math.log(f.a2)
    e = zeta + n
    log_p += math.log(mod.rho / math.pi) + log_beta(e + 0.5, e + 0.5) + e * math.log(4.0 / mod.theta)
    if sign < 0:
        raise ArithmeticError("leading coefficient is negative; no positive asymptote")
    return AsymptoticINID(zeta, g, math.exp(log_p), log_p)
