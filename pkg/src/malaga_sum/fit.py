"""Six-moment Meijer-G approximation of a positive variate.

The approximate density is

    f(x) ~= a1 * G^{2,0}_{2,2}(x / a2 | a3, a4; a5, a6),   0 < x < a2,

whose Mellin moments a1 a2^{i+1} G(a5+i+1) G(a6+i+1) / (G(a3+i+1) G(a4+i+1))
are matched to mu_0 .. mu_5 in closed form.  The algebra differences nearly
equal ratios, so every intermediate is computed with mpmath at ``FIT_DPS``
digits and only the final parameters are rounded to double.

a3 and a4 may come out as a complex-conjugate pair (negative discriminant in
the a4 quadratic).  The moment products stay real, so such fits are accepted
unless ``allow_complex=False``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .channel import MalagaParams, MomentVector, moment_vector
from .errors import DegenerateMomentsError, FitInfeasibleError
from .special import GParams, SeriesControl, meijer_g

__all__ = [
    "FitIntermediates",
    "FittedApprox",
    "fit_from_moments",
    "fit_channel",
    "approx_pdf",
    "approx_cdf",
    "approx_moment",
    "moment_residuals",
    "identity_residuals",
    "fit_report",
]

FIT_DPS = 40
MAX_RESIDUAL = 1e-6
# imaginary parts below this (relative) are rounding noise of a real root
_REAL_TOL = 1e-20


def _num(z):
    """mpmath scalar -> float, or complex if the imaginary part is significant."""
    z = mp.mpc(z)
    if abs(z.imag) <= _REAL_TOL * max(abs(z.real), 1):
        return float(z.real)
    return complex(z)


@dataclass(frozen=True)
class FitIntermediates:
    phi_ratios: tuple
    l_vals: tuple
    g_vals: tuple
    phi: float
    lambda_: float
    p_: float
    s_: float
    sigma_: float
    r_: float
    delta_: float
    q_: float
    kappa_: float
    eta_: float
    disc_a4: float
    disc_a56: float
    root: str = "minus"


@dataclass(frozen=True)
class FittedApprox:
    """Parameters of the approximate density.

    ``log_a1`` is stored instead of a1, which underflows for many channels
    (values around 1e-300 and below are routine).  a3 and a4 are either both
    real or a complex-conjugate pair.
    """

    log_a1: float
    a2: float
    a3: complex | float
    a4: complex | float
    a5: float
    a6: float

    def __post_init__(self):
        if not self.a2 > 0:
            raise ValueError(f"a2 must be positive, got {self.a2}")
        if not self.a5 <= self.a6:
            raise ValueError("a5 must not exceed a6")

    @property
    def a1(self) -> float:
        return math.exp(self.log_a1)

    @property
    def complex_upper(self) -> bool:
        return isinstance(self.a3, complex) or isinstance(self.a4, complex)

    @property
    def upper(self) -> tuple:
        return (self.a3, self.a4)

    @property
    def lower(self) -> tuple:
        return (self.a5, self.a6)

    def scaled(self, c: float) -> "FittedApprox":
        """Fit of c * gamma: a2 scales by c and a1 by 1/c."""
        return FittedApprox(self.log_a1 - math.log(c), self.a2 * c, self.a3, self.a4, self.a5, self.a6)

    def to_dict(self) -> dict:
        return {
            "a1": self.a1, "log_a1": self.log_a1, "a2": self.a2,
            "a3": _jsonable(self.a3), "a4": _jsonable(self.a4),
            "a5": self.a5, "a6": self.a6, "complex_upper": self.complex_upper,
        }


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    return v


def _mp_param(v):
    return mp.mpc(v.real, v.imag) if isinstance(v, complex) else mp.mpf(v)


def _mp_log_moment(i, log_a1, a2, a3, a4, a5, a6):
    """log of the i-th Mellin moment; real part only (the value is real)."""
    val = (log_a1 + (i + 1) * mp.log(a2) + mp.loggamma(a5 + i + 1) + mp.loggamma(a6 + i + 1)
           - mp.loggamma(a3 + i + 1) - mp.loggamma(a4 + i + 1))
    return val


def _sqrt(x, allow_complex):
    return mp.sqrt(mp.mpc(x)) if allow_complex else mp.sqrt(x)


def fit_from_moments(m: MomentVector, root: str = "minus", allow_complex: bool = True,
                     check: bool = True):
    """Solve the six moment equations for (a1, ..., a6).

    ``root`` picks the sign in the a4 quadratic; the minus root is the
    standard choice and ``"plus"`` is a diagnostic alternative.  With
    ``allow_complex=False`` a negative a4 discriminant raises
    ``FitInfeasibleError`` instead of producing a conjugate pair.

    Returns ``(FittedApprox, FitIntermediates)``.
    """
    if root not in ("minus", "plus"):
        raise ValueError("root must be 'minus' or 'plus'")
    if not isinstance(m, MomentVector):
        m = MomentVector(tuple(m))
    with mp.workdps(FIT_DPS):
        mu = [mp.mpf(v) for v in m.moments]
        phi = [None] + [mu[i] / mu[i - 1] for i in range(1, 6)]
        p1 = phi[1]
        lam = 5 * phi[5] - 12 * phi[4] + 9 * phi[3] - 2 * phi[2]
        p_ = -4 * phi[4] + 9 * phi[3] - 6 * phi[2] + p1
        s_ = -p_
        sig = 25 * phi[5] - 48 * phi[4] + 27 * phi[3] - 4 * phi[2]
        r_ = phi[4] - 3 * phi[3] + 3 * phi[2] - p1
        de = phi[5] - 3 * phi[4] + 3 * phi[3] - phi[2]
        q_ = p1 - 16 * phi[4] + 27 * phi[3] - 12 * phi[2]
        big_phi = lam * (p_ + s_) + sig * r_ + de * q_
        lead = de * p_ + lam * r_
        disc4 = big_phi ** 2 - 4 * lead * (lam * q_ + sig * s_)
        if lead == 0:
            raise DegenerateMomentsError("leading coefficient of the a4 quadratic vanishes")
        if disc4 < 0 and not allow_complex:
            raise FitInfeasibleError("a4 quadratic has complex roots", discriminant=float(disc4))
        sign = -1 if root == "minus" else 1
        a4 = (-big_phi + sign * _sqrt(disc4, allow_complex)) / (2 * lead)
        g = [None] + [phi[i] * (a4 + i) for i in range(1, 5)]
        den3 = g[4] - 3 * g[3] + 3 * g[2] - g[1]
        if abs(den3) <= mp.mpf(10) ** (-FIT_DPS + 5) * max(abs(v) for v in g[1:]):
            raise DegenerateMomentsError("a3 denominator G4 - 3G3 + 3G2 - G1 vanishes")
        a3 = (-4 * g[4] + 9 * g[3] - 6 * g[2] + g[1]) / den3
        ell = [None] + [phi[i] * (a4 + i) * (a3 + i) for i in range(1, 5)]
        a2 = ell[4] / 2 - ell[3] + ell[2] / 2
        a2r = mp.re(a2)
        if a2r <= 0:
            raise FitInfeasibleError(f"a2 = {mp.nstr(a2r, 6)} is not positive", discriminant=float(disc4))
        kappa = (ell[2] - ell[1]) / a2 - 1
        eta = ell[1] / a2
        disc56 = mp.re(kappa ** 2 - 4 * eta)
        if disc56 < 0:
            raise FitInfeasibleError("a5, a6 are complex (kappa^2 < 4 eta)", discriminant=float(disc56))
        root56 = mp.sqrt(disc56)
        a5 = mp.re((kappa - root56) / 2 - 1)
        a6 = mp.re((kappa + root56) / 2 - 1)
        if a5 <= -1:
            raise FitInfeasibleError(f"a5 = {mp.nstr(a5, 6)} <= -1 makes mu_0 infinite",
                                     discriminant=float(disc56))
        log_ratio = (mp.loggamma(a3 + 1) + mp.loggamma(a4 + 1)
                     - mp.loggamma(a5 + 1) - mp.loggamma(a6 + 1) - mp.log(a2r))
        # a1 = exp(log_ratio) must be real and positive
        ang = mp.im(log_ratio) / mp.pi
        if abs(ang - mp.nint(ang)) > 1e-12 or int(mp.nint(ang)) % 2:
            raise FitInfeasibleError("a1 is not positive", discriminant=float(disc4))
        log_a1 = mp.re(log_ratio)

        fitted = FittedApprox(float(log_a1), float(a2r), _num(a3), _num(a4), float(a5), float(a6))
        inter = FitIntermediates(
            phi_ratios=tuple(float(v) for v in phi[1:]),
            l_vals=tuple(_num(v) for v in ell[1:]),
            g_vals=tuple(_num(v) for v in g[1:]),
            phi=float(big_phi), lambda_=float(lam), p_=float(p_), s_=float(s_), sigma_=float(sig),
            r_=float(r_), delta_=float(de), q_=float(q_), kappa_=float(mp.re(kappa)),
            eta_=float(mp.re(eta)), disc_a4=float(disc4), disc_a56=float(disc56), root=root,
        )
        if fitted.complex_upper and not allow_complex:
            raise FitInfeasibleError("a3, a4 are complex", discriminant=float(disc4))
        if check:
            worst = max(moment_residuals(fitted, m))
            if not worst <= MAX_RESIDUAL:
                raise FitInfeasibleError(f"moment residual {worst:.3g} exceeds {MAX_RESIDUAL}",
                                         discriminant=float(disc4))
    return fitted, inter


def fit_channel(p: MalagaParams, **kwargs):
    """Fit the approximation to the exact moments of one branch."""
    return fit_from_moments(moment_vector(p), **kwargs)


def approx_moment(i: float, f: FittedApprox) -> float:
    """E[gamma^i] of the approximate density (Mellin moment)."""
    if not f.a5 + i + 1 > 0:
        raise ValueError(f"moment of order {i} does not exist (a5 + i + 1 <= 0)")
    with mp.workdps(30):
        val = mp.exp(_mp_log_moment(i, mp.mpf(f.log_a1), mp.mpf(f.a2), _mp_param(f.a3),
                                    _mp_param(f.a4), mp.mpf(f.a5), mp.mpf(f.a6)))
        if abs(mp.im(val)) > 1e-8 * abs(val):
            raise ValueError("moment is not real; a3 and a4 must be real or conjugate")
        return float(mp.re(val))


def moment_residuals(f: FittedApprox, m: MomentVector) -> list:
    """Relative errors |approx_moment(i) / mu_i - 1| for i = 0 .. 5."""
    return [abs(approx_moment(i, f) / m[i] - 1.0) for i in range(len(m))]


def identity_residuals(f: FittedApprox, inter: FitIntermediates) -> dict:
    """Relative residuals of the two structural identities of the fit.

    second_difference_i: (L_i - 2 L_{i-1} + L_{i-2} - 2 a2) / (2 a2), i = 3, 4.
    upper_pair: (delta a3 a4 + lambda (a3 + a4) + sigma) / |delta a3 a4|.
    """
    ell = inter.l_vals
    out = {}
    for i in (3, 4):
        d2 = ell[i - 1] - 2 * ell[i - 2] + ell[i - 3]
        out[f"second_difference_{i}"] = abs(d2 - 2 * f.a2) / (2 * f.a2)
    prod = f.a3 * f.a4
    val = inter.delta_ * prod + inter.lambda_ * (f.a3 + f.a4) + inter.sigma_
    out["upper_pair"] = abs(val) / abs(inter.delta_ * prod)
    return out


def approx_pdf(x, f: FittedApprox, control: SeriesControl | None = None):
    """Approximate density; zero outside (0, a2).  Vectorised over x."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("approx_pdf requires x > 0")
    out = np.zeros_like(xs)
    for i, xv in enumerate(xs):
        z = xv / f.a2
        if z >= 1.0:
            continue
        g = GParams(2, 0, f.upper, f.lower, z)
        out[i] = meijer_g(g, control, log_prefactor=f.log_a1).value
    return float(out[0]) if np.ndim(x) == 0 else out


def approx_cdf(x, f: FittedApprox, control: SeriesControl | None = None):
    """Distribution function of the approximate density, clamped to [0, 1]."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    lower = (f.a5 + 1.0, f.a6 + 1.0, 0.0)
    upper = (1.0, f.a3 + 1.0, f.a4 + 1.0)
    for i, xv in enumerate(xs):
        if xv <= 0:
            out[i] = 0.0
            continue
        z = xv / f.a2
        if z >= 1.0:
            out[i] = 1.0
            continue
        g = GParams(2, 1, upper, lower, z)
        v = meijer_g(g, control, log_prefactor=f.log_a1 + math.log(f.a2)).value
        out[i] = min(max(v, 0.0), 1.0)
    return float(out[0]) if np.ndim(x) == 0 else out


def fit_report(f: FittedApprox, inter: FitIntermediates, m: MomentVector,
               channel: MalagaParams | None = None) -> dict:
    """JSON-ready summary of a fit."""
    res = moment_residuals(f, m)
    rep = {
        "fit": f.to_dict(),
        "intermediates": {k: _jsonable(v) for k, v in inter.__dict__.items()},
        "moments": list(m.moments),
        "moment_residuals": res,
        "max_moment_residual": max(res),
        "identity_residuals": identity_residuals(f, inter),
        "flags": {
            "complex_upper": f.complex_upper,
            "a4_discriminant_negative": inter.disc_a4 < 0,
            "a5_equals_a6": f.a5 == f.a6,
            "residual_ok": max(res) <= MAX_RESIDUAL,
        },
    }
    if channel is not None:
        rep["channel"] = channel.to_dict()
    return rep


def dumps_report(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=False)
