"""Gamma-family functions, Gauss-Legendre quadrature and a Meijer-G evaluator.

The Meijer-G evaluator sums residues over the poles of the first ``m`` lower
parameters.  When that series diverges, stalls, or loses too many digits to
cancellation it falls back to numerical quadrature of the Mellin-Barnes
integral along a vertical line, and finally to mpmath's ``meijerg`` for
shapes whose contour integral does not converge.

Convention::

    G^{m,n}_{p,q}(z | a; b) = 1/(2 pi i) \\int  prod_{j<m} Gamma(b_j - u) prod_{j<n} Gamma(1 - a_j + u)
                                             / (prod_{j>=m} Gamma(1 - b_j + u) prod_{j>=n} Gamma(a_j - u))  z^u du

Parameters may be complex as long as the parameter lists are closed under
complex conjugation, so that the function value is real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import mpmath as mp
import numpy as np

from .errors import ConvergenceError, DomainError, QuadratureError

__all__ = [
    "log_gamma",
    "log_gamma_complex",
    "log_abs_gamma",
    "log_beta",
    "beta",
    "gauss_legendre",
    "separate_poles",
    "SeriesControl",
    "GParams",
    "GResult",
    "meijer_g",
    "mellin_barnes",
]

_EULER = 0.57721566490153286061
_LOG_PI = math.log(math.pi)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_EPS = np.finfo(float).eps

# zeta(k) - 1 for k = 2..30
_ZETA_M1 = np.array([
    0.64493406684822643647, 0.2020569031595942854, 0.082323233711138191516,
    0.036927755143369926331, 0.017343061984449139715, 0.0083492773819228268398,
    0.0040773561979443393787, 0.0020083928260822144179, 0.00099457512781808533715,
    0.0004941886041194645587, 0.00024608655330804829864, 0.00012271334757848914675,
    6.1248135058704829259e-05, 3.0588236307020493552e-05, 1.5282259408651871733e-05,
    7.6371976378997622736e-06, 3.8172932649998398565e-06, 1.9082127165539389256e-06,
    9.5396203387279611316e-07, 4.7693298678780646311e-07, 2.3845050272773299001e-07,
    1.1921992596531107308e-07, 5.9608189051259479606e-08, 2.9803503514652280187e-08,
    1.4901554828365041233e-08, 7.4507117898354294923e-09, 3.7253340247884570506e-09,
    1.8626597235130490129e-09, 9.3132743241966819147e-10,
])
_K = np.arange(2, 2 + _ZETA_M1.size)
_TAYLOR = ((-1.0) ** _K * _ZETA_M1 / _K)[::-1]

# B_{2k} / (2k (2k - 1)), k = 1..8
_STIRLING = np.array([
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
    -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
])[::-1]

_SHIFT_TO = 10.0


def _taylor_tail(eps):
    """sum_{k>=2} (-1)^k (zeta(k) - 1) eps^k / k, valid for |eps| <= 0.5."""
    acc = np.zeros_like(eps)
    for c in _TAYLOR:
        acc = acc * eps + c
    return acc * eps * eps


def _stirling(w):
    inv = 1.0 / w
    inv2 = inv * inv
    acc = np.zeros_like(w)
    for c in _STIRLING:
        acc = acc * inv2 + c
    return (w - 0.5) * np.log(w) - w + _HALF_LOG_2PI + acc * inv


def _shifted_stirling(x):
    """ln Gamma(x) for Re(x) >= 0.5 via recurrence up to |x| >= 10 and Stirling."""
    n = np.where(np.abs(x) < _SHIFT_TO, np.ceil(_SHIFT_TO - x.real), 0.0)
    n = np.clip(n, 0, _SHIFT_TO).astype(int)
    prod = np.ones_like(x)
    for k in range(int(n.max(initial=0))):
        prod = np.where(k < n, prod * (x + k), prod)
    return _stirling(x + n) - np.log(prod)


def _log_gamma_pos(x):
    out = np.empty_like(x)
    lo = x < 0.5
    mid1 = (x >= 0.5) & (x < 1.5)
    mid2 = (x >= 1.5) & (x < 2.5)
    hi = x >= 2.5
    if lo.any():
        e = x[lo]
        out[lo] = -np.log1p(e) + e * (1.0 - _EULER) + _taylor_tail(e) - np.log(e)
    if mid1.any():
        e = x[mid1] - 1.0
        out[mid1] = -np.log1p(e) + e * (1.0 - _EULER) + _taylor_tail(e)
    if mid2.any():
        e = x[mid2] - 2.0
        out[mid2] = e * (1.0 - _EULER) + _taylor_tail(e)
    if hi.any():
        out[hi] = _shifted_stirling(x[hi])
    return out


def log_gamma(x):
    """Natural log of the Gamma function for positive real ``x``.

    Vectorised; returns a float for scalar input. Accurate to a few ulp in
    relative terms, including near the zeros at x = 1 and x = 2.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    out = _log_gamma_pos(np.atleast_1d(arr).astype(float))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def log_abs_gamma(x):
    """Return ``(ln|Gamma(x)|, sign(Gamma(x)))`` for real non-pole ``x``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    logabs = np.empty_like(arr)
    sign = np.ones_like(arr)
    pos = arr > 0
    if pos.any():
        logabs[pos] = _log_gamma_pos(arr[pos])
    neg = ~pos
    if neg.any():
        xn = arr[neg]
        if np.any(xn == np.round(xn)):
            raise DomainError(f"Gamma pole at {xn[xn == np.round(xn)][0]}")
        n = np.round(xn)
        s = np.sin(math.pi * (xn - n)) * np.where(n % 2 == 0, 1.0, -1.0)
        logabs[neg] = _LOG_PI - np.log(np.abs(s)) - _log_gamma_pos(1.0 - xn)
        sign[neg] = np.sign(s)
    if np.ndim(x) == 0:
        return float(logabs[0]), float(sign[0])
    return logabs.reshape(np.shape(x)), sign.reshape(np.shape(x))


def _log_sin_pi(z):
    """Branch-agnostic log(sin(pi z)) for complex z, safe for large |Im z|."""
    n = np.round(z.real)
    w = z - n
    big = np.abs(w.imag) > 15.0
    out = np.empty_like(w)
    if (~big).any():
        out[~big] = np.log(np.sin(math.pi * w[~big]))
    if big.any():
        wb = w[big]
        flip = wb.imag < 0
        wp = np.where(flip, np.conj(wb), wb)
        val = -1j * math.pi * wp + np.log(0.5j) + np.log1p(-np.exp(2j * math.pi * wp))
        out[big] = np.where(flip, np.conj(val), val)
    return out + 1j * math.pi * n


def _log_gamma_offset(c0, k, sign):
    """ln Gamma(c0 + sign*k) for integer array ``k``.

    Near-pole arguments are handled through the reflection formula with
    sin(pi (c0 +- k)) = (-1)^k sin(pi c0), so the small distance of ``c0`` to an
    integer is not lost when ``k`` is added.
    """
    c0 = complex(c0)
    x = c0 + sign * k
    out = np.empty(k.shape, dtype=complex)
    refl = x.real < 0.5
    if (~refl).any():
        out[~refl] = log_gamma_complex(x[~refl])
    if refl.any():
        if c0.imag == 0 and c0.real == round(c0.real):
            out[refl] = complex(np.inf, 0.0)
        else:
            ls = _log_sin_pi(np.array([c0]))[0] + 1j * math.pi * k[refl]
            out[refl] = _LOG_PI - ls - log_gamma_complex(1.0 - x[refl])
    return out


def log_gamma_complex(z):
    """ln Gamma(z) for complex ``z`` (defined modulo 2 pi i).

    Exponentiating the result gives Gamma(z) with its correct sign or phase,
    which is what the series code relies on.  Poles give ``+inf``.
    """
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty_like(arr)
    real_axis = arr.imag == 0
    pole = real_axis & (arr.real <= 0) & (arr.real == np.round(arr.real))
    out[pole] = complex(np.inf, 0.0)

    rpos = real_axis & (arr.real > 0)
    if rpos.any():
        out[rpos] = _log_gamma_pos(arr.real[rpos])
    rneg = real_axis & (arr.real <= 0) & ~pole
    if rneg.any():
        la, sg = log_abs_gamma(arr.real[rneg])
        out[rneg] = la + np.where(sg < 0, 1j * math.pi, 0.0)

    cplx = ~real_axis
    if cplx.any():
        zc = arr[cplx]
        res = np.empty_like(zc)
        right = zc.real >= 0.5
        if right.any():
            res[right] = _shifted_stirling(zc[right])
        if (~right).any():
            zl = zc[~right]
            res[~right] = _LOG_PI - _log_sin_pi(zl) - _shifted_stirling(1.0 - zl)
        out[cplx] = res
    if np.ndim(z) == 0:
        return complex(out[0])
    return out.reshape(np.shape(z))


def log_beta(a, b):
    """ln B(a, b) for positive real a, b."""
    return log_gamma(a) + log_gamma(b) - log_gamma(np.add(a, b))


def beta(a, b):
    """Beta function B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b)."""
    return np.exp(log_beta(a, b))


# ---------------------------------------------------------------------------
# quadrature

@lru_cache(maxsize=None)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(
    f: Callable,
    lo: float,
    hi: float,
    nodes: int = 20,
    rel_tol: float = 1e-12,
    abs_tol: float = 0.0,
    adaptive: bool = True,
    max_depth: int = 40,
    vectorized: bool = True,
) -> float:
    """Integrate ``f`` over ``[lo, hi]`` with Gauss-Legendre panels.

    With ``adaptive=False`` a single fixed-order rule is applied, which is
    exact for polynomials of degree ``<= 2*nodes - 1``.  Otherwise each panel
    is bisected until the two-half estimate agrees with the whole-panel one.

    ``f`` receives a numpy array of abscissae when ``vectorized`` is true,
    otherwise it is called once per abscissa.
    """
    if nodes < 2:
        raise ValueError("nodes must be >= 2")
    lo = float(lo)
    hi = float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("integration limits must be finite")
    if lo == hi:
        return 0.0
    x, w = _leggauss(nodes)

    def rule(a, b):
        xs = 0.5 * (b - a) * x + 0.5 * (a + b)
        if vectorized:
            ys = np.asarray(f(xs), dtype=float)
            if ys.shape != xs.shape:
                ys = np.broadcast_to(ys, xs.shape)
        else:
            ys = np.array([f(t) for t in xs], dtype=float)
        bad = ~np.isfinite(ys)
        if bad.any():
            where = float(xs[np.argmax(bad)])
            raise QuadratureError(f"non-finite integrand at x={where!r}", abscissa=where)
        return 0.5 * (b - a) * float(np.dot(w, ys)), 0.5 * abs(b - a) * float(np.dot(w, np.abs(ys)))

    whole, whole_abs = rule(lo, hi)
    if not adaptive:
        return whole

    span = hi - lo
    total = 0.0
    stack = [(lo, hi, whole, whole_abs, 0)]
    scale = abs(whole)
    while stack:
        a, b, est, est_abs, depth = stack.pop()
        mid = 0.5 * (a + b)
        left, left_abs = rule(a, mid)
        right, right_abs = rule(mid, b)
        refined = left + right
        frac = abs(b - a) / abs(span)
        scale = max(scale, abs(refined))
        # floor at the rounding noise of integrands evaluated with some cancellation
        tol = max(abs_tol * frac, rel_tol * scale * frac, 1024 * _EPS * (left_abs + right_abs))
        if abs(refined - est) <= tol:
            total += refined
        elif depth >= max_depth:
            raise QuadratureError(
                f"adaptive refinement did not converge on [{a}, {b}]", abscissa=mid
            )
        else:
            stack.append((mid, b, right, right_abs, depth + 1))
            stack.append((a, mid, left, left_abs, depth + 1))
    return total


# ---------------------------------------------------------------------------
# Meijer G

COLLISION_TOL = 1e-9
COLLISION_SHIFT = 1e-6
_MAX_PRECISION_LOSS = 1e-12


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy shared by every residue series in the package."""

    max_terms: int = 200
    rel_tol: float = 1e-10
    divergence_window: int = 5

    def __post_init__(self):
        if self.max_terms < 10:
            raise ValueError("max_terms must be >= 10")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.divergence_window < 1:
            raise ValueError("divergence_window must be positive")


def _as_param(v):
    c = complex(v)
    return c.real if c.imag == 0 else c


def _conj_closed(values):
    pending = [complex(v) for v in values if complex(v).imag != 0]
    while pending:
        v = pending.pop()
        match = [i for i, u in enumerate(pending) if abs(u - v.conjugate()) <= 1e-12 * max(1.0, abs(v))]
        if not match:
            return False
        pending.pop(match[0])
    return True


@dataclass(frozen=True)
class GParams:
    """Shape and arguments of G^{m,n}_{p,q}(argument | upper; lower)."""

    m: int
    n: int
    upper: tuple
    lower: tuple
    argument: float

    def __post_init__(self):
        object.__setattr__(self, "upper", tuple(_as_param(v) for v in self.upper))
        object.__setattr__(self, "lower", tuple(_as_param(v) for v in self.lower))
        if not (0 <= self.m <= self.q and 0 <= self.n <= self.p):
            raise DomainError(f"invalid shape m={self.m}, n={self.n}, p={self.p}, q={self.q}")
        if self.m < 1:
            raise DomainError("residue evaluation needs m >= 1")
        if not self.argument > 0:
            raise DomainError(f"argument must be positive, got {self.argument!r}")
        if not (_conj_closed(self.upper[: self.n]) and _conj_closed(self.upper[self.n:])
                and _conj_closed(self.lower[: self.m]) and _conj_closed(self.lower[self.m:])):
            raise DomainError("complex parameters must come in conjugate pairs within each group")

    @property
    def p(self) -> int:
        return len(self.upper)

    @property
    def q(self) -> int:
        return len(self.lower)

    @property
    def delta(self) -> float:
        """m + n - (p + q)/2; the contour integral converges when positive."""
        return self.m + self.n - 0.5 * (self.p + self.q)


@dataclass(frozen=True)
class GResult:
    """Value of a Meijer-G evaluation plus how it was obtained."""

    value: float
    method: str
    terms_used: int
    perturbations: tuple = ()
    precision_loss: float = 0.0

    def __float__(self):
        return self.value


def separate_poles(values: Sequence, tol: float = COLLISION_TOL, shift: float = COLLISION_SHIFT):
    """Shift parameters whose pairwise differences are (near) integers.

    Returns ``(new_values, perturbations)`` where perturbations lists
    ``(index, old, new)`` triples.  The parameter with the smaller real part of
    each colliding pair is moved up by ``shift``.
    """
    vals = [_as_param(v) for v in values]
    perturbations = []
    for _ in range(len(vals) * len(vals) + 1):
        hit = None
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                d = complex(vals[i]) - complex(vals[j])
                if abs(d.imag) <= tol and abs(d.real - round(d.real)) <= tol:
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return vals, tuple(perturbations)
        i, j = hit
        k = i if complex(vals[i]).real <= complex(vals[j]).real else j
        old = vals[k]
        vals[k] = _as_param(complex(old) + shift)
        perturbations.append((k, old, vals[k]))
    raise DomainError("could not separate colliding poles")


def _series_family(h, b, a, m, n, log_z, log_prefactor, control, check_divergence,
                   rel_tol=None, chunk=16):
    """Residues at u = b[h] + k, k = 0, 1, ...; returns (sum, terms, max|term|, status)."""
    rel_tol = control.rel_tol if rel_tol is None else rel_tol
    bh = complex(b[h])
    partial = 0j
    max_abs = 0.0
    small_run = 0
    grow_run = 0
    prev = math.inf
    decreasing = False
    k0 = 0
    while k0 < control.max_terms:
        k = np.arange(k0, min(k0 + chunk, control.max_terms), dtype=float)
        lt = -log_gamma_complex(k + 1.0) + (bh + k) * log_z + log_prefactor
        for j in range(m):
            if j != h:
                lt = lt + _log_gamma_offset(b[j] - bh, k, -1)
        for j in range(n):
            lt = lt + _log_gamma_offset(1.0 - a[j] + bh, k, 1)
        for j in range(m, len(b)):
            lt = lt - _log_gamma_offset(1.0 - b[j] + bh, k, 1)
        for j in range(n, len(a)):
            lt = lt - _log_gamma_offset(a[j] - bh, k, -1)
        with np.errstate(over="ignore", invalid="ignore"):
            terms = np.where(np.isneginf(lt.real), 0.0, np.exp(lt)) * np.where(k % 2 == 0, 1.0, -1.0)
        for idx, t in enumerate(terms):
            if not np.isfinite(t):
                return partial, k0 + idx, max(max_abs, math.inf), "overflow"
            partial += t
            at = abs(t)
            max_abs = max(max_abs, at)
            # geometric tail estimate when terms shrink slowly
            ratio = at / prev if (prev > 0 and math.isfinite(prev)) else 0.0
            tail = at / (1.0 - ratio) if ratio < 1.0 else math.inf
            small_run = small_run + 1 if tail <= rel_tol * abs(partial) else 0
            if small_run >= 3:
                return partial, k0 + idx + 1, max_abs, "converged"
            if at < prev:
                decreasing = True
            grow_run = grow_run + 1 if (decreasing and at >= prev and at > 0) else 0
            if check_divergence and grow_run >= control.divergence_window:
                return partial, k0 + idx + 1, max_abs, "diverged"
            prev = at
        k0 += chunk
        chunk = min(2 * chunk, 256)
    return partial, control.max_terms, max_abs, "max_terms"


def _prepare(params: GParams):
    a = list(params.upper)
    b = list(params.lower)
    m, n = params.m, params.n
    head, perturbations = separate_poles(b[:m])
    b[:m] = head
    for j in range(n):
        for h in range(m):
            d = complex(a[j]) - complex(b[h])
            if abs(d.imag) <= COLLISION_TOL and d.real > 0.5 and abs(d.real - round(d.real)) <= COLLISION_TOL:
                raise DomainError("upper and lower pole families overlap (a_j - b_h is a positive integer)")
    return a, b, perturbations


def _residue_series(params, a, b, log_prefactor, control):
    m, n = params.m, params.n
    p, q = params.p, params.q
    check_div = p > q or (p == q and params.argument >= 1.0)
    log_z = math.log(params.argument)
    rel_tol = control.rel_tol
    for _ in range(2):
        total = 0j
        terms = 0
        max_abs = 0.0
        biggest = 0.0
        status = "converged"
        for h in range(m):
            s, t, mx, st = _series_family(h, b, a, m, n, log_z, log_prefactor, control,
                                          check_div, rel_tol)
            total += s
            terms += t
            max_abs = max(max_abs, mx)
            biggest = max(biggest, abs(s))
            if st != "converged":
                status = st
        # families that cancel each other need a proportionally tighter stop
        cancel = biggest / abs(total) if total != 0 else math.inf
        if status != "converged" or cancel <= 10.0 or not math.isfinite(cancel):
            break
        rel_tol = max(control.rel_tol / cancel, 1e-17)
    return total, terms, max_abs, status


def _mp_meijer_g(params, a, b, log_prefactor):
    """mpmath evaluation; its hypergeometric combiner raises precision on cancellation."""
    m, n = params.m, params.n
    with mp.workdps(20):
        v = mp.meijerg([[mp.mpmathify(x) for x in a[:n]], [mp.mpmathify(x) for x in a[n:]]],
                       [[mp.mpmathify(x) for x in b[:m]], [mp.mpmathify(x) for x in b[m:]]],
                       mp.mpf(params.argument)) * mp.exp(log_prefactor)
        if abs(mp.im(v)) > 1e-10 * max(abs(mp.re(v)), mp.mpf(10) ** -300):
            raise ConvergenceError("multiprecision value is not real", partial_value=float(mp.re(v)))
        return float(mp.re(v))


def _log_envelope(c, a, b, m, n, log_z):
    """Upper envelope of ln|integrand| on the real axis, vectorised over ``c``.

    Zeros of the reciprocal Gammas are ignored (|sin| replaced by 1), so the
    minimiser cannot land on an accidental zero of the integrand.
    """
    c = np.asarray(c, dtype=float)

    def lg_den(x):
        x = np.asarray(x, dtype=complex)
        if np.all(x.imag != 0):
            return log_gamma_complex(x).real
        xr = x.real
        out = np.empty_like(xr)
        refl = xr < 0.5
        out[~refl] = log_gamma_complex(x[~refl]).real
        out[refl] = _LOG_PI - _log_gamma_pos(1.0 - xr[refl])
        return out

    val = c * log_z
    for j in range(m):
        val = val + log_gamma_complex(b[j] - c).real
    for j in range(n):
        val = val + log_gamma_complex(1.0 - a[j] + c).real
    for j in range(m, len(b)):
        val = val - lg_den(1.0 - b[j] + c)
    for j in range(n, len(a)):
        val = val - lg_den(a[j] - c)
    return val


def _contour_integrand(y, c, a, b, m, n, log_z, log_prefactor):
    u = c + 1j * np.asarray(y, dtype=float)
    lt = u * log_z + log_prefactor
    for j in range(m):
        lt = lt + log_gamma_complex(b[j] - u)
    for j in range(n):
        lt = lt + log_gamma_complex(1.0 - a[j] + u)
    for j in range(m, len(b)):
        lt = lt - log_gamma_complex(1.0 - b[j] + u)
    for j in range(n, len(a)):
        lt = lt - log_gamma_complex(a[j] - u)
    return lt


def _saddle(a, b, m, n, log_z, lo_c, hi_c):
    grid = np.linspace(lo_c, hi_c, 241)
    env = _log_envelope(grid, a, b, m, n, log_z)
    i = int(np.argmin(env))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    fine = np.linspace(lo, hi, 41)
    env = _log_envelope(fine, a, b, m, n, log_z)
    j = int(np.argmin(env))
    return float(fine[j]), float(env[j])


def _composite_rule(f, ymax, panels, nodes=16):
    x, w = _leggauss(nodes)
    edges = np.linspace(0.0, ymax, panels + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    ys = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    vals = f(ys).reshape(panels, nodes)
    weights = half[:, None] * w[None, :]
    return float(np.sum(weights * vals)), float(np.sum(weights * np.abs(vals)))


def mellin_barnes(params: GParams, log_prefactor: float = 0.0, rel_tol: float = 1e-12) -> GResult:
    """Evaluate G by quadrature of its Mellin-Barnes integral on a vertical line.

    Requires ``params.delta > 0`` so the integrand decays exponentially.  The
    line sits inside the strip separating the two pole families, at the
    minimum of the integrand's real-axis envelope (a saddle point), which
    keeps cancellation along the line small.  Composite Gauss-Legendre panels
    are doubled until two successive estimates agree.
    """
    if params.delta <= 0:
        raise ConvergenceError("Mellin-Barnes integral does not converge for delta <= 0")
    a, b, perturbations = _prepare(params)
    m, n = params.m, params.n
    log_z = math.log(params.argument)
    right = min(complex(v).real for v in b[:m])
    left = max((complex(v).real - 1.0 for v in a[:n]), default=-math.inf)
    if not left < right:
        raise DomainError("pole families are not separable by a vertical line")
    if math.isfinite(left):
        width = right - left
        lo_c, hi_c = left + 0.02 * width, right - 0.02 * width
    else:
        lo_c, hi_c = right - 200.0, right - 0.02
    c, peak = _saddle(a, b, m, n, log_z, lo_c, hi_c)

    def integrand(y):
        return np.exp(_contour_integrand(y, c, a, b, m, n, log_z, -peak)).real

    ymax = 1.0
    while _contour_integrand(ymax, c, a, b, m, n, log_z, -peak).real > -42.0:
        ymax *= 1.5
        if ymax > 1e5:
            raise ConvergenceError("contour integrand does not decay", terms=0)
    panels = max(2, int(math.ceil(ymax)))
    prev, absolute = _composite_rule(integrand, ymax, panels)
    for _ in range(6):
        panels *= 2
        cur, absolute = _composite_rule(integrand, ymax, panels)
        if abs(cur - prev) <= max(rel_tol * abs(cur), 4 * _EPS * absolute):
            break
        prev = cur
    else:
        raise ConvergenceError("contour quadrature did not settle", partial_value=cur, terms=panels)
    loss = absolute / abs(cur) if cur != 0 else math.inf
    return GResult(
        value=float(cur / math.pi * math.exp(peak + log_prefactor)),
        method="contour",
        terms_used=panels,
        perturbations=perturbations,
        precision_loss=loss,
    )


def meijer_g(params: GParams, control: SeriesControl | None = None, log_prefactor: float = 0.0) -> GResult:
    """Meijer G-function value, times ``exp(log_prefactor)``.

    ``log_prefactor`` lets callers fold in scale factors that would overflow
    or underflow on their own (e.g. a tiny normalisation times a huge G).

    Strategy: residue series over the first ``m`` lower parameters; on
    divergence, stalled convergence or excessive cancellation, the
    Mellin-Barnes contour (when it converges) and then mpmath's
    ``meijerg``.  Raises ``ConvergenceError`` if nothing works.
    """
    control = control or SeriesControl()
    p, q, m, n = params.p, params.q, params.m, params.n
    z = params.argument
    if p == q and m == q and n == 0 and z > 1.0:
        return GResult(0.0, "support", 0)
    a, b, perturbations = _prepare(params)

    total, terms, max_abs, status = _residue_series(params, a, b, log_prefactor, control)
    loss = max_abs / abs(total) if total != 0 else math.inf
    if status == "converged" and _EPS * loss <= _MAX_PRECISION_LOSS:
        return GResult(float(total.real), "residue_series", terms, perturbations, loss)

    failures = [f"residue series {status} (precision loss {loss:.3g})"]
    if params.delta > 0:
        try:
            res = mellin_barnes(params, log_prefactor)
            if _EPS * res.precision_loss <= _MAX_PRECISION_LOSS and math.isfinite(res.value):
                return GResult(res.value, res.method, terms + res.terms_used, perturbations,
                               res.precision_loss)
            failures.append(f"contour precision loss {res.precision_loss:.3g}")
        except (ConvergenceError, QuadratureError, DomainError) as exc:
            failures.append(f"contour: {exc}")

    convergent = p < q or (p == q and z < 1.0)
    if convergent and status in ("converged", "max_terms", "diverged"):
        try:
            value = _mp_meijer_g(params, a, b, log_prefactor)
            return GResult(value, "multiprecision", terms, perturbations, loss)
        except (ConvergenceError, ValueError, ZeroDivisionError, mp.libmp.NoConvergence) as exc:
            failures.append(f"multiprecision: {exc}")
    raise ConvergenceError(
        "Meijer-G evaluation failed: " + "; ".join(failures),
        partial_value=float(total.real) if np.isfinite(total) else None,
        terms=terms,
    )
