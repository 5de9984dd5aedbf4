"""Malaga-M turbulence with pointing error: one receiver branch.

Heterodyne detection is assumed, so the branch SNR is linear in the received
irradiance.  All SNR values are linear; the dB conversion happens only when a
channel file is read.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .special import GParams, SeriesControl, log_gamma, meijer_g

__all__ = [
    "MalagaParams",
    "DerivedConstants",
    "MomentVector",
    "DEFAULT_CHANNEL",
    "derive_constants",
    "exact_pdf",
    "exact_cdf",
    "exact_moment",
    "exact_mgf",
    "moment_vector",
    "load_channel",
    "channel_from_dict",
    "db_to_linear",
]

N_MOMENTS = 6


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class MalagaParams:
    """Physical parameters of one branch.

    alpha, beta: turbulence severity (beta is the integer order of the mixture).
    xi: pointing-error severity.  omega: LOS power.  eps: fraction of scatter
    power coupled to the LOS component.  d0: half of the total scatter power.
    phase_delta: phase offset between the LOS and coupled components.
    mu1: mean SNR (linear).
    """

    alpha: float
    beta: int
    xi: float
    omega: float
    eps: float
    d0: float
    phase_delta: float = math.pi / 2
    mu1: float = 1.0

    def __post_init__(self):
        if isinstance(self.beta, bool) or float(self.beta) != int(self.beta):
            raise ParameterError(f"beta must be an integer >= 1, got {self.beta!r}")
        object.__setattr__(self, "beta", int(self.beta))
        if self.beta < 1:
            raise ParameterError(f"beta must be an integer >= 1, got {self.beta!r}")
        for name in ("alpha", "xi", "d0", "mu1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be positive, got {v!r}")
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise ParameterError(f"omega must be non-negative, got {self.omega!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise ParameterError(f"eps must lie in [0, 1], got {self.eps!r}")
        if not -math.pi <= self.phase_delta <= math.pi:
            raise ParameterError(f"phase_delta must lie in [-pi, pi], got {self.phase_delta!r}")

    def with_mu1(self, mu1: float) -> "MalagaParams":
        return MalagaParams(self.alpha, self.beta, self.xi, self.omega, self.eps, self.d0,
                            self.phase_delta, mu1)

    def replace(self, **changes) -> "MalagaParams":
        d = asdict(self)
        d.update(changes)
        return MalagaParams(**d)

    def to_dict(self) -> dict:
        """Channel-file representation (mean SNR in dB)."""
        d = asdict(self)
        d["mu1_db"] = 10.0 * math.log10(d.pop("mu1"))
        return d


DEFAULT_CHANNEL = MalagaParams(alpha=2.296, beta=2, xi=2.553, omega=1.3265, eps=0.596, d0=0.1079,
                              phase_delta=math.pi / 2, mu1=1.0)


@dataclass(frozen=True)
class DerivedConstants:
    big_a: float
    big_b: float
    h: float
    omega_prime: float
    b_weights: tuple


def derive_constants(p: MalagaParams) -> DerivedConstants:
    """A, B, h, Omega' and the mixture weights b_m of the exact PDF."""
    h = 2.0 * p.d0 * (1.0 - p.eps)
    if h <= 0.0:
        raise ParameterError("eps = 1 leaves no scattered power (h = 0); the model is degenerate")
    omega_prime = (p.omega + 2.0 * p.d0 * p.eps
                   + 2.0 * math.sqrt(2.0 * p.d0 * p.eps * p.omega) * math.cos(p.phase_delta))
    if omega_prime < 0.0:
        raise ParameterError(f"Omega' is negative ({omega_prime})")
    a, b = p.alpha, p.beta
    log_big_a = (math.log(2.0) + 0.5 * a * math.log(a) - (1.0 + 0.5 * a) * math.log(h)
                 - log_gamma(a) + (b + 0.5 * a) * math.log(b / (b + omega_prime / h)))
    big_b = p.xi ** 2 * a * b * (h + omega_prime) / ((p.xi ** 2 + 1.0) * (h * b + omega_prime))
    weights = []
    for m in range(1, b + 1):
        if m > 1 and omega_prime == 0.0:
            weights.append(0.0)
            continue
        log_w = (math.log(math.comb(b - 1, m - 1)) + (1.0 + 0.5 * a) * math.log(h * b + omega_prime)
                 - log_gamma(m) + (m - 1) * (math.log(omega_prime / h) if m > 1 else 0.0)
                 - (0.5 * a + m) * math.log(b) - 0.5 * a * math.log(a))
        weights.append(math.exp(log_w))
    if not all(math.isfinite(w) and w >= 0 for w in weights) or weights[0] <= 0:
        raise ParameterError(f"degenerate mixture weights {weights}")
    return DerivedConstants(math.exp(log_big_a), big_b, h, omega_prime, tuple(weights))


def _kernel_terms(p: MalagaParams, consts: DerivedConstants):
    xi2 = p.xi ** 2
    for m, w in enumerate(consts.b_weights, start=1):
        if w > 0:
            yield w, (xi2 + 1.0,), (xi2, p.alpha, float(m))


def exact_pdf(x, p: MalagaParams, control: SeriesControl | None = None):
    """Exact SNR density of one branch; vectorised over ``x > 0``."""
    consts = derive_constants(p)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ValueError("exact_pdf requires x > 0")
    xi2 = p.xi ** 2
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        z = consts.big_b * xv / p.mu1
        acc = 0.0
        for w, upper, lower in _kernel_terms(p, consts):
            acc += w * meijer_g(GParams(3, 0, upper, lower, z), control).value
        out[i] = xi2 * consts.big_a / (2.0 * xv) * acc
    return float(out[0]) if np.ndim(x) == 0 else out


def exact_cdf(x, p: MalagaParams, control: SeriesControl | None = None):
    """Exact SNR distribution function, via the integrated Meijer-G kernel."""
    consts = derive_constants(p)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    xi2 = p.xi ** 2
    out = np.empty_like(xs)
    for i, xv in enumerate(xs):
        if xv <= 0:
            out[i] = 0.0
            continue
        z = consts.big_b * xv / p.mu1
        acc = 0.0
        for w, upper, lower in _kernel_terms(p, consts):
            g = GParams(3, 1, (1.0,) + upper, lower + (0.0,), z)
            acc += w * meijer_g(g, control).value
        out[i] = min(max(xi2 * consts.big_a / 2.0 * acc, 0.0), 1.0)
    return float(out[0]) if np.ndim(x) == 0 else out


def exact_mgf(s: float, p: MalagaParams, control: SeriesControl | None = None) -> float:
    """E[exp(-s gamma)] of the exact model (Laplace transform of the kernel mixture)."""
    if not s > 0:
        raise ValueError("s must be positive")
    consts = derive_constants(p)
    xi2 = p.xi ** 2
    z = consts.big_b / (p.mu1 * s)
    acc = 0.0
    for w, upper, lower in _kernel_terms(p, consts):
        acc += w * meijer_g(GParams(3, 1, (1.0,) + upper, lower, z), control).value
    return min(max(xi2 * consts.big_a / 2.0 * acc, 0.0), 1.0)


def exact_moment(i: float, p: MalagaParams) -> float:
    """E[gamma^i] in closed form (Mellin transform of the exact PDF)."""
    if i < 0:
        raise ValueError("moment order must be non-negative")
    if i > 8:
        raise OverflowError("moment orders above 8 are not supported")
    consts = derive_constants(p)
    xi2 = p.xi ** 2
    common = log_gamma(p.alpha + i) - math.log(xi2 + i) + i * math.log(p.mu1 / consts.big_b)
    total = 0.0
    for m, w in enumerate(consts.b_weights, start=1):
        if w > 0:
            total += w * math.exp(common + log_gamma(m + i))
    return xi2 * consts.big_a / 2.0 * total


@dataclass(frozen=True)
class MomentVector:
    """Raw moments mu_0 .. mu_5 of a positive variate."""

    moments: tuple

    def __post_init__(self):
        mom = tuple(float(v) for v in self.moments)
        object.__setattr__(self, "moments", mom)
        if len(mom) != N_MOMENTS:
            raise ValueError(f"need exactly {N_MOMENTS} moments, got {len(mom)}")
        if not all(math.isfinite(v) and v > 0 for v in mom):
            raise ValueError("moments must be finite and positive")
        if abs(mom[0] - 1.0) > 1e-9:
            raise ValueError(f"moments[0] must be 1, got {mom[0]}")

    def __getitem__(self, i):
        return self.moments[i]

    def __len__(self):
        return len(self.moments)

    def is_log_convex(self, rtol: float = 1e-12) -> bool:
        m = self.moments
        return all(m[i - 1] * m[i + 1] >= m[i] ** 2 * (1 - rtol) for i in range(1, len(m) - 1))

    @classmethod
    def from_samples(cls, samples) -> "MomentVector":
        """Empirical moments, normalised so that moments[0] == 1."""
        x = np.asarray(samples, dtype=float)
        return cls(tuple(float(np.mean(x ** i)) for i in range(N_MOMENTS)))


def moment_vector(p: MalagaParams) -> MomentVector:
    mom = [exact_moment(i, p) for i in range(N_MOMENTS)]
    # the closed form gives mu_0 = 1 to rounding; pin it
    mom[0] = 1.0
    return MomentVector(tuple(mom))


_CHANNEL_KEYS = ("alpha", "beta", "xi", "omega", "eps", "d0", "phase_delta", "mu1_db")


def channel_from_dict(d: dict) -> MalagaParams:
    """Build parameters from a channel-file mapping (``mu1_db`` in dB)."""
    missing = [k for k in _CHANNEL_KEYS if k not in d]
    if missing:
        raise ParameterError(f"channel file is missing keys: {', '.join(missing)}")
    unknown = sorted(set(d) - set(_CHANNEL_KEYS))
    if unknown:
        raise ParameterError(f"channel file has unknown keys: {', '.join(unknown)}")
    beta = d["beta"]
    if isinstance(beta, bool) or not isinstance(beta, (int, float)) or float(beta) != int(beta):
        raise ParameterError(f"field 'beta' must be an integer, got {beta!r}")
    values = {}
    for k in _CHANNEL_KEYS:
        v = d[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParameterError(f"field '{k}' must be a number, got {v!r}")
        values[k] = v
    return MalagaParams(
        alpha=float(values["alpha"]), beta=int(beta), xi=float(values["xi"]),
        omega=float(values["omega"]), eps=float(values["eps"]), d0=float(values["d0"]),
        phase_delta=float(values["phase_delta"]), mu1=float(db_to_linear(values["mu1_db"])),
    )


def load_channel(path) -> MalagaParams:
    """Read a channel JSON file.  Malformed JSON raises ``json.JSONDecodeError``."""
    text = Path(path).read_text()
    return channel_from_dict(json.loads(text))
