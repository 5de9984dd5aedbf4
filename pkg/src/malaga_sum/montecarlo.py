"""Monte-Carlo oracle: direct sampling of branch SNRs and MRC error rates.

A branch SNR is built from its physical composition,

    gamma = mu1 * X * Y * Hp / E[X Y Hp],

with X ~ Gamma(alpha) (unit mean) for large-scale turbulence, Y the power of
a shadowed Rician field (Nakagami-beta shadowed coherent part of power
Omega' plus circular Gaussian scatter of power h) for small-scale fading,
and Hp = U^(1/xi^2) the pointing-error gain.  E[X Y Hp] =
(h + Omega') xi^2 / (xi^2 + 1).

Every batch draws from its own PCG64 stream seeded by (seed, branch, batch),
and reductions run in batch order, so results do not depend on the number
of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import norm

from .aser import ModulationSpec, conditional_ser
from .channel import MalagaParams, derive_constants

__all__ = [
    "SampleConfig",
    "EmpiricalStats",
    "SerEstimate",
    "sample_branch",
    "draw_branch",
    "empirical_mgf",
    "empirical_stats",
    "simulate_mrc_ser",
    "ks_distance",
    "tabulated_cdf",
    "wilson_interval",
]


@dataclass(frozen=True)
class SampleConfig:
    n_samples: int = 3_000_000
    seed: int = 0
    batch_size: int = 1_000_000
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1 or self.batch_size < 1 or self.workers < 1:
            raise ValueError("n_samples, batch_size and workers must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_batches(self) -> int:
        return -(-self.n_samples // self.batch_size)

    def batch_len(self, b: int) -> int:
        return min(self.batch_size, self.n_samples - b * self.batch_size)


def _rng(seed: int, branch: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, branch, batch])))


def _branch_batch(p, n: int, rng: np.random.Generator) -> np.ndarray:
    """n SNR draws of one branch; ``p`` is MalagaParams or a fixed SNR (no fading)."""
    if not isinstance(p, MalagaParams):
        return np.full(n, float(p))
    c = derive_constants(p)
    x = rng.standard_gamma(p.alpha, n) / p.alpha
    g = rng.standard_gamma(p.beta, n) / p.beta
    sd = math.sqrt(c.h / 2.0)
    re = np.sqrt(g * c.omega_prime) + sd * rng.standard_normal(n)
    im = sd * rng.standard_normal(n)
    y = re * re + im * im
    hp = rng.random(n) ** (1.0 / p.xi ** 2)
    mean = (c.h + c.omega_prime) * p.xi ** 2 / (p.xi ** 2 + 1.0)
    return p.mu1 * x * y * hp / mean


def sample_branch(cfg: SampleConfig, p: MalagaParams, branch: int = 0):
    """Yield the SNR samples of one branch batch by batch."""
    for b in range(cfg.n_batches):
        yield _branch_batch(p, cfg.batch_len(b), _rng(cfg.seed, branch, b))


def draw_branch(cfg: SampleConfig, p: MalagaParams, branch: int = 0) -> np.ndarray:
    return np.concatenate(list(sample_branch(cfg, p, branch)))


@dataclass(frozen=True)
class EmpiricalStats:
    bin_edges: np.ndarray
    densities: np.ndarray
    sample_moments: tuple
    ecdf: Callable
    ks_stat: float | None


def empirical_stats(samples, cdf: Callable | None = None, bins: int = 200) -> EmpiricalStats:
    x = np.sort(np.asarray(samples, dtype=float))
    dens, edges = np.histogram(x, bins=bins, density=True)
    moments = tuple(float(np.mean(x ** i)) for i in range(7))

    def ecdf(t):
        return np.searchsorted(x, t, side="right") / x.size

    ks = ks_distance(x, cdf) if cdf is not None else None
    return EmpiricalStats(edges, dens, moments, ecdf, ks)


def empirical_mgf(samples, s_grid):
    """Sample means of exp(-s gamma) and their standard errors."""
    x = np.asarray(samples, dtype=float)
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if np.any(s < 0):
        raise ValueError("s must be non-negative")
    vals = np.empty(s.size)
    errs = np.empty(s.size)
    for i, si in enumerate(s):
        e = np.exp(-si * x)
        vals[i] = e.mean()
        errs[i] = e.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else math.inf
    return vals, errs


def ks_distance(samples, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between samples and a model CDF (vectorised callable)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def tabulated_cdf(cdf: Callable, lo: float, hi: float, points: int = 400) -> Callable:
    """Monotone interpolant of an expensive CDF on a log grid, 0 below and 1 above."""
    grid = np.geomspace(lo, hi, points)
    vals = np.maximum.accumulate(np.clip(np.asarray(cdf(grid), dtype=float), 0.0, 1.0))
    interp = PchipInterpolator(np.log(grid), vals, extrapolate=False)
    v_lo, v_hi = vals[0], vals[-1]

    def tab(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        small = x <= lo
        big = x >= hi
        mid = ~(small | big)
        # below the grid: interpolate linearly towards F(0) = 0
        out[small] = v_lo * np.clip(x[small] / lo, 0.0, 1.0)
        out[big] = v_hi + (1.0 - v_hi) * (1.0 - hi / np.maximum(x[big], hi))
        out[mid] = interp(np.log(x[mid]))
        return out

    return tab


def wilson_interval(k: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(c - h, 0.0), min(c + h, 1.0)


@dataclass(frozen=True)
class SerEstimate:
    """MRC SER estimate.

    ``value`` averages the conditional SER over the combined-SNR draws
    (lower variance than counting); ``stderr`` and ``ci`` refer to it.
    ``error_events`` counts symbol errors actually drawn (one Bernoulli
    trial per sample) and ``ci_counted`` is their Wilson interval.
    """

    value: float
    stderr: float
    ci: tuple
    n_samples: int
    error_events: int
    counted_rate: float
    ci_counted: tuple
    low_confidence: bool
    seed: int

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _ser_batch(args):
    seed, b, n, branches, mod = args
    total = np.zeros(n)
    for j, p in enumerate(branches):
        total += _branch_batch(p, n, _rng(seed, j, b))
    pe = conditional_ser(total, mod)
    # the error indicator draws from its own stream, after all branches
    u = _rng(seed, len(branches), b).random(n)
    return float(pe.sum()), float((pe * pe).sum()), int(np.count_nonzero(u < pe)), n


def simulate_mrc_ser(cfg: SampleConfig, branches: Sequence, mod: ModulationSpec,
                     min_events: int = 100, max_samples: int | None = None) -> SerEstimate:
    """Simulated SER of MRC over the given branches.

    Runs at least ``cfg.n_samples`` trials and keeps adding batches until
    ``min_events`` symbol errors were drawn or ``max_samples`` is reached
    (default: ``cfg.n_samples``, i.e. no extension).  ``low_confidence`` is
    set if fewer than ``min_events`` errors occurred.  A branch may be a
    plain number, meaning a fixed SNR without fading.
    """
    branches = list(branches)
    if not branches:
        raise ValueError("need at least one branch")
    limit = cfg.n_samples if max_samples is None else max(max_samples, cfg.n_samples)
    max_batches = -(-limit // cfg.batch_size)
    s1 = s2 = 0.0
    events = 0
    n_total = 0
    b = 0
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while b < max_batches:
            wave = range(b, min(b + cfg.workers, max_batches))
            jobs = [(cfg.seed, i, min(cfg.batch_size, limit - i * cfg.batch_size), branches, mod)
                    for i in wave]
            results = list(pool.map(_ser_batch, jobs)) if pool else [_ser_batch(j) for j in jobs]
            done = False
            # fold batches in index order and stop at the first batch that
            # satisfies the rule, so the outcome ignores the wave size
            for r in results:
                s1 += r[0]
                s2 += r[1]
                events += r[2]
                n_total += r[3]
                b += 1
                if n_total >= cfg.n_samples and events >= min_events:
                    done = True
                    break
            if done:
                break
    finally:
        if pool:
            pool.shutdown()
    mean = s1 / n_total
    var = max(s2 / n_total - mean * mean, 0.0) * n_total / max(n_total - 1, 1)
    se = math.sqrt(var / n_total)
    z = norm.ppf(0.975)
    return SerEstimate(
        value=mean, stderr=se, ci=(max(mean - z * se, 0.0), mean + z * se), n_samples=n_total,
        error_events=events, counted_rate=events / n_total, ci_counted=wilson_interval(events, n_total),
        low_confidence=events < min_events, seed=cfg.seed,
    )
