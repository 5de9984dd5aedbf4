"""Fit the six-moment approximation to the default channel and compare densities.

Run: python3 demos/fit_and_density.py
"""

import numpy as np

from malaga_sum import DEFAULT_CHANNEL, approx_cdf, approx_pdf, exact_pdf, fit_channel, moment_vector
from malaga_sum.fit import moment_residuals
from malaga_sum.montecarlo import SampleConfig, draw_branch, ks_distance, tabulated_cdf

p = DEFAULT_CHANNEL
f, inter = fit_channel(p)
print("fitted parameters at mu1 = 1:")
print(f"  log a1 = {f.log_a1:.4f}, a2 = {f.a2:.4f}")
print(f"  a3, a4 = {f.a3:.4f}, {f.a4:.4f}")
print(f"  a5, a6 = {f.a5:.5f}, {f.a6:.5f}")
print("max relative moment error:", max(moment_residuals(f, moment_vector(p))))

x = np.geomspace(0.01, 10.0, 9)
print("\n    x      exact pdf   approx pdf")
for xi, e, a in zip(x, exact_pdf(x, p), approx_pdf(x, f)):
    print(f"{xi:8.3f}  {e:10.5f}  {a:10.5f}")

samples = draw_branch(SampleConfig(200_000, seed=1), p)
cdf = tabulated_cdf(lambda t: approx_cdf(t, f), 2e-4, 80.0, 200)
print("\nKS distance, approximate CDF vs 2e5 simulated samples:", round(ks_distance(samples, cdf), 4))
