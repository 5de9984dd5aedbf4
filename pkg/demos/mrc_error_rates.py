"""BPSK error rate of N-branch MRC: series, high-SNR asymptote and simulation.

Run: python3 demos/mrc_error_rates.py
"""

from malaga_sum import DEFAULT_CHANNEL, aser_iid, asymptotic_iid, fit_channel, modulation_table
from malaga_sum.montecarlo import SampleConfig, simulate_mrc_ser

bpsk = modulation_table("bpsk")
print(" dB  N   series      asymptote   simulated")
for db in (0, 10, 20, 30):
    p = DEFAULT_CHANNEL.with_mu1(10 ** (db / 10))
    f, _ = fit_channel(p)
    for n in (1, 2, 3):
        ser = aser_iid(bpsk, f, n).value
        asym = asymptotic_iid(bpsk, f, n).value(f.a2)
        sim = ""
        if db <= 10:
            est = simulate_mrc_ser(SampleConfig(300_000, seed=db + n), [p] * n, bpsk)
            sim = f"{est.value:.3e}"
        print(f"{db:3d}  {n}  {ser:.3e}  {asym:.3e}  {sim}")

f, _ = fit_channel(DEFAULT_CHANNEL)
print("\ndiversity orders:", [round(asymptotic_iid(bpsk, f, n).gd, 4) for n in (1, 2, 3)])
