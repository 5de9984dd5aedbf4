"""Error rate of MRC over non-identical branches with different turbulence strength.

Run: python3 demos/heterogeneous_branches.py
"""

from malaga_sum import DEFAULT_CHANNEL, BranchSet, aser_inid, fit_channel, modulation_table

bpsk = modulation_table("bpsk")
sets = {
    "weaker": ((1.8, 1), (2.296, 2), (3.0, 2)),
    "stronger": ((2.296, 2), (3.0, 2), (4.2, 3)),
}
print("  dB  " + "  ".join(f"{k:>10s}" for k in sets))
for db in (0, 5, 10, 15, 20):
    mu1 = 10 ** (db / 10)
    row = []
    for branches in sets.values():
        fits = tuple(fit_channel(DEFAULT_CHANNEL.replace(alpha=a, beta=b, mu1=mu1))[0] for a, b in branches)
        row.append(aser_inid(bpsk, BranchSet(fits)).value)
    print(f"{db:4d}  " + "  ".join(f"{v:10.3e}" for v in row))
