import math

import numpy as np
import pytest

from malaga_sum import DEFAULT_CHANNEL, fit_channel, modulation_table
from malaga_sum.errors import DegenerateMomentsError, FitInfeasibleError

# parameter box for random draws (beta integer, phase anywhere)
BOX = dict(alpha=(1.5, 8.0), beta=(1, 4), xi=(1.0, 6.0), omega=(0.3, 2.0), eps=(0.1, 0.9),
           d0=(0.05, 0.3), phase_delta=(-math.pi, math.pi))


def random_channel(rng):
    return DEFAULT_CHANNEL.replace(
        alpha=float(rng.uniform(*BOX["alpha"])),
        beta=int(rng.integers(BOX["beta"][0], BOX["beta"][1] + 1)),
        xi=float(rng.uniform(*BOX["xi"])),
        omega=float(rng.uniform(*BOX["omega"])),
        eps=float(rng.uniform(*BOX["eps"])),
        d0=float(rng.uniform(*BOX["d0"])),
        phase_delta=float(rng.uniform(*BOX["phase_delta"])),
    )


def feasible_draws(count, seed=2024):
    """First ``count`` random channels whose fit is feasible, with their fits."""
    rng = np.random.default_rng(seed)
    out = []
    tried = 0
    while len(out) < count:
        tried += 1
        assert tried < 20 * count, "too few feasible draws"
        p = random_channel(rng)
        try:
            f, inter = fit_channel(p)
        except (FitInfeasibleError, DegenerateMomentsError):
            continue
        out.append((p, f, inter))
    return out


def at_db(p, db):
    return p.with_mu1(10.0 ** (db / 10.0))


@pytest.fixture(scope="session")
def defaults():
    return DEFAULT_CHANNEL


@pytest.fixture(scope="session")
def default_fit():
    return fit_channel(DEFAULT_CHANNEL)


@pytest.fixture(scope="session")
def bpsk():
    return modulation_table("bpsk")


# acceptance outcomes, (criterion, part, passed, detail), printed at the end of the run
ACCEPTANCE = []


def record(criterion, part, passed, detail):
    ACCEPTANCE.append((criterion, part, bool(passed), detail))
    print(f"CRITERION {criterion} [{part}]: {'PASS' if passed else 'FAIL'} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted({r[0] for r in ACCEPTANCE}):
        parts = [r for r in ACCEPTANCE if r[0] == c]
        ok = all(r[2] for r in parts)
        terminalreporter.write_line(f"CRITERION {c}: {'PASS' if ok else 'FAIL'}")
        for _, part, passed, detail in parts:
            terminalreporter.write_line(f"    [{part}] {'pass' if passed else 'FAIL'}: {detail}")
