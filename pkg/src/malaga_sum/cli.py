"""Command-line front end: ``malaga-sum <command> [options]``.

Commands: fit, pdf, mgf, aser, simulate, reproduce.  SNRs cross the
boundary in dB and are converted once.  CSV output goes to ``--out`` (or
stdout) and, when written to a file, is accompanied by ``<out>.json`` with
the resolved configuration and column units.

Exit codes: 0 success, 1 input error, 2 numerical infeasibility (fit),
3 convergence failure after all fallbacks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aser import (
    aser_iid,
    aser_inid,
    aser_quadrature,
    asymptotic_iid,
    asymptotic_inid,
    modulation_table,
)
from .channel import (
    DEFAULT_CHANNEL,
    MalagaParams,
    db_to_linear,
    exact_cdf,
    exact_pdf,
    load_channel,
    moment_vector,
)
from .errors import (
    ConvergenceError,
    DegenerateMomentsError,
    FitInfeasibleError,
    ParameterError,
    TieError,
)
from .fit import approx_cdf, approx_pdf, fit_channel, fit_report
from .mgf import BranchSet, sum_mgf_iid, sum_mgf_inid, sum_mgf_product
from .montecarlo import SampleConfig, draw_branch, empirical_mgf, simulate_mrc_ser
from .special import SeriesControl

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CONVERGENCE = 0, 1, 2, 3

REDUCED_SAMPLES = 1_000_000
FULL_SAMPLES = 3_000_000
DEFAULT_SNR_DB = [0.0, 5.0, 10.0, 15.0, 20.0]


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    channels: list
    snr_grid_db: list
    modulation: str = "bpsk"
    n_branches: int = 1
    max_terms: int | None = None
    tol: float | None = None
    out: str | None = None
    seed: int = 0
    full: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.snr_grid_db:
            raise InputError("the SNR grid is empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise InputError("the SNR grid must be strictly increasing")
        if self.n_branches < 1:
            raise InputError("the number of branches must be >= 1")
        if len(self.channels) > 1 and self.n_branches not in (1, len(self.channels)):
            raise InputError(f"--n-branches {self.n_branches} does not match "
                             f"{len(self.channels)} channel files")
        modulation_table(self.modulation)

    @property
    def inid(self) -> bool:
        return len(self.channels) > 1 or self.extra.get("inid", False)

    def control(self, default: SeriesControl) -> SeriesControl:
        return SeriesControl(
            max_terms=self.max_terms or default.max_terms,
            rel_tol=self.tol or default.rel_tol,
            divergence_window=default.divergence_window,
        )

    def samples(self) -> int:
        return self.extra.get("samples") or (FULL_SAMPLES if self.full else REDUCED_SAMPLES)

    def resolved(self) -> dict:
        return {
            "command": self.command,
            "channels": [c.to_dict() for c in self.channels],
            "snr_grid_db": self.snr_grid_db,
            "modulation": self.modulation,
            "n_branches": self.n_branches,
            "max_terms": self.max_terms,
            "tol": self.tol,
            "seed": self.seed,
            "full": self.full,
            "samples": self.samples(),
            **{k: v for k, v in self.extra.items() if k not in ("samples", "snr_given")},
            "version": __version__,
        }


# --- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(cfg: RunConfig, header: list, rows: list, units: dict) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    if cfg.out is None:
        sys.stdout.write(buf.getvalue())
        return
    path = Path(cfg.out)
    path.write_text(buf.getvalue())
    side = {"config": cfg.resolved(), "columns": {h: units.get(h, "") for h in header}}
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2) + "\n")


def write_json(cfg: RunConfig, payload: dict) -> None:
    text = json.dumps(payload, indent=2, default=_json_default) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        Path(cfg.out).write_text(text)


def _json_default(o):
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


# --- helpers -------------------------------------------------------------------

def _at_snr(p: MalagaParams, db: float) -> MalagaParams:
    return p.with_mu1(float(db_to_linear(db)))


def _fits_at(cfg: RunConfig, db: float):
    chans = cfg.channels if cfg.inid else cfg.channels[:1]
    fits = []
    for c in chans:
        f, _ = fit_channel(_at_snr(c, db))
        fits.append(f)
    if cfg.inid:
        return BranchSet(tuple(fits))
    return BranchSet.identical(fits[0], cfg.n_branches)


def _branch_params(cfg: RunConfig, db: float):
    if cfg.inid:
        return [_at_snr(c, db) for c in cfg.channels]
    return [_at_snr(cfg.channels[0], db)] * cfg.n_branches


# --- commands --------------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> int:
    rows = []
    code = EXIT_OK
    for db in cfg.snr_grid_db:
        p = _at_snr(cfg.channels[0], db)
        try:
            f, inter = fit_channel(p, root=cfg.extra.get("root", "minus"),
                                   allow_complex=not cfg.extra.get("strict", False))
            rows.append({"mu1_db": db, **fit_report(f, inter, moment_vector(p), p)})
        except (FitInfeasibleError, DegenerateMomentsError) as exc:
            rows.append({"mu1_db": db, "infeasible": True, "error": str(exc),
                         "discriminant": getattr(exc, "discriminant", None)})
            code = EXIT_INFEASIBLE
    write_json(cfg, {"config": cfg.resolved(), "rows": rows})
    return code


def cmd_pdf(cfg: RunConfig) -> int:
    rel = cfg.extra.get("x") or list(np.geomspace(1e-3, 20.0, 41))
    rows = []
    for db in cfg.snr_grid_db:
        p = _at_snr(cfg.channels[0], db)
        f, _ = fit_channel(p)
        x = np.asarray(rel) * p.mu1
        for xi, e, a, ec, ac in zip(x, exact_pdf(x, p), approx_pdf(x, f), exact_cdf(x, p), approx_cdf(x, f)):
            rows.append([db, xi, e, a, ec, ac])
    header = ["mu1_db", "x_linear", "exact_pdf", "approx_pdf", "exact_cdf", "approx_cdf"]
    write_csv(cfg, header, rows, {"mu1_db": "dB", "x_linear": "linear SNR",
                                  "exact_pdf": "1/linear SNR", "approx_pdf": "1/linear SNR"})
    return EXIT_OK


def cmd_mgf(cfg: RunConfig) -> int:
    from .mgf import DEFAULT_SUM_CONTROL

    s_grid = cfg.extra.get("s") or list(np.geomspace(0.01, 100.0, 21))
    db = cfg.snr_grid_db[0]
    branches = _fits_at(cfg, db)
    control = cfg.control(DEFAULT_SUM_CONTROL)
    rows = []
    for s in s_grid:
        if branches.iid:
            r = sum_mgf_iid(s, branches.fits[0], branches.n, control)
        else:
            r = sum_mgf_inid(s, branches, control)
        rows.append([s, r.value, r.method, r.terms_used, r.converged])
    header = ["s", "value", "method", "terms_used", "converged"]
    write_csv(cfg, header, rows, {"s": "linear (per unit SNR)", "value": "probability-like, unitless"})
    return EXIT_OK


def _aser_row(cfg: RunConfig, mod, db: float, control):
    branches = _fits_at(cfg, db)
    if branches.iid:
        r = aser_iid(mod, branches.fits[0], branches.n, control)
        try:
            a = asymptotic_iid(mod, branches.fits[0], branches.n).value(branches.fits[0].a2)
        except TieError:
            a = math.nan
    else:
        r = aser_inid(mod, branches, control)
        try:
            a = asymptotic_inid(mod, branches).prefactor
        except TieError:
            a = math.nan
    q = r.value if r.method == "quadrature" else aser_quadrature(mod, branches)
    flags = [r.method]
    if r.clamped:
        flags.append("clamped")
    if not r.converged:
        flags.append("series_fallback")
    return [db, r.value, q, a, "|".join(flags)]


def cmd_aser(cfg: RunConfig) -> int:
    from .aser import DEFAULT_ASER_CONTROL

    mod = modulation_table(cfg.modulation)
    control = cfg.control(DEFAULT_ASER_CONTROL)
    rows = [_aser_row(cfg, mod, db, control) for db in cfg.snr_grid_db]
    header = ["mu1_db", "aser_series", "aser_quadrature", "aser_asymptotic", "method_flags"]
    write_csv(cfg, header, rows, {"mu1_db": "dB", "aser_series": "probability",
                                  "aser_quadrature": "probability", "aser_asymptotic": "probability"})
    return EXIT_OK


def _simulate_point(cfg: RunConfig, mod, db: float, seed_offset: int = 0):
    sc = SampleConfig(n_samples=cfg.samples(), seed=cfg.seed + seed_offset,
                      batch_size=min(cfg.samples(), 500_000), workers=cfg.extra.get("workers", 1))
    return simulate_mrc_ser(sc, _branch_params(cfg, db), mod,
                            max_samples=cfg.extra.get("max_samples"))


def cmd_simulate(cfg: RunConfig) -> int:
    mod = modulation_table(cfg.modulation)
    rows = []
    for i, db in enumerate(cfg.snr_grid_db):
        r = _simulate_point(cfg, mod, db, i)
        rows.append([db, r.value, r.stderr, r.ci[0], r.ci[1], r.error_events, r.n_samples,
                     r.low_confidence])
    header = ["mu1_db", "ser", "stderr", "ci_low", "ci_high", "error_events", "n_samples",
              "low_confidence"]
    write_csv(cfg, header, rows, {"mu1_db": "dB", "ser": "probability"})
    return EXIT_OK


# --- figure reproduction ---------------------------------------------------------

FIG1_SNR_DB = (0.0, 5.0, 10.0)
FIG5_XI = (1.1, 2.553, 6.0)
# per-branch (alpha, beta, xi); the second set raises every alpha and beta
FIG6_SETS = {
    "weaker": ((1.8, 1, 2.553), (2.296, 2, 2.553), (3.0, 2, 2.553)),
    "stronger": ((2.296, 2, 2.553), (3.0, 2, 2.553), (4.2, 3, 2.553)),
    "stronger_small_xi": ((2.296, 2, 1.5), (3.0, 2, 1.5), (4.2, 3, 1.5)),
}
# i.n.i.d MGF set: only the pointing severity differs between branches
FIG23_HETERO = ((2.296, 2, 1.5), (2.296, 2, 2.553), (2.296, 2, 6.0))
FIG23_SNR_DB = (0.0, 10.0)


def _reproduce_fig1(cfg):
    base = cfg.channels[0]
    x = np.linspace(0.05, 6.0, 60)
    edges = np.concatenate([[x[0] - 0.5 * (x[1] - x[0])], 0.5 * (x[1:] + x[:-1]),
                            [x[-1] + 0.5 * (x[1] - x[0])]])
    rows = []
    dbs = cfg.snr_grid_db if cfg.extra.get("snr_given") else FIG1_SNR_DB
    for i, db in enumerate(dbs):
        p = _at_snr(base, db)
        f, _ = fit_channel(p)
        sample = draw_branch(SampleConfig(cfg.samples(), cfg.seed + i), p)
        counts, _ = np.histogram(sample, bins=edges)
        mc = counts / (sample.size * np.diff(edges))
        for xi, e, a, m in zip(x, exact_pdf(x, p), approx_pdf(x, f), mc):
            rows.append([db, xi, e, a, m])
    return (["mu1_db", "x_linear", "exact_pdf", "approx_pdf", "mc_density"], rows,
            {"mu1_db": "dB", "x_linear": "linear SNR"})


def _mgf_rows(branch_sets, cfg):
    s_grid = np.geomspace(0.05, 50.0, 19)
    rows = []
    cases = [(label, db, [_at_snr(p, db) for p in params])
             for label, params in branch_sets
             for db in (cfg.snr_grid_db if cfg.extra.get("snr_given") else FIG23_SNR_DB)]
    for label, db, params in cases:
        fits = BranchSet(tuple(fit_channel(p)[0] for p in params),
                         iid=all(p == params[0] for p in params))
        samples = sum(draw_branch(SampleConfig(cfg.samples(), cfg.seed), p, branch=j)
                      for j, p in enumerate(params))
        mc, se = empirical_mgf(samples, s_grid)
        for s, m, e in zip(s_grid, mc, se):
            r = sum_mgf_iid(s, fits.fits[0], fits.n) if fits.iid else sum_mgf_inid(s, fits)
            prod = sum_mgf_product(s, fits).value
            rows.append([label, len(params), db, s, r.value, r.method, prod, m, e])
    return (["set", "n_branches", "mu1_db", "s", "mgf_series", "series_method", "mgf_product",
             "mgf_mc", "mgf_mc_stderr"], rows, {"mu1_db": "dB", "s": "linear (per unit SNR)"})


def _reproduce_fig2(cfg):
    p = cfg.channels[0]
    return _mgf_rows([(f"iid_N{n}", [p] * n) for n in (1, 2, 3)], cfg)


def _reproduce_fig3(cfg):
    base = cfg.channels[0]
    hetero = [base.replace(alpha=a, beta=b, xi=x) for a, b, x in FIG23_HETERO]
    return _mgf_rows([(f"inid_N{n}", hetero[:n]) for n in (2, 3)], cfg)


def _aser_sweep(cfg, label, params, grid, mod, mc_limit_db=20.0):
    from .aser import DEFAULT_ASER_CONTROL

    iid = all(p == params[0] for p in params)
    chans = params[:1] if iid else list(params)
    rows = []
    for i, db in enumerate(grid):
        sub = RunConfig("aser", chans, [float(db)], cfg.modulation, len(params), cfg.max_terms,
                        cfg.tol, None, cfg.seed, cfg.full, dict(cfg.extra))
        row = _aser_row(sub, mod, float(db), sub.control(DEFAULT_ASER_CONTROL))
        if db <= mc_limit_db:
            sim = _simulate_point(sub, mod, float(db), 1000 * i)
            mc, mc_se, low = sim.value, sim.stderr, sim.low_confidence
        else:
            mc, mc_se, low = math.nan, math.nan, True
        rows.append([label] + row + [mc, mc_se, low])
    return rows


_ASER_HEADER = ["set", "mu1_db", "aser_series", "aser_quadrature", "aser_asymptotic", "method_flags",
                "mc_ser", "mc_stderr", "mc_low_confidence"]
_ASER_UNITS = {"mu1_db": "dB", "aser_series": "probability", "mc_ser": "probability"}


def _aser_grid(cfg):
    return cfg.snr_grid_db if cfg.extra.get("snr_given") else list(np.arange(0.0, 45.0, 5.0))


def _reproduce_fig4(cfg):
    mod = modulation_table(cfg.modulation)
    grid = _aser_grid(cfg)
    rows = []
    for n in (1, 2, 3):
        rows += _aser_sweep(cfg, f"N{n}", [cfg.channels[0]] * n, grid, mod)
    return _ASER_HEADER, rows, _ASER_UNITS


def _reproduce_fig5(cfg):
    mod = modulation_table(cfg.modulation)
    grid = _aser_grid(cfg)
    rows = []
    for xi in FIG5_XI:
        p = cfg.channels[0].replace(xi=xi)
        rows += _aser_sweep(cfg, f"xi{xi}", [p, p], grid, mod)
    return _ASER_HEADER, rows, _ASER_UNITS


def _reproduce_fig6(cfg):
    mod = modulation_table(cfg.modulation)
    grid = _aser_grid(cfg)
    base = cfg.channels[0]
    rows = []
    for label, spec in FIG6_SETS.items():
        params = [base.replace(alpha=a, beta=b, xi=x) for a, b, x in spec]
        rows += _aser_sweep(cfg, label, params, grid, mod)
    return _ASER_HEADER, rows, _ASER_UNITS


_FIGURES = {1: _reproduce_fig1, 2: _reproduce_fig2, 3: _reproduce_fig3,
            4: _reproduce_fig4, 5: _reproduce_fig5, 6: _reproduce_fig6}


def cmd_reproduce(cfg: RunConfig) -> int:
    fig = cfg.extra["figure"]
    header, rows, units = _FIGURES[fig](cfg)
    write_csv(cfg, header, rows, units)
    return EXIT_OK


_COMMANDS = {"fit": cmd_fit, "pdf": cmd_pdf, "mgf": cmd_mgf, "aser": cmd_aser,
             "simulate": cmd_simulate, "reproduce": cmd_reproduce}


# --- argument parsing -------------------------------------------------------------

def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="channel JSON file (default: built-in default channel)")
    common.add_argument("--branches", nargs="+", metavar="PATH",
                        help="one channel file per branch (i.n.i.d)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--snr-db", type=_float_list, help="mean-SNR grid in dB, e.g. '0,5,10'")
    common.add_argument("--n-branches", "-N", type=int, default=1, help="i.i.d branch count")
    common.add_argument("--modulation", default="bpsk")
    common.add_argument("--max-terms", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--full", action="store_true",
                        help=f"use {FULL_SAMPLES:,} Monte-Carlo samples instead of {REDUCED_SAMPLES:,}")
    common.add_argument("--samples", type=int, help="override the Monte-Carlo sample count")
    common.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="malaga-sum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_fit = sub.add_parser("fit", parents=[common], help="six-moment fit report (JSON)")
    p_fit.add_argument("--root", choices=("minus", "plus"), default="minus")
    p_fit.add_argument("--strict", action="store_true", help="reject complex a3/a4 pairs")
    p_pdf = sub.add_parser("pdf", parents=[common], help="exact and approximate PDF/CDF (CSV)")
    p_pdf.add_argument("--x", type=_float_list, help="x grid in units of the mean SNR")
    p_mgf = sub.add_parser("mgf", parents=[common], help="MGF sweep of the branch sum (CSV)")
    p_mgf.add_argument("--s", type=_float_list, help="s grid (linear)")
    sub.add_parser("aser", parents=[common], help="ASER sweep (CSV)")
    p_sim = sub.add_parser("simulate", parents=[common], help="Monte-Carlo MRC SER (CSV)")
    p_sim.add_argument("--max-samples", type=int, help="allow extending runs up to this many trials")
    p_rep = sub.add_parser("reproduce", parents=[common], help="figure data (CSV)")
    p_rep.add_argument("figure", type=int, choices=sorted(_FIGURES))
    return parser


def _load(path: str) -> MalagaParams:
    try:
        return load_channel(path)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    except ParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def config_from_args(args) -> RunConfig:
    if args.branches:
        channels = [_load(p) for p in args.branches]
    elif args.config:
        channels = [_load(args.config)]
    else:
        channels = [DEFAULT_CHANNEL]
    grid = args.snr_db
    if grid is None:
        grid = [10 * math.log10(channels[0].mu1)] if args.command in ("fit", "pdf", "mgf") else DEFAULT_SNR_DB
    extra = {"workers": args.workers, "inid": bool(args.branches),
             "snr_given": args.snr_db is not None}
    if args.samples:
        extra["samples"] = args.samples
    for key in ("root", "strict", "x", "s", "max_samples", "figure"):
        val = getattr(args, key, None)
        if val is not None:
            extra[key] = val
    n = args.n_branches
    if len(channels) > 1 and n == 1:
        n = len(channels)
    return RunConfig(args.command, channels, list(grid), args.modulation, n, args.max_terms,
                     args.tol, args.out, args.seed, args.full, extra)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return _COMMANDS[cfg.command](cfg)
    except (InputError, ParameterError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FitInfeasibleError, DegenerateMomentsError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
