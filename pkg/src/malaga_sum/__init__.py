"""Sums of Malaga-M variates with pointing error: exact law, six-moment
Meijer-G approximation, residue-series MGF of sums, MRC error rates and a
Monte-Carlo oracle."""

__version__ = "0.1.0"

from .aser import (
    AserResult,
    ModulationSpec,
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
    exact_cdf,
    exact_mgf,
    exact_moment,
    exact_pdf,
    load_channel,
    moment_vector,
)
from .fit import FittedApprox, approx_cdf, approx_pdf, fit_channel, fit_from_moments
from .mgf import BranchSet, single_mgf_closed, sum_mgf_iid, sum_mgf_inid, sum_mgf_product
from .montecarlo import SampleConfig, draw_branch, simulate_mrc_ser
from .special import SeriesControl, meijer_g
