"""Simulation and estimation tools for aggregating heavy-tailed losses."""

__version__ = "0.1.0"

from . import copula, dist, fit, portfolio, risk, utility  # noqa: E402,F401
from .copula import EFGM, PowerTypeCopula  # noqa: E402,F401
from .dist import GPD, Cauchy, Levy, LogNormal, Normal, PowerLaw, Stable  # noqa: E402,F401
from .fit import DistributionFitter, HillEstimator  # noqa: E402,F401
from .portfolio import TruncationSpec, WeightVector  # noqa: E402,F401
from .utility import LiabilitySpec  # noqa: E402,F401
