"""NOMA-based computation over multi-access channels.

Monte Carlo simulation and closed-form evaluation of ergodic computation
rates, limiting rates and outage behaviour for sub-function superposition
over OFDM sub-carriers.
"""

from .errors import ConfigError, NumericalError
from .fading import ChannelBlock, SystemConfig, TrialStream, draw_block, rank_nodes
from .orderstats import (
    VarpiTable,
    estimate_varpi,
    joint_order_pdf,
    order_stat_mean,
    xi_quantile,
)
from .closedform import (
    RateEstimate,
    c_plus,
    high_snr_asymptote,
    limit_rate_nb,
    limit_rate_noma,
    limit_rate_wb,
    nb_rate,
    noma_pair_rate,
    wb_rate,
)
from .scheme import (
    PowerPlan,
    allocate_power,
    beta_pair,
    enumeration_counts,
    ergodic_rate_mc,
    sub_function_rate,
    superposition_rate,
    symbol_rate,
)
from .outage import (
    OutageConfig,
    OutageCurve,
    diversity_fit,
    outage_analytic,
    outage_mc,
    outage_subcarrier_analytic,
    pair_choice_outage,
)

__version__ = "0.1.0"
