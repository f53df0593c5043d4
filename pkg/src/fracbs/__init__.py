"""Option pricing under subdiffusive (time-fractional) Black-Scholes dynamics."""

from .contracts import (
    Barrier,
    Kind,
    MarketParams,
    OptionSpec,
    SchemeParams,
    Style,
    in_out_parity,
    intrinsic_payoff,
)
from .errors import (
    ConfigError,
    DomainError,
    FracBSError,
    ParityViolation,
    RegressionError,
    SolverError,
)
from .fd import GridSpec, price_fd, solve, solve_american_put, solve_european, theta_optimal
from .lsm import LsConfig, LsResult, ls_price_american_put
from .oracles import binomial_american_put, bs_down_and_out_call, bs_vanilla
from .subordinator import inverse_subordinator_path, subdiffusive_gbm_paths

__version__ = "0.1.0"
