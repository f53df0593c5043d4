"""Longstaff-Schwartz least-squares Monte Carlo for the American put.

Continuation values are regressed on the current price only, using in-the-money
paths and the three polynomials ``1``, ``1 - x`` and ``(2 - 4x - x^2) / 2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import laguerre as _lag

from .contracts import Kind, MarketParams, OptionSpec, intrinsic_payoff
from .errors import ConfigError, RegressionError
from .subordinator import PathEnsemble, subdiffusive_gbm_paths

DISCOUNTING = ("calendar", "operational")


@dataclass(frozen=True)
class LsConfig:
    M: int = 3000
    m: int = 100
    basis_size: int = 3
    itm_only: bool = True
    # operational: e^{-r dS} per step, matching the fractional PDE's -r u term;
    # calendar: e^{-r dt}
    discounting: str = "operational"
    extended_basis: bool = False
    dtau: float | None = None

    def __post_init__(self):
        if self.M < 100:
            raise ConfigError(f"need at least 100 paths, got M={self.M}")
        if self.m < 2:
            raise ConfigError(f"need at least 2 exercise dates, got m={self.m}")
        if self.basis_size < 1:
            raise ConfigError("basis_size must be >= 1")
        if not self.itm_only:
            raise ConfigError("only in-the-money regression is supported")
        if self.discounting not in DISCOUNTING:
            raise ConfigError(f"discounting must be one of {DISCOUNTING}")


@dataclass
class LsResult:
    price: float
    std_error: float
    exercise_times: np.ndarray
    runtime: float
    european_price: float = float("nan")
    european_std_error: float = float("nan")


def laguerre_basis(x, l: int = 3, extended: bool = False) -> np.ndarray:
    """First ``l`` basis polynomials evaluated at ``x``, shape ``x.shape + (l,)``.

    The quadratic is ``(2 - 4x - x^2) / 2``, not the textbook Laguerre
    ``(x^2 - 4x + 2) / 2``; both span the same space. Beyond three terms
    (``extended=True``) standard Laguerre polynomials are appended.
    """
    if l > 3 and not extended:
        raise ConfigError("only three basis polynomials are defined; pass extended=True for more")
    x = np.asarray(x, dtype=float)
    cols = [np.ones_like(x), 1.0 - x, 0.5 * (2.0 - 4.0 * x - x * x)]
    for k in range(3, l):
        coef = np.zeros(k + 1)
        coef[k] = 1.0
        cols.append(_lag.lagval(x, coef))
    return np.stack(cols[:l], axis=-1)


def regress_continuation(states, discounted_values, l: int = 3, extended: bool = False) -> np.ndarray:
    """Least-squares coefficients (SVD-based ``lstsq``) of values on the basis."""
    states = np.asarray(states, dtype=float)
    y = np.asarray(discounted_values, dtype=float)
    if states.shape != y.shape:
        raise ConfigError("states and values must have equal length")
    if states.size < l:
        raise RegressionError(f"{states.size} samples cannot fit {l} coefficients")
    X = laguerre_basis(states, l, extended)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < l:
        raise RegressionError(f"design matrix rank {rank} < {l}")
    return beta


def ls_price_american_put(
    market: MarketParams,
    option: OptionSpec,
    config: LsConfig = LsConfig(),
    seed: int = 0,
    workers: int = 1,
    paths: PathEnsemble | None = None,
) -> LsResult:
    """American put price by backward induction over ``config.m`` exercise dates.

    On a time slice whose regression fails, no path exercises there.
    """
    if option.kind is not Kind.PUT or not option.is_plain:
        raise ConfigError("Longstaff-Schwartz is implemented for plain American puts")
    start = time.perf_counter()
    T, m, l = option.maturity, config.m, config.basis_size
    if paths is None:
        paths = subdiffusive_gbm_paths(market, T, m, config.M, seed, dtau=config.dtau, workers=workers)
    Z = paths.values
    if config.discounting == "calendar":
        step = np.full((Z.shape[0], m), T / m)
    else:
        step = np.diff(paths.operational_times, axis=1)
    disc = np.exp(-market.r * step)

    V = intrinsic_payoff(option, Z[:, m])
    tau = np.full(Z.shape[0], m)
    for i in range(m - 1, 0, -1):
        V *= disc[:, i]
        f = intrinsic_payoff(option, Z[:, i])
        itm = np.flatnonzero(f > 0)
        try:
            beta = regress_continuation(Z[itm, i], V[itm], l, config.extended_basis)
        except RegressionError:
            continue
        cont = laguerre_basis(Z[itm, i], l, config.extended_basis) @ beta
        ex = itm[cont < f[itm]]
        V[ex] = f[ex]
        tau[ex] = i
    V *= disc[:, 0]

    terminal = intrinsic_payoff(option, Z[:, m]) * np.prod(disc, axis=1)
    sqrt_m = np.sqrt(Z.shape[0])
    return LsResult(
        price=float(V.mean()),
        std_error=float(V.std(ddof=1) / sqrt_m),
        exercise_times=paths.times[tau],
        runtime=time.perf_counter() - start,
        european_price=float(terminal.mean()),
        european_std_error=float(terminal.std(ddof=1) / sqrt_m),
    )
