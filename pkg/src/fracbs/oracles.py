"""Classical (alpha = 1) reference prices used to validate the fractional solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .contracts import Barrier, Kind, MarketParams, OptionSpec, Style
from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class OracleResult:
    price: float
    method: str
    params: dict = field(default_factory=dict)


def _require_classical(market: MarketParams) -> None:
    if market.alpha != 1.0:
        raise DomainError(f"closed forms exist only for alpha = 1, got {market.alpha}")


def bs_vanilla(market: MarketParams, option: OptionSpec) -> float:
    """Black-Scholes price of a plain European call or put."""
    _require_classical(market)
    if not option.is_plain:
        raise ConfigError("bs_vanilla prices plain options only")
    z0, K, r, s, T = market.z0, option.strike, market.r, market.sigma, option.maturity
    vol = s * math.sqrt(T)
    d1 = (math.log(z0 / K) + (r + 0.5 * s * s) * T) / vol
    d2 = d1 - vol
    disc = K * math.exp(-r * T)
    if option.kind is Kind.CALL:
        return z0 * ndtr(d1) - disc * ndtr(d2)
    return disc * ndtr(-d2) - z0 * ndtr(-d1)


def bs_down_and_out_call(market: MarketParams, option: OptionSpec) -> float:
    """Continuously monitored down-and-out call (no rebate), barrier below the spot.

    Returns 0 when the spot is already at or below the barrier.
    """
    _require_classical(market)
    if option.kind is not Kind.CALL or option.barrier is not Barrier.DOWN_OUT:
        raise ConfigError("bs_down_and_out_call needs a down-and-out call")
    z0, K, r, s, T, H = (
        market.z0,
        option.strike,
        market.r,
        market.sigma,
        option.maturity,
        option.lower,
    )
    if z0 <= H:
        return 0.0
    lam = r - 0.5 * s * s
    vol = s * math.sqrt(T)
    y1 = (math.log(z0 / K) + (r + 0.5 * s * s) * T) / vol
    y2 = (math.log(H * H / (K * z0)) + (r + 0.5 * s * s) * T) / vol
    disc = K * math.exp(-r * T)
    ratio = H / z0
    p = 2.0 * lam / s**2
    return (
        z0 * ndtr(y1)
        - disc * ndtr(y1 - vol)
        - z0 * ratio ** (p + 2.0) * ndtr(y2)
        + disc * ratio**p * ndtr(y2 - vol)
    )


def binomial_american_put(market: MarketParams, option: OptionSpec, steps: int = 5000) -> float:
    """Cox-Ross-Rubinstein tree with early exercise at every node."""
    _require_classical(market)
    if option.kind is not Kind.PUT or not option.is_plain:
        raise ConfigError("binomial_american_put needs a plain put")
    z0, K, r, s, T = market.z0, option.strike, market.r, market.sigma, option.maturity
    dt = T / steps
    u = math.exp(s * math.sqrt(dt))
    d = 1.0 / u
    disc = math.exp(-r * dt)
    p = (math.exp(r * dt) - d) / (u - d)
    if not 0 < p < 1:
        raise DomainError("tree step too coarse: risk-neutral probability outside (0, 1)")
    j = np.arange(steps + 1)
    z = z0 * u ** (steps - 2 * j)
    v = np.maximum(K - z, 0.0)
    american = option.style is Style.AMERICAN
    for i in range(steps - 1, -1, -1):
        v = disc * (p * v[:-1] + (1.0 - p) * v[1:])
        if american:
            z = z[:-1] * d
            np.maximum(v, K - z, out=v)
    return float(v[0])


def oracle_result(kind: str, market: MarketParams, option: OptionSpec, **kw) -> OracleResult:
    funcs = {
        "bs_vanilla": bs_vanilla,
        "bs_down_and_out_call": bs_down_and_out_call,
        "binomial_american_put": binomial_american_put,
    }
    try:
        fn = funcs[kind]
    except KeyError:
        raise ConfigError(f"unknown oracle {kind!r}") from None
    price = fn(market, option, **kw)
    return OracleResult(price=price, method=kind, params={"market": market, "option": option, **kw})
