"""Market, contract and scheme value objects plus payoff/parity helpers.

The dividend rate is fixed to zero throughout the package; it is not a field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, ParityViolation

# absolute floor for tolerances on prices near zero
PRICE_ATOL = 1e-12


class Kind(str, Enum):
    CALL = "call"
    PUT = "put"


class Style(str, Enum):
    EUROPEAN = "european"
    AMERICAN = "american"


class Barrier(str, Enum):
    NONE = "none"
    UP_OUT = "up_out"
    UP_IN = "up_in"
    DOWN_OUT = "down_out"
    DOWN_IN = "down_in"
    DOUBLE_OUT = "double_out"
    DOUBLE_IN = "double_in"

    @property
    def is_knock_in(self) -> bool:
        return self in (Barrier.UP_IN, Barrier.DOWN_IN, Barrier.DOUBLE_IN)

    @property
    def is_knock_out(self) -> bool:
        return self in (Barrier.UP_OUT, Barrier.DOWN_OUT, Barrier.DOUBLE_OUT)

    @property
    def needs_lower(self) -> bool:
        return self in (Barrier.DOWN_OUT, Barrier.DOWN_IN, Barrier.DOUBLE_OUT, Barrier.DOUBLE_IN)

    @property
    def needs_upper(self) -> bool:
        return self in (Barrier.UP_OUT, Barrier.UP_IN, Barrier.DOUBLE_OUT, Barrier.DOUBLE_IN)

    def knock_out_twin(self) -> "Barrier":
        """Knock-out variant with the same barrier geometry."""
        return {
            Barrier.UP_IN: Barrier.UP_OUT,
            Barrier.DOWN_IN: Barrier.DOWN_OUT,
            Barrier.DOUBLE_IN: Barrier.DOUBLE_OUT,
        }.get(self, self)


@dataclass(frozen=True)
class MarketParams:
    """Rate ``r``, volatility ``sigma``, subdiffusion exponent ``alpha`` and spot ``z0``."""

    r: float
    sigma: float
    alpha: float
    z0: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.r >= 0:
            raise DomainError(f"r must be non-negative, got {self.r}")
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.z0 > 0:
            raise DomainError(f"z0 must be positive, got {self.z0}")

    def with_(self, **changes) -> "MarketParams":
        fields = dict(r=self.r, sigma=self.sigma, alpha=self.alpha, z0=self.z0)
        fields.update(changes)
        return MarketParams(**fields)


@dataclass(frozen=True)
class OptionSpec:
    kind: Kind
    style: Style
    strike: float
    maturity: float
    barrier: Barrier = Barrier.NONE
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        # accept plain strings for convenience
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "style", Style(self.style))
        object.__setattr__(self, "barrier", Barrier(self.barrier))
        if not self.strike > 0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise DomainError(f"maturity must be positive, got {self.maturity}")
        b = self.barrier
        if b.needs_lower and self.lower is None:
            raise ConfigError(f"{b.value} requires a lower barrier")
        if b.needs_upper and self.upper is None:
            raise ConfigError(f"{b.value} requires an upper barrier")
        for h in (self.lower, self.upper):
            if h is not None and not h > 0:
                raise DomainError(f"barriers must be positive, got {h}")
        if b in (Barrier.DOUBLE_OUT, Barrier.DOUBLE_IN) and not self.lower < self.upper:
            raise DomainError("double barrier requires lower < upper")

    @property
    def is_plain(self) -> bool:
        return self.barrier is Barrier.NONE

    def with_(self, **changes) -> "OptionSpec":
        fields = dict(
            kind=self.kind,
            style=self.style,
            strike=self.strike,
            maturity=self.maturity,
            barrier=self.barrier,
            lower=self.lower,
            upper=self.upper,
        )
        fields.update(changes)
        return OptionSpec(**fields)


@dataclass(frozen=True)
class SchemeParams:
    """Weight between explicit (theta=1) and implicit (theta=0) stepping."""

    theta: float

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")


def intrinsic_payoff(option: OptionSpec, z):
    """Immediate-exercise value ``max(z-K, 0)`` or ``max(K-z, 0)``.

    Barrier indicators are not applied; the FD engine encodes them through
    the truncated grid. Works elementwise on arrays.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr <= 0):
        raise DomainError("payoff requires z > 0")
    if option.kind is Kind.CALL:
        out = np.maximum(z_arr - option.strike, 0.0)
    else:
        out = np.maximum(option.strike - z_arr, 0.0)
    return float(out) if out.ndim == 0 else out


def in_out_parity(vanilla: float, knock_out: float, tol: float = 1e-6) -> float:
    """Knock-in price from the vanilla and knock-out legs.

    A small negative difference (``knock_out - vanilla`` no larger than
    ``tol * vanilla``, with a 1e-12 absolute floor) is clamped to zero.
    """
    if vanilla < 0 or knock_out < 0:
        raise DomainError("parity legs must be non-negative")
    diff = vanilla - knock_out
    if diff >= 0:
        return diff
    slack = max(tol * abs(vanilla), PRICE_ATOL)
    if -diff <= slack:
        return 0.0
    raise ParityViolation(
        f"knock-out ({knock_out:.12g}) exceeds vanilla ({vanilla:.12g}) by {-diff:.3g}"
    )


def log_bounds(option: OptionSpec, x_min: float = -20.0, x_max: float = 10.0) -> tuple[float, float]:
    """Log-price truncation interval for an option's knock-out grid.

    Barrier sides are pinned to ``ln H``; the remaining sides use the given
    defaults.
    """
    b = option.barrier.knock_out_twin()
    lo = math.log(option.lower) if b.needs_lower else x_min
    hi = math.log(option.upper) if b.needs_upper else x_max
    if not lo < hi:
        raise ConfigError(f"empty log-price interval [{lo}, {hi}]")
    return lo, hi
