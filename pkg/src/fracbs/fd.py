"""Weighted finite-difference engine for the time-fractional Black-Scholes LCP.

The equation is solved in log-price ``x = ln z`` and time-to-maturity ``t``.
The Caputo derivative of order ``alpha`` is discretised with the L1 rule,
whose memory weights are ``b_j = (j+1)^(1-alpha) - j^(1-alpha)``; space uses
central differences. Each step solves one tridiagonal system

    C u^{k+1} = sum_{j<k} (b_j - b_{j+1}) u^{k-j} + b_k u^0
                + (1-theta) G^{k+1} + theta (G^k + B u^k)

with ``C = theta I + (1-theta) A``. American puts additionally project every
new level onto the payoff, ``u^{k+1} = max(u^{k+1}, u^0)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.linalg import lapack
from scipy.special import gamma

from .contracts import (
    Barrier,
    Kind,
    MarketParams,
    OptionSpec,
    Style,
    in_out_parity,
    intrinsic_payoff,
    log_bounds,
)
from .errors import ConfigError, DomainError, SolverError

DEFAULT_X_MIN = -20.0
DEFAULT_X_MAX = 10.0

# how far a grid bound may sit from ln(H) and still count as "on the barrier"
_BOUND_TOL = 1e-12
# time steps per block of the blocked history sum
_HISTORY_BLOCK = 64


class DiagonalDominanceWarning(UserWarning):
    """C is not diagonally dominant for the chosen grid (coarse dx, large drift)."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    N: int
    x_min: float
    x_max: float
    maturity: float

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"need at least 2 space intervals, got n={self.n}")
        if self.N < 1:
            raise ConfigError(f"need at least 1 time step, got N={self.N}")
        if not self.x_min < self.x_max:
            raise ConfigError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        if not self.maturity > 0:
            raise ConfigError("maturity must be positive")

    @classmethod
    def for_option(
        cls,
        option: OptionSpec,
        n: int,
        N: int,
        x_min: float = DEFAULT_X_MIN,
        x_max: float = DEFAULT_X_MAX,
    ) -> "GridSpec":
        """Grid whose barrier sides sit exactly on ``ln H``."""
        lo, hi = log_bounds(option, x_min, x_max)
        return cls(n=n, N=N, x_min=lo, x_max=hi, maturity=option.maturity)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def dt(self) -> float:
        return self.maturity / self.N

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n + 1)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.N + 1)


@dataclass(frozen=True)
class FracWeights:
    b: np.ndarray
    d: float


@dataclass(frozen=True)
class TridiagonalOperator:
    """Tridiagonal matrix on the ``n-1`` interior nodes.

    ``sub[0]`` and ``sup[-1]`` lie outside the matrix and are kept at zero.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.sub[1:] * v[:-1]
        out[:-1] += self.sup[:-1] * v[1:]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)

    def is_diagonally_dominant(self) -> bool:
        off = np.abs(self.sub) + np.abs(self.sup)
        return bool(np.all(np.abs(self.diag) >= off))


class Conditions(NamedTuple):
    """Initial level, boundary values per time index and the G-vector builder."""

    initial: np.ndarray
    boundary: Callable[[int], tuple[float, float]]
    g_builder: Callable[[float, float], np.ndarray]


@dataclass
class SolutionSurface:
    """Discrete solution ``values[j, i] = u(x_i, t_j)``, ``t`` being time to maturity."""

    values: np.ndarray
    grid: GridSpec
    option: OptionSpec
    market: MarketParams
    theta: float

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def today(self) -> np.ndarray:
        """Level ``t = T``, i.e. prices at calendar time 0."""
        return self.values[-1]


def theta_optimal(alpha: float) -> float:
    """Largest weight keeping the scheme unconditionally stable, ``(2-2^(1-a))/(3-2^(1-a))``."""
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    p = 2.0 ** (1.0 - alpha)
    return (2.0 - p) / (3.0 - p)


def resolve_theta(theta: Union[float, str, None], alpha: float) -> float:
    if theta is None or (isinstance(theta, str) and theta.lower() == "optimal"):
        return theta_optimal(alpha)
    theta = float(theta)
    if not 0 <= theta <= 1:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    return theta


def memory_weights(alpha: float, N: int, dt: float) -> FracWeights:
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if N < 1 or not dt > 0:
        raise DomainError("need N >= 1 and dt > 0")
    j = np.arange(N + 1, dtype=float)
    if alpha == 1.0:
        b = np.zeros(N + 1)
    else:
        b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    # 0^(1-alpha) is taken as 0 for every alpha, including alpha = 1
    b[0] = 1.0
    return FracWeights(b=b, d=gamma(2.0 - alpha) * dt**alpha)


def _stencil(market: MarketParams, grid: GridSpec) -> tuple[float, float, float]:
    """Per-node coefficients (lower neighbour, centre, upper neighbour) of ``d * L``."""
    a = 0.5 * market.sigma**2
    b = market.r - 0.5 * market.sigma**2
    c = market.r
    d = gamma(2.0 - market.alpha) * grid.dt**market.alpha
    dx = grid.dx
    diff = a * d / dx**2
    adv = b * d / (2.0 * dx)
    return diff - adv, 2.0 * diff + c * d, diff + adv


def assemble_operators(
    market: MarketParams, grid: GridSpec, theta: float
) -> tuple[TridiagonalOperator, TridiagonalOperator, TridiagonalOperator]:
    """Implicit operator ``A``, explicit operator ``B`` and system matrix ``C``."""
    lo, centre, hi = _stencil(market, grid)
    m = grid.n - 1
    ones = np.ones(m)
    sub = np.full(m, lo)
    sup = np.full(m, hi)
    sub[0] = 0.0
    sup[-1] = 0.0
    A = TridiagonalOperator(sub=-sub, diag=(1.0 + centre) * ones, sup=-sup)
    B = TridiagonalOperator(sub=sub.copy(), diag=-centre * ones, sup=sup.copy())
    C = TridiagonalOperator(
        sub=(1.0 - theta) * A.sub,
        diag=theta + (1.0 - theta) * A.diag,
        sup=(1.0 - theta) * A.sup,
    )
    if lo < 0 or hi < 0:
        warnings.warn(
            f"C not diagonally dominant: dx={grid.dx:.4g} too coarse for the drift",
            DiagonalDominanceWarning,
            stacklevel=2,
        )
    return A, B, C


def _check_bounds(option: OptionSpec, grid: GridSpec) -> None:
    b = option.barrier
    if b.needs_lower and abs(grid.x_min - math.log(option.lower)) > _BOUND_TOL:
        raise ConfigError(
            f"{b.value}: x_min={grid.x_min} must equal ln(H-)={math.log(option.lower)}"
        )
    if b.needs_upper and abs(grid.x_max - math.log(option.upper)) > _BOUND_TOL:
        raise ConfigError(
            f"{b.value}: x_max={grid.x_max} must equal ln(H+)={math.log(option.upper)}"
        )


def assemble_conditions(option: OptionSpec, market: MarketParams, grid: GridSpec) -> Conditions:
    """Initial level, boundary values and G-vector for the option's catalogue entry.

    Knock-in variants share the conditions of their knock-out twin.
    """
    _check_bounds(option, grid)
    K, r = option.strike, market.r
    t = grid.t
    x = grid.x
    initial = intrinsic_payoff(option, np.exp(x))

    b = option.barrier.knock_out_twin()
    zeros = np.zeros(grid.N + 1)
    if option.kind is Kind.CALL:
        lower = zeros
        if b in (Barrier.NONE, Barrier.DOWN_OUT):
            # t is time to maturity, so level 0 meets the payoff
            upper = math.exp(grid.x_max) - K * np.exp(-r * t)
        else:
            upper = zeros
    else:
        upper = zeros
        if b in (Barrier.NONE, Barrier.UP_OUT):
            lower = np.full(grid.N + 1, float(K))
        else:
            lower = zeros

    lo_coef, _, hi_coef = _stencil(market, grid)
    m = grid.n - 1

    def boundary(l: int) -> tuple[float, float]:
        return float(lower[l]), float(upper[l])

    def g_builder(u_lo: float, u_hi: float) -> np.ndarray:
        g = np.zeros(m)
        g[0] += lo_coef * u_lo
        g[-1] += hi_coef * u_hi
        return g

    return Conditions(initial=initial, boundary=boundary, g_builder=g_builder)


def tridiagonal_solve(C: TridiagonalOperator, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm (no pivoting)."""
    rhs = np.asarray(rhs, dtype=float)
    m = C.size
    if rhs.shape != (m,):
        raise DomainError(f"rhs has shape {rhs.shape}, expected ({m},)")
    cp = np.empty(m)
    dp = np.empty(m)
    piv = C.diag[0]
    if piv == 0:
        raise SolverError("zero pivot at row 0")
    cp[0] = C.sup[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, m):
        piv = C.diag[i] - C.sub[i] * cp[i - 1]
        if piv == 0:
            raise SolverError(f"zero pivot at row {i}")
        cp[i] = C.sup[i] / piv
        dp[i] = (rhs[i] - C.sub[i] * dp[i - 1]) / piv
    out = np.empty(m)
    out[-1] = dp[-1]
    for i in range(m - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


class TridiagonalFactor:
    """LU factorisation of a constant tridiagonal matrix, reused every step."""

    def __init__(self, C: TridiagonalOperator):
        self._small = C if C.size < 3 else None
        if self._small is not None:
            # scipy's gttrf wrapper mis-sizes its work arrays below 3 rows
            return
        dl, d, du, du2, ipiv, info = lapack.dgttrf(C.sub[1:].copy(), C.diag.copy(), C.sup[:-1].copy())
        if info > 0:
            raise SolverError(f"zero pivot at row {info - 1}")
        self._lu = (dl, d, du, du2, ipiv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._small is not None:
            return tridiagonal_solve(self._small, rhs)
        x, info = lapack.dgttrs(*self._lu, rhs)
        if info != 0:
            raise SolverError(f"dgttrs failed with info={info}")
        return x


def _far_history(hist_coef: np.ndarray, inner: np.ndarray, start: int, size: int) -> Optional[np.ndarray]:
    """``sum_{i=1}^{start} hist_coef[k-i] u^i`` for ``k = start .. start+size-1``."""
    if start == 0:
        return None
    k = start + np.arange(size)[:, None]
    i = np.arange(1, start + 1)[None, :]
    return hist_coef[k - i] @ inner[1 : start + 1]


def _march(
    market: MarketParams,
    option: OptionSpec,
    grid: GridSpec,
    theta: float,
    project: bool,
    conditions: Optional[Conditions] = None,
) -> SolutionSurface:
    theta = resolve_theta(theta, market.alpha)
    w = memory_weights(market.alpha, grid.N, grid.dt)
    _, B, C = assemble_operators(market, grid, theta)
    if conditions is None:
        conditions = assemble_conditions(option, market, grid)
    initial, boundary, g_builder = conditions
    lu = TridiagonalFactor(C)

    n, N = grid.n, grid.N
    U = np.empty((N + 1, n + 1))
    U[0] = initial
    for l in range(1, N + 1):
        U[l, 0], U[l, n] = boundary(l)
    # contiguous interior copy keeps the history product a dense BLAS call
    inner = np.empty((N + 1, n - 1))
    inner[0] = initial[1:n]
    obstacle = inner[0]
    hist_coef = w.b[:-1] - w.b[1:]
    classical = market.alpha == 1.0

    # level 0 is the payoff itself, boundary nodes included
    g_prev = g_builder(initial[0], initial[n])
    far = None
    for k in range(N):
        if classical:
            rhs = inner[k].copy()
        else:
            # history from levels before the current block comes from one
            # Toeplitz GEMM per block, the in-block tail from a short dot
            q = k % _HISTORY_BLOCK
            start = k - q
            if q == 0:
                far = _far_history(hist_coef, inner, start, min(_HISTORY_BLOCK, N - start))
            rhs = w.b[k] * inner[0]
            if far is not None:
                rhs += far[q]
            if q:
                rhs += hist_coef[q - 1 :: -1] @ inner[start + 1 : k + 1]
        g_next = g_builder(*boundary(k + 1))
        rhs += (1.0 - theta) * g_next
        if theta:
            rhs += theta * (g_prev + B.matvec(inner[k]))
        new = lu.solve(rhs)
        if project:
            np.maximum(new, obstacle, out=new)
        if not np.all(np.isfinite(new)):
            raise SolverError(f"non-finite values at time step {k + 1}")
        inner[k + 1] = new
        g_prev = g_next
    U[:, 1:n] = inner
    return SolutionSurface(values=U, grid=grid, option=option, market=market, theta=theta)


def _require_grid_variant(option: OptionSpec) -> None:
    if option.barrier.is_knock_in:
        raise ConfigError("knock-in options are priced through in-out parity, not a grid solve")


def solve_european(
    market: MarketParams, option: OptionSpec, grid: GridSpec, theta: Union[float, str] = "optimal"
) -> SolutionSurface:
    """March the European scheme (no early-exercise projection)."""
    _require_grid_variant(option)
    return _march(market, option, grid, theta, project=False)


def solve_american_put(
    market: MarketParams, option: OptionSpec, grid: GridSpec, theta: Union[float, str] = "optimal"
) -> SolutionSurface:
    """March the projected scheme for an American put.

    Calls are not accepted: without dividends the American call equals its
    European counterpart, use :func:`solve_european`.
    """
    if option.kind is not Kind.PUT:
        raise ConfigError("solve_american_put handles puts; American calls equal European calls")
    _require_grid_variant(option)
    return _march(market, option, grid, theta, project=True)


def solve_projected(
    market: MarketParams, option: OptionSpec, grid: GridSpec, theta: Union[float, str] = "optimal"
) -> SolutionSurface:
    """Projected scheme for any payoff; lets tests check the call obstacle never binds."""
    _require_grid_variant(option)
    return _march(market, option, grid, theta, project=True)


def solve_with_conditions(
    market: MarketParams,
    grid: GridSpec,
    conditions: Conditions,
    theta: Union[float, str] = "optimal",
    project: bool = False,
    option: Optional[OptionSpec] = None,
) -> SolutionSurface:
    """March caller-supplied initial/boundary data, e.g. a linear combination of payoffs."""
    return _march(market, option, grid, theta, project, conditions)


def solve(
    market: MarketParams, option: OptionSpec, grid: GridSpec, theta: Union[float, str] = "optimal"
) -> SolutionSurface:
    if option.style is Style.AMERICAN and option.kind is Kind.PUT:
        return solve_american_put(market, option, grid, theta)
    return solve_european(market, option, grid, theta)


def price_at(surface: SolutionSurface, z0: float) -> float:
    """Today's price at spot ``z0``, linear in ``ln z`` between nodes."""
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0}")
    x0 = math.log(z0)
    g = surface.grid
    if not g.x_min <= x0 <= g.x_max:
        if surface.option.barrier.is_knock_out:
            return 0.0
        raise DomainError(f"ln z0={x0:.4g} outside grid [{g.x_min:.4g}, {g.x_max:.4g}]")
    return float(np.interp(x0, g.x, surface.today))


def price_fd(
    market: MarketParams,
    option: OptionSpec,
    n: int,
    N: int,
    theta: Union[float, str] = "optimal",
    x_min: float = DEFAULT_X_MIN,
    x_max: float = DEFAULT_X_MAX,
    z0: Optional[float] = None,
    parity_tol: float = 1e-6,
) -> float:
    """Price any catalogue option at ``z0`` (defaults to the market spot).

    ``x_min``/``x_max`` bound the non-barrier sides. Knock-in prices are
    vanilla minus knock-out, the vanilla leg solved on ``[x_min, x_max]``.
    """
    z0 = market.z0 if z0 is None else z0
    if option.barrier.is_knock_in:
        out_opt = option.with_(barrier=option.barrier.knock_out_twin())
        van_opt = option.with_(barrier=Barrier.NONE, lower=None, upper=None)
        knock_out = price_fd(market, out_opt, n, N, theta, x_min, x_max, z0)
        vanilla = price_fd(market, van_opt, n, N, theta, x_min, x_max, z0)
        return in_out_parity(vanilla, knock_out, tol=parity_tol)
    grid = GridSpec.for_option(option, n, N, x_min, x_max)
    return price_at(solve(market, option, grid, theta), z0)
