"""Alpha-stable subordinators, their inverses and subdiffusive GBM paths.

The asset is ``Z_alpha(t) = z0 exp(nu S(t) + sigma W(S(t)))`` where ``S`` is
the inverse of an alpha-stable subordinator ``U`` with
``E exp(-u U(tau)) = exp(-tau u^alpha)``, independent of the Brownian motion
``W``. ``S`` is obtained by inverting ``U`` sampled on an operational grid
``k * dtau``.

Every path owns a counter-based (Philox) stream keyed by ``(seed, path
index)``, so an ensemble is bit-identical however it is split across workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import gamma

from .contracts import MarketParams
from .errors import DomainError

# strictly inside (0, 1) after adding half an ulp of 1.0
_HALF_ULP = 2.0**-54
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int

    def generators(self) -> tuple[np.random.Generator, np.random.Generator]:
        """Independent generators for the subordinator and the Brownian driver.

        Both share the Philox key ``(seed, stream_id)`` and start 2^192 draws
        apart in counter space.
        """
        key = [int(self.seed) & _U64, int(self.stream_id) & _U64]
        sub = np.random.Philox(key=key, counter=[0, 0, 0, 0])
        brown = np.random.Philox(key=key, counter=[0, 0, 0, 1])
        return np.random.Generator(sub), np.random.Generator(brown)


@dataclass
class PathEnsemble:
    times: np.ndarray
    values: np.ndarray
    operational_times: np.ndarray
    seed: int
    alpha: float
    drift: float

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> Path:
        """One row per (path, node): ``path,t,S_alpha,Z``."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "t", "S_alpha", "Z"])
            for j in range(self.n_paths):
                for t, s, z in zip(self.times, self.operational_times[j], self.values[j]):
                    w.writerow([j, repr(float(t)), repr(float(s)), repr(float(z))])
        return path


def stable_subordinator_increment(alpha: float, dtau: float, rng: np.random.Generator, size=None):
    """Increment ``U(tau + dtau) - U(tau)`` via Kanter's representation.

    With ``V`` uniform on (0, pi) and ``E`` unit exponential,
    ``X = sin(aV) / sin(V)^(1/a) * (sin((1-a)V) / E)^((1-a)/a)`` has Laplace
    transform ``exp(-u^a)``; the increment is ``dtau^(1/a) X``.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"stable subordinator needs alpha in (0, 1), got {alpha}")
    if not dtau > 0:
        raise DomainError(f"dtau must be positive, got {dtau}")
    v = math.pi * (rng.random(size) + _HALF_ULP)
    e = rng.standard_exponential(size)
    # same expression, with the two powers folded into one exp
    expo = (-np.log(np.sin(v)) + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * v) / e)) / alpha
    return dtau ** (1.0 / alpha) * np.sin(alpha * v) * np.exp(expo)


def inverse_subordinator_path(
    alpha: float,
    T: float,
    m: int,
    dtau: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """``S(t_i)`` on ``t_i = i T / m``, ``S(t) = dtau * min{k : U(k dtau) > t}``.

    ``S(0)`` is set to 0. For ``alpha = 1`` the subordinator is the identity
    and ``S(t) = t`` exactly.
    """
    t = np.linspace(0.0, T, m + 1)
    if alpha == 1.0:
        return t
    if rng is None:
        rng = np.random.default_rng()
    dtau = T / (10 * m) if dtau is None else dtau
    # first draw covers the mean passage E S(T) = T^a / Gamma(1+a), then top up
    expected = T**alpha / gamma(1.0 + alpha) / dtau
    chunk = int(1.05 * expected) + 16
    pieces = []
    level = 0.0
    while level <= T:
        cum = level + np.cumsum(stable_subordinator_increment(alpha, dtau, rng, chunk))
        pieces.append(cum)
        level = cum[-1]
        chunk = int(0.25 * expected) + 16
    u = np.concatenate(pieces) if len(pieces) > 1 else pieces[0]
    s = dtau * (np.searchsorted(u, t, side="right") + 1.0)
    s[0] = 0.0
    return s


def subdiffusive_gbm_paths(
    market: MarketParams,
    T: float,
    m: int,
    M: int,
    seed: int,
    drift: Optional[float] = None,
    dtau: Optional[float] = None,
    workers: int = 1,
) -> PathEnsemble:
    """``M`` paths of the subdiffusive GBM on ``m + 1`` calendar nodes.

    ``drift`` is the operational-time log drift, ``r - sigma^2 / 2`` by default.
    """
    if m < 1 or M < 1:
        raise DomainError("need m >= 1 and M >= 1")
    nu = market.r - 0.5 * market.sigma**2 if drift is None else float(drift)
    times = np.linspace(0.0, T, m + 1)
    ops = np.empty((M, m + 1))
    logz = np.empty((M, m + 1))

    def fill(ids):
        for j in ids:
            rng_s, rng_b = RngStream(seed, j).generators()
            s = inverse_subordinator_path(market.alpha, T, m, dtau, rng_s)
            w = np.zeros(m + 1)
            np.cumsum(np.sqrt(np.diff(s)) * rng_b.standard_normal(m), out=w[1:])
            ops[j] = s
            logz[j] = nu * s + market.sigma * w

    if workers > 1:
        blocks = np.array_split(np.arange(M), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        fill(range(M))
    values = market.z0 * np.exp(logz)
    return PathEnsemble(
        times=times, values=values, operational_times=ops, seed=seed, alpha=market.alpha, drift=nu
    )
