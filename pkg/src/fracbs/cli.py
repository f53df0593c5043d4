"""Experiment runner: INI-style run configs in, CSV report rows out.

Config sections (all keys lower case)::

    [market]  r, sigma, alpha, z0
    [option]  kind, style, strike, maturity, barrier, lower, upper
    [grid]    n, time_steps  or  resolutions = 20x20, 40x40, ...;  x_min, x_max
    [scheme]  theta = optimal | <float> | comma list of either
    [method]  method = fd | ls | oracle;  oracle = <name>;  reference = <oracle name> | <float> | fd:NxN
    [ls]      paths, steps, basis_size, discounting, dtau, seed
    [sweep]   axis = z0 | strike | theta | alpha | maturity;  values = ...  or  start, stop, step
    [output]  path

Subcommands: ``price``, ``sweep``, ``table7``, ``table8``, ``compare-fd-ls``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from . import oracles
from .contracts import Barrier, MarketParams, OptionSpec, Style
from .errors import ConfigError, FracBSError, SolverError
from .fd import DEFAULT_X_MAX, DEFAULT_X_MIN, price_fd, resolve_theta, theta_optimal
from .lsm import LsConfig, ls_price_american_put

log = logging.getLogger("fracbs")

METHODS = ("fd", "ls", "oracle")
SWEEP_AXES = {
    "z0": "z0",
    "spot": "z0",
    "k": "strike",
    "strike": "strike",
    "theta": "theta",
    "alpha": "alpha",
    "t": "maturity",
    "maturity": "maturity",
}
TABLE7_RESOLUTIONS = [(20, 20), (40, 40), (100, 100), (200, 200), (500, 500), (1500, 1500)]
TABLE8_ALPHAS = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]

Theta = Union[float, str]


@dataclass(frozen=True)
class Sweep:
    axis: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams
    option: OptionSpec
    method: str = "fd"
    resolutions: tuple[tuple[int, int], ...] = ((200, 200),)
    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX
    thetas: tuple[Theta, ...] = ("optimal",)
    oracle: Optional[str] = None
    reference: Optional[str] = None
    ls: Optional[LsConfig] = None
    seed: int = 0
    sweep: Optional[Sweep] = None
    output: Optional[Path] = None
    workers: int = 1
    repeat: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"[method] method: expected one of {METHODS}, got {self.method!r}")
        if self.method == "oracle" and not self.oracle:
            raise ConfigError("[method] oracle: required when method = oracle")
        if not self.resolutions:
            raise ConfigError("[grid]: at least one resolution is required")
        if self.repeat < 1 or self.workers < 1:
            raise ConfigError("repeat and workers must be >= 1")


# --------------------------------------------------------------------------- parsing


def _get(cp, section, key, conv, default=...):
    if not cp.has_option(section, key):
        if default is ...:
            raise ConfigError(f"[{section}] {key}: missing")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from None


def _split(raw: str) -> list[str]:
    return [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]


def _resolution(token: str) -> tuple[int, int]:
    n, _, N = token.lower().partition("x")
    return int(n), int(N or n)


def _theta(token: str) -> Theta:
    token = token.strip()
    return "optimal" if token.lower() == "optimal" else float(token)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in ("market", "option"):
        if not cp.has_section(section):
            raise ConfigError(f"{source}: missing section [{section}]")
    try:
        market = MarketParams(
            r=_get(cp, "market", "r", float),
            sigma=_get(cp, "market", "sigma", float),
            alpha=_get(cp, "market", "alpha", float, 1.0),
            z0=_get(cp, "market", "z0", float),
        )
    except FracBSError as exc:
        raise ConfigError(f"[market]: {exc}") from None
    opt_lower = _get(cp, "option", "lower", float, None)
    opt_upper = _get(cp, "option", "upper", float, None)
    try:
        option = OptionSpec(
            kind=_get(cp, "option", "kind", str.lower),
            style=_get(cp, "option", "style", str.lower, "european"),
            strike=_get(cp, "option", "strike", float),
            maturity=_get(cp, "option", "maturity", float),
            barrier=_get(cp, "option", "barrier", str.lower, "none"),
            lower=opt_lower,
            upper=opt_upper,
        )
    except ValueError as exc:
        raise ConfigError(f"[option]: {exc}") from None

    kw: dict[str, Any] = {}
    if cp.has_section("grid"):
        if cp.has_option("grid", "resolutions"):
            kw["resolutions"] = tuple(
                _get(cp, "grid", "resolutions", lambda s: [_resolution(t) for t in _split(s)])
            )
        elif cp.has_option("grid", "n"):
            n = _get(cp, "grid", "n", int)
            kw["resolutions"] = ((n, _get(cp, "grid", "time_steps", int, n)),)
        kw["x_min"] = _get(cp, "grid", "x_min", float, DEFAULT_X_MIN)
        kw["x_max"] = _get(cp, "grid", "x_max", float, DEFAULT_X_MAX)
    if cp.has_section("scheme"):
        kw["thetas"] = tuple(_get(cp, "scheme", "theta", lambda s: [_theta(t) for t in _split(s)]))
    if cp.has_section("method"):
        kw["method"] = _get(cp, "method", "method", str.lower, "fd")
        kw["oracle"] = _get(cp, "method", "oracle", str, None)
        kw["reference"] = _get(cp, "method", "reference", str, None)
        kw["seed"] = _get(cp, "method", "seed", int, 0)
    if cp.has_section("ls"):
        try:
            kw["ls"] = LsConfig(
                M=_get(cp, "ls", "paths", int, 3000),
                m=_get(cp, "ls", "steps", int, 100),
                basis_size=_get(cp, "ls", "basis_size", int, 3),
                discounting=_get(cp, "ls", "discounting", str.lower, "operational"),
                dtau=_get(cp, "ls", "dtau", float, None),
            )
        except ConfigError as exc:
            raise ConfigError(f"[ls]: {exc}") from None
        kw["seed"] = _get(cp, "ls", "seed", int, kw.get("seed", 0))
    if cp.has_section("sweep"):
        axis_raw = _get(cp, "sweep", "axis", str.lower)
        if axis_raw not in SWEEP_AXES:
            raise ConfigError(f"[sweep] axis: unknown axis {axis_raw!r}")
        if cp.has_option("sweep", "values"):
            values = _get(cp, "sweep", "values", lambda s: [float(t) for t in _split(s)])
        else:
            start = _get(cp, "sweep", "start", float)
            stop = _get(cp, "sweep", "stop", float)
            step = _get(cp, "sweep", "step", float)
            if not step > 0 or stop < start:
                raise ConfigError("[sweep]: need step > 0 and stop >= start")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        kw["sweep"] = Sweep(axis=SWEEP_AXES[axis_raw], values=tuple(values))
    if cp.has_section("output"):
        p = _get(cp, "output", "path", str, None)
        kw["output"] = Path(p) if p else None
    cfg = RunConfig(market=market, option=option, **kw)
    if cfg.sweep is not None:
        _validate_sweep(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(text, source=str(path))


def _validate_sweep(cfg: RunConfig) -> None:
    for v in cfg.sweep.values:
        try:
            _apply_axis(cfg, cfg.sweep.axis, v)
        except FracBSError as exc:
            raise ConfigError(f"[sweep] value {v}: {exc}") from None
    if cfg.sweep.axis == "theta" and cfg.method != "fd":
        raise ConfigError("[sweep] axis theta needs method = fd")


def _apply_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    if axis == "z0":
        return replace(cfg, market=cfg.market.with_(z0=value))
    if axis == "alpha":
        return replace(cfg, market=cfg.market.with_(alpha=value))
    if axis == "strike":
        return replace(cfg, option=cfg.option.with_(strike=value))
    if axis == "maturity":
        return replace(cfg, option=cfg.option.with_(maturity=value))
    if axis == "theta":
        resolve_theta(value, cfg.market.alpha)
        return replace(cfg, thetas=(value,))
    raise ConfigError(f"unknown sweep axis {axis!r}")


# --------------------------------------------------------------------------- running


def _reference(cfg: RunConfig) -> Optional[float]:
    ref = cfg.reference
    if ref is None:
        return None
    if ref.startswith("fd:"):
        n, N = _resolution(ref[3:])
        return price_fd(cfg.market, cfg.option, n, N, "optimal", cfg.x_min, cfg.x_max)
    try:
        return float(ref)
    except ValueError:
        pass
    return oracles.oracle_result(ref, cfg.market, cfg.option).price


def _timed(fn: Callable[[], Any], repeat: int) -> tuple[Any, float]:
    elapsed = 0.0
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        elapsed += time.perf_counter() - t0
    return out, elapsed / repeat


def _echo(cfg: RunConfig) -> dict:
    m, o = cfg.market, cfg.option
    return {
        "method": cfg.method,
        "kind": o.kind.value,
        "style": o.style.value,
        "barrier": o.barrier.value,
        "lower": o.lower,
        "upper": o.upper,
        "strike": o.strike,
        "maturity": o.maturity,
        "r": m.r,
        "sigma": m.sigma,
        "alpha": m.alpha,
        "z0": m.z0,
    }


def _single_rows(cfg: RunConfig) -> list[dict]:
    ref = _reference(cfg)
    rows = []
    if cfg.method == "oracle":
        price, secs = _timed(lambda: oracles.oracle_result(cfg.oracle, cfg.market, cfg.option).price, cfg.repeat)
        rows.append({**_echo(cfg), "oracle": cfg.oracle, "price": price, "runtime": secs})
    elif cfg.method == "ls":
        ls_cfg = cfg.ls or LsConfig()
        res, secs = _timed(
            lambda: ls_price_american_put(cfg.market, cfg.option, ls_cfg, seed=cfg.seed), cfg.repeat
        )
        rows.append(
            {
                **_echo(cfg),
                "seed": cfg.seed,
                "paths": ls_cfg.M,
                "steps": ls_cfg.m,
                "basis_size": ls_cfg.basis_size,
                "discounting": ls_cfg.discounting,
                "price": res.price,
                "std_error": res.std_error,
                "runtime": secs,
            }
        )
    else:
        for n, N in cfg.resolutions:
            for th in cfg.thetas:
                theta = resolve_theta(th, cfg.market.alpha)
                price, secs = _timed(
                    lambda: price_fd(cfg.market, cfg.option, n, N, theta, cfg.x_min, cfg.x_max),
                    cfg.repeat,
                )
                rows.append(
                    {
                        **_echo(cfg),
                        "n": n,
                        "N": N,
                        "x_min": cfg.x_min,
                        "x_max": cfg.x_max,
                        "theta": theta,
                        "theta_spec": th if isinstance(th, str) else "value",
                        "price": price,
                        "runtime": secs,
                    }
                )
    for row in rows:
        if ref is not None:
            row["reference"] = ref
            row["rel_error"] = abs(row["price"] - ref) / abs(ref) if ref else float("nan")
    return rows


def _pmap(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run(config: RunConfig) -> list[dict]:
    """All report rows of a config, in input order."""
    if config.sweep is None:
        jobs = [config]
    else:
        jobs = [_apply_axis(config, config.sweep.axis, v) for v in config.sweep.values]
    if config.sweep is None and config.method == "fd" and len(config.resolutions) > 1:
        jobs = [replace(config, resolutions=(res,)) for res in config.resolutions]
    chunks = _pmap(_single_rows, jobs, config.workers)
    return [row for chunk in chunks for row in chunk]


def config_from_row(row: dict, seed: Optional[int] = None) -> RunConfig:
    """Rebuild the single run that produced ``row``."""

    def opt(v):
        return None if v in (None, "", "None") else float(v)

    market = MarketParams(r=float(row["r"]), sigma=float(row["sigma"]), alpha=float(row["alpha"]), z0=float(row["z0"]))
    option = OptionSpec(
        kind=row["kind"],
        style=row["style"],
        strike=float(row["strike"]),
        maturity=float(row["maturity"]),
        barrier=row["barrier"],
        lower=opt(row.get("lower")),
        upper=opt(row.get("upper")),
    )
    method = row["method"]
    kw: dict[str, Any] = {}
    if method == "fd":
        kw.update(
            resolutions=((int(row["n"]), int(row["N"])),),
            x_min=float(row["x_min"]),
            x_max=float(row["x_max"]),
            thetas=(float(row["theta"]),),
        )
    elif method == "ls":
        kw["ls"] = LsConfig(
            M=int(row["paths"]),
            m=int(row["steps"]),
            basis_size=int(row["basis_size"]),
            discounting=row["discounting"],
        )
        kw["seed"] = int(row["seed"]) if seed is None else seed
    else:
        kw["oracle"] = row["oracle"]
    return RunConfig(market=market, option=option, method=method, **kw)


# --------------------------------------------------------------------------- golden tables


def table7_rows(
    market: MarketParams,
    option: OptionSpec,
    resolutions=TABLE7_RESOLUTIONS,
    x_max: float = 100.0,
    reference: Optional[float] = None,
    workers: int = 1,
    repeat: int = 1,
) -> list[dict]:
    """Relative errors of the implicit and optimal schemes against the closed form."""
    market = market.with_(alpha=1.0)
    ref = oracles.bs_down_and_out_call(market, option) if reference is None else reference
    jobs = [(n, N, th) for th in (0.0, "optimal") for n, N in resolutions]

    def one(job):
        n, N, th = job
        theta = resolve_theta(th, 1.0)
        price, secs = _timed(lambda: price_fd(market, option, n, N, theta, x_max=x_max), repeat)
        return {
            "n": n,
            "N": N,
            "theta": theta,
            "theta_spec": th if isinstance(th, str) else "value",
            "x_max": x_max,
            "price": price,
            "reference": ref,
            "rel_error": abs(price - ref) / ref,
            "runtime": secs,
        }

    return _pmap(one, jobs, workers)


def table8_rows(
    market: MarketParams,
    option: OptionSpec,
    alphas=TABLE8_ALPHAS,
    diff_resolutions=((20, 20), (200, 200), (1500, 1500)),
    error_resolutions=((40, 40), (100, 100)),
    reference_resolution=(3000, 3000),
    x_max: float = 100.0,
    workers: int = 1,
) -> list[dict]:
    """One row per alpha: optimal theta, scheme differences and relative errors.

    The exact price is the optimal-scheme value at ``reference_resolution``.
    """

    def price(alpha, res, theta):
        return price_fd(market.with_(alpha=alpha), option, res[0], res[1], theta, x_max=x_max)

    def one(alpha):
        row: dict[str, Any] = {"alpha": alpha, "theta_opt": theta_optimal(alpha)}
        t0 = time.perf_counter()
        ref_opt = price(alpha, reference_resolution, "optimal")
        ref_imp = price(alpha, reference_resolution, 0.0)
        for res in diff_resolutions:
            tag = "x".join(map(str, res))
            p_opt, p_imp = price(alpha, res, "optimal"), price(alpha, res, 0.0)
            row[f"rel_diff_{tag}"] = abs(p_opt - p_imp) / abs(p_imp)
        for label, theta in (("implicit", 0.0), ("opt", "optimal")):
            for res in error_resolutions:
                tag = "x".join(map(str, res))
                row[f"rel_error_{label}_{tag}"] = abs(price(alpha, res, theta) - ref_opt) / ref_opt
        tag = "x".join(map(str, reference_resolution))
        row[f"rel_diff_{tag}"] = abs(ref_opt - ref_imp) / ref_opt
        row[f"price_opt_{tag}"] = ref_opt
        row[f"price_implicit_{tag}"] = ref_imp
        row["runtime"] = time.perf_counter() - t0
        return row

    return _pmap(one, list(alphas), workers)


def compare_fd_ls_rows(
    market: MarketParams,
    option: OptionSpec,
    maturities: Sequence[float],
    alphas: Sequence[float],
    n: int = 200,
    N: int = 150,
    theta: Theta = "optimal",
    ls: LsConfig = LsConfig(),
    seed: int = 0,
    workers: int = 1,
) -> list[dict]:
    """FD and LS American put prices over a (maturity, alpha) grid."""
    jobs = [(T, a) for a in alphas for T in maturities]

    def one(job):
        T, a = job
        mk = market.with_(alpha=a)
        opt = option.with_(maturity=T)
        fd_price, fd_secs = _timed(lambda: price_fd(mk, opt, n, N, theta), 1)
        res = ls_price_american_put(mk, opt, ls, seed=seed)
        return {
            "alpha": a,
            "maturity": T,
            "fd_price": fd_price,
            "fd_runtime": fd_secs,
            "ls_price": res.price,
            "ls_std_error": res.std_error,
            "ls_runtime": res.runtime,
            "z_score": (res.price - fd_price) / res.std_error if res.std_error > 0 else float("nan"),
        }

    return _pmap(one, jobs, workers)


# --------------------------------------------------------------------------- output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(rows: Sequence[dict], path) -> Path:
    """Write rows as UTF-8 CSV, header first, columns in first-seen order."""
    if not rows:
        raise ConfigError("no report rows to write")
    header: list[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in header])
    return path


def _print_rows(rows: Sequence[dict], stream=None) -> None:
    w = csv.writer(stream or sys.stdout)
    header = list(rows[0].keys()) if rows else []
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(k)) for k in header])


# --------------------------------------------------------------------------- entry point


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracbs", description="Subdiffusive Black-Scholes option pricing")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("price", "single run"),
        ("sweep", "parameter sweep along the [sweep] axis"),
        ("table7", "implicit vs optimal scheme errors, alpha = 1"),
        ("table8", "implicit vs optimal scheme differences, fractional alpha"),
        ("compare-fd-ls", "FD vs Longstaff-Schwartz American put prices"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", type=Path, default=None)
        sp.add_argument("--repeat", type=int, default=None, help="average runtimes over repeats")
        if name == "table8":
            sp.add_argument("--alphas", type=str, default=None)
            sp.add_argument("--reference", type=str, default="3000x3000")
        if name == "compare-fd-ls":
            sp.add_argument("--maturities", type=str, default="0.1,0.5,1,2,4")
            sp.add_argument("--alphas", type=str, default="0.7,0.9,1")
    return p


def _overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.workers is not None:
        kw["workers"] = args.workers
    if args.repeat is not None:
        kw["repeat"] = args.repeat
    if args.out is not None:
        kw["output"] = args.out
    return replace(cfg, **kw) if kw else cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _overrides(load_config(args.config), args)
        if args.command == "price":
            if cfg.sweep is not None:
                raise ConfigError("price: config has a [sweep] section, use the sweep command")
            rows = run(cfg)
        elif args.command == "sweep":
            if cfg.sweep is None:
                raise ConfigError("sweep: config lacks a [sweep] section")
            rows = run(cfg)
        elif args.command == "table7":
            rows = table7_rows(
                cfg.market,
                cfg.option,
                resolutions=cfg.resolutions if len(cfg.resolutions) > 1 else TABLE7_RESOLUTIONS,
                x_max=cfg.x_max,
                workers=cfg.workers,
                repeat=cfg.repeat,
            )
        elif args.command == "table8":
            alphas = [float(a) for a in _split(args.alphas)] if args.alphas else TABLE8_ALPHAS
            rows = table8_rows(
                cfg.market,
                cfg.option,
                alphas=alphas,
                reference_resolution=_resolution(args.reference),
                x_max=cfg.x_max,
                workers=cfg.workers,
            )
        else:
            n, N = cfg.resolutions[0]
            rows = compare_fd_ls_rows(
                cfg.market,
                cfg.option,
                maturities=[float(t) for t in _split(args.maturities)],
                alphas=[float(a) for a in _split(args.alphas)],
                n=n,
                N=N,
                theta=cfg.thetas[0],
                ls=cfg.ls or LsConfig(),
                seed=cfg.seed,
                workers=cfg.workers,
            )
        if cfg.output is not None:
            emit_csv(rows, cfg.output)
            log.info("wrote %d rows to %s", len(rows), cfg.output)
        else:
            _print_rows(rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FracBSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
