import numpy as np
import pytest

from fracbs.contracts import MarketParams, OptionSpec
from fracbs.errors import ConfigError, RegressionError
from fracbs.lsm import LsConfig, laguerre_basis, ls_price_american_put, regress_continuation
from fracbs.oracles import binomial_american_put
from fracbs.subordinator import subdiffusive_gbm_paths

PUT = OptionSpec("put", "american", strike=1.0, maturity=1.0)
FAST = LsConfig(M=4000, m=25)


def test_basis_examples():
    np.testing.assert_allclose(laguerre_basis(0.0), [1.0, 1.0, 1.0])
    np.testing.assert_allclose(laguerre_basis(1.0), [1.0, 0.0, -1.5])
    np.testing.assert_allclose(laguerre_basis(2.0), [1.0, -1.0, -5.0])
    assert laguerre_basis(np.zeros(5), 2).shape == (5, 2)


def test_extended_basis():
    x = np.array([0.0, 1.0, 2.0])
    B = laguerre_basis(x, 4, extended=True)
    np.testing.assert_allclose(B[:, 3], (-(x**3) + 9 * x**2 - 18 * x + 6) / 6)
    with pytest.raises(ConfigError):
        laguerre_basis(x, 4)


def test_regression_recovers_exact_coefficients():
    x = np.linspace(0.1, 2.0, 30)
    beta = np.array([2.0, 3.0, -0.5])
    y = laguerre_basis(x) @ beta
    np.testing.assert_allclose(regress_continuation(x, y), beta, atol=1e-12)


def test_regression_failures():
    with pytest.raises(RegressionError):
        regress_continuation(np.array([0.5, 0.6]), np.array([1.0, 2.0]))
    with pytest.raises(RegressionError):
        regress_continuation(np.full(10, 0.5), np.arange(10.0))
    with pytest.raises(ConfigError):
        regress_continuation(np.ones(4), np.ones(5))


def test_config_validation():
    with pytest.raises(ConfigError):
        LsConfig(M=10)
    with pytest.raises(ConfigError):
        LsConfig(m=1)
    with pytest.raises(ConfigError):
        LsConfig(discounting="continuous")
    with pytest.raises(ConfigError):
        LsConfig(itm_only=False)


def test_rejects_calls_and_barriers():
    m = MarketParams(r=0.04, sigma=0.3, alpha=1.0, z0=1.0)
    with pytest.raises(ConfigError):
        ls_price_american_put(m, OptionSpec("call", "american", 1.0, 1.0), FAST)
    with pytest.raises(ConfigError):
        ls_price_american_put(m, PUT.with_(barrier="down_out", lower=0.5), FAST)


def test_deterministic_given_seed():
    m = MarketParams(r=0.04, sigma=0.5, alpha=0.7, z0=1.0)
    a = ls_price_american_put(m, PUT, FAST, seed=5)
    b = ls_price_american_put(m, PUT, FAST, seed=5, workers=3)
    assert a.price == b.price and a.std_error == b.std_error
    c = ls_price_american_put(m, PUT, FAST, seed=6)
    assert c.price != a.price


def test_exercise_times_on_calendar_grid():
    m = MarketParams(r=0.04, sigma=0.5, alpha=0.7, z0=1.0)
    res = ls_price_american_put(m, PUT, FAST, seed=1)
    grid = np.linspace(0, 1.0, FAST.m + 1)
    assert res.exercise_times.shape == (FAST.M,)
    assert np.all(np.isin(res.exercise_times, grid[1:]))


@pytest.mark.parametrize("alpha", [1.0, 0.7])
def test_american_dominates_european(alpha):
    m = MarketParams(r=0.06, sigma=0.4, alpha=alpha, z0=1.0)
    res = ls_price_american_put(m, PUT, FAST, seed=2)
    assert res.price >= res.european_price - 3 * res.european_std_error


def test_classical_limit_against_binomial():
    m = MarketParams(r=0.06, sigma=0.4, alpha=1.0, z0=1.0)
    res = ls_price_american_put(m, PUT, LsConfig(M=20_000, m=50), seed=3)
    ref = binomial_american_put(m, PUT, 2000)
    # discrete exercise and regression bias sit below the tree value
    assert abs(res.price - ref) < 3 * res.std_error + 0.004


def test_zero_rate_matches_european():
    m = MarketParams(r=0.0, sigma=0.4, alpha=0.7, z0=1.0)
    res = ls_price_american_put(m, PUT, FAST, seed=4)
    assert abs(res.price - res.european_price) < 3 * res.std_error


def test_discounting_conventions_coincide_classically():
    m = MarketParams(r=0.05, sigma=0.4, alpha=1.0, z0=1.0)
    op = ls_price_american_put(m, PUT, FAST, seed=8)
    cal = ls_price_american_put(m, PUT, LsConfig(M=FAST.M, m=FAST.m, discounting="calendar"), seed=8)
    assert op.price == pytest.approx(cal.price, rel=1e-12)


def test_precomputed_paths():
    m = MarketParams(r=0.04, sigma=0.5, alpha=0.7, z0=1.0)
    paths = subdiffusive_gbm_paths(m, 1.0, FAST.m, FAST.M, seed=7)
    a = ls_price_american_put(m, PUT, FAST, paths=paths)
    b = ls_price_american_put(m, PUT, FAST, seed=7)
    assert a.price == b.price
