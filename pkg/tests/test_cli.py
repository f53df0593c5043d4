import csv
import math

import pytest

from fracbs.cli import (
    config_from_row,
    emit_csv,
    main,
    parse_config,
    run,
    table7_rows,
    table8_rows,
)
from fracbs.contracts import MarketParams, OptionSpec
from fracbs.errors import ConfigError
from fracbs.fd import theta_optimal

BASE = """
[market]
r = 0.04
sigma = 0.5
alpha = 0.7
z0 = 1.0

[option]
kind = put
style = american
strike = 1.0
maturity = 1.0
"""


def cfg(extra=""):
    return parse_config(BASE + extra)


def test_defaults():
    c = cfg()
    assert c.method == "fd" and c.resolutions == ((200, 200),) and c.thetas == ("optimal",)
    assert c.market.alpha == 0.7 and c.option.style.value == "american"


def test_resolution_list_gives_one_row_per_grid_and_theta():
    c = cfg("[grid]\nresolutions = 20x10, 40x20, 60\nx_min = -5\nx_max = 3\n[scheme]\ntheta = 0, optimal\n")
    rows = run(c)
    assert [(r["n"], r["N"]) for r in rows] == [(20, 10), (20, 10), (40, 20), (40, 20), (60, 60), (60, 60)]
    assert rows[1]["theta"] == theta_optimal(0.7)
    assert all("rel_error" not in r for r in rows)


def test_optimal_theta_is_exact():
    rows = run(cfg("[grid]\nn = 30\ntime_steps = 10\nx_min = -5\nx_max = 3\n"))
    assert rows[0]["theta"] == theta_optimal(0.7)


def test_parallel_rows_keep_input_order():
    text = "[grid]\nresolutions = 40x10, 20x10, 30x10\nx_min = -5\nx_max = 3\n"
    serial = run(cfg(text))
    from dataclasses import replace

    parallel = run(replace(cfg(text), workers=3))
    assert [r["n"] for r in parallel] == [40, 20, 30]
    assert [r["price"] for r in parallel] == [r["price"] for r in serial]


def test_reference_gives_relative_error():
    text = """
[market]
r = 0.04
sigma = 0.3
alpha = 1
z0 = 1
[option]
kind = call
strike = 1
maturity = 1
[grid]
n = 200
time_steps = 100
x_min = -6
x_max = 6
[method]
reference = bs_vanilla
"""
    row = run(parse_config(text))[0]
    assert row["rel_error"] == pytest.approx(abs(row["price"] - row["reference"]) / row["reference"])
    assert row["rel_error"] < 0.005


def test_oracle_method():
    text = BASE.replace("alpha = 0.7", "alpha = 1") + "[method]\nmethod = oracle\noracle = binomial_american_put\n"
    row = run(parse_config(text))[0]
    assert 0.1 < row["price"] < 0.3 and row["runtime"] >= 0


def test_fig2_strike_sweep_is_monotone():
    text = """
[market]
r = 0.04
sigma = 1
alpha = 0.7
z0 = 1
[option]
kind = put
style = american
strike = 1
maturity = 4
[grid]
n = 1000
time_steps = 140
x_min = -20
x_max = 10
[sweep]
axis = K
start = 0.5
stop = 2.0
step = 0.25
"""
    rows = run(parse_config(text))
    assert [r["strike"] for r in rows] == [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    prices = [r["price"] for r in rows]
    assert all(b >= a for a, b in zip(prices, prices[1:]))


def test_fig5_theta_sweep_shows_blow_up():
    text = """
[market]
r = 0.04
sigma = 0.5
alpha = 0.7
z0 = 1
[option]
kind = put
style = american
strike = 1
maturity = 4
[grid]
n = 1000
time_steps = 100
x_min = -20
x_max = 10
[sweep]
axis = theta
values = 0, 0.2, 0.9
"""
    rows = run(parse_config(text))
    good, bad = rows[1]["price"], rows[2]["price"]
    assert 0.2 < good < 0.3
    assert abs(bad - 0.25) > 10 * abs(good - 0.25)


def test_ls_round_trip():
    text = BASE + "[method]\nmethod = ls\n[ls]\npaths = 500\nsteps = 10\nseed = 17\n"
    row = run(parse_config(text))[0]
    replay = run(config_from_row(row))[0]
    assert replay["price"] == row["price"] and replay["seed"] == 17


def test_fd_round_trip(tmp_path):
    text = "[grid]\nn = 50\ntime_steps = 20\nx_min = -5\nx_max = 3\n[scheme]\ntheta = optimal\n"
    row = run(cfg(text))[0]
    path = emit_csv([row], tmp_path / "r.csv")
    with path.open() as fh:
        echoed = next(csv.DictReader(fh))
    assert run(config_from_row(echoed))[0]["price"] == row["price"]


def test_emit_csv(tmp_path):
    path = emit_csv([{"a": 1, "b": 0.5}], tmp_path / "one.csv")
    assert path.read_text().splitlines() == ["a,b", "1,0.5"]
    with pytest.raises(ConfigError):
        emit_csv([], tmp_path / "none.csv")
    assert not (tmp_path / "none.csv").exists()


def test_emit_csv_union_header(tmp_path):
    path = emit_csv([{"a": 1.25}, {"a": 2, "c": 3}], tmp_path / "u.csv")
    assert path.read_text().splitlines() == ["a,c", "1.25,", "2,3"]


@pytest.mark.parametrize(
    "text, field",
    [
        ("[market]\nr = 0.04\n", "option"),
        (BASE.replace("r = 0.04\n", ""), "r: missing"),
        (BASE.replace("sigma = 0.5", "sigma = abc"), "sigma"),
        (BASE.replace("sigma = 0.5", "sigma = -1"), "market"),
        (BASE + "[grid]\nresolutions = 20xfoo\n", "resolutions"),
        (BASE + "[method]\nmethod = quadrature\n", "method"),
        (BASE + "[method]\nmethod = oracle\n", "oracle"),
        (BASE + "[sweep]\naxis = volume\nvalues = 1\n", "axis"),
        (BASE + "[sweep]\naxis = z0\nvalues = 1, -2\n", "sweep"),
        (BASE + "[ls]\ndiscounting = weekly\n", "ls"),
        (BASE + "[option]\n", "option"),
    ],
)
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text)


def test_table7_rows_layout():
    market = MarketParams(r=0.03, sigma=0.3, alpha=1.0, z0=2.0)
    option = OptionSpec("call", "european", 2.0, 4.0, barrier="down_out", lower=1.0)
    rows = table7_rows(market, option, resolutions=[(20, 20), (40, 40)], x_max=math.log(100))
    assert [(r["n"], r["theta"]) for r in rows] == [(20, 0.0), (40, 0.0), (20, 0.5), (40, 0.5)]
    assert rows[0]["reference"] == pytest.approx(0.5623370821885094, abs=1e-12)


def test_table8_rows_layout():
    market = MarketParams(r=0.03, sigma=0.3, alpha=0.5, z0=2.0)
    option = OptionSpec("call", "european", 2.0, 4.0, barrier="down_out", lower=1.0)
    rows = table8_rows(
        market,
        option,
        alphas=[0.9, 0.5],
        diff_resolutions=((20, 20),),
        error_resolutions=((40, 40),),
        reference_resolution=(100, 100),
        x_max=math.log(100),
    )
    assert [r["alpha"] for r in rows] == [0.9, 0.5]
    assert list(rows[0])[:2] == ["alpha", "theta_opt"]
    assert {"rel_diff_20x20", "rel_error_implicit_40x40", "rel_error_opt_40x40"} <= set(rows[0])


def test_main_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(BASE + "[grid]\nn = 30\ntime_steps = 10\nx_min = -5\nx_max = 3\n")
    out = tmp_path / "out.csv"
    assert main(["price", str(good), "--out", str(out)]) == 0
    assert out.read_text().startswith("method,")
    assert main(["sweep", str(good)]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[market]\nr = x\n")
    assert main(["price", str(bad)]) == 2
    assert main(["price", str(tmp_path / "missing.ini")]) == 2
    assert "config error" in capsys.readouterr().err


def test_main_prints_rows(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(BASE + "[grid]\nn = 30\ntime_steps = 10\nx_min = -5\nx_max = 3\n")
    assert main(["price", str(good), "--repeat", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[0].startswith("method,kind")
