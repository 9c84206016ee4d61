import json

import numpy as np
import pytest

from illiq import (
    CARA,
    ConfigError,
    GridPayoff,
    GridSpec,
    MarketParams,
    Negated,
    RiskNeutral,
    Scaled,
    SmoothedCall,
    SmoothedDigital,
    SumPayoff,
    ValidationError,
    load_config,
    load_game,
    load_grid,
    payoff_slope,
    payoff_sup_slope,
    payoff_value,
)

BASE_CONFIG = {
    "market": {"sigma": 1.0, "lambda": 0.01, "T": 1.0, "p0": 100.0},
    "cost": {"kind": "linear", "kappa": 0.01},
    "players": [
        {"utility": {"kind": "risk_neutral"}, "payoff": {"kind": "smoothed_call", "K": 100.0}}
    ],
}


def _config(**overrides):
    doc = json.loads(json.dumps(BASE_CONFIG))
    doc.update(overrides)
    return json.dumps(doc)


# ---------------------------------------------------------------------------
# load_game
# ---------------------------------------------------------------------------


def test_load_game_single_risk_neutral_call():
    game = load_game(_config())
    assert game.n_players == 1
    assert game.market.sigma == 1.0
    assert game.market.lam == 0.01
    assert game.cost.kappa == 0.01
    assert isinstance(game.players[0].utility, RiskNeutral)
    assert isinstance(game.players[0].endowment, SmoothedCall)


def test_load_game_rejects_zero_sigma():
    bad = _config(market={"sigma": 0, "lambda": 0.01, "T": 1.0, "p0": 100.0})
    with pytest.raises(ValidationError, match="sigma must be > 0"):
        load_game(bad)


def test_load_game_two_cara_players():
    players = [
        {"utility": {"kind": "cara", "alpha": 0.01},
         "payoff": {"kind": "smoothed_call", "K": 100.0}},
        {"utility": {"kind": "cara", "alpha": 0.01},
         "payoff": {"kind": "negated", "inner": {"kind": "smoothed_call", "K": 100.0}}},
    ]
    game = load_game(_config(
        market={"sigma": 2.0, "lambda": 0.01, "T": 1.0, "p0": 100.0},
        players=players,
    ))
    assert game.n_players == 2
    assert all(isinstance(pl.utility, CARA) for pl in game.players)
    assert game.players[0].utility.alpha == 0.01


def test_load_game_rejects_unknown_keys():
    doc = json.loads(_config())
    doc["market"]["drift"] = 0.1
    with pytest.raises(ConfigError, match="unknown key"):
        load_game(json.dumps(doc))
    doc = json.loads(_config())
    doc["extra"] = {}
    with pytest.raises(ConfigError, match="unknown key"):
        load_game(json.dumps(doc))


def test_load_game_rejects_malformed_text():
    with pytest.raises(ConfigError, match="malformed"):
        load_game("{not json")


def test_load_game_is_deterministic():
    text = _config()
    assert load_game(text) == load_game(text)


def test_load_game_fills_market_scaled_payoff_defaults():
    game = load_game(_config())
    h = game.players[0].endowment
    # defaults: cap = 10 sigma sqrt(T), width = 0.05 sigma sqrt(T)
    assert h.cap == pytest.approx(10.0)
    assert h.width == pytest.approx(0.05)


def test_load_grid_defaults_cover_six_sigmas():
    game = load_game(_config())
    grid = load_grid(_config(), game.market)
    assert grid.p_min == pytest.approx(94.0)
    assert grid.p_max == pytest.approx(106.0)
    assert grid.n_p % 2 == 1


def test_load_config_rejects_undersized_grid():
    bad = _config(grid={"p_min": 98.0, "p_max": 102.0, "n_p": 101, "n_t": 100})
    with pytest.raises(ValidationError, match="6 sigma"):
        load_config(bad)


# ---------------------------------------------------------------------------
# payoff values and slopes
# ---------------------------------------------------------------------------


def test_call_intrinsic_value_below_cap():
    h = SmoothedCall(strike=100.0, cap=50.0, width=1e-9)
    assert payoff_value(h, 110.0) == pytest.approx(10.0, abs=1e-8)


def test_digital_deep_out_of_the_money():
    h = SmoothedDigital(strike=100.0, width=1e-9)
    assert payoff_value(h, 90.0) == pytest.approx(0.0, abs=1e-12)


def test_negated_call_value():
    h = Negated(SmoothedCall(strike=100.0, cap=50.0, width=1e-9))
    assert payoff_value(h, 110.0) == pytest.approx(-10.0, abs=1e-8)


def test_call_slope_plateaus():
    h = SmoothedCall(strike=100.0, cap=50.0, width=0.05)
    assert payoff_slope(h, 120.0) == pytest.approx(1.0, abs=1e-12)
    assert payoff_slope(h, 80.0) == pytest.approx(0.0, abs=1e-12)


def test_digital_slope_peak_is_quarter_width():
    # logistic step: slope h(1-h)/w peaks at the strike with value 1/(4w),
    # confirmed against a central difference
    w = 0.05
    h = SmoothedDigital(strike=100.0, width=w)
    peak = payoff_slope(h, 100.0)
    assert peak == pytest.approx(1.0 / (4.0 * w), rel=1e-12)
    step = 1e-6
    fd = (payoff_value(h, 100.0 + step) - payoff_value(h, 100.0 - step)) / (2 * step)
    assert fd == pytest.approx(peak, rel=1e-7)


def test_sup_slope_call_tends_to_one():
    assert payoff_sup_slope(SmoothedCall(100.0, 50.0, 1e-6)) == pytest.approx(1.0)


def test_sup_slope_sum_triangle():
    a = SmoothedCall(100.0, 10.0, 0.05)
    b = SmoothedCall(105.0, 10.0, 0.05)
    s = SumPayoff((a, b))
    assert payoff_sup_slope(s) <= 2.0
    assert payoff_sup_slope(s) == pytest.approx(payoff_sup_slope(a) + payoff_sup_slope(b))


def test_sup_slope_digital():
    assert payoff_sup_slope(SmoothedDigital(100.0, 0.05)) == pytest.approx(5.0)


def _builtin_payoffs():
    call = SmoothedCall(100.0, 10.0, 0.05)
    dig = SmoothedDigital(100.0, 0.05)
    pgrid = np.linspace(94.0, 106.0, 25)
    custom = GridPayoff(tuple(pgrid), tuple(np.tanh((pgrid - 100.0) / 2.0)))
    return [
        call,
        dig,
        Scaled(call, -2.5),
        Negated(dig),
        SumPayoff((call, Negated(dig))),
        custom,
    ]


def test_payoff_bounds_hold_on_random_prices():
    rng = np.random.default_rng(42)
    ps = rng.uniform(94.0, 106.0, 1000)
    for h in _builtin_payoffs():
        vals = payoff_value(h, ps)
        slopes = payoff_slope(h, ps)
        assert np.all(np.abs(vals) <= h.bound + 1e-12)
        assert np.all(np.abs(slopes) <= payoff_sup_slope(h) + 1e-12)


def test_payoff_slope_matches_central_difference():
    rng = np.random.default_rng(7)
    ps = rng.uniform(94.0, 106.0, 200)
    step = 1e-5 * 12.0
    for h in _builtin_payoffs():
        fd = (payoff_value(h, ps + step) - payoff_value(h, ps - step)) / (2 * step)
        slopes = payoff_slope(h, ps)
        # relative tolerance 1e-4 with a small absolute floor where the
        # slope underflows the difference quotient entirely
        assert np.all(np.abs(fd - slopes) <= 1e-4 * (1e-6 + np.abs(slopes)))


def test_grid_payoff_flattens_continuously():
    pgrid = np.linspace(95.0, 105.0, 21)
    h = GridPayoff(tuple(pgrid), tuple((pgrid - 100.0) ** 2 / 10.0))
    assert payoff_slope(h, 94.0) == 0.0
    assert payoff_slope(h, 120.0) == 0.0
    assert payoff_value(h, 50.0) == payoff_value(h, 94.0)
    # slope approaches zero continuously at the padded knot
    pad_edge = 94.5
    assert abs(payoff_slope(h, pad_edge + 1e-9) - payoff_slope(h, pad_edge - 1e-9)) < 1e-6


def test_payoffs_vectorized():
    h = SmoothedCall(100.0, 10.0, 0.05)
    ps = np.array([90.0, 100.0, 110.0])
    assert payoff_value(h, ps).shape == (3,)
    assert payoff_slope(h, ps).shape == (3,)


# ---------------------------------------------------------------------------
# type invariants
# ---------------------------------------------------------------------------


def test_market_validation():
    with pytest.raises(ValidationError, match="lambda must be > 0"):
        MarketParams(1.0, 0.0, 1.0, 100.0)
    with pytest.raises(ValidationError, match="T must be > 0"):
        MarketParams(1.0, 0.01, -1.0, 100.0)
    with pytest.raises(ValidationError, match="p0 must be finite"):
        MarketParams(1.0, 0.01, 1.0, float("nan"))


def test_cara_requires_positive_alpha():
    with pytest.raises(ValidationError, match="alpha must be > 0"):
        CARA(alpha=0.0)


def test_grid_spec_validation(market):
    with pytest.raises(ValidationError, match="n_p must be odd"):
        GridSpec(94.0, 106.0, n_p=100, n_t=10)
    with pytest.raises(ValidationError, match="p_min must be < p_max"):
        GridSpec(106.0, 94.0, n_p=101, n_t=10)
    grid = GridSpec(94.0, 106.0, n_p=101, n_t=10)
    grid.validate_for(market)
    off_center = GridSpec(101.0, 120.0, n_p=101, n_t=10)
    with pytest.raises(ValidationError, match="contain p0"):
        off_center.validate_for(market)
