import math

import numpy as np
import pytest

from illiq import (
    CARA,
    GameSpec,
    GridSpec,
    LinearCost,
    MarketParams,
    PlayerSpec,
    RiskNeutral,
    Scaled,
    SimulationError,
    SmoothedCall,
    Solution,
    heat_convolve,
    mc_consistency,
    physical_delivery_value,
    realized_objectives,
    simulate_paths,
    solve_fd,
    write_paths_csv,
)


def _zero_payoff():
    return Scaled(SmoothedCall(100.0, 10.0, 0.05), 0.0)


@pytest.fixture(scope="module")
def zero_solution(market):
    game = GameSpec(market, LinearCost(0.01), (PlayerSpec(RiskNeutral(), _zero_payoff()),))
    sol = solve_fd(game, GridSpec(94.0, 106.0, 101, 50))
    return game, sol


def test_zero_game_is_driftless_brownian(zero_solution):
    game, sol = zero_solution
    bundle = simulate_paths(sol, game, n_paths=4000, seed=3, n_steps=50)
    assert np.all(bundle.inventories == 0.0)
    assert np.all(bundle.costs == 0.0)
    assert np.all(bundle.objectives == 0.0)
    sigma_t = game.market.sigma * math.sqrt(game.market.maturity)
    drift = bundle.prices[:, -1].mean() - game.market.p0
    assert abs(drift) <= 3 * sigma_t / math.sqrt(bundle.n_paths)
    assert np.all(bundle.prices[:, 0] == game.market.p0)
    assert mc_consistency(bundle, sol)[0] == 0.0


def test_zero_sum_game_price_is_martingale(zero_sum_game, coarse_grid):
    sol = solve_fd(zero_sum_game, coarse_grid)
    bundle = simulate_paths(sol, zero_sum_game, n_paths=4000, seed=5, n_steps=100)
    se = bundle.prices[:, -1].std() / math.sqrt(bundle.n_paths)
    assert abs(bundle.prices[:, -1].mean() - 100.0) <= 3 * se


def test_strong_impact_call_pushes_price_up(linear_cost, call):
    market = MarketParams(sigma=1.0, lam=0.08, maturity=1.0, p0=100.0)
    game = GameSpec(market, linear_cost, (PlayerSpec(RiskNeutral(), call),))
    sol = solve_fd(game, GridSpec(94.0, 106.0, 201, 400))
    bundle = simulate_paths(sol, game, n_paths=4000, seed=9, n_steps=200)
    terminal = bundle.prices[:, -1]
    se = terminal.std() / math.sqrt(bundle.n_paths)
    assert terminal.mean() - 100.0 >= 3 * se


def test_realized_objective_matches_plain_expectation(linear_cost, rule):
    # negligible impact: mean realized payoff is the diffusion expectation
    market = MarketParams(sigma=1.0, lam=1e-12, maturity=1.0, p0=100.0)
    call = SmoothedCall(100.0, 10.0, 0.3)
    game = GameSpec(market, linear_cost, (PlayerSpec(RiskNeutral(), call),))
    sol = solve_fd(game, GridSpec(94.0, 106.0, 201, 200))
    bundle = simulate_paths(sol, game, n_paths=20000, seed=21, n_steps=100)
    means, ses = realized_objectives(bundle, game)
    expected = heat_convolve(call, 1.0, 100.0, rule)
    assert abs(means[0] - expected) <= 3 * ses[0]


def test_cara_objectives_strictly_negative(market, linear_cost, call):
    game = GameSpec(market, linear_cost, (PlayerSpec(CARA(0.1), call),))
    sol = solve_fd(game, GridSpec(94.0, 106.0, 101, 200))
    bundle = simulate_paths(sol, game, n_paths=500, seed=2, n_steps=50)
    assert np.all(bundle.objectives < 0.0)


def test_mc_consistency_flags_corrupted_solution(call_game, call_solution):
    bundle = simulate_paths(call_solution, call_game, n_paths=20000, seed=17, n_steps=200)
    z_good = mc_consistency(bundle, call_solution)
    assert abs(z_good[0]) <= 3.5
    corrupted = Solution(
        call_solution.grid, call_solution.times, call_solution.prices,
        call_solution.values + 0.1, call_solution.gradients, call_solution.speeds,
        call_solution.aggregate_speed, dict(call_solution.meta),
    )
    z_bad = mc_consistency(bundle, corrupted)
    assert abs(z_bad[0]) >= 5.0


def test_bitwise_determinism(call_game, call_solution):
    a = simulate_paths(call_solution, call_game, n_paths=512, seed=41, n_steps=64)
    b = simulate_paths(call_solution, call_game, n_paths=512, seed=41, n_steps=64)
    assert np.array_equal(a.prices, b.prices)
    assert np.array_equal(a.inventories, b.inventories)
    assert np.array_equal(a.costs, b.costs)
    # chunking must not change the stream
    c = simulate_paths(call_solution, call_game, n_paths=512, seed=41, n_steps=64,
                       chunk_size=100)
    assert np.array_equal(a.prices, c.prices)


def test_doubling_steps_moves_mean_within_noise(call_game, call_solution):
    coarse = simulate_paths(call_solution, call_game, n_paths=20000, seed=29, n_steps=250)
    fine = simulate_paths(call_solution, call_game, n_paths=20000, seed=29, n_steps=500)
    m_c, se_c = realized_objectives(coarse, call_game)
    m_f, se_f = realized_objectives(fine, call_game)
    assert abs(m_f[0] - m_c[0]) <= 2 * max(se_c[0], se_f[0])


def test_inventory_bounded_by_speed_bound(call_game, call_solution):
    bundle = simulate_paths(call_solution, call_game, n_paths=1000, seed=13, n_steps=100)
    bound = call_solution.meta["speed_bound"]
    horizon = call_game.market.maturity
    assert np.max(np.abs(bundle.inventories[:, :, -1])) <= bound * horizon + 1e-9


def test_excessive_clamping_raises(market):
    # a synthetic solution on a sliver of the price axis: paths leave at once
    game = GameSpec(market, LinearCost(0.01), (PlayerSpec(RiskNeutral(), _zero_payoff()),))
    times = np.linspace(0.0, 1.0, 11)
    prices = np.linspace(99.9, 100.1, 5)
    shape = (1, 11, 5)
    sol = Solution(
        GridSpec(94.0, 106.0, 5, 11), times, prices, np.zeros(shape), np.zeros(shape),
        np.zeros(shape), np.zeros((11, 5)), {"speed_bound": 0.0},
    )
    with pytest.raises(SimulationError, match="left the price grid"):
        simulate_paths(sol, game, n_paths=500, seed=1, n_steps=50)


def test_antithetic_pairs_cancel_noise(zero_solution):
    game, sol = zero_solution
    bundle = simulate_paths(sol, game, n_paths=1000, seed=8, n_steps=20, antithetic=True)
    # driftless case: each (xi, -xi) pair averages exactly to p0
    half = 500
    paired = 0.5 * (bundle.prices[:half, -1] + bundle.prices[half:, -1])
    assert np.allclose(paired, game.market.p0, atol=1e-12)


def test_paths_csv_layout(tmp_path, zero_solution):
    game, sol = zero_solution
    bundle = simulate_paths(sol, game, n_paths=4, seed=1, n_steps=10)
    path = tmp_path / "paths.csv"
    write_paths_csv(bundle, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "path,t,P,X_1,R_1"
    assert len(lines) == 1 + 4 * 11


# ---------------------------------------------------------------------------
# physical delivery
# ---------------------------------------------------------------------------


def test_physical_delivery_zero_cap():
    res = physical_delivery_value(0.0, 100.0, 0.01, [105.0, 95.0])
    assert res.mean_value == 0.0
    assert np.all(res.theta_star == 0.0)


def test_physical_delivery_worked_example():
    res = physical_delivery_value(50.0, 100.0, 0.01, [101.0])
    assert res.theta_star[0] == pytest.approx(50.0)
    assert res.values[0] == pytest.approx(37.5)
    assert res.trading_contribution == 0.0


def test_physical_delivery_out_of_the_money():
    res = physical_delivery_value(50.0, 100.0, 0.01, [99.0, 100.0])
    assert np.all(res.theta_star == 0.0)
    assert np.all(res.values == 0.0)


def test_physical_delivery_matches_grid_scan():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p_t = rng.uniform(80.0, 130.0)
        strike = rng.uniform(90.0, 110.0)
        lam = rng.uniform(0.005, 0.05)
        cap = rng.uniform(0.0, 20.0)
        res = physical_delivery_value(cap, strike, lam, [p_t])
        thetas = np.linspace(0.0, cap, 20001)
        scan = np.max(thetas * (p_t - 0.5 * lam * thetas) - thetas * strike)
        assert abs(res.values[0] - scan) <= 1e-8


def test_physical_delivery_monotone():
    caps = np.linspace(0.0, 30.0, 16)
    vals = [physical_delivery_value(c, 100.0, 0.01, [104.0]).mean_value for c in caps]
    assert np.all(np.diff(vals) >= 0.0)
    pts = np.linspace(90.0, 120.0, 31)
    res = physical_delivery_value(25.0, 100.0, 0.01, pts)
    assert np.all(np.diff(res.values) >= 0.0)
