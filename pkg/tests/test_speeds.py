import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from illiq import (
    CertificationError,
    CostCertificate,
    GameSpec,
    LinearCost,
    PlayerSpec,
    RiskNeutral,
    SmoothedCall,
    SmoothedDigital,
    SmoothedSpreadCost,
    SpeedSolverError,
    SpeedSolverSettings,
    TableCost,
    aggregate_speed,
    aggregate_speed_many,
    apriori_speed_bound,
    certify_cost,
    cost_slope,
    cost_value,
    player_speeds,
)

ROOT_TOL = SpeedSolverSettings().root_tol


# ---------------------------------------------------------------------------
# cost curves
# ---------------------------------------------------------------------------


def test_linear_cost_value():
    assert cost_value(LinearCost(0.01), 0.5) == pytest.approx(0.005, rel=1e-15)


def test_cost_normalized_at_zero():
    for cost in (LinearCost(0.01), SmoothedSpreadCost(0.01, 0.002, 100.0)):
        assert cost_value(cost, 0.0) == 0.0


def test_spread_cost_value_closed_form():
    cost = SmoothedSpreadCost(0.01, 0.002, 100.0)
    expected = 0.1 + 0.002 * (2.0 / math.pi) * math.atan(1000.0)
    got = float(cost_value(cost, 10.0))
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(0.101999, abs=5e-7)


def test_spread_cost_slope_at_zero_and_tails():
    kappa, s, c = 0.01, 0.002, 100.0
    cost = SmoothedSpreadCost(kappa, s, c)
    assert float(cost_slope(cost, 0.0)) == pytest.approx(kappa + 2 * s * c / math.pi, rel=1e-14)
    assert float(cost_slope(cost, 1e9)) == pytest.approx(kappa, rel=1e-9)
    assert float(cost_slope(cost, -1e9)) == pytest.approx(kappa, rel=1e-9)
    # finite-difference confirmation of the analytic derivative
    step = 1e-7
    fd = (cost_value(cost, 0.3 + step) - cost_value(cost, 0.3 - step)) / (2 * step)
    assert float(fd) == pytest.approx(float(cost_slope(cost, 0.3)), rel=1e-7)


def test_table_cost_out_of_domain():
    z = np.linspace(-2.0, 2.0, 41)
    cost = TableCost(tuple(z), tuple(0.01 * z), eps_floor=1e-3)
    with pytest.raises(Exception, match="table domain"):
        cost_value(cost, 5.0)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def test_certify_linear():
    cert = certify_cost(LinearCost(0.01), (-100.0, 100.0))
    assert cert.eps_floor == pytest.approx(0.0099, rel=1e-12)
    assert cert.marginal_monotone


def test_certify_spread():
    cert = certify_cost(SmoothedSpreadCost(0.01, 0.002, 100.0), (-100.0, 100.0))
    assert cert.eps_floor == pytest.approx(0.0099, rel=1e-4)


def test_certify_rejects_vanishing_slope_table():
    # g = arctan has slope 1/(1+z^2) ~ 1e-4 at |z| = 100, below the
    # declared admissibility floor of a table cost
    z = np.linspace(-100.0, 100.0, 4001)
    cost = TableCost(tuple(z), tuple(np.arctan(z)))
    with pytest.raises(CertificationError, match="eps_floor"):
        certify_cost(cost)


def test_certify_rejects_nonmonotone_marginal_cost():
    # strong concave bump: g' stays above the floor but g + z g' dips
    z = np.linspace(-2.0, 2.0, 801)
    g = 0.05 * z + 0.8 * np.sign(z) * (1.0 - np.exp(-5.0 * np.abs(z)))
    cost = TableCost(tuple(z), tuple(g), eps_floor=0.01)
    with pytest.raises(CertificationError, match="strictly increasing"):
        certify_cost(cost)


def test_certify_requires_enough_samples():
    with pytest.raises(ValueError, match="samples"):
        certify_cost(LinearCost(0.01), (-1.0, 1.0), samples=10)


# ---------------------------------------------------------------------------
# a-priori bound
# ---------------------------------------------------------------------------


def _game(payoff, n=1, lam=0.01):
    from illiq import MarketParams

    market = MarketParams(1.0, lam, 1.0, 100.0)
    return GameSpec(market, LinearCost(0.01), tuple(PlayerSpec(RiskNeutral(), payoff) for _ in range(n)))


def _cert(eps, reach=1e6):
    return CostCertificate(eps_floor=eps, marginal_monotone=True, z_lo=-reach, z_hi=reach, samples=2001)


def test_apriori_bound_unit_slope():
    game = _game(SmoothedCall(100.0, 50.0, 1e-9))
    assert apriori_speed_bound(game, _cert(0.01)) == pytest.approx(1.0)


def test_apriori_bound_two_players():
    game = _game(SmoothedCall(100.0, 50.0, 1e-9), n=2)
    assert apriori_speed_bound(game, _cert(0.01)) == pytest.approx(2.0)


def test_apriori_bound_digital():
    game = _game(SmoothedDigital(100.0, 0.05))
    # 1 * (0.01 / 0.01) * 1/(4*0.05)
    assert apriori_speed_bound(game, _cert(0.01)) == pytest.approx(5.0)


def test_apriori_bound_requires_coverage():
    game = _game(SmoothedDigital(100.0, 0.05))
    with pytest.raises(CertificationError, match="does not cover"):
        apriori_speed_bound(game, _cert(0.01, reach=1.0))


# ---------------------------------------------------------------------------
# aggregate root
# ---------------------------------------------------------------------------


def test_aggregate_speed_linear_closed_form():
    cost = LinearCost(0.01)
    eps = 0.0099
    assert aggregate_speed(cost, 1, 0.01, eps) == pytest.approx(0.5, abs=1e-12)
    for n, kappa, s in [(1, 0.01, 0.01), (3, 0.02, -0.5), (7, 0.005, 0.9)]:
        c = LinearCost(kappa)
        got = aggregate_speed(c, n, s, 0.99 * kappa)
        assert got == pytest.approx(s / ((n + 1) * kappa), abs=1e-12)


def test_aggregate_speed_zero_gradient():
    for cost in (LinearCost(0.01), SmoothedSpreadCost(0.01, 0.002, 100.0)):
        assert aggregate_speed(cost, 3, 0.0, 0.009) == 0.0


def test_aggregate_speed_spread_matches_dense_scan():
    cost = SmoothedSpreadCost(0.01, 0.002, 100.0)
    cert = certify_cost(cost, (-10.0, 10.0))
    got = aggregate_speed(cost, 1, 0.01, cert.eps_floor)
    # dense-scan oracle: sign change of Phi over [-1, 1] at step 1e-6
    z = np.arange(-1.0, 1.0, 1e-6)
    phi = cost.value(z) + z * cost.slope(z) - 0.01
    scan_root = z[np.argmin(np.abs(phi))]
    assert abs(got - scan_root) <= 1.5e-6
    # and the residual at the returned root is tiny
    assert abs(cost.value(got) + got * cost.slope(got) - 0.01) <= cert.eps_floor * ROOT_TOL


def test_aggregate_speed_bracket_failure():
    # an eps floor far above the true slope makes the bracket too small
    with pytest.raises(SpeedSolverError, match="bracket"):
        aggregate_speed(LinearCost(0.01), 1, 1.0, 10.0)


def test_aggregate_speed_monotone_in_gradient():
    cost = SmoothedSpreadCost(0.02, 0.001, 50.0)
    cert = certify_cost(cost, (-50.0, 50.0))
    s_values = np.sort(np.random.default_rng(5).uniform(-1.0, 1.0, 64))
    roots = aggregate_speed_many(cost, 4, s_values, cert.eps_floor)
    assert np.all(np.diff(roots) > 0)
    assert np.all(np.sign(roots) == np.sign(s_values))


# ---------------------------------------------------------------------------
# player speeds
# ---------------------------------------------------------------------------


def test_player_speeds_two_player_linear():
    cost = LinearCost(0.01)
    grads = np.array([0.01, -0.01])
    z = aggregate_speed(cost, 2, grads.sum(), 0.0099)
    assert z == 0.0
    speeds = player_speeds(cost, grads, z)
    assert speeds == pytest.approx([1.0, -1.0], abs=1e-12)


def test_player_speeds_zero_gradients():
    speeds = player_speeds(LinearCost(0.01), np.zeros(4), 0.0)
    assert np.all(speeds == 0.0)


def test_single_player_speed_equals_aggregate():
    cost = LinearCost(0.01)
    z = aggregate_speed(cost, 1, 0.01, 0.0099)
    speeds = player_speeds(cost, np.array([0.01]), z)
    assert speeds[0] == pytest.approx(z, abs=1e-12)
    assert z == pytest.approx(0.5, abs=1e-12)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

cost_strategy = st.one_of(
    st.builds(LinearCost, kappa=st.floats(1e-3, 0.1)),
    st.builds(
        SmoothedSpreadCost,
        kappa=st.floats(1e-3, 0.1),
        spread=st.floats(0.0, 0.005),
        sharpness=st.floats(1.0, 200.0),
    ),
)


def test_root_consistency_thousand_draws():
    # 1000 random (cost, N, S) triples: player speeds re-sum to the root
    rng = np.random.default_rng(2718)
    costs = [LinearCost(float(k)) for k in rng.uniform(1e-3, 0.1, 10)]
    costs += [
        SmoothedSpreadCost(float(k), float(s), float(c))
        for k, s, c in zip(rng.uniform(1e-3, 0.1, 10), rng.uniform(0.0, 0.005, 10),
                           rng.uniform(1.0, 200.0, 10))
    ]
    certs = {id(c): certify_cost(c, (-200.0, 200.0)) for c in costs}
    for _ in range(50):
        for cost in costs:
            n = int(rng.integers(1, 11))
            grads = rng.uniform(-1.0 / n, 1.0 / n, n)
            z = aggregate_speed(cost, n, float(grads.sum()), certs[id(cost)].eps_floor)
            speeds = player_speeds(cost, grads, z)
            assert abs(float(speeds.sum()) - z) <= n * ROOT_TOL


@settings(max_examples=150, deadline=None)
@given(cost=cost_strategy, n=st.integers(1, 10), data=st.data())
def test_root_consistency_property(cost, n, data):
    grads = np.array(
        data.draw(st.lists(st.floats(-0.1, 0.1), min_size=n, max_size=n))
    )
    cert = certify_cost(cost, (-200.0, 200.0))
    z = aggregate_speed(cost, n, float(grads.sum()), cert.eps_floor)
    speeds = player_speeds(cost, grads, z)
    assert abs(speeds.sum() - z) <= n * ROOT_TOL


@settings(max_examples=150, deadline=None)
@given(cost=cost_strategy, n=st.integers(1, 10), data=st.data())
def test_speed_bound_property(cost, n, data):
    # Lemma-style bound: effective gradients capped by lam * h keep every
    # player's speed within N (lam / eps) h
    lam, h = 0.01, 1.0
    grads = lam * np.array(
        data.draw(st.lists(st.floats(-h, h), min_size=n, max_size=n))
    )
    cert = certify_cost(cost, (-200.0, 200.0))
    z = aggregate_speed(cost, n, float(grads.sum()), cert.eps_floor)
    speeds = player_speeds(cost, grads, z)
    bound = n * (lam / cert.eps_floor) * h
    assert np.all(np.abs(speeds) <= bound + ROOT_TOL)


@settings(max_examples=100, deadline=None)
@given(
    kappa=st.floats(1e-3, 0.1),
    n=st.integers(1, 10),
    s=st.floats(-1.0, 1.0),
)
def test_linear_closed_form_property(kappa, n, s):
    got = aggregate_speed(LinearCost(kappa), n, s, 0.99 * kappa)
    assert got == pytest.approx(s / ((n + 1) * kappa), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(cost=cost_strategy, n=st.integers(1, 10), s=st.floats(-1.0, 1.0))
def test_sign_property(cost, n, s):
    cert = certify_cost(cost, (-200.0, 200.0))
    z = aggregate_speed(cost, n, s, cert.eps_floor)
    if s == 0.0:
        assert z == 0.0
    else:
        assert z * s >= 0.0
