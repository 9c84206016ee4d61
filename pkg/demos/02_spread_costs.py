"""Spread-crossing costs as a brake on manipulation.

Replacing the linear premium kappa*z by kappa*z + s*(2/pi)*arctan(C*z)
charges (a smooth version of) a half-spread s whenever the net order flow
changes sign.  Frequent re-balancing, the essence of pushing the spot
around, becomes expensive: both the time-zero trading speed and the
surplus shrink monotonically as the spread grows.
"""

import numpy as np

from illiq import (
    GameSpec,
    GridSpec,
    LinearCost,
    MarketParams,
    PlayerSpec,
    RiskNeutral,
    SmoothedCall,
    SmoothedDigital,
    spread_sweep,
)

market = MarketParams(sigma=1.0, lam=0.01, maturity=1.0, p0=100.0)
grid = GridSpec(94.0, 106.0, n_p=201, n_t=400, quad_nodes=96)
spreads = (0.0, 0.001, 0.002, 0.003, 0.004)

for name, payoff in (
    ("call", SmoothedCall(100.0, 10.0, 0.05)),
    ("digital", SmoothedDigital(100.0, 0.05)),
):
    game = GameSpec(market, LinearCost(0.01), (PlayerSpec(RiskNeutral(), payoff),))
    res = spread_sweep(game, spreads, sharpness=100.0, grid=grid)
    print(f"\n{name} holder, spreads {spreads}:")
    print("  s        max |speed(0,.)|   max surplus(0,.)")
    for s, spd, sur in zip(spreads, res.metrics["max_abs_speed"], res.metrics["max_surplus"]):
        print(f"  {s:.3f}    {spd:.5f}            {sur:.6f}")
    print(f"  monotone decrease: {res.passed}")
