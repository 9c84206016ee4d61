"""Monte-Carlo simulation of equilibrium price paths.

Paths follow the Euler-Maruyama discretization of

    dP = lambda * sum_j Xdot^j(t, P) dt + sigma dB,
    dX^j = Xdot^j(t, P) dt,
    dR^j = Xdot^j(t, P) g(sum_i Xdot^i(t, P)) dt,

with the feedback speed fields interpolated bilinearly from a solved
lattice.  Noise comes from a counter-based generator (Philox keyed by the
seed, consumed in path-major order), so results are bitwise reproducible
for fixed (seed, n_paths, n_steps) and independent of chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GameSpec
from .pdesolve import Solution

__all__ = [
    "SimulationError",
    "PathBundle",
    "PhysicalDeliveryResult",
    "simulate_paths",
    "realized_objectives",
    "mc_consistency",
    "physical_delivery_value",
    "write_paths_csv",
]


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths and per-player accounting for one Monte-Carlo run."""

    seed: int
    n_paths: int
    times: np.ndarray
    prices: np.ndarray        # (n_paths, n_steps + 1)
    inventories: np.ndarray   # (N, n_paths, n_steps + 1)
    costs: np.ndarray         # (N, n_paths, n_steps + 1)
    terminal_payoffs: np.ndarray  # (N, n_paths)
    objectives: np.ndarray        # (N, n_paths), utility applied
    alphas: np.ndarray
    clamped_fraction: float

    @property
    def n_players(self) -> int:
        return self.inventories.shape[0]


def _utility_apply(raw: np.ndarray, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return raw
    return -np.exp(-alpha * raw)


def simulate_paths(
    sol: Solution,
    game: GameSpec,
    n_paths: int,
    seed: int,
    n_steps: int,
    antithetic: bool = False,
    chunk_size: int = 20000,
    clamp_limit: float = 0.01,
) -> PathBundle:
    """Euler-Maruyama paths under the solved feedback strategies.

    Price lookups outside the solution's price range are clamped to the
    boundary columns and counted; if more than ``clamp_limit`` of all
    path-steps clamp, the grid was too small and an error is raised.
    """
    if n_steps < 10:
        raise ValueError("n_steps must be >= 10")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling needs an even n_paths")
    market = game.market
    n = game.n_players
    horizon = market.maturity
    dt = horizon / n_steps
    times = np.linspace(0.0, horizon, n_steps + 1)
    sqrt_dt = math.sqrt(dt)
    p_grid = sol.prices

    # per-step speed rows, interpolated once in time
    speed_rows = np.empty((n_steps, n, p_grid.size))
    sol_times = sol.times
    for k in range(n_steps):
        t = times[k]
        idx = min(max(int(np.searchsorted(sol_times, t, side="right") - 1), 0),
                  sol_times.size - 2)
        w = (t - sol_times[idx]) / (sol_times[idx + 1] - sol_times[idx])
        speed_rows[k] = (1.0 - w) * sol.speeds[:, idx] + w * sol.speeds[:, idx + 1]

    rng = np.random.Generator(np.random.Philox(key=seed))
    base_paths = n_paths // 2 if antithetic else n_paths
    prices = np.empty((n_paths, n_steps + 1))
    inventories = np.zeros((n, n_paths, n_steps + 1))
    costs = np.zeros((n, n_paths, n_steps + 1))
    clamped = 0
    row = 0
    remaining = base_paths
    while remaining > 0:
        m = min(chunk_size, remaining)
        noise = rng.standard_normal((m, n_steps))
        blocks = [noise, -noise] if antithetic else [noise]
        for blk in blocks:
            p = np.full(m, market.p0)
            x = np.zeros((n, m))
            r = np.zeros((n, m))
            prices[row : row + m, 0] = p
            for k in range(n_steps):
                p_look = np.clip(p, p_grid[0], p_grid[-1])
                clamped += int(np.count_nonzero(p_look != p))
                spd = np.stack([np.interp(p_look, p_grid, speed_rows[k, j]) for j in range(n)])
                agg = spd.sum(axis=0)
                g_agg = np.asarray(game.cost.value(agg), dtype=float)
                p = p + market.lam * agg * dt + market.sigma * sqrt_dt * blk[:, k]
                x = x + spd * dt
                r = r + spd * g_agg * dt
                prices[row : row + m, k + 1] = p
                inventories[:, row : row + m, k + 1] = x
                costs[:, row : row + m, k + 1] = r
            row += m
        remaining -= m

    frac = clamped / float(n_paths * n_steps)
    if frac > clamp_limit:
        raise SimulationError(
            f"{100 * frac:.2f}% of path-steps left the price grid (limit "
            f"{100 * clamp_limit:.0f}%); enlarge the solution domain"
        )

    terminal = np.stack([np.asarray(pl.endowment.value(prices[:, -1]), dtype=float)
                         for pl in game.players])
    alphas = game.alphas
    raw = -costs[:, :, -1] + terminal
    objectives = np.stack([_utility_apply(raw[j], alphas[j]) for j in range(n)])
    return PathBundle(
        seed=seed,
        n_paths=n_paths,
        times=times,
        prices=prices,
        inventories=inventories,
        costs=costs,
        terminal_payoffs=terminal,
        objectives=objectives,
        alphas=alphas,
        clamped_fraction=frac,
    )


def realized_objectives(bundle: PathBundle, game: GameSpec):
    """Per-player sample mean and standard error of the realized objective."""
    means = bundle.objectives.mean(axis=1)
    n = bundle.n_paths
    ses = bundle.objectives.std(axis=1, ddof=1) / math.sqrt(n)
    return means, ses


def mc_consistency(bundle: PathBundle, sol: Solution) -> np.ndarray:
    """z-scores of the realized objective means against the solved values
    at (t=0, p0); exponential-utility transforms are undone before comparing."""
    p0 = float(bundle.prices[0, 0])
    means = bundle.objectives.mean(axis=1)
    ses = bundle.objectives.std(axis=1, ddof=1) / math.sqrt(bundle.n_paths)
    z = np.empty(bundle.n_players)
    for j in range(bundle.n_players):
        v0 = sol.value_at(j, 0.0, p0)
        if bundle.alphas[j] > 0.0:
            v0 = -math.exp(-bundle.alphas[j] * v0)
        if ses[j] == 0.0:
            z[j] = 0.0 if means[j] == v0 else math.inf
        else:
            z[j] = (means[j] - v0) / ses[j]
    return z


@dataclass(frozen=True)
class PhysicalDeliveryResult:
    mean_value: float
    theta_star: np.ndarray
    values: np.ndarray
    trading_contribution: float  # identically zero: the problem separates


def physical_delivery_value(theta_cap: float, strike: float, lam: float,
                            terminal_prices) -> PhysicalDeliveryResult:
    """Optimal exercise of physically delivered calls at maturity.

    Per sample the exercise value theta (P_T - lam theta / 2) - theta K is a
    concave quadratic, so the optimum is the unconstrained vertex
    (P_T - K) / lam clipped to [0, theta_cap].  The trading part of the
    objective separates off and is maximized by not trading at all, hence
    the zero trading contribution.
    """
    if theta_cap < 0:
        raise ValueError("theta_cap must be >= 0")
    p_t = np.atleast_1d(np.asarray(terminal_prices, dtype=float))
    theta = np.clip((p_t - strike) / lam, 0.0, theta_cap)
    values = theta * (p_t - 0.5 * lam * theta) - theta * strike
    return PhysicalDeliveryResult(
        mean_value=float(values.mean()),
        theta_star=theta,
        values=values,
        trading_contribution=0.0,
    )


def write_paths_csv(bundle: PathBundle, path) -> None:
    """One row per (path, time): path,t,P,X_1..X_N,R_1..R_N."""
    n = bundle.n_players
    n_paths, n_times = bundle.prices.shape
    cols = ["path", "t", "P"] + [f"X_{j+1}" for j in range(n)] + [f"R_{j+1}" for j in range(n)]
    data = np.empty((n_paths * n_times, len(cols)))
    data[:, 0] = np.repeat(np.arange(n_paths), n_times)
    data[:, 1] = np.tile(bundle.times, n_paths)
    data[:, 2] = bundle.prices.reshape(-1)
    for j in range(n):
        data[:, 3 + j] = bundle.inventories[j].reshape(-1)
        data[:, 3 + n + j] = bundle.costs[j].reshape(-1)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")
