"""Numerical solution of the coupled equilibrium value equations.

Two independent routes are provided for the system

    0 = v^j_t + sigma^2/2 v^j_pp - sigma^2 alpha^j / 2 (v^j_p)^2
        + lambda Xdot* v^j_p - Xdot^j g(Xdot*),        v^j(T, .) = H^j,

where the speeds at each point come from the speeds module (the quadratic
term is absent for risk-neutral players; exponential-utility players are
solved entirely in the log-transformed variable, whose terminal data is the
raw payoff as well):

* ``solve_fd``     backward march, implicit in the diffusion term
                   (one tridiagonal solve per player per layer) and explicit
                   in the nonlinear terms taken from the previous layer;
* ``solve_picard`` fixed-point iteration of the mild (integral) form
                   v = e^{tL} H + int e^{(t-s)L} F(v_p(s)) ds on short
                   subintervals, the semigroup applied by Gauss-Hermite
                   quadrature.  Serves as an independent oracle for the
                   finite-difference route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .closedform import QuadratureRule, central_gradient, heat_convolve, heat_convolve_grid
from .model import CARA, GameSpec, GridSpec
from .speeds import (
    CostCertificate,
    SpeedSolverSettings,
    aggregate_speed_many,
    apriori_speed_bound,
    certify_for_game,
)

__all__ = [
    "SolverError",
    "FdSettings",
    "PicardSettings",
    "Solution",
    "ResidualReport",
    "solve_fd",
    "solve_picard",
    "residual",
    "surplus",
    "write_solution_csv",
    "read_solution_csv",
]


class SolverError(RuntimeError):
    pass


class _NonContraction(SolverError):
    pass


@dataclass(frozen=True)
class FdSettings:
    speed: SpeedSolverSettings = field(default_factory=SpeedSolverSettings)
    residual_tol: float | None = None
    cert_samples: int = 2001


@dataclass(frozen=True)
class PicardSettings:
    tau: float | None = None  # contraction step; default 0.05 * horizon
    fixpoint_tol: float = 1e-10
    max_picard_iter: int = 60
    sublayers: int = 8
    max_tau_halvings: int = 3
    speed: SpeedSolverSettings = field(default_factory=SpeedSolverSettings)

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.sublayers < 1:
            raise ValueError("sublayers must be >= 1")


@dataclass(frozen=True)
class Solution:
    """Per-player value, gradient and speed lattices plus solver metadata.

    For exponential-utility players ``values`` holds the log-transformed
    value; the raw value is -exp(-alpha * values)."""

    grid: GridSpec
    times: np.ndarray
    prices: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    speeds: np.ndarray
    aggregate_speed: np.ndarray
    meta: dict

    def __post_init__(self):
        for name in ("times", "prices", "values", "gradients", "speeds", "aggregate_speed"):
            getattr(self, name).setflags(write=False)

    @property
    def n_players(self) -> int:
        return self.values.shape[0]

    def value_at(self, player: int, t: float, p: float) -> float:
        """Bilinear interpolation of one player's value surface."""
        row = _time_interp(self.times, self.values[player], t)
        return float(np.interp(p, self.prices, row))


def _time_interp(times: np.ndarray, layers: np.ndarray, t: float) -> np.ndarray:
    t = float(np.clip(t, times[0], times[-1]))
    k = int(np.searchsorted(times, t, side="right") - 1)
    k = min(max(k, 0), times.size - 2)
    w = (t - times[k]) / (times[k + 1] - times[k])
    return (1.0 - w) * layers[k] + w * layers[k + 1]


@dataclass(frozen=True)
class ResidualReport:
    per_player: np.ndarray
    overall: float


# ---------------------------------------------------------------------------
# shared per-layer equilibrium fields
# ---------------------------------------------------------------------------


class _Equilibrium:
    """Evaluates gradients, speeds and the nonlinear source on value layers."""

    def __init__(self, game: GameSpec, cert: CostCertificate, dp: float,
                 speed_settings: SpeedSolverSettings):
        self.cost = game.cost
        self.n = game.n_players
        self.lam = game.market.lam
        self.sig2 = game.market.sigma**2
        self.alphas = game.alphas
        self.eps = cert.eps_floor
        self.settings = speed_settings
        self.dp = dp

    def fields(self, v_layer: np.ndarray):
        """v_layer (N, ...) -> gradients, speeds, aggregate speed, source F."""
        grads = central_gradient(v_layer, self.dp)
        eff = self.lam * grads
        z_star = aggregate_speed_many(self.cost, self.n, eff.sum(axis=0), self.eps, self.settings)
        g_z = self.cost.value(z_star)
        gp_z = self.cost.slope(z_star)
        speeds = (eff - g_z) / gp_z
        source = z_star * eff - speeds * g_z
        if np.any(self.alphas != 0.0):
            source = source - 0.5 * self.sig2 * self.alphas.reshape((-1,) + (1,) * (grads.ndim - 1)) * grads**2
        return grads, speeds, z_star, source


def _terminal_layer(game: GameSpec, prices: np.ndarray) -> np.ndarray:
    return np.array([np.asarray(pl.endowment.value(prices), dtype=float) for pl in game.players])


def _fill_fields(values: np.ndarray, eq: _Equilibrium):
    """Recompute per-layer gradients and speeds from the stored values."""
    n, n_t, n_p = values.shape
    grads = np.empty_like(values)
    speeds = np.empty_like(values)
    agg = np.empty((n_t, n_p))
    for k in range(n_t):
        g, s, z, _ = eq.fields(values[:, k])
        grads[:, k] = g
        speeds[:, k] = s
        agg[k] = z
    return grads, speeds, agg


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def solve_fd(game: GameSpec, grid: GridSpec, settings: FdSettings | None = None) -> Solution:
    """Backward finite-difference solution of the coupled value system.

    Implicit Euler handles the diffusion unconditionally; the advection and
    cost terms are explicit, which imposes dt <= dp / (2 lambda B_agg) with
    B_agg the aggregate speed bound.  The time grid is refined automatically
    if the requested one violates that bound.  Boundary rows impose a zero
    second derivative (payoffs are flat or linear six standard deviations
    from the spot).
    """
    settings = settings or FdSettings()
    market = game.market
    grid.validate_for(market)
    cert = certify_for_game(game, settings.cert_samples)
    bound = apriori_speed_bound(game, cert)
    n = game.n_players

    prices = grid.prices
    dp = grid.dp
    drift_cap = 2.0 * market.lam * n * bound
    dt_cap = dp / drift_cap if drift_cap > 0 else math.inf
    n_t = grid.n_t
    if market.maturity / (n_t - 1) > dt_cap:
        n_t = int(math.ceil(market.maturity / dt_cap)) + 1
    grid_used = replace(grid, n_t=n_t) if n_t != grid.n_t else grid
    times = grid_used.times(market.maturity)
    dt = times[1] - times[0]

    eq = _Equilibrium(game, cert, dp, settings.speed)
    values = np.empty((n, n_t, prices.size))
    values[:, -1] = _terminal_layer(game, prices)

    # (I - dt sigma^2/2 D2) with identity boundary rows, banded storage
    c = dt * market.sigma**2 / (2.0 * dp**2)
    ab = np.zeros((3, prices.size))
    ab[0, 2:] = -c
    ab[1, :] = 1.0 + 2.0 * c
    ab[1, 0] = ab[1, -1] = 1.0
    ab[2, :-2] = -c

    for k in range(n_t - 2, -1, -1):
        _, _, _, source = eq.fields(values[:, k + 1])
        rhs = values[:, k + 1] + dt * source
        values[:, k] = solve_banded((1, 1), ab, rhs.T).T

    grads, speeds, agg = _fill_fields(values, eq)
    meta = {
        "scheme": "fd-implicit-euler",
        "certificate": cert,
        "speed_bound": bound,
        "root_tol": settings.speed.root_tol,
        "n_t_requested": grid.n_t,
        "n_t_used": n_t,
    }
    sol = Solution(grid_used, times, prices, values, grads, speeds, agg, meta)
    if settings.residual_tol is not None:
        rep = residual(sol, game)
        if rep.overall > settings.residual_tol:
            raise SolverError(
                f"interior residual {rep.overall:.3g} exceeds tolerance {settings.residual_tol:.3g}"
            )
        meta["residual"] = rep.overall
    return sol


# ---------------------------------------------------------------------------
# Picard / semigroup
# ---------------------------------------------------------------------------


def solve_picard(game: GameSpec, grid: GridSpec, picard: PicardSettings | None = None) -> Solution:
    """Fixed-point solution of the mild form on subintervals of length tau.

    Within each subinterval the map v -> e^{tL} h + int e^{(t-s)L} F(v_p) ds
    is iterated to the sup-norm tolerance; the subinterval solutions are
    concatenated.  If the sup-change grows two iterations in a row the step
    is declared non-contracting and tau is halved (a uniform contraction
    step exists, but its size is problem dependent).
    """
    picard = picard or PicardSettings()
    market = game.market
    grid.validate_for(market)
    cert = certify_for_game(game)
    bound = apriori_speed_bound(game, cert)
    rule = QuadratureRule.for_grid(grid)
    tau = picard.tau if picard.tau is not None else 0.05 * market.maturity

    last_err: Exception | None = None
    for halving in range(picard.max_tau_halvings + 1):
        try:
            values, times, log = _picard_march(game, grid, cert, rule, tau, picard)
            break
        except _NonContraction as err:
            last_err = err
            tau *= 0.5
    else:
        raise SolverError(f"Picard iteration kept diverging: {last_err}")

    eq = _Equilibrium(game, cert, grid.dp, picard.speed)
    grads, speeds, agg = _fill_fields(values, eq)
    grid_used = replace(grid, n_t=times.size) if times.size != grid.n_t else grid
    meta = {
        "scheme": "picard-semigroup",
        "certificate": cert,
        "speed_bound": bound,
        "root_tol": picard.speed.root_tol,
        "tau": tau,
        "tau_halvings": halving,
        "sublayers": picard.sublayers,
        "iteration_changes": log,
    }
    return Solution(grid_used, times, grid.prices, values, grads, speeds, agg, meta)


def _picard_march(game, grid, cert, rule, tau, picard):
    market = game.market
    horizon = market.maturity
    sig2 = market.sigma**2
    prices = grid.prices
    n = game.n_players
    m_sub = picard.sublayers
    n_tau = max(1, int(math.ceil(horizon / tau - 1e-12)))
    h = horizon / (n_tau * m_sub)  # sub-layer spacing in time to maturity

    eq = _Equilibrium(game, cert, grid.dp, picard.speed)
    n_lay = n_tau * m_sub + 1
    v_tau = np.empty((n, n_lay, prices.size))  # indexed by time to maturity
    v_tau[:, 0] = _terminal_layer(game, prices)
    log: list[list[float]] = []

    def heatg(layers: np.ndarray, variance: float) -> np.ndarray:
        return np.stack(
            [heat_convolve_grid(layers[j], prices, variance, prices, rule) for j in range(n)]
        )

    for step in range(n_tau):
        base = step * m_sub
        h0 = v_tau[:, base]
        seed = np.empty((m_sub + 1, n, prices.size))
        seed[0] = h0
        for m in range(1, m_sub + 1):
            seed[m] = heatg(h0, sig2 * m * h)
        cur = seed.copy()

        changes: list[float] = []
        for _ in range(picard.max_picard_iter):
            f_layers = np.empty_like(cur)
            for m in range(m_sub + 1):
                f_layers[m] = eq.fields(cur[m])[3]
            # e^{(u_m - u_s) L} F(u_s), reused across target layers
            conv = {}
            for s in range(m_sub):
                for delta in range(1, m_sub - s + 1):
                    conv[(s, delta)] = heatg(f_layers[s], sig2 * delta * h)
            new = np.empty_like(cur)
            new[0] = h0
            for m in range(1, m_sub + 1):
                acc = 0.5 * h * (conv[(0, m)] + f_layers[m])
                for s in range(1, m):
                    acc += h * conv[(s, m - s)]
                new[m] = seed[m] + acc
            change = float(np.max(np.abs(new - cur)))
            changes.append(change)
            cur = new
            if change <= picard.fixpoint_tol:
                break
            if len(changes) >= 3 and changes[-1] > changes[-2] > changes[-3]:
                log.append(changes)
                raise _NonContraction(
                    f"sup-change grew two iterations in a row at step {step}: {changes[-3:]}"
                )
        else:
            raise SolverError(
                f"Picard step {step} did not reach {picard.fixpoint_tol:g} "
                f"in {picard.max_picard_iter} iterations (last change {changes[-1]:g})"
            )
        log.append(changes)
        v_tau[:, base + 1 : base + m_sub + 1] = np.swapaxes(cur[1:], 0, 1)

    values = v_tau[:, ::-1]  # reindex from time-to-maturity to calendar time
    times = np.linspace(0.0, horizon, n_lay)
    return np.ascontiguousarray(values), times, log


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def residual(sol: Solution, game: GameSpec) -> ResidualReport:
    """Max absolute interior residual of the value system, all derivative
    terms recomputed with central differences from the stored values."""
    v = sol.values
    n, n_t, n_p = v.shape
    if n_t < 5 or n_p < 5:
        raise ValueError("residual needs at least a 5x5 grid")
    dt = sol.times[1] - sol.times[0]
    dp = sol.prices[1] - sol.prices[0]
    cert = sol.meta.get("certificate") or certify_for_game(game)
    eq = _Equilibrium(game, cert, dp, SpeedSolverSettings())

    inner = slice(1, -1)
    v_t = (v[:, 2:, :] - v[:, :-2, :]) / (2.0 * dt)
    v_pp = (v[:, :, 2:] - 2.0 * v[:, :, 1:-1] + v[:, :, :-2]) / dp**2
    grads = (v[:, :, 2:] - v[:, :, :-2]) / (2.0 * dp)
    eff = game.market.lam * grads
    z_star = aggregate_speed_many(game.cost, n, eff.sum(axis=0), eq.eps, eq.settings)
    g_z = game.cost.value(z_star)
    speeds = (eff - g_z) / game.cost.slope(z_star)
    source = z_star * eff - speeds * g_z
    alphas = game.alphas
    if np.any(alphas != 0.0):
        source = source - 0.5 * eq.sig2 * alphas[:, None, None] * grads**2
    res = v_t[:, :, inner] + 0.5 * eq.sig2 * v_pp[:, inner, :] + source[:, inner, :]
    per_player = np.max(np.abs(res), axis=(1, 2))
    return ResidualReport(per_player=per_player, overall=float(np.max(per_player)))


def surplus(sol: Solution, game: GameSpec, rule: QuadratureRule | None = None,
            time_indices=None) -> np.ndarray:
    """Edge over never trading: v^j(t,p) minus the pure-diffusion expected
    (utility of the) payoff.  Exponential-utility players are compared on
    the utility scale via the exponential map of the stored transform."""
    rule = rule or QuadratureRule.for_grid(sol.grid)
    maturity = game.market.maturity
    sig2 = game.market.sigma**2
    if time_indices is None:
        time_indices = range(sol.times.size)
    time_indices = list(time_indices)
    out = np.empty((sol.n_players, len(time_indices), sol.prices.size))
    for i, pl in enumerate(game.players):
        for row, k in enumerate(time_indices):
            var = sig2 * (maturity - sol.times[k])
            if isinstance(pl.utility, CARA):
                a = pl.utility.alpha
                expected = -heat_convolve(
                    lambda x: np.exp(-a * pl.endowment.value(x)), var, sol.prices, rule
                )
                out[i, row] = -np.exp(-a * sol.values[i, k]) - expected
            else:
                expected = heat_convolve(pl.endowment, var, sol.prices, rule)
                out[i, row] = sol.values[i, k] - expected
    return out


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def write_solution_csv(sol: Solution, path) -> None:
    """Row-major (t, p) dump in full double precision."""
    n = sol.n_players
    cols = (
        ["t", "p"]
        + [f"v_{j+1}" for j in range(n)]
        + [f"grad_{j+1}" for j in range(n)]
        + [f"speed_{j+1}" for j in range(n)]
        + ["agg_speed"]
    )
    n_t, n_p = sol.times.size, sol.prices.size
    data = np.empty((n_t * n_p, len(cols)))
    data[:, 0] = np.repeat(sol.times, n_p)
    data[:, 1] = np.tile(sol.prices, n_t)
    for j in range(n):
        data[:, 2 + j] = sol.values[j].reshape(-1)
        data[:, 2 + n + j] = sol.gradients[j].reshape(-1)
        data[:, 2 + 2 * n + j] = sol.speeds[j].reshape(-1)
    data[:, -1] = sol.aggregate_speed.reshape(-1)
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(cols), comments="")


def read_solution_csv(path, grid: GridSpec, meta: dict | None = None) -> Solution:
    """Rebuild a Solution from its CSV dump; the grid comes from the config
    that produced it."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    n = sum(1 for c in header if c.startswith("v_"))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    times = np.unique(data[:, 0])
    prices = np.unique(data[:, 1])
    n_t, n_p = times.size, prices.size
    if n_t * n_p != data.shape[0]:
        raise ValueError("solution CSV is not a complete (t, p) lattice")
    values = np.stack([data[:, 2 + j].reshape(n_t, n_p) for j in range(n)])
    grads = np.stack([data[:, 2 + n + j].reshape(n_t, n_p) for j in range(n)])
    speeds = np.stack([data[:, 2 + 2 * n + j].reshape(n_t, n_p) for j in range(n)])
    agg = data[:, -1].reshape(n_t, n_p)
    grid_used = replace(grid, n_t=n_t) if grid.n_t != n_t else grid
    return Solution(grid_used, times, prices, values, grads, speeds, agg, dict(meta or {}))
