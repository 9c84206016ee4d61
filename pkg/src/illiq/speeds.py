"""Equilibrium trading-speed algebra.

The aggregate speed is the root of the first-order condition

    N g(z) + z g'(z) = S,

where S sums the players' effective value gradients (lambda * v_p for
risk-neutral players, lambda * transformed v_p for exponential utility).
Monotonicity of z -> N g(z) + z g'(z) makes the root unique; the slope
floor g' > eps gives an analytic bracket |z| <= |S| / ((N+1) eps), so a
bisection / regula-falsi hybrid converges unconditionally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CostFunction, GameSpec, TableCost

__all__ = [
    "CertificationError",
    "SpeedSolverError",
    "CostCertificate",
    "SpeedSolverSettings",
    "cost_value",
    "cost_slope",
    "certify_cost",
    "certify_for_game",
    "apriori_speed_bound",
    "aggregate_speed",
    "aggregate_speed_many",
    "player_speeds",
]


class CertificationError(RuntimeError):
    """The cost function failed its admissibility scan."""


class SpeedSolverError(RuntimeError):
    """Root bracketing or iteration failure in the speed equation."""


@dataclass(frozen=True)
class CostCertificate:
    """Result of scanning g' and the marginal cost over a working interval."""

    eps_floor: float
    marginal_monotone: bool
    z_lo: float
    z_hi: float
    samples: int

    def covers(self, z_abs: float) -> bool:
        return self.z_lo <= -z_abs and self.z_hi >= z_abs


@dataclass(frozen=True)
class SpeedSolverSettings:
    root_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not self.root_tol > 0:
            raise ValueError("root_tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_SETTINGS = SpeedSolverSettings()


def cost_value(cost: CostFunction, z):
    """Liquidity premium g(z)."""
    return cost.value(z)


def cost_slope(cost: CostFunction, z):
    """Marginal liquidity premium g'(z)."""
    return cost.slope(z)


def certify_cost(cost: CostFunction, interval=None, samples: int = 2001) -> CostCertificate:
    """Scan g' and g + z g' over a uniform sample of the working interval.

    Returns a certificate whose ``eps_floor`` is the scanned minimum of g'
    shaved by 1% (the safety margin absorbs sampling error).  Raises
    CertificationError when the scan finds a nonpositive slope, a slope
    below the cost function's declared ``eps_floor``, or a non-increasing
    marginal cost.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    if interval is None:
        interval = cost.domain if isinstance(cost, TableCost) else (-100.0, 100.0)
    z_lo, z_hi = float(interval[0]), float(interval[1])
    if not z_lo < 0.0 < z_hi:
        raise ValueError("working interval must contain 0")
    zs = np.linspace(z_lo, z_hi, samples)
    slopes = np.asarray(cost.slope(zs), dtype=float)
    min_slope = float(np.min(slopes))
    if min_slope <= 0.0:
        raise CertificationError(
            f"g' reaches {min_slope:.3g} <= 0 on [{z_lo:g}, {z_hi:g}]; cost is inadmissible"
        )
    eps = 0.99 * min_slope
    if eps < cost.eps_floor:
        raise CertificationError(
            f"certified slope floor {eps:.3g} falls below the declared eps_floor "
            f"{cost.eps_floor:.3g} on [{z_lo:g}, {z_hi:g}]"
        )
    marginal = np.asarray(cost.value(zs), dtype=float) + zs * slopes
    if not bool(np.all(np.diff(marginal) > 0.0)):
        raise CertificationError(
            f"z -> g(z) + z g'(z) is not strictly increasing on [{z_lo:g}, {z_hi:g}]"
        )
    return CostCertificate(
        eps_floor=eps, marginal_monotone=True, z_lo=z_lo, z_hi=z_hi, samples=samples
    )


def certify_for_game(game: GameSpec, samples: int = 2001) -> CostCertificate:
    """Certify the game's cost on an interval wide enough for its own
    equilibrium speed range, growing the interval until it self-covers."""
    cost = game.cost
    lam = game.market.lam
    h = game.max_payoff_slope()
    n = game.n_players
    if isinstance(cost, TableCost):
        cert = certify_cost(cost, cost.domain, samples)
        _check_coverage(cert, n * (lam / cert.eps_floor) * h)
        return cert
    interval = (-1.0, 1.0)
    for _ in range(4):
        cert = certify_cost(cost, interval, samples)
        bound = n * (lam / cert.eps_floor) * h
        if cert.covers(bound):
            return cert
        reach = 1.05 * bound + 1.0
        interval = (-reach, reach)
    raise CertificationError("could not certify an interval covering the speed bound")


def _check_coverage(cert: CostCertificate, bound: float) -> None:
    if not cert.covers(bound):
        raise CertificationError(
            f"working interval [{cert.z_lo:g}, {cert.z_hi:g}] does not cover the "
            f"a-priori speed range +/-{bound:g}"
        )


def apriori_speed_bound(game: GameSpec, cert: CostCertificate) -> float:
    """Uniform equilibrium speed bound N (lambda / eps) max_j sup|H^j_p|."""
    h = game.max_payoff_slope()
    bound = game.n_players * (game.market.lam / cert.eps_floor) * h
    _check_coverage(cert, bound)
    return bound


def _phi(cost: CostFunction, n: int, z, s):
    return n * cost.value(z) + z * cost.slope(z) - s


def aggregate_speed_many(
    cost: CostFunction,
    n_players: int,
    grad_sums,
    eps_floor: float,
    settings: SpeedSolverSettings = DEFAULT_SETTINGS,
):
    """Vectorized root of N g(z) + z g'(z) = S for an array of S values.

    The returned z solves the equation to |residual| <= N * eps * root_tol
    and sits within root_tol of the exact root.
    """
    s = np.atleast_1d(np.asarray(grad_sums, dtype=float))
    tol = settings.root_tol
    half = np.abs(s) / ((n_players + 1) * eps_floor) + tol
    lo, hi = -half, half.copy()
    if isinstance(cost, TableCost):
        d_lo, d_hi = cost.domain
        lo = np.maximum(lo, d_lo)
        hi = np.minimum(hi, d_hi)
    f_lo = _phi(cost, n_players, lo, s)
    f_hi = _phi(cost, n_players, hi, s)
    if np.any(f_lo > 0.0) or np.any(f_hi < 0.0):
        raise SpeedSolverError(
            "root bracket does not straddle a sign change; cost certificate invalid"
        )
    f_tol = n_players * eps_floor * tol

    def _absorb(z_new, f_new, lo, hi, f_lo, f_hi):
        neg = f_new < 0.0
        pos = f_new > 0.0
        zero = ~neg & ~pos
        lo = np.where(neg | zero, z_new, lo)
        f_lo = np.where(neg | zero, f_new, f_lo)
        hi = np.where(pos | zero, z_new, hi)
        f_hi = np.where(pos | zero, f_new, f_hi)
        return lo, hi, f_lo, f_hi

    for _ in range(settings.max_iter):
        done = (hi - lo <= tol) & (np.minimum(np.abs(f_lo), np.abs(f_hi)) <= f_tol)
        if bool(np.all(done)):
            break
        # regula-falsi proposal, safeguarded to the bracket interior
        denom = f_hi - f_lo
        mid = 0.5 * (lo + hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            sec = (lo * f_hi - hi * f_lo) / denom
        sec = np.where(np.isfinite(sec), sec, mid)
        sec = np.clip(sec, lo, hi)
        f_sec = _phi(cost, n_players, sec, s)
        lo, hi, f_lo, f_hi = _absorb(sec, f_sec, lo, hi, f_lo, f_hi)
        # bisection step keeps worst-case convergence geometric
        mid = 0.5 * (lo + hi)
        f_mid = _phi(cost, n_players, mid, s)
        lo, hi, f_lo, f_hi = _absorb(mid, f_mid, lo, hi, f_lo, f_hi)
    else:
        raise SpeedSolverError(f"speed root did not converge in {settings.max_iter} iterations")
    root = np.where(np.abs(f_lo) <= np.abs(f_hi), lo, hi)
    return root


def aggregate_speed(
    cost: CostFunction,
    n_players: int,
    grad_sum: float,
    eps_floor: float,
    settings: SpeedSolverSettings = DEFAULT_SETTINGS,
) -> float:
    """Unique aggregate equilibrium speed for one summed effective gradient."""
    return float(aggregate_speed_many(cost, n_players, [grad_sum], eps_floor, settings)[0])


def player_speeds(cost: CostFunction, effective_gradients, z_star):
    """Per-player speeds (e_j - g(z*)) / g'(z*) given the aggregate root.

    Well defined because g' >= eps > 0.  The speeds sum back to z_star up
    to N * root_tol by construction of the root.
    """
    e = np.asarray(effective_gradients, dtype=float)
    gz = cost.value(z_star)
    gpz = cost.slope(z_star)
    return (e - gz) / gpz
