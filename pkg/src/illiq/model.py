"""Problem definitions: market parameters, liquidity cost curves, terminal
payoffs, player preferences, grids and JSON configuration loading.

Everything in this module is an immutable value object.  Construction
validates the invariants that the solvers rely on (positive volatility,
bounded payoff slopes, marginal trading costs that increase), so downstream
code can assume a well-formed problem instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "ConfigError",
    "ValidationError",
    "MarketParams",
    "CostFunction",
    "LinearCost",
    "SmoothedSpreadCost",
    "TableCost",
    "Payoff",
    "SmoothedCall",
    "SmoothedDigital",
    "Scaled",
    "Negated",
    "SumPayoff",
    "GridPayoff",
    "RiskNeutral",
    "CARA",
    "PlayerSpec",
    "GameSpec",
    "GridSpec",
    "payoff_value",
    "payoff_slope",
    "payoff_sup_slope",
    "load_game",
    "load_grid",
    "load_config",
    "game_to_dict",
    "grid_to_dict",
]


class ConfigError(ValueError):
    """Raised when configuration text cannot be parsed against the schema."""


class ValidationError(ValueError):
    """Raised when a parsed object violates a model invariant."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


# ---------------------------------------------------------------------------
# market
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketParams:
    """Volatility, permanent impact per share, horizon and initial price."""

    sigma: float
    lam: float
    maturity: float
    p0: float

    def __post_init__(self):
        _require(_finite(self.sigma) and self.sigma > 0, "sigma must be > 0")
        _require(_finite(self.lam) and self.lam > 0, "lambda must be > 0")
        _require(_finite(self.maturity) and self.maturity > 0, "T must be > 0 and finite")
        _require(_finite(self.p0), "p0 must be finite")

    @property
    def scale(self) -> float:
        """Terminal price dispersion sigma * sqrt(T), the natural price unit."""
        return self.sigma * math.sqrt(self.maturity)


# ---------------------------------------------------------------------------
# liquidity cost functions
# ---------------------------------------------------------------------------


class CostFunction:
    """Liquidity premium g applied to the aggregate trading speed.

    Subclasses provide ``value`` (g) and ``slope`` (g'), both vectorized.
    ``eps_floor`` is the admissibility floor the certification scan checks
    g' against; it is a declared requirement, not the measured minimum.
    """

    eps_floor: float

    def value(self, z):
        raise NotImplementedError

    def slope(self, z):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LinearCost(CostFunction):
    """g(z) = kappa * z, the block-shaped book without a spread."""

    kappa: float
    eps_floor: float = None  # type: ignore[assignment]

    def __post_init__(self):
        _require(_finite(self.kappa) and self.kappa > 0, "kappa must be > 0")
        if self.eps_floor is None:
            object.__setattr__(self, "eps_floor", 0.5 * self.kappa)
        _require(self.eps_floor > 0, "eps_floor must be > 0")

    def value(self, z):
        return self.kappa * np.asarray(z, dtype=float)

    def slope(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.kappa)

    def to_dict(self) -> dict:
        return {"kind": "linear", "kappa": self.kappa}


@dataclass(frozen=True)
class SmoothedSpreadCost(CostFunction):
    """g(z) = kappa*z + s*(2/pi)*arctan(C*z).

    Smooth stand-in for a half-spread s crossed whenever the net order flow
    changes sign; C controls how fast the spread term saturates.
    """

    kappa: float
    spread: float
    sharpness: float
    eps_floor: float = None  # type: ignore[assignment]

    def __post_init__(self):
        _require(_finite(self.kappa) and self.kappa > 0, "kappa must be > 0")
        _require(_finite(self.spread) and self.spread >= 0, "s must be >= 0")
        _require(_finite(self.sharpness) and self.sharpness > 0, "C must be > 0")
        if self.eps_floor is None:
            object.__setattr__(self, "eps_floor", 0.5 * self.kappa)
        _require(self.eps_floor > 0, "eps_floor must be > 0")

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return self.kappa * z + self.spread * (2.0 / np.pi) * np.arctan(self.sharpness * z)

    def slope(self, z):
        z = np.asarray(z, dtype=float)
        c = self.sharpness
        return self.kappa + 2.0 * self.spread * c / (np.pi * (1.0 + (c * z) ** 2))

    def to_dict(self) -> dict:
        return {"kind": "smoothed_spread", "kappa": self.kappa, "s": self.spread, "C": self.sharpness}


@dataclass(frozen=True)
class TableCost(CostFunction):
    """Cost curve given as samples (z_k, g_k), monotone-cubic interpolated.

    Queries outside the sampled interval raise, since no admissibility
    statement can be made there.
    """

    z_values: tuple
    g_values: tuple
    eps_floor: float = 1e-3

    def __post_init__(self):
        z = np.asarray(self.z_values, dtype=float)
        g = np.asarray(self.g_values, dtype=float)
        _require(z.ndim == 1 and z.size >= 4, "table needs at least 4 samples")
        _require(g.shape == z.shape, "table z and g lengths must match")
        _require(bool(np.all(np.diff(z) > 0)), "table z values must be strictly increasing")
        _require(z[0] < 0.0 < z[-1], "table must bracket z = 0")
        _require(np.all(np.isfinite(z)) and np.all(np.isfinite(g)), "table values must be finite")
        interp = PchipInterpolator(z, g)
        _require(abs(float(interp(0.0))) < 1e-12, "g(0) must be 0")
        _require(self.eps_floor > 0, "eps_floor must be > 0")
        object.__setattr__(self, "z_values", tuple(float(v) for v in z))
        object.__setattr__(self, "g_values", tuple(float(v) for v in g))

    @cached_property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(np.asarray(self.z_values), np.asarray(self.g_values))

    @cached_property
    def _deriv(self):
        return self._interp.derivative()

    def _check_domain(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < self.z_values[0]) or np.any(z > self.z_values[-1]):
            raise ValidationError(
                f"z outside table domain [{self.z_values[0]}, {self.z_values[-1]}]"
            )
        return z

    def value(self, z):
        return self._interp(self._check_domain(z))

    def slope(self, z):
        return self._deriv(self._check_domain(z))

    @property
    def domain(self) -> tuple:
        return (self.z_values[0], self.z_values[-1])

    def to_dict(self) -> dict:
        return {"kind": "custom_table", "table": {"z": list(self.z_values), "g": list(self.g_values)}}


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------


def _softplus(x, width):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + width * np.log1p(np.exp(-np.abs(x) / width))


def _sigmoid(x):
    """Numerically safe logistic function; the exp argument is always <= 0."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class Payoff:
    """Bounded smooth terminal claim with a bounded slope.

    ``bound`` and ``slope_bound`` are certified: |value| <= bound and
    |slope| <= slope_bound hold for every price.
    """

    def value(self, p):
        raise NotImplementedError

    def slope(self, p):
        raise NotImplementedError

    @property
    def bound(self) -> float:
        raise NotImplementedError

    @property
    def slope_bound(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SmoothedCall(Payoff):
    """Mollified capped call: a softplus ramp opening at the strike and a
    second one closing it ``cap`` above, so the payoff is bounded by ``cap``."""

    strike: float
    cap: float
    width: float

    def __post_init__(self):
        _require(_finite(self.strike), "K must be finite")
        _require(_finite(self.cap) and self.cap > 0, "cap must be > 0")
        _require(_finite(self.width) and self.width > 0, "width must be > 0")

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return _softplus(p - self.strike, self.width) - _softplus(p - self.strike - self.cap, self.width)

    def slope(self, p):
        p = np.asarray(p, dtype=float)
        return _sigmoid((p - self.strike) / self.width) - _sigmoid((p - self.strike - self.cap) / self.width)

    @property
    def bound(self) -> float:
        return self.cap

    @property
    def slope_bound(self) -> float:
        # max_p [sigmoid(x) - sigmoid(x - cap/width)] attained midway
        return float(math.tanh(self.cap / (4.0 * self.width)))

    def to_dict(self) -> dict:
        return {"kind": "smoothed_call", "K": self.strike, "cap": self.cap, "width": self.width}


@dataclass(frozen=True)
class SmoothedDigital(Payoff):
    """Logistic step of the given width replacing the indicator at the strike."""

    strike: float
    width: float

    def __post_init__(self):
        _require(_finite(self.strike), "K must be finite")
        _require(_finite(self.width) and self.width > 0, "width must be > 0")

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return _sigmoid((p - self.strike) / self.width)

    def slope(self, p):
        v = self.value(p)
        return v * (1.0 - v) / self.width

    @property
    def bound(self) -> float:
        return 1.0

    @property
    def slope_bound(self) -> float:
        return 1.0 / (4.0 * self.width)

    def to_dict(self) -> dict:
        return {"kind": "smoothed_digital", "K": self.strike, "width": self.width}


@dataclass(frozen=True)
class Scaled(Payoff):
    inner: Payoff
    factor: float

    def __post_init__(self):
        _require(_finite(self.factor), "factor must be finite")

    def value(self, p):
        return self.factor * self.inner.value(p)

    def slope(self, p):
        return self.factor * self.inner.slope(p)

    @property
    def bound(self) -> float:
        return abs(self.factor) * self.inner.bound

    @property
    def slope_bound(self) -> float:
        return abs(self.factor) * self.inner.slope_bound

    def to_dict(self) -> dict:
        return {"kind": "scaled", "factor": self.factor, "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Negated(Payoff):
    """Exact sign flip, used for written (short) positions."""

    inner: Payoff

    def value(self, p):
        return -self.inner.value(p)

    def slope(self, p):
        return -self.inner.slope(p)

    @property
    def bound(self) -> float:
        return self.inner.bound

    @property
    def slope_bound(self) -> float:
        return self.inner.slope_bound

    def to_dict(self) -> dict:
        return {"kind": "negated", "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class SumPayoff(Payoff):
    terms: tuple

    def __post_init__(self):
        _require(len(self.terms) >= 1, "sum needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, p):
        out = self.terms[0].value(p)
        for t in self.terms[1:]:
            out = out + t.value(p)
        return out

    def slope(self, p):
        out = self.terms[0].slope(p)
        for t in self.terms[1:]:
            out = out + t.slope(p)
        return out

    @property
    def bound(self) -> float:
        return sum(t.bound for t in self.terms)

    @property
    def slope_bound(self) -> float:
        return sum(t.slope_bound for t in self.terms)

    def to_dict(self) -> dict:
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class GridPayoff(Payoff):
    """Payoff given by samples, monotone-cubic interpolated and held flat
    beyond the sampled prices (one padding knot each side keeps the slope
    continuous where the flat extension begins)."""

    p_values: tuple
    values: tuple

    def __post_init__(self):
        p = np.asarray(self.p_values, dtype=float)
        v = np.asarray(self.values, dtype=float)
        _require(p.ndim == 1 and p.size >= 4, "payoff grid needs at least 4 samples")
        _require(v.shape == p.shape, "payoff grid p and value lengths must match")
        _require(bool(np.all(np.diff(p) > 0)), "payoff grid prices must be strictly increasing")
        _require(np.all(np.isfinite(p)) and np.all(np.isfinite(v)), "payoff grid values must be finite")
        object.__setattr__(self, "p_values", tuple(float(x) for x in p))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @cached_property
    def _aug(self):
        p = np.asarray(self.p_values)
        v = np.asarray(self.values)
        pad = float(np.median(np.diff(p)))
        p_aug = np.concatenate(([p[0] - pad], p, [p[-1] + pad]))
        v_aug = np.concatenate(([v[0]], v, [v[-1]]))
        interp = PchipInterpolator(p_aug, v_aug)
        return p_aug, interp, interp.derivative()

    def value(self, p):
        p_aug, interp, _ = self._aug
        q = np.clip(np.asarray(p, dtype=float), p_aug[0], p_aug[-1])
        return interp(q)

    def slope(self, p):
        p_aug, _, deriv = self._aug
        p = np.asarray(p, dtype=float)
        inside = (p > p_aug[0]) & (p < p_aug[-1])
        q = np.clip(p, p_aug[0], p_aug[-1])
        return np.where(inside, deriv(q), 0.0)

    @cached_property
    def _scan(self):
        p_aug, interp, deriv = self._aug
        qs = np.linspace(p_aug[0], p_aug[-1], max(2001, 20 * len(self.p_values)))
        return float(np.max(np.abs(interp(qs)))), float(np.max(np.abs(deriv(qs))))

    @property
    def bound(self) -> float:
        return max(self._scan[0], float(np.max(np.abs(self.values))))

    @property
    def slope_bound(self) -> float:
        # 1% headroom over the densely scanned interpolant slope
        return 1.01 * self._scan[1]

    def to_dict(self) -> dict:
        return {"kind": "custom_grid", "grid": {"p": list(self.p_values), "values": list(self.values)}}


def payoff_value(h: Payoff, p):
    """Terminal payoff H(p)."""
    return h.value(p)


def payoff_slope(h: Payoff, p):
    """Payoff price sensitivity H_p(p)."""
    return h.slope(p)


def payoff_sup_slope(h: Payoff) -> float:
    """Certified upper bound on sup_p |H_p(p)|."""
    return h.slope_bound


# ---------------------------------------------------------------------------
# preferences and the game
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskNeutral:
    """Linear utility u(z) = z."""

    alpha: float = 0.0

    def __post_init__(self):
        _require(self.alpha == 0.0, "risk-neutral utility carries no parameter")

    def to_dict(self) -> dict:
        return {"kind": "risk_neutral"}


@dataclass(frozen=True)
class CARA:
    """Exponential utility u(z) = -exp(-alpha z) with absolute risk aversion alpha."""

    alpha: float

    def __post_init__(self):
        _require(_finite(self.alpha) and self.alpha > 0, "alpha must be > 0")

    def to_dict(self) -> dict:
        return {"kind": "cara", "alpha": self.alpha}


Utility = RiskNeutral | CARA


@dataclass(frozen=True)
class PlayerSpec:
    utility: Utility
    endowment: Payoff

    def to_dict(self) -> dict:
        return {"utility": self.utility.to_dict(), "payoff": self.endowment.to_dict()}


@dataclass(frozen=True)
class GameSpec:
    """A complete problem instance: market, common cost curve and N players."""

    market: MarketParams
    cost: CostFunction
    players: tuple

    def __post_init__(self):
        _require(len(self.players) >= 1, "N must be >= 1")
        object.__setattr__(self, "players", tuple(self.players))

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def all_risk_neutral(self) -> bool:
        return all(isinstance(pl.utility, RiskNeutral) for pl in self.players)

    @property
    def alphas(self) -> np.ndarray:
        """Risk-aversion vector; zero entries mark risk-neutral players."""
        return np.array(
            [pl.utility.alpha if isinstance(pl.utility, CARA) else 0.0 for pl in self.players]
        )

    def max_payoff_slope(self) -> float:
        return max(payoff_sup_slope(pl.endowment) for pl in self.players)

    def to_dict(self) -> dict:
        return game_to_dict(self)


@dataclass(frozen=True)
class GridSpec:
    """Uniform (time, price) lattice plus the Gauss-Hermite rule size."""

    p_min: float
    p_max: float
    n_p: int = 401
    n_t: int = 2000
    quad_nodes: int = 128

    def __post_init__(self):
        _require(_finite(self.p_min) and _finite(self.p_max) and self.p_min < self.p_max,
                 "p_min must be < p_max")
        _require(self.n_p >= 3, "n_p must be >= 3")
        _require(self.n_p % 2 == 1, "n_p must be odd")
        _require(self.n_t >= 2, "n_t must be >= 2")
        _require(self.quad_nodes >= 8, "quad_nodes must be >= 8")

    def validate_for(self, market: MarketParams) -> None:
        _require(self.p_min < market.p0 < self.p_max, "grid must contain p0 strictly inside")
        span = 6.0 * market.scale
        _require(
            self.p_min <= market.p0 - span + 1e-12 and self.p_max >= market.p0 + span - 1e-12,
            "grid must cover at least p0 +/- 6 sigma sqrt(T)",
        )

    @property
    def prices(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    def times(self, maturity: float) -> np.ndarray:
        return np.linspace(0.0, maturity, self.n_t)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @staticmethod
    def for_market(market: MarketParams, n_p: int = 401, n_t: int = 2000,
                   quad_nodes: int = 128, span_sigmas: float = 6.0) -> "GridSpec":
        span = span_sigmas * market.scale
        return GridSpec(market.p0 - span, market.p0 + span, n_p, n_t, quad_nodes)

    def to_dict(self) -> dict:
        return grid_to_dict(self)


# ---------------------------------------------------------------------------
# configuration loading
# ---------------------------------------------------------------------------

_MARKET_KEYS = {"sigma", "lambda", "T", "p0"}
_COST_KEYS = {"kind", "kappa", "s", "C", "table"}
_PLAYER_KEYS = {"utility", "payoff"}
_UTILITY_KEYS = {"kind", "alpha"}
_PAYOFF_KEYS = {"kind", "K", "cap", "width", "factor", "grid", "inner", "terms"}
_GRID_KEYS = {"p_min", "p_max", "n_p", "n_t", "quad_nodes"}
_TOP_KEYS = {"market", "cost", "players", "grid"}


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key '{key}' in {where}")
    return obj[key]


def _parse_market(obj) -> MarketParams:
    if not isinstance(obj, dict):
        raise ConfigError("market must be an object")
    _check_keys(obj, _MARKET_KEYS, "market")
    return MarketParams(
        sigma=float(_get(obj, "sigma", "market")),
        lam=float(_get(obj, "lambda", "market")),
        maturity=float(_get(obj, "T", "market")),
        p0=float(_get(obj, "p0", "market")),
    )


def _parse_cost(obj) -> CostFunction:
    if not isinstance(obj, dict):
        raise ConfigError("cost must be an object")
    _check_keys(obj, _COST_KEYS, "cost")
    kind = _get(obj, "kind", "cost")
    if kind == "linear":
        return LinearCost(kappa=float(_get(obj, "kappa", "cost")))
    if kind == "smoothed_spread":
        return SmoothedSpreadCost(
            kappa=float(_get(obj, "kappa", "cost")),
            spread=float(_get(obj, "s", "cost")),
            sharpness=float(_get(obj, "C", "cost")),
        )
    if kind == "custom_table":
        table = _get(obj, "table", "cost")
        if not isinstance(table, dict) or set(table) != {"z", "g"}:
            raise ConfigError("cost.table must be an object with keys 'z' and 'g'")
        return TableCost(z_values=tuple(table["z"]), g_values=tuple(table["g"]))
    raise ConfigError(f"unknown cost kind '{kind}'")


def _parse_payoff(obj, market: MarketParams) -> Payoff:
    if not isinstance(obj, dict):
        raise ConfigError("payoff must be an object")
    _check_keys(obj, _PAYOFF_KEYS, "payoff")
    kind = _get(obj, "kind", "payoff")
    scale = market.scale
    if kind == "smoothed_call":
        return SmoothedCall(
            strike=float(_get(obj, "K", "payoff")),
            cap=float(obj.get("cap", 10.0 * scale)),
            width=float(obj.get("width", 0.05 * scale)),
        )
    if kind == "smoothed_digital":
        return SmoothedDigital(
            strike=float(_get(obj, "K", "payoff")),
            width=float(obj.get("width", 0.05 * scale)),
        )
    if kind == "scaled":
        return Scaled(
            inner=_parse_payoff(_get(obj, "inner", "payoff"), market),
            factor=float(_get(obj, "factor", "payoff")),
        )
    if kind == "negated":
        return Negated(inner=_parse_payoff(_get(obj, "inner", "payoff"), market))
    if kind == "sum":
        terms = _get(obj, "terms", "payoff")
        if not isinstance(terms, list) or not terms:
            raise ConfigError("payoff.terms must be a non-empty list")
        return SumPayoff(terms=tuple(_parse_payoff(t, market) for t in terms))
    if kind == "custom_grid":
        grid = _get(obj, "grid", "payoff")
        if not isinstance(grid, dict) or set(grid) != {"p", "values"}:
            raise ConfigError("payoff.grid must be an object with keys 'p' and 'values'")
        return GridPayoff(p_values=tuple(grid["p"]), values=tuple(grid["values"]))
    raise ConfigError(f"unknown payoff kind '{kind}'")


def _parse_utility(obj) -> Utility:
    if not isinstance(obj, dict):
        raise ConfigError("utility must be an object")
    _check_keys(obj, _UTILITY_KEYS, "utility")
    kind = _get(obj, "kind", "utility")
    if kind == "risk_neutral":
        if "alpha" in obj:
            raise ConfigError("risk_neutral utility takes no alpha")
        return RiskNeutral()
    if kind == "cara":
        return CARA(alpha=float(_get(obj, "alpha", "utility")))
    raise ConfigError(f"unknown utility kind '{kind}'")


def _parse_document(config_text: str) -> dict:
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    return doc


def load_game(config_text: str) -> GameSpec:
    """Parse and validate a JSON problem description into a GameSpec."""
    doc = _parse_document(config_text)
    market = _parse_market(_get(doc, "market", "config"))
    cost = _parse_cost(_get(doc, "cost", "config"))
    players_obj = _get(doc, "players", "config")
    if not isinstance(players_obj, list) or not players_obj:
        raise ConfigError("players must be a non-empty list")
    players = []
    for i, pobj in enumerate(players_obj):
        if not isinstance(pobj, dict):
            raise ConfigError(f"players[{i}] must be an object")
        _check_keys(pobj, _PLAYER_KEYS, f"players[{i}]")
        players.append(
            PlayerSpec(
                utility=_parse_utility(_get(pobj, "utility", f"players[{i}]")),
                endowment=_parse_payoff(_get(pobj, "payoff", f"players[{i}]"), market),
            )
        )
    return GameSpec(market=market, cost=cost, players=tuple(players))


def load_grid(config_text: str, market: MarketParams) -> GridSpec:
    """Grid section of the config, with market-derived defaults when absent."""
    doc = _parse_document(config_text)
    obj = doc.get("grid")
    if obj is None:
        grid = GridSpec.for_market(market)
    else:
        if not isinstance(obj, dict):
            raise ConfigError("grid must be an object")
        _check_keys(obj, _GRID_KEYS, "grid")
        span = 6.0 * market.scale
        grid = GridSpec(
            p_min=float(obj.get("p_min", market.p0 - span)),
            p_max=float(obj.get("p_max", market.p0 + span)),
            n_p=int(obj.get("n_p", 401)),
            n_t=int(obj.get("n_t", 2000)),
            quad_nodes=int(obj.get("quad_nodes", 128)),
        )
    grid.validate_for(market)
    return grid


def load_config(config_text: str) -> tuple[GameSpec, GridSpec]:
    game = load_game(config_text)
    return game, load_grid(config_text, game.market)


def game_to_dict(game: GameSpec) -> dict:
    """Canonical dict form of a game, used for hashing and manifests."""
    return {
        "market": {
            "sigma": game.market.sigma,
            "lambda": game.market.lam,
            "T": game.market.maturity,
            "p0": game.market.p0,
        },
        "cost": game.cost.to_dict(),
        "players": [pl.to_dict() for pl in game.players],
    }


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "p_min": grid.p_min,
        "p_max": grid.p_max,
        "n_p": grid.n_p,
        "n_t": grid.n_t,
        "quad_nodes": grid.quad_nodes,
    }
