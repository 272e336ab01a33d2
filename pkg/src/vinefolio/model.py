"""Two-stage stochastic portfolio model with currency overlay.

The first stage buys/sells assets and FX forward pairs out of initial
cash; the second stage rebalances per scenario after prices realize.
The objective is the CVaR of the end-of-horizon portfolio loss, with a
minimum expected-return target. All constraints are evaluated as soft
residuals so a genetic algorithm can optimize a penalized fitness.

Conventions
-----------
- Forwards are treated as priced positions: one unit of pair k costs
  P0 at the first stage and is worth P0 * (1 + adjusted long-currency
  return - adjusted short-currency return) per scenario, so buying a
  forward moves value between cash and the forward account without
  changing wealth.
- Cash is tracked in a free-cash account: any first-stage surplus is
  carried into the recourse stage and counted in terminal wealth; the
  cash-balance residual is the unfunded overspend only.
- Margin cash M * sum(|q_k| * P_k) is denominated in the base currency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import overlay
from .errors import EmptyScenarios, InvalidParameter, MissingColumn
from .scenarios import ScenarioSet


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """All model data: universe, parameters, costs, first-stage prices."""

    assets: tuple[str, ...]
    asset_currency: tuple[str, ...]          # currency code per asset
    currencies: tuple[str, ...]
    base: str
    forward_pairs: tuple[tuple[int, int], ...]  # (long ccy idx, short ccy idx)

    # Model parameters.
    mu: float
    beta: float
    a_min: np.ndarray
    a_max: np.ndarray
    c_min: np.ndarray
    c_max: np.ndarray
    t_min_asset: np.ndarray
    t_min_forward: np.ndarray
    v_u: float
    k_c: int
    k_g: int
    margin_rate: float
    big_b: float
    h0: float
    a0: np.ndarray
    q0: np.ndarray
    w0: float

    # Transaction costs.
    fixed_buy_asset: np.ndarray
    fixed_sell_asset: np.ndarray
    var_buy_asset: np.ndarray
    var_sell_asset: np.ndarray
    fixed_buy_forward: np.ndarray
    fixed_sell_forward: np.ndarray
    var_buy_forward: np.ndarray
    var_sell_forward: np.ndarray

    # First-stage prices.
    p0_asset: np.ndarray
    p0_forward: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise InvalidParameter(f"beta must be in (0,1), got {self.beta}")
        if not 0.0 <= self.margin_rate <= 1.0:
            raise InvalidParameter(f"margin rate must be in [0,1], got {self.margin_rate}")
        if not 0.0 <= self.v_u <= 1.0:
            raise InvalidParameter(f"overlay limit must be in [0,1], got {self.v_u}")
        if self.w0 <= 0.0:
            raise InvalidParameter("initial wealth must be positive")
        if np.any(self.a_min > self.a_max) or np.any(self.c_min > self.c_max):
            raise InvalidParameter("min bound exceeds max bound")
        if self.base not in self.currencies:
            raise InvalidParameter(f"base currency {self.base!r} not in universe")
        max_pairs = len(self.currencies) * (len(self.currencies) - 1) // 2
        if len(self.forward_pairs) > max_pairs:
            raise InvalidParameter("more forward pairs than currency pairs")

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_currencies(self) -> int:
        return len(self.currencies)

    @property
    def n_forwards(self) -> int:
        return len(self.forward_pairs)

    @property
    def base_index(self) -> int:
        return self.currencies.index(self.base)

    def asset_currency_index(self) -> np.ndarray:
        return np.array(
            [self.currencies.index(c) for c in self.asset_currency], dtype=int
        )

    def forward_sign_matrix(self) -> np.ndarray:
        """K x C matrix: +1 on the long currency, -1 on the short one."""
        T = np.zeros((self.n_forwards, self.n_currencies), dtype=int)
        for k, (j1, j2) in enumerate(self.forward_pairs):
            T[k, j1] = 1
            T[k, j2] = -1
        return T


def default_big_b(w0: float, prices: np.ndarray) -> float:
    """Never-binding trade cap: 10 * W0 / min price."""
    pos = prices[prices > 0]
    return 10.0 * w0 / float(pos.min()) if pos.size else 10.0 * w0


def instance_from_dict(doc: dict) -> Instance:
    assets = doc["assets"]
    currencies = doc["currencies"]
    forwards = doc.get("forwards", [])
    costs = doc.get("costs", {})
    params = doc["params"]
    acosts = costs.get("assets", {})
    fcosts = costs.get("forwards", {})

    names = tuple(a["name"] for a in assets)
    ccy_names = tuple(c["name"] for c in currencies)
    ccy_index = {c: j for j, c in enumerate(ccy_names)}
    pairs = tuple(
        (ccy_index[f["pair"][0]], ccy_index[f["pair"][1]]) for f in forwards
    )

    def num(doc_, key, default):
        value = doc_.get(key)
        return float(default) if value is None else float(value)

    def asset_cost(name, key):
        return float(acosts.get(name, {}).get(key, 0.0))

    def fwd_cost(k, key):
        label = forwards[k].get("name", f"{forwards[k]['pair'][0]}/{forwards[k]['pair'][1]}")
        return float(fcosts.get(label, {}).get(key, 0.0))

    p0_asset = np.array([float(a["price"]) for a in assets])
    w0 = float(params["w0"])
    big_b = params.get("big_b")
    inst = Instance(
        assets=names,
        asset_currency=tuple(a["currency"] for a in assets),
        currencies=ccy_names,
        base=doc["base"],
        forward_pairs=pairs,
        mu=float(params.get("mu", 0.0)),
        beta=float(params.get("beta", 0.95)),
        a_min=np.array([num(a, "a_min", 0.0) for a in assets]),
        a_max=np.array([num(a, "a_max", np.inf) for a in assets]),
        c_min=np.array([num(c, "c_min", -np.inf) for c in currencies]),
        c_max=np.array([num(c, "c_max", np.inf) for c in currencies]),
        t_min_asset=np.array([float(a.get("t_min", 0.0)) for a in assets]),
        t_min_forward=np.array([float(f.get("t_min", 0.0)) for f in forwards]),
        v_u=float(params.get("v_u", 1.0)),
        k_c=int(params.get("k_c", len(ccy_names))),
        k_g=int(params.get("k_g", len(pairs))),
        margin_rate=float(params.get("margin", 0.0)),
        big_b=float(big_b) if big_b is not None else default_big_b(w0, p0_asset),
        h0=float(params.get("h0", w0)),
        a0=np.array([float(a.get("a0", 0.0)) for a in assets]),
        q0=np.array([float(f.get("q0", 0.0)) for f in forwards]),
        w0=w0,
        fixed_buy_asset=np.array([asset_cost(n, "fixed_buy") for n in names]),
        fixed_sell_asset=np.array([asset_cost(n, "fixed_sell") for n in names]),
        var_buy_asset=np.array([asset_cost(n, "var_buy") for n in names]),
        var_sell_asset=np.array([asset_cost(n, "var_sell") for n in names]),
        fixed_buy_forward=np.array([fwd_cost(k, "fixed_buy") for k in range(len(pairs))]),
        fixed_sell_forward=np.array([fwd_cost(k, "fixed_sell") for k in range(len(pairs))]),
        var_buy_forward=np.array([fwd_cost(k, "var_buy") for k in range(len(pairs))]),
        var_sell_forward=np.array([fwd_cost(k, "var_sell") for k in range(len(pairs))]),
        p0_asset=p0_asset,
        p0_forward=np.array([float(f.get("price", 1.0)) for f in forwards]),
    )
    return inst


def instance_to_dict(inst: Instance) -> dict:
    assets = []
    for i, name in enumerate(inst.assets):
        assets.append({
            "name": name,
            "currency": inst.asset_currency[i],
            "price": float(inst.p0_asset[i]),
            "a0": float(inst.a0[i]),
            "a_min": float(inst.a_min[i]),
            "a_max": None if np.isinf(inst.a_max[i]) else float(inst.a_max[i]),
            "t_min": float(inst.t_min_asset[i]),
        })
    currencies = []
    for j, name in enumerate(inst.currencies):
        currencies.append({
            "name": name,
            "c_min": None if np.isinf(inst.c_min[j]) else float(inst.c_min[j]),
            "c_max": None if np.isinf(inst.c_max[j]) else float(inst.c_max[j]),
        })
    forwards = []
    for k, (j1, j2) in enumerate(inst.forward_pairs):
        forwards.append({
            "pair": [inst.currencies[j1], inst.currencies[j2]],
            "price": float(inst.p0_forward[k]),
            "q0": float(inst.q0[k]),
            "t_min": float(inst.t_min_forward[k]),
        })
    costs = {
        "assets": {
            name: {
                "fixed_buy": float(inst.fixed_buy_asset[i]),
                "fixed_sell": float(inst.fixed_sell_asset[i]),
                "var_buy": float(inst.var_buy_asset[i]),
                "var_sell": float(inst.var_sell_asset[i]),
            }
            for i, name in enumerate(inst.assets)
        },
        "forwards": {
            f"{inst.currencies[j1]}/{inst.currencies[j2]}": {
                "fixed_buy": float(inst.fixed_buy_forward[k]),
                "fixed_sell": float(inst.fixed_sell_forward[k]),
                "var_buy": float(inst.var_buy_forward[k]),
                "var_sell": float(inst.var_sell_forward[k]),
            }
            for k, (j1, j2) in enumerate(inst.forward_pairs)
        },
    }
    params = {
        "mu": inst.mu, "beta": inst.beta, "v_u": inst.v_u,
        "k_c": inst.k_c, "k_g": inst.k_g, "margin": inst.margin_rate,
        "big_b": inst.big_b, "h0": inst.h0, "w0": inst.w0,
    }
    return {"assets": assets, "currencies": currencies, "base": inst.base,
            "forwards": forwards, "costs": costs, "params": params}


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")


def with_return_target(inst: Instance, mu: float) -> Instance:
    return replace(inst, mu=float(mu))


# ---------------------------------------------------------------------------
# Solution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    """First-stage and optional per-scenario recourse decisions.

    Binary arrays hold 0/1 floats. Recourse arrays are (N, ...) shaped;
    None means no recourse trading in any scenario.
    """

    b_asset: np.ndarray
    s_asset: np.ndarray
    x_asset: np.ndarray
    y_asset: np.ndarray
    b_fwd: np.ndarray
    s_fwd: np.ndarray
    x_fwd: np.ndarray
    y_fwd: np.ndarray
    z: np.ndarray

    rb_asset: np.ndarray | None = None
    rs_asset: np.ndarray | None = None
    rx_asset: np.ndarray | None = None
    ry_asset: np.ndarray | None = None
    rb_fwd: np.ndarray | None = None
    rs_fwd: np.ndarray | None = None
    rx_fwd: np.ndarray | None = None
    ry_fwd: np.ndarray | None = None
    rz: np.ndarray | None = None

    @property
    def has_recourse(self) -> bool:
        return self.rb_asset is not None


def zero_solution(inst: Instance) -> Solution:
    na, nf, nc = inst.n_assets, inst.n_forwards, inst.n_currencies
    return Solution(
        b_asset=np.zeros(na), s_asset=np.zeros(na),
        x_asset=np.zeros(na), y_asset=np.zeros(na),
        b_fwd=np.zeros(nf), s_fwd=np.zeros(nf),
        x_fwd=np.zeros(nf), y_fwd=np.zeros(nf),
        z=np.zeros(nc),
    )


# ---------------------------------------------------------------------------
# Scenario prices
# ---------------------------------------------------------------------------


def scenario_prices(inst: Instance, scen: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-scenario prices: (N x A asset prices, N x K forward prices).

    Asset: P0 * (1 + adjusted asset return + adjusted currency return).
    Forward: P0 * (1 + long-leg return - short-leg return), so equal leg
    returns leave the price unchanged.
    """
    for name in list(inst.assets) + list(inst.currencies):
        if name not in scen.columns:
            raise MissingColumn(name)
    asset_r = np.column_stack([scen.column(a) for a in inst.assets])
    ccy_r = np.column_stack([scen.column(c) for c in inst.currencies])
    ccy_of_asset = inst.asset_currency_index()
    p_asset = inst.p0_asset * (1.0 + asset_r + ccy_r[:, ccy_of_asset])
    if inst.n_forwards:
        long_idx = np.array([p[0] for p in inst.forward_pairs])
        short_idx = np.array([p[1] for p in inst.forward_pairs])
        p_fwd = inst.p0_forward * (1.0 + ccy_r[:, long_idx] - ccy_r[:, short_idx])
    else:
        p_fwd = np.zeros((scen.n_scenarios, 0))
    return p_asset, p_fwd


# ---------------------------------------------------------------------------
# Stage evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FirstStageReport:
    a: np.ndarray                 # final asset units
    q: np.ndarray                 # final forward units
    q_value: np.ndarray           # forward market values q_k * P0_k
    F: np.ndarray                 # K x C exposure matrix
    c: np.ndarray                 # currency exposures
    margin: float
    free_cash: float
    residuals: dict[str, float] = field(repr=False)

    @property
    def total_violation(self) -> float:
        return float(sum(self.residuals.values()))


def evaluate_first_stage(inst: Instance, sol: Solution) -> FirstStageReport:
    w0 = inst.w0
    b_a, s_a = sol.b_asset, sol.s_asset
    x_a, y_a = sol.x_asset, sol.y_asset
    b_f, s_f = sol.b_fwd, sol.s_fwd
    x_f, y_f = sol.x_fwd, sol.y_fwd

    a = inst.a0 + b_a * x_a - s_a * y_a
    q = inst.q0 + b_f * x_f - s_f * y_f

    sale_proceeds = float((s_a * inst.p0_asset) @ y_a + (s_f * inst.p0_forward) @ y_f)
    sale_costs = float(
        ((inst.fixed_sell_asset + inst.var_sell_asset * s_a * inst.p0_asset) @ y_a)
        + ((inst.fixed_sell_forward + inst.var_sell_forward * s_f * inst.p0_forward) @ y_f)
    )
    buy_outlay = float((b_a * inst.p0_asset) @ x_a + (b_f * inst.p0_forward) @ x_f)
    buy_costs = float(
        ((inst.fixed_buy_asset + inst.var_buy_asset * b_a * inst.p0_asset) @ x_a)
        + ((inst.fixed_buy_forward + inst.var_buy_forward * b_f * inst.p0_forward) @ x_f)
    )
    available = inst.h0 + sale_proceeds - sale_costs
    spend = buy_outlay + buy_costs
    free_cash = max(0.0, available - spend)
    cash_violation = max(0.0, spend - available)

    q_value = q * inst.p0_forward
    T = inst.forward_sign_matrix()
    F = T * q_value[:, None]
    margin = inst.margin_rate * float(np.abs(q) @ inst.p0_forward)

    asset_values = np.zeros((inst.n_assets, inst.n_currencies))
    ccy_of_asset = inst.asset_currency_index()
    asset_values[np.arange(inst.n_assets), ccy_of_asset] = a * inst.p0_asset
    c = overlay.currency_exposure(asset_values, F, margin, inst.base_index)

    res: dict[str, float] = {}
    res["cash_balance"] = cash_violation / w0
    res["total_overlay"] = max(
        0.0, overlay.total_overlay(F) - inst.v_u * float(c.sum())
    ) / w0
    res["buy_or_sell_asset"] = float(np.maximum(0.0, x_a + y_a - 1.0).sum())
    res["buy_or_sell_forward"] = float(np.maximum(0.0, x_f + y_f - 1.0).sum())
    res["trade_size_asset"] = float(
        (np.maximum(0.0, inst.t_min_asset * x_a - b_a) * inst.p0_asset).sum()
        + (np.maximum(0.0, inst.t_min_asset * y_a - s_a) * inst.p0_asset).sum()
        + (np.maximum(0.0, b_a - inst.big_b) * inst.p0_asset).sum()
        + (np.maximum(0.0, s_a - inst.big_b) * inst.p0_asset).sum()
    ) / w0
    res["trade_size_forward"] = float(
        (np.maximum(0.0, inst.t_min_forward * x_f - b_f) * inst.p0_forward).sum()
        + (np.maximum(0.0, inst.t_min_forward * y_f - s_f) * inst.p0_forward).sum()
        + (np.maximum(0.0, b_f - inst.big_b) * inst.p0_forward).sum()
        + (np.maximum(0.0, s_f - inst.big_b) * inst.p0_forward).sum()
    ) / w0
    # The floor applies only to flagged currencies (avoids -inf * 0).
    floor = np.where(sol.z > 0.5, inst.c_min, -np.inf)
    res["currency_exposure"] = float(
        np.maximum(0.0, floor - c).sum()
        + np.maximum(0.0, c - inst.c_max).sum()
    ) / w0
    # Country activity: z_j demands at least one trade touching currency j.
    trades_per_ccy = np.zeros(inst.n_currencies)
    np.add.at(trades_per_ccy, ccy_of_asset, x_a + y_a)
    res["country_activity"] = float(np.maximum(0.0, sol.z - trades_per_ccy).sum())
    res["currency_cardinality"] = max(0.0, float(sol.z.sum()) - inst.k_c)
    res["forward_cardinality"] = max(0.0, float((x_f + y_f).sum()) - inst.k_g)
    res["nonnegative_trades"] = float(
        (np.maximum(0.0, -b_a) * inst.p0_asset).sum()
        + (np.maximum(0.0, -s_a) * inst.p0_asset).sum()
        + (np.maximum(0.0, -b_f) * inst.p0_forward).sum()
        + (np.maximum(0.0, -s_f) * inst.p0_forward).sum()
    ) / w0

    return FirstStageReport(a=a, q=q, q_value=q_value, F=F, c=c,
                            margin=margin, free_cash=free_cash, residuals=res)


@dataclass(frozen=True)
class RecourseReport:
    """Vectorized over scenarios: arrays are (N, ...) shaped."""

    a: np.ndarray                 # N x A final units
    q: np.ndarray                 # N x K final units
    margin: np.ndarray            # N
    free_cash: np.ndarray         # N
    wealth: np.ndarray            # N
    residuals: dict[str, np.ndarray] = field(repr=False)  # each length N

    def mean_residuals(self) -> dict[str, float]:
        return {k: float(v.mean()) for k, v in self.residuals.items()}


def _recourse_arrays(inst: Instance, sol: Solution, N: int):
    na, nf, nc = inst.n_assets, inst.n_forwards, inst.n_currencies
    if sol.has_recourse:
        return (sol.rb_asset, sol.rs_asset, sol.rx_asset, sol.ry_asset,
                sol.rb_fwd, sol.rs_fwd, sol.rx_fwd, sol.ry_fwd, sol.rz)
    zeros = np.zeros((N, na))
    zf = np.zeros((N, nf))
    # With no recourse trades the country flags carry over unchanged.
    rz = np.broadcast_to(sol.z, (N, nc))
    return zeros, zeros, zeros, zeros, zf, zf, zf, zf, rz


def evaluate_recourse(inst: Instance, sol: Solution, first: FirstStageReport,
                      p_asset: np.ndarray, p_fwd: np.ndarray) -> RecourseReport:
    """Evaluate all scenarios at once; rows of p_asset/p_fwd are scenarios."""
    N = p_asset.shape[0]
    w0 = inst.w0
    rb_a, rs_a, rx_a, ry_a, rb_f, rs_f, rx_f, ry_f, rz = _recourse_arrays(inst, sol, N)

    a = first.a + rb_a * rx_a - rs_a * ry_a          # N x A
    q = first.q + rb_f * rx_f - rs_f * ry_f          # N x K

    sale_proceeds = ((rs_a * p_asset) * ry_a).sum(axis=1) + ((rs_f * p_fwd) * ry_f).sum(axis=1)
    sale_costs = (
        ((inst.fixed_sell_asset + inst.var_sell_asset * rs_a * p_asset) * ry_a).sum(axis=1)
        + ((inst.fixed_sell_forward + inst.var_sell_forward * rs_f * p_fwd) * ry_f).sum(axis=1)
    )
    buy_outlay = ((rb_a * p_asset) * rx_a).sum(axis=1) + ((rb_f * p_fwd) * rx_f).sum(axis=1)
    buy_costs = (
        ((inst.fixed_buy_asset + inst.var_buy_asset * rb_a * p_asset) * rx_a).sum(axis=1)
        + ((inst.fixed_buy_forward + inst.var_buy_forward * rb_f * p_fwd) * rx_f).sum(axis=1)
    )
    available = first.free_cash + sale_proceeds - sale_costs
    spend = buy_outlay + buy_costs
    free_cash = np.maximum(0.0, available - spend)
    cash_violation = np.maximum(0.0, spend - available)

    q_value = q * p_fwd                               # N x K
    T = inst.forward_sign_matrix()                    # K x C
    ovl_cols = q_value @ T                            # N x C column sums of F^r
    margin = inst.margin_rate * (np.abs(q) * p_fwd).sum(axis=1)

    ccy_of_asset = inst.asset_currency_index()
    asset_value = a * p_asset                         # N x A
    c = np.zeros((N, inst.n_currencies))
    np.add.at(c.T, ccy_of_asset, asset_value.T)
    c += ovl_cols
    c[:, inst.base_index] += margin

    wealth = asset_value.sum(axis=1) + q_value.sum(axis=1) + margin + free_cash

    res: dict[str, np.ndarray] = {}
    res["cash_balance"] = cash_violation / w0
    total_ovl = 0.5 * np.abs(ovl_cols).sum(axis=1)
    res["total_overlay"] = np.maximum(0.0, total_ovl - inst.v_u * c.sum(axis=1)) / w0
    res["buy_or_sell_asset"] = np.maximum(0.0, rx_a + ry_a - 1.0).sum(axis=1)
    res["buy_or_sell_forward"] = np.maximum(0.0, rx_f + ry_f - 1.0).sum(axis=1)
    res["trade_size_asset"] = (
        (np.maximum(0.0, inst.t_min_asset * rx_a - rb_a) * p_asset).sum(axis=1)
        + (np.maximum(0.0, inst.t_min_asset * ry_a - rs_a) * p_asset).sum(axis=1)
        + (np.maximum(0.0, rb_a - inst.big_b) * p_asset).sum(axis=1)
        + (np.maximum(0.0, rs_a - inst.big_b) * p_asset).sum(axis=1)
    ) / w0
    res["trade_size_forward"] = (
        (np.maximum(0.0, inst.t_min_forward * rx_f - rb_f) * p_fwd).sum(axis=1)
        + (np.maximum(0.0, inst.t_min_forward * ry_f - rs_f) * p_fwd).sum(axis=1)
        + (np.maximum(0.0, rb_f - inst.big_b) * p_fwd).sum(axis=1)
        + (np.maximum(0.0, rs_f - inst.big_b) * p_fwd).sum(axis=1)
    ) / w0
    floor = np.where(rz > 0.5, inst.c_min, -np.inf)
    res["currency_exposure"] = (
        np.maximum(0.0, floor - c).sum(axis=1)
        + np.maximum(0.0, c - inst.c_max).sum(axis=1)
    ) / w0
    trades_per_ccy = np.zeros((N, inst.n_currencies))
    np.add.at(trades_per_ccy.T, ccy_of_asset, (rx_a + ry_a).T)
    if sol.has_recourse:
        res["country_activity"] = np.maximum(0.0, rz - trades_per_ccy).sum(axis=1)
    else:
        res["country_activity"] = np.zeros(N)
    res["currency_cardinality"] = np.maximum(0.0, rz.sum(axis=1) - inst.k_c)
    res["forward_cardinality"] = np.maximum(0.0, (rx_f + ry_f).sum(axis=1) - inst.k_g)
    res["nonnegative_trades"] = (
        (np.maximum(0.0, -rb_a) * p_asset).sum(axis=1)
        + (np.maximum(0.0, -rs_a) * p_asset).sum(axis=1)
        + (np.maximum(0.0, -rb_f) * p_fwd).sum(axis=1)
        + (np.maximum(0.0, -rs_f) * p_fwd).sum(axis=1)
    ) / w0

    return RecourseReport(a=a, q=q, margin=margin, free_cash=free_cash,
                          wealth=wealth, residuals=res)


def wealth(inst: Instance, sol: Solution, first: FirstStageReport,
           p_asset_row: np.ndarray, p_fwd_row: np.ndarray) -> float:
    """Terminal wealth for a single scenario (convenience wrapper)."""
    rep = evaluate_recourse(inst, sol, first,
                            np.atleast_2d(p_asset_row), np.atleast_2d(p_fwd_row))
    return float(rep.wealth[0])


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


def cvar_objective(losses, probabilities, beta: float) -> tuple[float, float, np.ndarray]:
    """VaR, CVaR and per-scenario shortfalls for a discrete loss distribution.

    alpha is the smallest loss whose cumulative probability reaches beta
    (for uniform probabilities, the ceil(beta*N)-th smallest loss); it
    minimizes the discrete Rockafellar-Uryasev auxiliary function, and
    cvar = alpha + (1/(1-beta)) * sum(p * max(loss - alpha, 0)).
    """
    losses = np.asarray(losses, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if losses.size == 0:
        raise EmptyScenarios("no losses")
    order = np.argsort(losses, kind="stable")
    cum = np.cumsum(p[order])
    pos = int(np.searchsorted(cum, beta - 1e-15))
    pos = min(pos, losses.size - 1)
    alpha = float(losses[order[pos]])
    e = np.maximum(losses - alpha, 0.0)
    cvar = alpha + float(p @ e) / (1.0 - beta)
    return alpha, cvar, e


def expected_return(wealth_vec, probabilities, w0: float) -> float:
    wealth_vec = np.asarray(wealth_vec, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    return float(p @ (wealth_vec / w0 - 1.0))


def target_residual(wealth_vec, probabilities, w0: float, mu: float) -> float:
    return max(0.0, mu - expected_return(wealth_vec, probabilities, w0))


# ---------------------------------------------------------------------------
# Penalized fitness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Evaluation:
    fitness: float
    cvar: float
    alpha: float
    expected_return: float
    violation: float
    first: FirstStageReport
    recourse: RecourseReport
    residuals: dict[str, float] = field(repr=False)


def evaluate(inst: Instance, sol: Solution, scen: ScenarioSet,
             p_asset: np.ndarray | None = None,
             p_fwd: np.ndarray | None = None) -> Evaluation:
    """Full evaluation: stages, wealth, CVaR, penalty-combined fitness."""
    if p_asset is None or p_fwd is None:
        p_asset, p_fwd = scenario_prices(inst, scen)
    first = evaluate_first_stage(inst, sol)
    rec = evaluate_recourse(inst, sol, first, p_asset, p_fwd)
    losses = -(rec.wealth / inst.w0 - 1.0)
    alpha, cvar, _ = cvar_objective(losses, scen.probabilities, inst.beta)
    exp_ret = expected_return(rec.wealth, scen.probabilities, inst.w0)

    residuals = dict(first.residuals)
    for key, vec in rec.residuals.items():
        residuals["recourse_" + key] = float(vec.mean())
    residuals["return_target"] = max(0.0, inst.mu - exp_ret)
    violation = float(sum(residuals.values()))
    w_c = 1e3 * max(1.0, abs(cvar))
    fitness = cvar + w_c * violation
    return Evaluation(fitness=fitness, cvar=cvar, alpha=alpha,
                      expected_return=exp_ret, violation=violation,
                      first=first, recourse=rec, residuals=residuals)


def penalized_fitness(inst: Instance, sol: Solution, scen: ScenarioSet) -> float:
    return evaluate(inst, sol, scen).fitness
