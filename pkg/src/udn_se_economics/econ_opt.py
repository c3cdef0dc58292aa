# src/udn_se_economics/econ_opt.py
"""
需要予測 → 価格決定 → BS 密度/帯域量 の 3 段階利益最大化。

利益は単位面積あたり、X̄ と Wγ は同じ抽象レート単位で扱う（単位換算なし）。
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, NamedTuple, Protocol

from .errors import DomainError, RegimeWarning
from .params import NetworkParams, Regime, check_alpha
from .se_analytic import AnalyticSEEngine

logger = logging.getLogger(__name__)

# 超高密度の閉形式が「λ_b ≫ λ_u」と言える目安
ULTRA_DENSE_MIN_RATIO = 5.0

SpectrumForm = Literal["printed", "stationary"]


class Objective(str, Enum):
    P2_EXACT_SE = "P2_exactSE"
    P3 = "P3"
    P3_1 = "P3_1"
    P4 = "P4"
    P4_1 = "P4_1"

    @property
    def regime(self) -> Regime:
        if self in (Objective.P3, Objective.P3_1):
            return Regime.SPARSE
        if self in (Objective.P4, Objective.P4_1):
            return Regime.ULTRA_DENSE
        return Regime.GENERAL

    @property
    def surrogate(self) -> "Objective | None":
        """Taylor 近似版（閉形式がちょうど停留点になる目的関数）。"""
        if self.regime is Regime.SPARSE:
            return Objective.P3_1
        if self.regime is Regime.ULTRA_DENSE:
            return Objective.P4_1
        return None


class Solver(str, Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC_ORACLE = "numeric_oracle"


class SEEngine(Protocol):
    def rho_zero(self, alpha: float) -> float: ...
    def gamma_alpha(self, alpha: float) -> float: ...
    def se_exact(self, params: NetworkParams) -> float: ...


@dataclass(frozen=True)
class DemandModel:
    """
    ユーザの支払意思 θ ~ U[0, b]（b = レート感度）。価格 p は任意（設定時は 0<p<b）。
    利得 U = [θ log(1+X) - pX]^+。
    """

    b: float
    p: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b) and self.b > 0):
            raise DomainError(f"rate sensitivity b must be positive: b={self.b!r}")
        if self.p is not None and not (0.0 < self.p < self.b):
            raise DomainError(f"price must satisfy 0 < p < b: p={self.p!r}, b={self.b!r}")


@dataclass(frozen=True)
class CostParams:
    """c_b: BS 1 局あたり, c_w: 単位帯域あたり（いずれも単位面積あたりの運用コスト）。"""

    c_b: float
    c_w: float

    def __post_init__(self) -> None:
        for name in ("c_b", "c_w"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive: {name}={v!r}")

    def total(self, lambda_b: float, w: float) -> float:
        return self.c_b * lambda_b + self.c_w * w


@dataclass(frozen=True)
class DeploymentPlan:
    lambda_b_star: float
    w_star: float
    p_star: float
    x_bar: float
    profit: float
    regime: Regime
    solver: Solver
    gamma: float
    lambda_u: float
    alpha: float
    objective: Objective | None = None
    surrogate_profit: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for name in ("lambda_b_star", "w_star", "p_star", "x_bar", "profit", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"plan field {name} is not finite: {v!r}")
        if not (self.lambda_b_star > 0 and self.w_star > 0):
            raise DomainError(f"plan needs lambda_b*>0 and W*>0: {self.lambda_b_star!r}, {self.w_star!r}")
        supply = self.w_star * self.gamma
        if abs(self.x_bar - supply) > 1e-6 * max(1.0, supply):
            raise DomainError(f"rate constraint does not bind: x_bar={self.x_bar!r}, W*gamma={supply!r}")


def plan_cost_ratio(plan: DeploymentPlan, costs: CostParams) -> float:
    """c_b λ_b* / (c_w W*)"""
    return costs.c_b * plan.lambda_b_star / (costs.c_w * plan.w_star)


# ------------------------------------------------------------
# Stage 1, 2: 需要と価格
# ------------------------------------------------------------

def avg_demand(b: float, p: float) -> float:
    """ユーザ平均需要 X̄ = (b - p)² / (2 b p)。p について単調減少。"""
    if not (math.isfinite(b) and b > 0):
        raise DomainError(f"b must be positive: b={b!r}")
    if not (0.0 < p < b):
        raise DomainError(f"avg_demand requires 0 < p < b: p={p!r}, b={b!r}")
    return (b - p) ** 2 / (2.0 * b * p)


class PriceQuote(NamedTuple):
    exact: float
    approx: float


def optimal_price(b: float, w: float, gamma: float) -> PriceQuote:
    """
    需要 X̄ が供給 Wγ にちょうど等しくなる価格。
        exact  = b(1+Wγ)[1 - (1 - 1/(1+Wγ)²)^{1/2}]
        approx = b / (2(1+Wγ))      （Wγ が大きいときの Taylor 近似）
    exact は桁落ちを避けて b / (q(1 + sqrt(1 - 1/q²))), q = 1+Wγ で計算する。
    Wγ = 0 のときは exact = b（需要ゼロの価格）。
    """
    if not (math.isfinite(b) and b > 0):
        raise DomainError(f"b must be positive: b={b!r}")
    if not (w >= 0 and gamma >= 0) or not math.isfinite(w * gamma):
        raise DomainError(f"W and gamma must be non-negative and finite: W={w!r}, gamma={gamma!r}")
    q = 1.0 + w * gamma
    exact = b / (q * (1.0 + math.sqrt(1.0 - 1.0 / (q * q))))
    return PriceQuote(exact=exact, approx=b / (2.0 * q))


def profit_p1(params: NetworkParams, costs: CostParams, demand: DemandModel, w: float) -> float:
    """元の目的関数 p λ_u X̄ - (c_b λ_b + c_w W)。demand.p が必要。"""
    if demand.p is None:
        raise DomainError("profit_p1 needs a price (DemandModel.p)")
    return demand.p * params.lambda_u * avg_demand(demand.b, demand.p) - costs.total(params.lambda_b, w)


def profit(params: NetworkParams, costs: CostParams, demand: DemandModel, w: float, gamma: float) -> float:
    """
    価格を代入した Stage 3 の目的関数
        (λ_u b/2)(1 + 1/(Wγ))^{-1} - (c_b λ_b + c_w W)
    近似価格 b/(2(1+Wγ)) で供給 Wγ を売り切ったときの P1 と同じ値。
    """
    if not (w > 0 and gamma > 0):
        raise DomainError(f"profit needs W > 0 and gamma > 0: W={w!r}, gamma={gamma!r}")
    supply = w * gamma
    return 0.5 * params.lambda_u * demand.b * supply / (1.0 + supply) - costs.total(params.lambda_b, w)


# ------------------------------------------------------------
# Stage 3: 目的関数
# ------------------------------------------------------------

def regime_gamma(
    objective: Objective,
    lambda_b: float,
    lambda_u: float,
    alpha: float,
    engine: SEEngine,
) -> float:
    """目的関数が前提とする SE モデルでの γ。"""
    params = NetworkParams(lambda_b, lambda_u, alpha)
    if objective.regime is Regime.SPARSE:
        return params.density_ratio * engine.gamma_alpha(alpha)
    if objective.regime is Regime.ULTRA_DENSE:
        rho0 = engine.rho_zero(alpha)
        return math.log1p((lambda_b / (rho0 * lambda_u)) ** (alpha / 2.0))
    return engine.se_exact(params)


def objective_value(
    objective: Objective,
    lambda_b: float,
    w: float,
    lambda_u: float,
    alpha: float,
    demand: DemandModel,
    costs: CostParams,
    engine: SEEngine,
    *,
    gamma: float | None = None,
) -> float:
    """
    P2_exactSE / P3 / P4 は Stage 3 の式に各 SE を入れたもの。
    P3_1 / P4_1 は Taylor 近似（閉形式はこの停留点）:
        P3_1: (λ_u b/2)(1 - λ_u/(W λ_b γ_α))                - cost
        P4_1: (λ_u b/2)(1 - W^{-1}(ρ_0 λ_u/λ_b)^{α/4})      - cost
    P4_1 の指数 α/4 は 1/log(1+x) >= x^{-1/2} から来る。
    gamma を渡すと SE の再計算を省く（P2 系のみ）。
    """
    half_revenue = 0.5 * lambda_u * demand.b
    cost = costs.total(lambda_b, w)
    if objective is Objective.P3_1:
        return half_revenue * (1.0 - lambda_u / (w * lambda_b * engine.gamma_alpha(alpha))) - cost
    if objective is Objective.P4_1:
        rho0 = engine.rho_zero(alpha)
        return half_revenue * (1.0 - (rho0 * lambda_u / lambda_b) ** (alpha / 4.0) / w) - cost
    if gamma is None:
        gamma = regime_gamma(objective, lambda_b, lambda_u, alpha, engine)
    supply = w * gamma
    return half_revenue * supply / (1.0 + supply) - cost


# ------------------------------------------------------------
# 閉形式
# ------------------------------------------------------------

def _sparse_closed_form(b: float, lambda_u: float, costs: CostParams, gamma_alpha: float) -> tuple[float, float]:
    lambda_b = (b * costs.c_w / (2.0 * gamma_alpha) * (lambda_u / costs.c_b) ** 2) ** (1.0 / 3.0)
    w = (b * costs.c_b / (2.0 * gamma_alpha) * (lambda_u / costs.c_w) ** 2) ** (1.0 / 3.0)
    return lambda_b, w


def _ultra_dense_closed_form(
    b: float,
    lambda_u: float,
    alpha: float,
    costs: CostParams,
    rho0: float,
    spectrum_form: SpectrumForm,
) -> tuple[float, float]:
    # α が大きいと 8 乗などが桁あふれしやすいので対数で組む
    n = alpha + 8.0
    log_lb = (
        8.0 * math.log(alpha / (2.0**2.5 * costs.c_b))
        + 4.0 * math.log(b * costs.c_w)
        + alpha * math.log(rho0)
        + (alpha + 4.0) * math.log(lambda_u)
    ) / n
    log_w = (
        2.0 * (alpha - 2.0) * math.log(2.0)
        + alpha * math.log(costs.c_b)
        - (alpha + 4.0) * math.log(costs.c_w)
        + 4.0 * math.log(b)
        + alpha * math.log(rho0)
        + (alpha + 4.0) * math.log(lambda_u)
    ) / n
    if spectrum_form == "stationary":
        # P4_1 の一階条件を厳密に解くと α^{-α/(α+8)} が付く
        log_w -= alpha * math.log(alpha) / n
    elif spectrum_form != "printed":
        raise DomainError(f"unknown spectrum_form: {spectrum_form!r}")
    return math.exp(log_lb), math.exp(log_w)


def cost_ratio(regime: Regime, alpha: float | None = None) -> float:
    """
    利益最大時の c_b λ_b* / (c_w W*)。
      Sparse     : 1
      UltraDense : 2^{-2} α^{8/(α+8)}   （α∈(2,∞) で 0.43〜0.71 程度）
    """
    if regime is Regime.SPARSE:
        return 1.0
    if regime is Regime.ULTRA_DENSE:
        if alpha is None:
            raise DomainError("ultra-dense cost ratio needs alpha")
        check_alpha(alpha)
        return 0.25 * alpha ** (8.0 / (alpha + 8.0))
    raise DomainError(f"cost ratio is defined for sparse/ultra_dense only: {regime!r}")


def build_plan(
    *,
    objective: Objective,
    lambda_b: float,
    w: float,
    lambda_u: float,
    alpha: float,
    demand: DemandModel,
    costs: CostParams,
    engine: SEEngine,
    solver: Solver,
    flags: tuple[str, ...] = (),
    gamma: float | None = None,
) -> DeploymentPlan:
    """(λ_b, W) から価格・需要・利益を埋めて DeploymentPlan にする。"""
    regime = objective.regime
    model = objective if objective.surrogate is None else _exact_of(objective)
    if gamma is None:
        gamma = regime_gamma(model, lambda_b, lambda_u, alpha, engine)
    price = optimal_price(demand.b, w, gamma).exact
    x_bar = avg_demand(demand.b, price)
    surrogate = objective.surrogate
    return DeploymentPlan(
        lambda_b_star=lambda_b,
        w_star=w,
        p_star=price,
        x_bar=x_bar,
        profit=objective_value(model, lambda_b, w, lambda_u, alpha, demand, costs, engine, gamma=gamma),
        regime=regime,
        solver=solver,
        gamma=gamma,
        lambda_u=lambda_u,
        alpha=alpha,
        objective=objective,
        surrogate_profit=(
            objective_value(surrogate, lambda_b, w, lambda_u, alpha, demand, costs, engine)
            if surrogate is not None else None
        ),
        flags=flags,
    )


def _exact_of(objective: Objective) -> Objective:
    if objective.regime is Regime.SPARSE:
        return Objective.P3
    if objective.regime is Regime.ULTRA_DENSE:
        return Objective.P4
    return objective


def _regime_flags(regime: Regime, lambda_b: float, lambda_u: float) -> tuple[str, ...]:
    ratio = lambda_b / lambda_u
    if regime is Regime.ULTRA_DENSE and ratio < ULTRA_DENSE_MIN_RATIO:
        warnings.warn(
            f"ultra-dense optimum has lambda_b*/lambda_u = {ratio:.3g} < {ULTRA_DENSE_MIN_RATIO}",
            RegimeWarning,
            stacklevel=3,
        )
        return ("regime_inconsistent",)
    if regime is Regime.SPARSE and ratio > 1.0:
        warnings.warn(
            f"sparse optimum has lambda_b* > lambda_u (ratio {ratio:.3g})",
            RegimeWarning,
            stacklevel=3,
        )
        return ("regime_inconsistent",)
    return ()


def closed_form_plan(
    regime: Regime,
    lambda_u: float,
    alpha: float,
    demand: DemandModel,
    costs: CostParams,
    se_engine: SEEngine | None = None,
    *,
    spectrum_form: SpectrumForm = "printed",
) -> DeploymentPlan:
    """
    利益最適な BS 密度と帯域量の閉形式。
      Sparse     : λ_b* = [b c_w/(2γ_α) (λ_u/c_b)²]^{1/3}, W* = [b c_b/(2γ_α) (λ_u/c_w)²]^{1/3}
      UltraDense : λ_b* ≈ [(α/(2^{2.5} c_b))^8 (b c_w)^4 ρ_0^α λ_u^{α+4}]^{1/(α+8)}
                   W*   ≈ [2^{2(α-2)} c_b^α / c_w^{α+4} b^4 ρ_0^α λ_u^{α+4}]^{1/(α+8)}
    spectrum_form="stationary" は P4_1 の一階条件を厳密に満たす W*（上式に α^{-α/(α+8)}）。
    利益は Sparse なら P3、UltraDense なら P4 で評価する。
    """
    if not (math.isfinite(lambda_u) and lambda_u > 0):
        raise DomainError(f"lambda_u must be positive: lambda_u={lambda_u!r}")
    check_alpha(alpha)
    engine = se_engine or AnalyticSEEngine()

    if regime is Regime.SPARSE:
        lambda_b, w = _sparse_closed_form(demand.b, lambda_u, costs, engine.gamma_alpha(alpha))
        objective = Objective.P3_1
    elif regime is Regime.ULTRA_DENSE:
        lambda_b, w = _ultra_dense_closed_form(
            demand.b, lambda_u, alpha, costs, engine.rho_zero(alpha), spectrum_form
        )
        objective = Objective.P4_1
    else:
        raise DomainError(f"no closed form for regime {regime!r}; use numeric_optimize_plan")

    flags = _regime_flags(regime, lambda_b, lambda_u)
    plan = build_plan(
        objective=objective,
        lambda_b=lambda_b,
        w=w,
        lambda_u=lambda_u,
        alpha=alpha,
        demand=demand,
        costs=costs,
        engine=engine,
        solver=Solver.CLOSED_FORM,
        flags=flags,
    )
    logger.debug("closed-form plan %s: lambda_b*=%.6g W*=%.6g profit=%.6g", regime.value, lambda_b, w, plan.profit)
    return plan


def stationary_residuals(
    plan: DeploymentPlan,
    demand: DemandModel,
    costs: CostParams,
    se_engine: SEEngine | None = None,
) -> tuple[float, float]:
    """
    Taylor 近似目的関数の一階条件の相対残差 (λ_b 側, W 側)。
      Sparse     : λ_b = [b/(2γ_α c_b W)]^{1/2} λ_u,  W = [b/(2γ_α c_w λ_b)]^{1/2} λ_u
      UltraDense : λ_b = [α b ρ_0^{α/4}/(2^3 c_b W)]^{1/(α/4+1)} λ_u,
                   W = [b λ_u^{α/4+1}/(2 c_w) (ρ_0/λ_b)^{α/4}]^{1/2}
    """
    engine = se_engine or AnalyticSEEngine()
    b, lu, lb, w, alpha = demand.b, plan.lambda_u, plan.lambda_b_star, plan.w_star, plan.alpha
    if plan.regime is Regime.SPARSE:
        ga = engine.gamma_alpha(alpha)
        lb_fixed = math.sqrt(b / (2.0 * ga * costs.c_b * w)) * lu
        w_fixed = math.sqrt(b / (2.0 * ga * costs.c_w * lb)) * lu
    elif plan.regime is Regime.ULTRA_DENSE:
        rho0 = engine.rho_zero(alpha)
        k = alpha / 4.0
        lb_fixed = (alpha * b * rho0**k / (8.0 * costs.c_b * w)) ** (1.0 / (k + 1.0)) * lu
        w_fixed = math.sqrt(b * lu ** (k + 1.0) / (2.0 * costs.c_w) * (rho0 / lb) ** k)
    else:
        raise DomainError("first-order conditions exist for sparse/ultra_dense plans only")
    return (lb_fixed - lb) / lb, (w_fixed - w) / w
