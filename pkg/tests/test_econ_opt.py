import math
import warnings
from contextlib import contextmanager

import pytest
from hypothesis import given, settings, strategies as st

from udn_se_economics.econ_opt import (
    CostParams,
    DemandModel,
    Objective,
    Solver,
    avg_demand,
    closed_form_plan,
    cost_ratio,
    objective_value,
    optimal_price,
    plan_cost_ratio,
    profit,
    profit_p1,
    stationary_residuals,
)
from udn_se_economics.errors import DomainError, RegimeWarning
from udn_se_economics.params import NetworkParams, Regime
from udn_se_economics.se_analytic import AnalyticSEEngine

ENGINE = AnalyticSEEngine()
COSTS = CostParams(c_b=0.1, c_w=0.1)


@contextmanager
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        yield


# ---- 需要と価格 ----

def test_avg_demand_decreasing_in_price():
    values = [avg_demand(10.0, p) for p in (0.5, 1.0, 2.0, 5.0, 9.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("p", [0.0, 10.0, 11.0, -1.0])
def test_avg_demand_price_range(p):
    with pytest.raises(DomainError):
        avg_demand(10.0, p)


@settings(max_examples=100, deadline=None)
@given(
    b=st.floats(min_value=0.1, max_value=100.0),
    supply=st.floats(min_value=1e-3, max_value=1e4),
)
def test_exact_price_clears_supply(b, supply):
    quote = optimal_price(b, supply, 1.0)
    assert avg_demand(b, quote.exact) == pytest.approx(supply, rel=1e-10)


def test_price_reference_value():
    quote = optimal_price(1.0, 5.0, 1.0)
    assert quote.exact == pytest.approx(0.083920, rel=1e-4)
    assert quote.approx == pytest.approx(1.0 / 12.0)


def test_price_gap_small_and_shrinking():
    gaps = []
    for supply in (5.0, 10.0, 50.0, 200.0, 1000.0):
        q = optimal_price(1.0, supply, 1.0)
        gaps.append(abs(q.exact - q.approx) / q.exact)
    assert gaps[0] <= 0.01
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_price_without_supply_is_b():
    assert optimal_price(3.0, 0.0, 1.5).exact == pytest.approx(3.0)


@pytest.mark.parametrize("kwargs", [dict(b=0.0), dict(b=-1.0), dict(b=2.0, p=2.0), dict(b=2.0, p=0.0)])
def test_demand_model_validation(kwargs):
    with pytest.raises(DomainError):
        DemandModel(**kwargs)


@pytest.mark.parametrize("c_b, c_w", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
def test_cost_validation(c_b, c_w):
    with pytest.raises(DomainError):
        CostParams(c_b=c_b, c_w=c_w)


# ---- 利益 ----

def test_stage3_profit_is_p1_at_approx_price():
    params = NetworkParams(2.0, 1.0, 4.0)
    w, gamma, b = 3.0, 2.5, 10.0
    q = optimal_price(b, w, gamma)
    expected = q.approx * params.lambda_u * w * gamma - COSTS.total(params.lambda_b, w)
    assert profit(params, COSTS, DemandModel(b=b), w, gamma) == pytest.approx(expected, rel=1e-12)


def test_stage3_profit_close_to_p1_at_exact_price():
    params = NetworkParams(2.0, 1.0, 4.0)
    w, gamma, b = 4.0, 2.5, 10.0
    q = optimal_price(b, w, gamma)
    revenue = q.exact * params.lambda_u * w * gamma
    p1 = profit_p1(params, COSTS, DemandModel(b=b, p=q.exact), w)
    assert p1 == pytest.approx(profit(params, COSTS, DemandModel(b=b), w, gamma), abs=0.01 * revenue)


def test_profit_p1_needs_price():
    with pytest.raises(DomainError):
        profit_p1(NetworkParams(1.0, 1.0, 4.0), COSTS, DemandModel(b=1.0), 1.0)


@settings(max_examples=50, deadline=None)
@given(
    lb=st.floats(min_value=1e-2, max_value=1e2),
    w=st.floats(min_value=1e-2, max_value=1e2),
    lu=st.floats(min_value=1e-2, max_value=1e2),
)
def test_sparse_surrogate_below_exact_model(lb, w, lu):
    demand = DemandModel(b=10.0)
    exact = objective_value(Objective.P3, lb, w, lu, 4.0, demand, COSTS, ENGINE)
    surrogate = objective_value(Objective.P3_1, lb, w, lu, 4.0, demand, COSTS, ENGINE)
    assert surrogate <= exact + 1e-9 * max(1.0, abs(exact))


# ---- コスト比 ----

def test_cost_ratio_constants():
    assert cost_ratio(Regime.SPARSE) == 1.0
    assert cost_ratio(Regime.ULTRA_DENSE, 4.0) == pytest.approx(0.630, abs=1e-3)
    with pytest.raises(DomainError):
        cost_ratio(Regime.GENERAL)


@pytest.mark.parametrize("alpha", [2.5 + 0.5 * i for i in range(36)])
def test_ultra_dense_cost_ratio_band(alpha):
    assert 0.43 <= cost_ratio(Regime.ULTRA_DENSE, alpha) <= 0.71


@settings(max_examples=50, deadline=None)
@given(
    b=st.floats(min_value=1.0, max_value=100.0),
    lu=st.floats(min_value=0.1, max_value=100.0),
    c_b=st.floats(min_value=0.01, max_value=10.0),
    c_w=st.floats(min_value=0.01, max_value=10.0),
)
def test_sparse_plan_balances_costs(b, lu, c_b, c_w):
    costs = CostParams(c_b=c_b, c_w=c_w)
    with _quiet():
        plan = closed_form_plan(Regime.SPARSE, lu, 4.0, DemandModel(b=b), costs, ENGINE)
    assert plan_cost_ratio(plan, costs) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 6.0])
def test_ultra_dense_plan_cost_ratios(alpha):
    demand = DemandModel(b=10.0)
    with _quiet():
        printed = closed_form_plan(Regime.ULTRA_DENSE, 0.1, alpha, demand, COSTS, ENGINE)
        stationary = closed_form_plan(
            Regime.ULTRA_DENSE, 0.1, alpha, demand, COSTS, ENGINE, spectrum_form="stationary"
        )
    assert plan_cost_ratio(printed, COSTS) == pytest.approx(cost_ratio(Regime.ULTRA_DENSE, alpha), rel=1e-9)
    assert plan_cost_ratio(stationary, COSTS) == pytest.approx(alpha / 4.0, rel=1e-9)
    assert stationary.lambda_b_star == pytest.approx(printed.lambda_b_star, rel=1e-12)


# ---- 閉形式プラン ----

def test_plans_bind_rate_constraint_and_report_solver():
    demand = DemandModel(b=10.0)
    with _quiet():
        for regime in (Regime.SPARSE, Regime.ULTRA_DENSE):
            plan = closed_form_plan(regime, 1.0, 4.0, demand, COSTS, ENGINE)
            assert plan.x_bar == pytest.approx(plan.w_star * plan.gamma, rel=1e-9)
            assert plan.solver is Solver.CLOSED_FORM
            assert plan.regime is regime
            assert 0.0 < plan.p_star < demand.b
            assert plan.surrogate_profit is not None


def test_general_regime_has_no_closed_form():
    with pytest.raises(DomainError):
        closed_form_plan(Regime.GENERAL, 1.0, 4.0, DemandModel(b=10.0), COSTS, ENGINE)


def test_unknown_spectrum_form():
    with pytest.raises(DomainError):
        closed_form_plan(Regime.ULTRA_DENSE, 0.1, 4.0, DemandModel(b=10.0), COSTS, ENGINE, spectrum_form="x")


def test_sparse_plan_outside_regime_is_flagged():
    # b c_w / (2 γ_α c_b²) ≈ 33.6 より小さい λ_u では λ_b* > λ_u
    with pytest.warns(RegimeWarning):
        plan = closed_form_plan(Regime.SPARSE, 5.0, 4.0, DemandModel(b=10.0), COSTS, ENGINE)
    assert "regime_inconsistent" in plan.flags


def test_consistent_plans_are_not_flagged():
    demand = DemandModel(b=10.0)
    sparse = closed_form_plan(Regime.SPARSE, 100.0, 4.0, demand, COSTS, ENGINE)
    dense = closed_form_plan(Regime.ULTRA_DENSE, 0.1, 4.0, demand, COSTS, ENGINE)
    assert sparse.flags == ()
    assert dense.flags == ()
    assert sparse.lambda_b_star < 100.0
    assert dense.lambda_b_star >= 5.0 * 0.1


@pytest.mark.parametrize("regime, form", [(Regime.SPARSE, "printed"), (Regime.ULTRA_DENSE, "stationary")])
def test_closed_form_satisfies_first_order_conditions(regime, form):
    demand = DemandModel(b=10.0)
    with _quiet():
        plan = closed_form_plan(regime, 1.0, 4.0, demand, COSTS, ENGINE, spectrum_form=form)
    r_lb, r_w = stationary_residuals(plan, demand, COSTS, ENGINE)
    assert abs(r_lb) < 1e-9
    assert abs(r_w) < 1e-9


def test_printed_ultra_dense_spectrum_is_off_the_stationary_point():
    demand = DemandModel(b=10.0)
    plan = closed_form_plan(Regime.ULTRA_DENSE, 0.1, 4.0, demand, COSTS, ENGINE)
    r_lb, r_w = stationary_residuals(plan, demand, COSTS, ENGINE)
    assert abs(r_w) > 1e-3


# ---- 図 3/4 の性質 ----

def _slope(f, x1: float, x2: float) -> float:
    return math.log(f(x2) / f(x1)) / math.log(x2 / x1)


@pytest.mark.parametrize("alpha", [3.0, 4.0, 6.0])
def test_optimal_density_elasticities(alpha):
    demand = DemandModel(b=10.0)

    def plan(regime, lu, b):
        with _quiet():
            return closed_form_plan(regime, lu, alpha, DemandModel(b=b), COSTS, ENGINE)

    n = alpha + 8.0
    for regime, e_lu, e_b in (
        (Regime.SPARSE, 2.0 / 3.0, 1.0 / 3.0),
        (Regime.ULTRA_DENSE, (alpha + 4.0) / n, 4.0 / n),
    ):
        for attr in ("lambda_b_star", "w_star"):
            s_lu = _slope(lambda lu: getattr(plan(regime, lu, demand.b), attr), 0.5, 50.0)
            s_b = _slope(lambda b: getattr(plan(regime, 5.0, b), attr), 1.0, 100.0)
            assert s_lu == pytest.approx(e_lu, rel=1e-9)
            assert s_b == pytest.approx(e_b, rel=1e-9)
            assert s_lu > s_b > 0.0


def _surrogate_profits(lu: float, b: float) -> tuple[float, float]:
    demand = DemandModel(b=b)
    with _quiet():
        sparse = closed_form_plan(Regime.SPARSE, lu, 4.0, demand, COSTS, ENGINE)
        dense = closed_form_plan(Regime.ULTRA_DENSE, lu, 4.0, demand, COSTS, ENGINE, spectrum_form="stationary")
    return sparse.surrogate_profit, dense.surrogate_profit


def test_surrogate_profit_closed_forms():
    lu, b = 2.0, 10.0
    sparse, dense = _surrogate_profits(lu, b)
    ga, rho0 = ENGINE.gamma_alpha(4.0), ENGINE.rho_zero(4.0)
    k = COSTS.c_b * COSTS.c_w * b / 2.0
    assert sparse == pytest.approx(lu * b / 2.0 - 3.0 * (k / ga) ** (1 / 3) * lu ** (2 / 3), rel=1e-9)
    assert dense == pytest.approx(lu * b / 2.0 - 3.0 * (k * rho0) ** (1 / 3) * lu ** (2 / 3), rel=1e-9)


def test_profit_vs_users_grows_slower_when_ultra_dense():
    users = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]
    profits = [_surrogate_profits(lu, 10.0) for lu in users]
    for (s0, d0), (s1, d1) in zip(profits, profits[1:]):
        assert d1 - d0 < s1 - s0


def test_profit_vs_sensitivity_grows_faster_when_ultra_dense():
    bs = [5.0, 10.0, 20.0, 50.0, 100.0]
    profits = [_surrogate_profits(1.0, b) for b in bs]
    assert all(s > 0.0 and d > 0.0 for s, d in profits)
    for (s0, d0), (s1, d1) in zip(profits, profits[1:]):
        assert d1 / d0 > s1 / s0

