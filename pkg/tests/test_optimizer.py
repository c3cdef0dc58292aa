import warnings

import pytest
from hypothesis import assume, given, settings, strategies as st

from udn_se_economics.econ_opt import (
    CostParams,
    DemandModel,
    Objective,
    Solver,
    closed_form_plan,
    objective_value,
)
from udn_se_economics.errors import BoundaryWarning, DomainError, MultistartDisagreementError, RegimeWarning
from udn_se_economics.optimizer import LocalOptimum, OptimizerConfig, _select, numeric_optimize_plan
from udn_se_economics.params import Regime
from udn_se_economics.se_analytic import AnalyticSEEngine

ENGINE = AnalyticSEEngine()


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


@settings(max_examples=50, deadline=None)
@given(
    b=st.floats(min_value=2.0, max_value=50.0),
    lu=st.floats(min_value=0.5, max_value=50.0),
    c_b=st.floats(min_value=0.05, max_value=1.0),
    c_w=st.floats(min_value=0.05, max_value=1.0),
    alpha=st.floats(min_value=2.5, max_value=6.0),
)
def test_sparse_closed_form_matches_oracle(b, lu, c_b, c_w, alpha):
    demand, costs = DemandModel(b=b), CostParams(c_b=c_b, c_w=c_w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        cf = closed_form_plan(Regime.SPARSE, lu, alpha, demand, costs, ENGINE)
    assume("regime_inconsistent" not in cf.flags)
    num = numeric_optimize_plan(Objective.P3_1, lu, alpha, demand, costs, ENGINE)
    assert num.solver is Solver.NUMERIC_ORACLE
    assert _rel(cf.lambda_b_star, num.lambda_b_star) <= 5e-3
    assert _rel(cf.w_star, num.w_star) <= 5e-3


@settings(max_examples=50, deadline=None)
@given(
    b=st.floats(min_value=2.0, max_value=50.0),
    lu=st.floats(min_value=0.01, max_value=0.5),
    c_b=st.floats(min_value=0.05, max_value=1.0),
    c_w=st.floats(min_value=0.05, max_value=1.0),
    alpha=st.floats(min_value=2.5, max_value=6.0),
)
def test_ultra_dense_closed_form_matches_oracle(b, lu, c_b, c_w, alpha):
    demand, costs = DemandModel(b=b), CostParams(c_b=c_b, c_w=c_w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        cf = closed_form_plan(Regime.ULTRA_DENSE, lu, alpha, demand, costs, ENGINE, spectrum_form="stationary")
    assume("regime_inconsistent" not in cf.flags)
    num = numeric_optimize_plan(Objective.P4_1, lu, alpha, demand, costs, ENGINE)
    assert _rel(cf.lambda_b_star, num.lambda_b_star) <= 1e-2
    assert _rel(cf.w_star, num.w_star) <= 1e-2


def test_oracle_profit_not_below_closed_form_surrogate():
    demand, costs = DemandModel(b=10.0), CostParams(c_b=0.1, c_w=0.1)
    cf = closed_form_plan(Regime.ULTRA_DENSE, 0.1, 4.0, demand, costs, ENGINE)
    num = numeric_optimize_plan(Objective.P4_1, 0.1, 4.0, demand, costs, ENGINE)
    assert num.surrogate_profit >= cf.surrogate_profit - 1e-9


def test_general_objective_uses_exact_se():
    demand, costs = DemandModel(b=10.0), CostParams(c_b=0.1, c_w=0.1)
    cfg = OptimizerConfig(lambda_b_bounds=(1e-2, 1e3), w_bounds=(1e-2, 1e3), grid_points=17, exact_se_nodes=33)
    num = numeric_optimize_plan(Objective.P2_EXACT_SE, 1.0, 4.0, demand, costs, ENGINE, cfg)
    assert num.regime is Regime.GENERAL
    assert num.surrogate_profit is None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for regime in (Regime.SPARSE, Regime.ULTRA_DENSE):
            cf = closed_form_plan(regime, 1.0, 4.0, demand, costs, ENGINE)
            value = objective_value(
                Objective.P2_EXACT_SE, cf.lambda_b_star, cf.w_star, 1.0, 4.0, demand, costs, ENGINE
            )
            assert num.profit >= value - 1e-4 * max(1.0, abs(value))


def test_boundary_optimum_is_flagged():
    demand, costs = DemandModel(b=10.0), CostParams(c_b=0.1, c_w=0.1)
    cfg = OptimizerConfig(lambda_b_bounds=(1e-4, 1e-2))
    with pytest.warns(BoundaryWarning):
        num = numeric_optimize_plan(Objective.P3_1, 5.0, 4.0, demand, costs, ENGINE, cfg)
    assert "boundary_lambda_b" in num.flags
    assert num.lambda_b_star == pytest.approx(1e-2, rel=1e-4)


def _opt(idx, x, profit, cost):
    return LocalOptimum(start_index=idx, x=x, profit=profit, cost=cost, converged=True)


def test_select_breaks_ties_by_cost_then_start():
    cfg = OptimizerConfig()
    results = [_opt(0, (0.0, 0.0), 1.0, 2.0), _opt(1, (0.0, 0.0), 1.0, 1.0), _opt(2, (0.0, 0.0), 1.0, 1.0)]
    assert _select(results, Objective.P3_1, cfg).start_index == 1


def test_select_prefers_higher_profit():
    cfg = OptimizerConfig()
    results = [_opt(0, (0.0, 0.0), 1.0, 0.1), _opt(1, (1.0, 1.0), 2.0, 5.0)]
    assert _select(results, Objective.P3_1, cfg).start_index == 1


def test_select_rejects_disagreeing_ultra_dense_starts():
    cfg = OptimizerConfig()
    results = [_opt(0, (0.0, 0.0), 1.0, 1.0), _opt(1, (1.0, 0.0), 1.0, 1.0)]
    with pytest.raises(MultistartDisagreementError):
        _select(results, Objective.P4_1, cfg)


@pytest.mark.parametrize(
    "kwargs",
    [dict(lambda_b_bounds=(1.0, 0.5)), dict(w_bounds=(0.0, 1.0)), dict(grid_points=2), dict(multistart=0)],
)
def test_optimizer_config_validation(kwargs):
    with pytest.raises(DomainError):
        OptimizerConfig(**kwargs)
