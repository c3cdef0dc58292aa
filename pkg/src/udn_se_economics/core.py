# src/udn_se_economics/core.py
from __future__ import annotations

from .econ_opt import (
    CostParams,
    DemandModel,
    DeploymentPlan,
    Objective,
    PriceQuote,
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
from .hypergeometric import hyp2f1_11c
from .optimizer import OptimizerConfig, numeric_optimize_plan
from .params import NetworkParams, QuadratureConfig, Regime, SEMethod, SEValue
from .se_analytic import (
    AnalyticSEEngine,
    densification_gain,
    p_active,
    rho_t,
    rho_zero,
    se_exact,
    se_lower_bound_appendix,
    se_lower_bound_quadrature,
    se_sparse_gamma_alpha,
    se_udn_closed_form,
    se_with_multiple_access,
    tightness_threshold,
)
from .stochastic_sim import (
    SEEstimate,
    SimConfig,
    TopologyRealization,
    estimate_se,
    estimate_se_with_scheduler,
    realize_topology,
    sample_ppp,
    sir_at_origin,
)

__all__ = [
    "AnalyticSEEngine",
    "CostParams",
    "DemandModel",
    "DeploymentPlan",
    "NetworkParams",
    "Objective",
    "OptimizerConfig",
    "PriceQuote",
    "QuadratureConfig",
    "Regime",
    "SEEstimate",
    "SEMethod",
    "SEValue",
    "SimConfig",
    "Solver",
    "TopologyRealization",
    "avg_demand",
    "closed_form_plan",
    "cost_ratio",
    "densification_gain",
    "estimate_se",
    "estimate_se_with_scheduler",
    "hyp2f1_11c",
    "numeric_optimize_plan",
    "objective_value",
    "optimal_price",
    "p_active",
    "plan_cost_ratio",
    "profit",
    "profit_p1",
    "realize_topology",
    "rho_t",
    "rho_zero",
    "sample_ppp",
    "se_exact",
    "se_lower_bound_appendix",
    "se_lower_bound_quadrature",
    "se_sparse_gamma_alpha",
    "se_udn_closed_form",
    "se_with_multiple_access",
    "sir_at_origin",
    "stationary_residuals",
    "tightness_threshold",
]
