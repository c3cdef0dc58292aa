# src/udn_se_economics/optimizer.py
"""
(λ_b, W) の数値最大化（閉形式の検算用オラクル）。

log10 グリッドで粗く評価 → 上位の格子点から Nelder–Mead で局所改善 → 決定的に最良を選ぶ。
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from .econ_opt import (
    CostParams,
    DemandModel,
    DeploymentPlan,
    Objective,
    SEEngine,
    Solver,
    build_plan,
    objective_value,
)
from .errors import BoundaryWarning, DomainError, MultistartDisagreementError, OptimizationError
from .params import NetworkParams, check_alpha
from .se_analytic import AnalyticSEEngine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    lambda_b_bounds: tuple[float, float] = (1e-4, 1e4)
    w_bounds: tuple[float, float] = (1e-4, 1e4)
    grid_points: int = 33
    multistart: int = 4
    xatol: float = 1e-9
    fatol: float = 1e-12
    max_iter: int = 4000
    tie_rtol: float = 1e-9
    agreement_rtol: float = 1e-2
    boundary_tol: float = 1e-6
    # P2_exactSE の γ(λ_b) 補間の節点数
    exact_se_nodes: int = 65
    threads: int = 1

    def __post_init__(self) -> None:
        for name in ("lambda_b_bounds", "w_bounds"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi and math.isfinite(hi)):
                raise DomainError(f"{name} must satisfy 0 < lo < hi: {(lo, hi)!r}")
        if self.grid_points < 3:
            raise DomainError(f"grid_points must be >= 3: {self.grid_points!r}")
        if self.multistart < 1:
            raise DomainError(f"multistart must be >= 1: {self.multistart!r}")
        if self.exact_se_nodes < 4:
            raise DomainError(f"exact_se_nodes must be >= 4: {self.exact_se_nodes!r}")

    @property
    def log_bounds(self) -> list[tuple[float, float]]:
        return [
            (math.log10(self.lambda_b_bounds[0]), math.log10(self.lambda_b_bounds[1])),
            (math.log10(self.w_bounds[0]), math.log10(self.w_bounds[1])),
        ]


class LocalOptimum(NamedTuple):
    start_index: int
    x: tuple[float, float]
    profit: float
    cost: float
    converged: bool


class _ExactSECurve:
    """
    P2_exactSE 用: γ は λ_b にしか依存しない（λ_u 固定）ので、
    log λ_b 上で se_exact を節点評価して 3 次スプラインで補間する。呼び出しごとに作る。
    """

    def __init__(self, lambda_u: float, alpha: float, engine: SEEngine, log10_bounds: tuple[float, float], nodes: int):
        lo, hi = log10_bounds
        xs = np.linspace(lo - 0.1, hi + 0.1, nodes)
        ys = np.array([engine.se_exact(NetworkParams(10.0**x, lambda_u, alpha)) for x in xs])
        self._spline = CubicSpline(xs, ys)

    def __call__(self, lambda_b: float) -> float:
        return float(self._spline(math.log10(lambda_b)))


def _make_objective(
    objective: Objective,
    lambda_u: float,
    alpha: float,
    demand: DemandModel,
    costs: CostParams,
    engine: SEEngine,
    opt_cfg: OptimizerConfig,
) -> tuple[Callable[[float, float], float], Callable[[float], float] | None]:
    curve: Callable[[float], float] | None = None
    if objective is Objective.P2_EXACT_SE:
        curve = _ExactSECurve(lambda_u, alpha, engine, opt_cfg.log_bounds[0], opt_cfg.exact_se_nodes)

    def f(log_lb: float, log_w: float) -> float:
        lb, w = 10.0**log_lb, 10.0**log_w
        gamma = curve(lb) if curve is not None else None
        return objective_value(objective, lb, w, lambda_u, alpha, demand, costs, engine, gamma=gamma)

    return f, curve


def _local_search(
    f: Callable[[float, float], float],
    start_index: int,
    x0: tuple[float, float],
    step: tuple[float, float],
    costs: CostParams,
    opt_cfg: OptimizerConfig,
) -> LocalOptimum:
    # 上限側の格子点から始めるときは内側へ張る
    (lb_lo, lb_hi), (w_lo, w_hi) = opt_cfg.log_bounds
    dx = step[0] if x0[0] + step[0] <= lb_hi else -step[0]
    dy = step[1] if x0[1] + step[1] <= w_hi else -step[1]
    simplex = np.array([x0, (x0[0] + dx, x0[1]), (x0[0], x0[1] + dy)])
    res = minimize(
        lambda x: -f(float(x[0]), float(x[1])),
        np.asarray(x0),
        method="Nelder-Mead",
        bounds=opt_cfg.log_bounds,
        options=dict(
            initial_simplex=simplex,
            xatol=opt_cfg.xatol,
            fatol=opt_cfg.fatol,
            maxiter=opt_cfg.max_iter,
            maxfev=opt_cfg.max_iter * 2,
        ),
    )
    x = (float(res.x[0]), float(res.x[1]))
    if not res.success:
        logger.debug("Nelder-Mead start %d stopped: %s", start_index, res.message)
    return LocalOptimum(
        start_index=start_index,
        x=x,
        profit=-float(res.fun),
        cost=costs.total(10.0 ** x[0], 10.0 ** x[1]),
        converged=bool(res.success),
    )


def _grid_starts(f: Callable[[float, float], float], opt_cfg: OptimizerConfig) -> tuple[list[tuple[float, float]], tuple[float, float]]:
    (lb_lo, lb_hi), (w_lo, w_hi) = opt_cfg.log_bounds
    gx = np.linspace(lb_lo, lb_hi, opt_cfg.grid_points)
    gy = np.linspace(w_lo, w_hi, opt_cfg.grid_points)
    values = np.array([[f(float(x), float(y)) for y in gy] for x in gx])

    # 利益の高い順（同値は格子インデックス順）。近すぎる点は省く
    order = np.argsort(-values, axis=None, kind="stable")
    starts: list[tuple[float, float]] = []
    taken: list[tuple[int, int]] = []
    for flat in order:
        i, j = np.unravel_index(int(flat), values.shape)
        if not math.isfinite(values[i, j]):
            continue
        if any(abs(i - a) <= 1 and abs(j - c) <= 1 for a, c in taken):
            continue
        taken.append((int(i), int(j)))
        starts.append((float(gx[i]), float(gy[j])))
        if len(starts) >= opt_cfg.multistart:
            break
    step = (float(gx[1] - gx[0]), float(gy[1] - gy[0]))
    return starts, step


def _select(results: list[LocalOptimum], objective: Objective, opt_cfg: OptimizerConfig) -> LocalOptimum:
    best_profit = max(r.profit for r in results)
    tol = opt_cfg.tie_rtol * max(1.0, abs(best_profit))
    ties = [r for r in results if best_profit - r.profit <= tol]

    if objective in (Objective.P4, Objective.P4_1) and len(ties) > 1:
        ref = ties[0].x
        for r in ties[1:]:
            # log10 座標の差 → 相対差
            rel = max(abs(10.0 ** (a - b) - 1.0) for a, b in zip(r.x, ref))
            if rel > opt_cfg.agreement_rtol:
                raise MultistartDisagreementError(
                    f"{objective.value}: profit-equal starts disagree "
                    f"(start {ties[0].start_index} at {ref}, start {r.start_index} at {r.x})"
                )
    # 同等利益ならコストの小さい方、さらに同じなら開始点の順
    return min(ties, key=lambda r: (r.cost, r.start_index))


def _boundary_flags(x: tuple[float, float], opt_cfg: OptimizerConfig) -> tuple[str, ...]:
    flags: list[str] = []
    for name, xi, (lo, hi) in zip(("lambda_b", "W"), x, opt_cfg.log_bounds):
        span = hi - lo
        if xi - lo <= opt_cfg.boundary_tol * span or hi - xi <= opt_cfg.boundary_tol * span:
            flags.append(f"boundary_{name}")
            warnings.warn(
                f"optimizer stopped at the {name} search bound (log10={xi:.6g}); widen the bounds",
                BoundaryWarning,
                stacklevel=3,
            )
    return tuple(flags)


def numeric_optimize_plan(
    objective: Objective,
    lambda_u: float,
    alpha: float,
    demand: DemandModel,
    costs: CostParams,
    se_engine: SEEngine | None = None,
    opt_cfg: OptimizerConfig = OptimizerConfig(),
) -> DeploymentPlan:
    """
    微分を使わない 2 次元最大化（log10 グリッド + 多始点 Nelder–Mead）。
    P3_1 / P4_1 では閉形式の停留点と一致するはず。P2_exactSE は γ に se_exact を使う拡張。
    """
    if not (math.isfinite(lambda_u) and lambda_u > 0):
        raise DomainError(f"lambda_u must be positive: lambda_u={lambda_u!r}")
    check_alpha(alpha)
    engine = se_engine or AnalyticSEEngine()

    f, curve = _make_objective(objective, lambda_u, alpha, demand, costs, engine, opt_cfg)
    starts, step = _grid_starts(f, opt_cfg)
    if not starts:
        raise OptimizationError(f"{objective.value}: objective not finite anywhere on the grid")

    def run(item: tuple[int, tuple[float, float]]) -> LocalOptimum:
        idx, x0 = item
        return _local_search(f, idx, x0, step, costs, opt_cfg)

    items = list(enumerate(starts))
    if opt_cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=opt_cfg.threads) as ex:
            results = list(ex.map(run, items))
    else:
        results = [run(it) for it in items]

    best = _select(results, objective, opt_cfg)
    flags = _boundary_flags(best.x, opt_cfg)
    if not best.converged:
        flags += ("not_converged",)

    lb, w = 10.0 ** best.x[0], 10.0 ** best.x[1]
    plan = build_plan(
        objective=objective,
        lambda_b=lb,
        w=w,
        lambda_u=lambda_u,
        alpha=alpha,
        demand=demand,
        costs=costs,
        engine=engine,
        solver=Solver.NUMERIC_ORACLE,
        flags=flags,
        gamma=curve(lb) if curve is not None else None,
    )
    logger.debug(
        "numeric plan %s: lambda_b*=%.6g W*=%.6g profit=%.6g (%d starts)",
        objective.value, lb, w, plan.profit, len(results),
    )
    return plan
