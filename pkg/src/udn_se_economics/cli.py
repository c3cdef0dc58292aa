# src/udn_se_economics/cli.py
"""
実験ランナー（サブコマンド se-sweep / montecarlo / optimize / figures）。

各 cmd_* は設定を受け取って表を作り CSV に書く。main() は引数解析と終了コードへの変換だけ。
  0: 成功 / 2: 使い方の誤り / 3: 設定・検証エラー / 4: 数値計算の失敗
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import pandas as pd

from .config import ExperimentConfig, apply_overrides, load_config, output_dir
from .econ_opt import (
    CostParams,
    DemandModel,
    DeploymentPlan,
    Objective,
    closed_form_plan,
    plan_cost_ratio,
)
from .errors import ConfigError, DomainError, NumericalError, UsageError
from .export import export_tables, to_frame, write_csv, write_gnuplot_stub, write_realizations
from .optimizer import numeric_optimize_plan
from .params import NetworkParams, ProgressCb, Regime
from .se_analytic import (
    AnalyticSEEngine,
    p_active,
    se_exact,
    se_lower_bound_appendix,
    se_udn_closed_form,
)
from .stochastic_sim import (
    estimate_se,
    estimate_se_with_scheduler,
    realization_records,
    simulate_trial,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

FIGURE_IDS = ("fig1", "fig3", "fig4")

# 図の既定値（キャプションの値）。掃引は中心値の前後 1 桁ずつの対数等間隔
FIG1_ALPHAS = (3.0, 4.0, 6.0)
FIG1_LAMBDA_U = 0.02
FIG1_LAMBDA_B_RANGE = (0.02, 2.0)
FIG_ALPHA = 4.0
FIG_COSTS = CostParams(c_b=0.1, c_w=0.1)
FIG3_B = 10.0
FIG3_LAMBDA_U = 5.0
FIG4_B = 10.0
FIG4_LAMBDA_U = 1.0
FIG_LAMBDA_U_RANGE = (0.5, 50.0)
FIG_B_RANGE = (1.0, 100.0)

SE_SWEEP_COLUMNS = [
    "lambda_b", "lambda_u", "alpha", "p_active",
    "se_exact", "se_exact_abs_error", "se_udn_closed_form", "se_lower_bound",
    "ratio_approx_over_exact", "densification_gain", "flags",
]

MONTECARLO_COLUMNS = [
    "lambda_b", "lambda_u", "alpha", "trials", "seed", "window_radius", "min_expected_bs", "scheduler",
    "mc_mean", "mc_stderr", "se_exact", "z_score", "capped_trials", "resample_count",
    "active_fraction", "active_fraction_stderr", "p_active", "mean_serving_distance",
    "empirical_selection_prob", "per_access_mean", "flags",
]

OPTIMIZE_COLUMNS = [
    "b", "lambda_u", "alpha", "c_b", "c_w", "spectrum_form", "regime",
    "cf_lambda_b", "cf_w", "cf_price", "cf_profit", "cf_cost_ratio",
    "num_objective", "num_lambda_b", "num_w", "num_price", "num_profit", "num_cost_ratio",
    "rel_gap", "flags",
]

_OPT_REGIMES = (
    (Regime.SPARSE, Objective.P3_1),
    (Regime.ULTRA_DENSE, Objective.P4_1),
    (Regime.GENERAL, Objective.P2_EXACT_SE),
)

T = TypeVar("T")
R = TypeVar("R")


def _ordered_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    threads: int,
    progress: ProgressCb | None,
    label: str,
) -> list[R]:
    """掃引点を並列に回す。結果は完了順ではなく入力順。"""
    total = len(items)
    results: list[R] = []
    if threads <= 1:
        it: Iterable[R] = map(fn, items)
        for i, r in enumerate(it, start=1):
            results.append(r)
            if progress:
                progress(i, total, label)
        return results
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for i, r in enumerate(ex.map(fn, items), start=1):
            results.append(r)
            if progress:
                progress(i, total, label)
    return results


def _with_point(e: NumericalError, **point: float) -> NumericalError:
    where = ", ".join(f"{k}={v!r}" for k, v in point.items())
    return NumericalError(f"{e} (at {where})", partial=e.partial)


def _flags(*groups: Iterable[str]) -> str:
    seen: list[str] = []
    for g in groups:
        for f in g:
            if f not in seen:
                seen.append(f)
    return ";".join(seen)


def _logspace(lo: float, hi: float, points: int) -> list[float]:
    vals = [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), points)]
    vals[0], vals[-1] = lo, hi
    return vals


# ------------------------------------------------------------
# se-sweep
# ------------------------------------------------------------

def se_sweep_row(params: NetworkParams, engine: AnalyticSEEngine) -> dict:
    try:
        exact = se_exact(params, engine.cfg)
        udn = se_udn_closed_form(params)
        lower = se_lower_bound_appendix(params)
        gamma_alpha = engine.gamma_alpha(params.alpha)
    except NumericalError as e:
        raise _with_point(e, lambda_b=params.lambda_b, lambda_u=params.lambda_u, alpha=params.alpha) from e
    return {
        "lambda_b": params.lambda_b,
        "lambda_u": params.lambda_u,
        "alpha": params.alpha,
        "p_active": p_active(params.lambda_u, params.lambda_b),
        "se_exact": exact.value,
        "se_exact_abs_error": exact.abs_error,
        "se_udn_closed_form": udn.value,
        "se_lower_bound": lower.value,
        "ratio_approx_over_exact": udn.value / exact.value,
        "densification_gain": udn.value / gamma_alpha,
        "flags": _flags(exact.flags, udn.flags, lower.flags),
    }


def run_se_sweep(cfg: ExperimentConfig, progress: ProgressCb | None = None) -> pd.DataFrame:
    """(λ_u, α, λ_b) の直積。λ_b は昇順。"""
    engine = AnalyticSEEngine(cfg.quadrature)
    points = [
        NetworkParams(lb, lu, a)
        for lu, a, lb in product(
            cfg.axis("se_sweep", "lambda_u"),
            cfg.axis("se_sweep", "alpha"),
            sorted(cfg.axis("se_sweep", "lambda_b")),
        )
    ]
    rows = _ordered_map(lambda p: se_sweep_row(p, engine), points, cfg.sweep_threads, progress, "se-sweep")
    return to_frame(rows, SE_SWEEP_COLUMNS)


def cmd_se_sweep(cfg: ExperimentConfig, out_dir: Path, progress: ProgressCb | None = None) -> Path:
    return write_csv(run_se_sweep(cfg, progress), out_dir / "se_sweep.csv")


# ------------------------------------------------------------
# montecarlo
# ------------------------------------------------------------

def run_montecarlo(
    cfg: ExperimentConfig,
    progress: ProgressCb | None = None,
    dump_dir: Path | None = None,
) -> pd.DataFrame:
    """
    各パラメータ点でモンテカルロ → 二重積分と比較。
    窓の大きさは全点まとめて試行前に検査する。
    """
    sim = cfg.sim
    points = [
        NetworkParams(lb, lu, a)
        for lu, a, lb in product(
            cfg.axis("montecarlo", "lambda_u"),
            cfg.axis("montecarlo", "alpha"),
            sorted(cfg.axis("montecarlo", "lambda_b")),
        )
    ]
    for p in points:
        sim.check_window(p.lambda_b)

    rows: list[dict] = []
    for k, params in enumerate(points):
        if cfg.scheduler:
            est = estimate_se_with_scheduler(params, sim, progress)
        else:
            est = estimate_se(params, sim, progress)
        try:
            reference = se_exact(params, cfg.quadrature).value
        except NumericalError as e:
            raise _with_point(e, lambda_b=params.lambda_b, lambda_u=params.lambda_u, alpha=params.alpha) from e
        z = None if cfg.scheduler else est.z_score(reference)
        rows.append({
            "lambda_b": params.lambda_b,
            "lambda_u": params.lambda_u,
            "alpha": params.alpha,
            "trials": est.trials_used,
            "seed": sim.seed,
            "window_radius": sim.radius_for(params.lambda_b),
            "min_expected_bs": sim.min_expected_bs,
            "scheduler": cfg.scheduler,
            "mc_mean": est.mean,
            "mc_stderr": est.std_error,
            "se_exact": reference,
            "z_score": z,
            "capped_trials": est.capped_trials,
            "resample_count": est.resample_count,
            "active_fraction": est.active_fraction,
            "active_fraction_stderr": est.active_fraction_stderr,
            "p_active": p_active(params.lambda_u, params.lambda_b),
            "mean_serving_distance": est.mean_serving_distance,
            "empirical_selection_prob": est.empirical_selection_prob,
            "per_access_mean": est.per_access_mean,
            "flags": _flags(est.flags),
        })
        if dump_dir is not None and cfg.dump_trials:
            records: list[dict] = []
            for trial in range(min(cfg.dump_trials, sim.trials)):
                topo, outcome = simulate_trial(params, sim, trial)
                records.extend(realization_records(topo, outcome, trial))
            write_realizations(records, dump_dir / f"realizations_{k:03d}.csv")
    return to_frame(rows, MONTECARLO_COLUMNS)


def cmd_montecarlo(cfg: ExperimentConfig, out_dir: Path, progress: ProgressCb | None = None) -> Path:
    return write_csv(run_montecarlo(cfg, progress, dump_dir=out_dir), out_dir / "montecarlo.csv")


# ------------------------------------------------------------
# optimize
# ------------------------------------------------------------

def _rel_gap(cf: DeploymentPlan, num: DeploymentPlan) -> float:
    return max(
        abs(cf.lambda_b_star - num.lambda_b_star) / num.lambda_b_star,
        abs(cf.w_star - num.w_star) / num.w_star,
    )


def optimize_rows(
    b: float,
    lambda_u: float,
    alpha: float,
    cfg: ExperimentConfig,
    engine: AnalyticSEEngine,
) -> list[dict]:
    """1 つの掃引点について 3 領域ぶんの行（閉形式と数値解の比較）。"""
    demand = DemandModel(b=b)
    costs = CostParams(c_b=cfg.c_b, c_w=cfg.c_w)
    rows: list[dict] = []
    for regime, objective in _OPT_REGIMES:
        try:
            cf = None
            if regime is not Regime.GENERAL:
                cf = closed_form_plan(
                    regime, lambda_u, alpha, demand, costs, engine, spectrum_form=cfg.spectrum_form
                )
            num = numeric_optimize_plan(objective, lambda_u, alpha, demand, costs, engine, cfg.optimizer)
        except NumericalError as e:
            raise _with_point(e, b=b, lambda_u=lambda_u, alpha=alpha) from e
        rows.append({
            "b": b,
            "lambda_u": lambda_u,
            "alpha": alpha,
            "c_b": cfg.c_b,
            "c_w": cfg.c_w,
            "spectrum_form": cfg.spectrum_form,
            "regime": regime.value,
            "cf_lambda_b": cf.lambda_b_star if cf else None,
            "cf_w": cf.w_star if cf else None,
            "cf_price": cf.p_star if cf else None,
            "cf_profit": cf.profit if cf else None,
            "cf_cost_ratio": plan_cost_ratio(cf, costs) if cf else None,
            "num_objective": objective.value,
            "num_lambda_b": num.lambda_b_star,
            "num_w": num.w_star,
            "num_price": num.p_star,
            "num_profit": num.profit,
            "num_cost_ratio": plan_cost_ratio(num, costs),
            "rel_gap": _rel_gap(cf, num) if cf else None,
            "flags": _flags(cf.flags if cf else (), num.flags),
        })
    return rows


def run_optimize(cfg: ExperimentConfig, progress: ProgressCb | None = None) -> pd.DataFrame:
    engine = AnalyticSEEngine(cfg.quadrature)
    points = list(product(
        cfg.axis("optimize", "b"),
        sorted(cfg.axis("optimize", "lambda_u")),
        cfg.axis("optimize", "alpha"),
    ))
    chunks = _ordered_map(
        lambda pt: optimize_rows(pt[0], pt[1], pt[2], cfg, engine),
        points, cfg.sweep_threads, progress, "optimize",
    )
    return to_frame([r for chunk in chunks for r in chunk], OPTIMIZE_COLUMNS)


def cmd_optimize(cfg: ExperimentConfig, out_dir: Path, progress: ProgressCb | None = None) -> Path:
    df = run_optimize(cfg, progress)
    summary = df[["b", "lambda_u", "regime", "cf_lambda_b", "cf_w", "num_lambda_b", "num_w", "num_profit", "rel_gap"]]
    print(summary.to_string(index=False, float_format=lambda v: f"{v:.5g}", na_rep="-"))
    return write_csv(df, out_dir / "optimize.csv")


# ------------------------------------------------------------
# figures
# ------------------------------------------------------------

def _alpha_tag(alpha: float) -> str:
    return f"alpha{alpha:g}"


def figure1_table(cfg: ExperimentConfig, progress: ProgressCb | None = None) -> pd.DataFrame:
    """厳密 SE と閉形式（と下界）を α ごとに横持ちで。"""
    engine = AnalyticSEEngine(cfg.quadrature)
    lambda_bs = _logspace(*FIG1_LAMBDA_B_RANGE, cfg.figure_points)
    points = [NetworkParams(lb, FIG1_LAMBDA_U, a) for a in FIG1_ALPHAS for lb in lambda_bs]
    rows = _ordered_map(lambda p: se_sweep_row(p, engine), points, cfg.sweep_threads, progress, "fig1")

    columns = ["lambda_b", "lambda_u"]
    wide: dict[float, dict] = {lb: {"lambda_b": lb, "lambda_u": FIG1_LAMBDA_U} for lb in lambda_bs}
    for a in FIG1_ALPHAS:
        tag = _alpha_tag(a)
        columns += [f"se_exact_{tag}", f"se_udn_{tag}", f"se_lower_bound_{tag}", f"ratio_{tag}"]
    for r in rows:
        tag = _alpha_tag(r["alpha"])
        wide[r["lambda_b"]].update({
            f"se_exact_{tag}": r["se_exact"],
            f"se_udn_{tag}": r["se_udn_closed_form"],
            f"se_lower_bound_{tag}": r["se_lower_bound"],
            f"ratio_{tag}": r["ratio_approx_over_exact"],
        })
    return to_frame([wide[lb] for lb in lambda_bs], columns)


def _plan_pair(
    b: float,
    lambda_u: float,
    cfg: ExperimentConfig,
    engine: AnalyticSEEngine,
) -> tuple[DeploymentPlan, DeploymentPlan]:
    demand = DemandModel(b=b)
    sparse = closed_form_plan(Regime.SPARSE, lambda_u, FIG_ALPHA, demand, FIG_COSTS, engine)
    dense = closed_form_plan(
        Regime.ULTRA_DENSE, lambda_u, FIG_ALPHA, demand, FIG_COSTS, engine, spectrum_form=cfg.spectrum_form
    )
    return sparse, dense


def _figure_sweep(
    cfg: ExperimentConfig,
    variable: str,
    values: list[float],
    fixed: float,
    engine: AnalyticSEEngine,
) -> list[tuple[float, float, DeploymentPlan, DeploymentPlan]]:
    out = []
    for v in values:
        b, lu = (fixed, v) if variable == "lambda_u" else (v, fixed)
        out.append((b, lu, *_plan_pair(b, lu, cfg, engine)))
    return out


def figure3_tables(cfg: ExperimentConfig) -> dict[str, pd.DataFrame]:
    """最適 BS 密度と帯域量（λ_u 掃引 / b 掃引）。"""
    engine = AnalyticSEEngine(cfg.quadrature)
    columns = [
        "lambda_u", "b", "alpha", "c_b", "c_w",
        "lambda_b_sparse", "w_sparse", "lambda_b_ultra_dense", "w_ultra_dense", "flags",
    ]
    tables = {}
    for fig_id, variable, values, fixed in (
        ("fig3a", "lambda_u", _logspace(*FIG_LAMBDA_U_RANGE, cfg.figure_points), FIG3_B),
        ("fig3b", "b", _logspace(*FIG_B_RANGE, cfg.figure_points), FIG3_LAMBDA_U),
    ):
        rows = [
            {
                "lambda_u": lu, "b": b, "alpha": FIG_ALPHA, "c_b": FIG_COSTS.c_b, "c_w": FIG_COSTS.c_w,
                "lambda_b_sparse": s.lambda_b_star, "w_sparse": s.w_star,
                "lambda_b_ultra_dense": d.lambda_b_star, "w_ultra_dense": d.w_star,
                "flags": _flags(s.flags, d.flags),
            }
            for b, lu, s, d in _figure_sweep(cfg, variable, values, fixed, engine)
        ]
        tables[fig_id] = to_frame(rows, columns)
    return tables


def figure4_tables(cfg: ExperimentConfig) -> dict[str, pd.DataFrame]:
    """
    最大利益（λ_u 掃引 / b 掃引）。profit_* は各領域の厳密モデル (P3/P4) の値、
    surrogate_profit_* は閉形式がちょうど最大化する Taylor 近似 (P3_1/P4_1) の値。
    """
    engine = AnalyticSEEngine(cfg.quadrature)
    columns = [
        "lambda_u", "b", "alpha", "c_b", "c_w",
        "profit_sparse", "profit_ultra_dense", "surrogate_profit_sparse", "surrogate_profit_ultra_dense", "flags",
    ]
    tables = {}
    for fig_id, variable, values, fixed in (
        ("fig4a", "lambda_u", _logspace(*FIG_LAMBDA_U_RANGE, cfg.figure_points), FIG4_B),
        ("fig4b", "b", _logspace(*FIG_B_RANGE, cfg.figure_points), FIG4_LAMBDA_U),
    ):
        rows = [
            {
                "lambda_u": lu, "b": b, "alpha": FIG_ALPHA, "c_b": FIG_COSTS.c_b, "c_w": FIG_COSTS.c_w,
                "profit_sparse": s.profit, "profit_ultra_dense": d.profit,
                "surrogate_profit_sparse": s.surrogate_profit,
                "surrogate_profit_ultra_dense": d.surrogate_profit,
                "flags": _flags(s.flags, d.flags),
            }
            for b, lu, s, d in _figure_sweep(cfg, variable, values, fixed, engine)
        ]
        tables[fig_id] = to_frame(rows, columns)
    return tables


def _gnuplot_series(fig_id: str) -> tuple[str, list[str]]:
    if fig_id == "fig1":
        ys = [f"{k}_{_alpha_tag(a)}" for a in FIG1_ALPHAS for k in ("se_exact", "se_udn")]
        return "lambda_b", ys
    x = "lambda_u" if fig_id.endswith("a") else "b"
    if fig_id.startswith("fig3"):
        return x, ["lambda_b_sparse", "w_sparse", "lambda_b_ultra_dense", "w_ultra_dense"]
    return x, ["surrogate_profit_sparse", "surrogate_profit_ultra_dense"]


def cmd_figures(
    cfg: ExperimentConfig,
    out_dir: Path,
    fig_ids: Sequence[str] = FIGURE_IDS,
    progress: ProgressCb | None = None,
) -> list[Path]:
    unknown = [f for f in fig_ids if f not in FIGURE_IDS]
    if unknown:
        raise UsageError(f"unknown figure id(s) {unknown}; valid ids: {', '.join(FIGURE_IDS)}")

    tables: dict[str, pd.DataFrame] = {}
    for fig_id in dict.fromkeys(fig_ids or FIGURE_IDS):
        if fig_id == "fig1":
            tables["fig1"] = figure1_table(cfg, progress)
        elif fig_id == "fig3":
            tables.update(figure3_tables(cfg))
        else:
            tables.update(figure4_tables(cfg))

    written = export_tables(tables, out_dir, with_dat=True, progress=progress)
    written.append(write_gnuplot_stub(out_dir, {k: _gnuplot_series(k) for k in tables}))
    return written


# ------------------------------------------------------------
# main
# ------------------------------------------------------------

def _stderr_progress(done: int, total: int, msg: str) -> None:
    end = "\n" if done >= total else ""
    print(f"\r[{done}/{total}] {msg}", end=end, file=sys.stderr, flush=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="実験設定 JSON")
    common.add_argument("--out", type=Path, default=None, help="出力ディレクトリ（未指定なら UDN_OUTPUT_DIR）")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="並列数（0 = CPU 数）")
    common.add_argument("--lambda-b", dest="lambda_b", type=float, nargs="+", default=None)
    common.add_argument("--lambda-u", dest="lambda_u", type=float, nargs="+", default=None)
    common.add_argument("--alpha", type=float, nargs="+", default=None)
    common.add_argument("--b", type=float, nargs="+", default=None)
    common.add_argument("--c-b", dest="c_b", type=float, default=None)
    common.add_argument("--c-w", dest="c_w", type=float, default=None)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="udn-se", description="超高密度セルラ網の SE 解析と利益最適化")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("se-sweep", parents=[common], help="厳密 SE と閉形式の比較表")
    sub.add_parser("montecarlo", parents=[common], help="モンテカルロと二重積分の比較")
    sub.add_parser("optimize", parents=[common], help="閉形式と数値最適化の比較")
    p_fig = sub.add_parser("figures", parents=[common], help="図の再現用データ一式")
    p_fig.add_argument("ids", nargs="*", default=list(FIGURE_IDS), help=f"{', '.join(FIGURE_IDS)}")
    return parser


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None, *, setup_logging: bool = False) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    if setup_logging:
        _setup_logging(args.verbose)
    progress = _stderr_progress if args.verbose else None

    try:
        cfg = apply_overrides(
            load_config(args.config),
            axes={name: getattr(args, name) for name in ("lambda_b", "lambda_u", "alpha", "b")},
            c_b=args.c_b,
            c_w=args.c_w,
            seed=args.seed,
            trials=args.trials,
            threads=args.threads,
        )
        out_dir = output_dir(args.out)

        if args.command == "se-sweep":
            written = [cmd_se_sweep(cfg, out_dir, progress)]
        elif args.command == "montecarlo":
            written = [cmd_montecarlo(cfg, out_dir, progress)]
        elif args.command == "optimize":
            written = [cmd_optimize(cfg, out_dir, progress)]
        else:
            written = cmd_figures(cfg, out_dir, args.ids, progress)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    for path in written:
        print(f"Export completed: {path}")
    return EXIT_OK
