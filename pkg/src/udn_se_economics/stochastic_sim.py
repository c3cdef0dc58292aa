# src/udn_se_economics/stochastic_sim.py
"""
確率幾何モデルのモンテカルロ（解析式とは独立の正解データ）。

原点に典型ユーザを置き（ユーザ PPP に追加）、
- BS / ユーザを独立な PPP として円盤窓に配置
- 最寄り BS 接続（Voronoi）
- ユーザのいないセルの BS は停止
- 稼働リンクにだけ単位平均の指数フェージング
で SIR を作り、log(1+SIR) を平均する。
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DomainError, NumericalError, TruncationWarning
from .params import NetworkParams, ProgressCb
from .rng import STREAM_FADING, STREAM_TOPOLOGY, trial_generator

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20140101


@dataclass(frozen=True)
class SimConfig:
    """
    window_radius=None なら min_expected_bs 個の BS が期待できる半径を λ_b から決める。
    """

    window_radius: float | None = None
    trials: int = 10_000
    seed: int = DEFAULT_SEED
    min_expected_bs: int = 500
    sir_cap: float = 1e12
    threads: int = 1
    max_resamples: int = 1_000

    def __post_init__(self) -> None:
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be >= 1: trials={self.trials!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer: seed={self.seed!r}")
        if int(self.min_expected_bs) < 1:
            raise ConfigError(f"min_expected_bs must be >= 1: {self.min_expected_bs!r}")
        if self.window_radius is not None and not (self.window_radius > 0):
            raise ConfigError(f"window_radius must be positive: {self.window_radius!r}")
        if not (self.sir_cap > 0):
            raise ConfigError(f"sir_cap must be positive: {self.sir_cap!r}")
        if int(self.threads) < 1:
            raise ConfigError(f"threads must be >= 1: threads={self.threads!r}")

    def radius_for(self, lambda_b: float) -> float:
        if self.window_radius is not None:
            return float(self.window_radius)
        return math.sqrt(self.min_expected_bs / (math.pi * lambda_b)) * (1.0 + 1e-12)

    def check_window(self, lambda_b: float) -> float:
        """窓の期待 BS 数が min_expected_bs 未満なら試行前に ConfigError。"""
        radius = self.radius_for(lambda_b)
        expected = math.pi * radius**2 * lambda_b
        if expected < self.min_expected_bs:
            raise ConfigError(
                f"simulation window too small: expected {expected:.1f} BSs in radius {radius:.4g} "
                f"(lambda_b={lambda_b}), need >= {self.min_expected_bs}"
            )
        return radius


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TopologyRealization:
    """1 回分の配置。生成後は変更しない（配列も書込不可）。"""

    bs_points: np.ndarray
    user_points: np.ndarray
    active_mask: np.ndarray
    serving_bs_index: int
    user_assoc: np.ndarray
    resamples: int = 0

    @property
    def n_bs(self) -> int:
        return int(self.bs_points.shape[0])

    @property
    def active_fraction(self) -> float:
        """ユーザ PPP の接続先だけで数えた稼働率（典型ユーザのサービング BS は数えない）。"""
        return float(np.unique(self.user_assoc).size) / self.n_bs

    @property
    def serving_distance(self) -> float:
        return float(np.hypot(*self.bs_points[self.serving_bs_index]))

    @property
    def serving_cell_users(self) -> int:
        """サービングセル内のユーザ数（典型ユーザを含む）。"""
        return int(np.count_nonzero(self.user_assoc == self.serving_bs_index)) + 1


class TrialOutcome(NamedTuple):
    rate: float
    selection: float
    capped: bool
    active_fraction: float
    serving_distance: float
    resamples: int
    sir: float


@dataclass(frozen=True)
class SEEstimate:
    """
    モンテカルロの SE 推定値。std_error は試行 1 回のとき None（算出不可）。
    スケジューラ込みの場合は mean が時分割 SE、per_access_mean が選ばれたときの SE。
    """

    mean: float
    std_error: float | None
    trials_used: int
    empirical_selection_prob: float | None = None
    per_access_mean: float | None = None
    capped_trials: int = 0
    resample_count: int = 0
    active_fraction: float = float("nan")
    active_fraction_stderr: float | None = None
    mean_serving_distance: float = float("nan")
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not (self.mean >= 0.0):
            raise DomainError(f"SE estimate must be non-negative: mean={self.mean!r}")
        if self.std_error is not None and not (self.std_error >= 0.0):
            raise DomainError(f"std_error must be non-negative: {self.std_error!r}")

    def z_score(self, reference: float) -> float | None:
        if not self.std_error:
            return None
        return (self.mean - reference) / self.std_error


# ------------------------------------------------------------
# サンプリング
# ------------------------------------------------------------

def sample_ppp(density: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """
    半径 radius の円盤上の一様 PPP。点数は Poisson(density·π·radius²)。
    戻り値は (n, 2) の座標配列。
    """
    if not (math.isfinite(density) and density > 0):
        raise DomainError(f"density must be positive: density={density!r}")
    if not (math.isfinite(radius) and radius > 0):
        raise DomainError(f"radius must be positive: radius={radius!r}")
    n = int(rng.poisson(density * math.pi * radius * radius))
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def realize_topology(
    params: NetworkParams,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> TopologyRealization:
    """
    BS / ユーザ PPP を独立に生成し、原点の典型ユーザを加えて最寄り接続と停止判定をする。
    BS が 0 個なら引き直す（回数を resamples に記録）。
    """
    radius = cfg.check_window(params.lambda_b)

    resamples = 0
    bs = sample_ppp(params.lambda_b, radius, rng)
    while bs.shape[0] == 0:
        resamples += 1
        if resamples > cfg.max_resamples:
            raise NumericalError(f"no BS drawn after {cfg.max_resamples} resamples (radius={radius})")
        bs = sample_ppp(params.lambda_b, radius, rng)
    users = sample_ppp(params.lambda_u, radius, rng)

    tree = cKDTree(bs)
    _, serving = tree.query((0.0, 0.0), k=1)
    serving = int(serving)

    active = np.zeros(bs.shape[0], dtype=bool)
    if users.shape[0] > 0:
        _, assoc = tree.query(users, k=1)
        assoc = np.asarray(assoc, dtype=np.int64)
        active[assoc] = True
    else:
        assoc = np.zeros(0, dtype=np.int64)
    # 典型ユーザ自身がサービングセルにいる
    active[serving] = True

    return TopologyRealization(
        bs_points=_readonly(bs),
        user_points=_readonly(users),
        active_mask=_readonly(active),
        serving_bs_index=serving,
        user_assoc=_readonly(assoc),
        resamples=resamples,
    )


def sir_at_origin(
    bs_points: np.ndarray,
    active_mask: np.ndarray,
    serving_index: int,
    fading: np.ndarray,
    alpha: float,
) -> float:
    """
    SIR = h_0 r_0^{-α} / Σ_{稼働中の干渉 BS} h_i r_i^{-α}。
    干渉 BS が無ければ inf を返す（呼び出し側で上限処理）。
    """
    gain = fading * np.hypot(bs_points[:, 0], bs_points[:, 1]) ** (-alpha)
    interferers = active_mask.copy()
    interferers[serving_index] = False
    interference = math.fsum(gain[interferers])
    if interference <= 0.0:
        return math.inf
    return float(gain[serving_index]) / interference


def simulate_trial(
    params: NetworkParams,
    cfg: SimConfig,
    trial: int,
) -> tuple[TopologyRealization, TrialOutcome]:
    topo = realize_topology(params, cfg, trial_generator(cfg.seed, trial, STREAM_TOPOLOGY))
    # フェージングは BS インデックス順に全点分引き、稼働リンクだけ使う
    fading = trial_generator(cfg.seed, trial, STREAM_FADING).exponential(1.0, size=topo.n_bs)
    sir = sir_at_origin(topo.bs_points, topo.active_mask, topo.serving_bs_index, fading, params.alpha)
    capped = math.isinf(sir)
    rate = math.log1p(cfg.sir_cap if capped else sir)
    outcome = TrialOutcome(
        rate=rate,
        selection=1.0 / topo.serving_cell_users,
        capped=capped,
        active_fraction=topo.active_fraction,
        serving_distance=topo.serving_distance,
        resamples=topo.resamples,
        sir=sir,
    )
    return topo, outcome


def _run_trials(
    params: NetworkParams,
    cfg: SimConfig,
    progress: ProgressCb | None,
) -> list[TrialOutcome]:
    cfg.check_window(params.lambda_b)
    total = int(cfg.trials)
    step = max(1, total // 100)

    def one(trial: int) -> TrialOutcome:
        return simulate_trial(params, cfg, trial)[1]

    outcomes: list[TrialOutcome] = []
    if cfg.threads <= 1:
        it = map(one, range(total))
        for i, out in enumerate(it, start=1):
            outcomes.append(out)
            if progress and (i % step == 0 or i == total):
                progress(i, total, f"trial {i}/{total}")
        return outcomes

    # map は入力順で返すので集計順は並列度に依存しない
    with ThreadPoolExecutor(max_workers=int(cfg.threads)) as ex:
        for i, out in enumerate(ex.map(one, range(total), chunksize=step), start=1):
            outcomes.append(out)
            if progress and (i % step == 0 or i == total):
                progress(i, total, f"trial {i}/{total}")
    return outcomes


def _mean_and_stderr(values: list[float]) -> tuple[float, float | None]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _summarize(
    outcomes: list[TrialOutcome],
    *,
    scheduler: bool,
) -> SEEstimate:
    rates = [o.rate for o in outcomes]
    capped = sum(1 for o in outcomes if o.capped)
    flags: tuple[str, ...] = ()
    if capped:
        flags = ("zero_interference_trials",)
        warnings.warn(
            f"{capped} trial(s) had no active interferer inside the window; log(1+SIR) capped",
            TruncationWarning,
            stacklevel=3,
        )

    n = len(outcomes)
    active_fraction, active_fraction_se = _mean_and_stderr([o.active_fraction for o in outcomes])
    common = dict(
        trials_used=n,
        capped_trials=capped,
        resample_count=sum(o.resamples for o in outcomes),
        active_fraction=active_fraction,
        active_fraction_stderr=active_fraction_se,
        mean_serving_distance=math.fsum(o.serving_distance for o in outcomes) / n,
        flags=flags,
    )
    if not scheduler:
        mean, se = _mean_and_stderr(rates)
        return SEEstimate(mean=mean, std_error=se, **common)

    shared = [o.selection * o.rate for o in outcomes]
    mean, se = _mean_and_stderr(shared)
    return SEEstimate(
        mean=mean,
        std_error=se,
        empirical_selection_prob=math.fsum(o.selection for o in outcomes) / n,
        per_access_mean=math.fsum(rates) / n,
        **common,
    )


def estimate_se(
    params: NetworkParams,
    cfg: SimConfig,
    progress: ProgressCb | None = None,
) -> SEEstimate:
    """原点の典型ユーザの E[log(1+SIR)]（スケジューラなし）。"""
    outcomes = _run_trials(params, cfg, progress)
    est = _summarize(outcomes, scheduler=False)
    logger.info(
        "MC SE lambda_b=%g lambda_u=%g alpha=%g: %.6g ± %s (%d trials)",
        params.lambda_b, params.lambda_u, params.alpha, est.mean, est.std_error, est.trials_used,
    )
    return est


def estimate_se_with_scheduler(
    params: NetworkParams,
    cfg: SimConfig,
    progress: ProgressCb | None = None,
) -> SEEstimate:
    """
    一様ランダムスケジューラ込み。サービングセルのユーザ数 N（典型ユーザ込み）から
    選択確率 1/N を取り、時分割として (1/N)·log(1+SIR) を平均する。
    """
    outcomes = _run_trials(params, cfg, progress)
    est = _summarize(outcomes, scheduler=True)
    logger.info(
        "MC SE (scheduler) lambda_b=%g lambda_u=%g alpha=%g: %.6g, selection=%.4g",
        params.lambda_b, params.lambda_u, params.alpha, est.mean, est.empirical_selection_prob or 0.0,
    )
    return est


def realization_records(topo: TopologyRealization, outcome: TrialOutcome, trial: int) -> list[dict]:
    """
    CSV ダンプ用のレコード。kind ∈ {bs, user, typical}、sir は typical 行にだけ入れる。
    """
    rows: list[dict] = []
    for i, (x, y) in enumerate(topo.bs_points):
        rows.append({
            "trial": trial, "kind": "bs", "index": i, "x": float(x), "y": float(y),
            "active": bool(topo.active_mask[i]), "serving": i == topo.serving_bs_index, "sir": None,
        })
    for j, (x, y) in enumerate(topo.user_points):
        rows.append({
            "trial": trial, "kind": "user", "index": j, "x": float(x), "y": float(y),
            "active": None, "serving": bool(topo.user_assoc[j] == topo.serving_bs_index), "sir": None,
        })
    rows.append({
        "trial": trial, "kind": "typical", "index": -1, "x": 0.0, "y": 0.0,
        "active": None, "serving": True, "sir": outcome.sir,
    })
    return rows
