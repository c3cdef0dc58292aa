# src/udn_se_economics/se_analytic.py
"""
平均スペクトル効率 (SE) の解析式。

- se_exact               : 全密度で有効な二重積分（外側 t, 内側 ρ_t）
- se_sparse_gamma_alpha  : p_a=1 の特殊化 γ_α（密度に依存しない）
- se_udn_closed_form     : 超高密度の閉形式 log[1 + (λ_b/(ρ_0 λ_u))^{α/2}]
- se_with_multiple_access: 一様ランダムスケジューラ込みの疎/超高密度近似
- se_lower_bound_appendix: 超幾何関数を含む下界

単位は nats/sec/Hz（1 bit ≈ 0.693 nats, 内部で bit 換算はしない）。
干渉制限（雑音無視）を前提とする。
"""
from __future__ import annotations

import logging
import math
import warnings
from typing import Callable

from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, SelectionProbabilityWarning
from .hypergeometric import hyp2f1_11c
from .params import NetworkParams, QuadratureConfig, Regime, SEMethod, SEValue, check_alpha

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE = QuadratureConfig()

# p_a の形状パラメータ（Voronoi セル面積のガンマ近似）
VORONOI_SHAPE = 3.5


# ------------------------------------------------------------
# 小物
# ------------------------------------------------------------

def _log_expm1(t: float) -> float:
    """log(e^t - 1) を大きな t でもオーバーフローさせずに。"""
    if t > 1.0:
        return t + math.log1p(-math.exp(-t))
    return math.log(math.expm1(t))


def _adaptive_quad(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float,
    epsrel: float,
    limit: int,
    what: str,
    **kwargs,
) -> tuple[float, float]:
    """
    scipy.integrate.quad（適応 Gauss–Kronrod, 誤差推定つき）の薄いラッパ。
    丸め誤差の警告程度なら受け入れ、明らかな非収束は NumericalError にする。
    """
    res = quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1, **kwargs)
    value, err = float(res[0]), float(res[1])
    if len(res) > 3:
        tol = max(epsabs, epsrel * abs(value))
        if not math.isfinite(value) or err > 1e3 * tol:
            raise NumericalError(
                f"quadrature did not converge for {what}: estimate={value!r}, err={err:.3e} ({res[3]})",
                partial=value,
            )
        logger.debug("quad accepted with warning for %s: err=%.3e (%s)", what, err, res[3])
    return value, err


def _rho_zero_analytic(alpha: float) -> float:
    x = 2.0 * math.pi / alpha
    return x / math.sin(x)


def _rho_integrand(k: float) -> Callable[[float], float]:
    return lambda u: 1.0 / (1.0 + u**k)


def _rho_head(upper: float, k: float, cfg: QuadratureConfig) -> tuple[float, float]:
    """∫_0^upper du/(1+u^k), upper <= 1"""
    return _adaptive_quad(
        _rho_integrand(k), 0.0, upper,
        epsabs=cfg.inner_abs_tol, epsrel=cfg.inner_rel_tol, limit=cfg.max_subdivisions,
        what="rho head",
    )


def _rho_tail(lower: float, k: float, cfg: QuadratureConfig) -> tuple[float, float]:
    """
    ∫_lower^∞ du/(1+u^k), lower >= 1。
    u=1/v で ∫_0^{1/lower} v^{k-2}/(1+v^k) dv にして代数重み (QAWS) で積分する。
    """
    return _adaptive_quad(
        _rho_integrand(k), 0.0, 1.0 / lower,
        epsabs=cfg.inner_abs_tol, epsrel=cfg.inner_rel_tol, limit=cfg.max_subdivisions,
        what="rho tail", weight="alg", wvar=(k - 2.0, 0.0),
    )


# ------------------------------------------------------------
# ρ_0, ρ_t, p_a
# ------------------------------------------------------------

def rho_zero(alpha: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    ρ_0 = ∫_0^∞ du/(1+u^{α/2}) = (2π/α) csc(2π/α)。
    定義積分の求積と解析恒等式の両方を計算し、一致を確認してから解析値を返す。
    """
    check_alpha(alpha)
    k = alpha / 2.0
    analytic = _rho_zero_analytic(alpha)
    head, _ = _rho_head(1.0, k, cfg)
    tail, _ = _rho_tail(1.0, k, cfg)
    numeric = head + tail
    if abs(numeric - analytic) > cfg.identity_tol:
        raise NumericalError(
            f"rho_0 quadrature disagrees with (2π/α)csc(2π/α) at alpha={alpha}: "
            f"{numeric!r} vs {analytic!r}",
            partial=numeric,
        )
    return analytic


def _rho_lower_limit_log(t: float, alpha: float) -> float:
    """log L, L = (e^t - 1)^{-2/α}"""
    return -(2.0 / alpha) * _log_expm1(t)


def _rho_from_log_lower(log_lower: float, alpha: float, rho0: float, cfg: QuadratureConfig) -> float:
    k = alpha / 2.0
    if log_lower >= 0.0:
        lower = math.exp(log_lower)
        if math.isinf(lower):
            return 0.0
        value, _ = _rho_tail(lower, k, cfg)
        return value
    lower = math.exp(log_lower)
    head, _ = _rho_head(lower, k, cfg)
    return rho0 - head


def rho_t(t: float, alpha: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    ρ_t = ∫_{(e^t-1)^{-2/α}}^∞ du/(1+u^{α/2})。
    t について狭義単調増加で 0 < ρ_t < ρ_0, t→∞ で ρ_0 に近づく。
    """
    check_alpha(alpha)
    if not (math.isfinite(t) and t > 0.0):
        raise DomainError(f"rho_t requires t > 0: t={t!r}")
    return _rho_from_log_lower(_rho_lower_limit_log(t, alpha), alpha, _rho_zero_analytic(alpha), cfg)


def p_active(lambda_u: float, lambda_b: float) -> float:
    """
    BS が稼働している（セルが空でない）確率
        p_a = 1 - (1 + 3.5^{-1} λ_u/λ_b)^{-3.5}
    λ_u/λ_b → 0 で p_a ≈ λ_u/λ_b、→∞ で 1。
    """
    for name, v in (("lambda_u", lambda_u), ("lambda_b", lambda_b)):
        if not (math.isfinite(v) and v > 0.0):
            raise DomainError(f"{name} must be positive: {name}={v!r}")
    x = lambda_u / lambda_b
    return -math.expm1(-VORONOI_SHAPE * math.log1p(x / VORONOI_SHAPE))


# ------------------------------------------------------------
# SE: 厳密積分
# ------------------------------------------------------------

def outer_truncation(p_a: float, alpha: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """
    外側積分の打ち切り T。
    被積分関数は t→∞ で [1 + p_a ρ_0 e^{2t/α}]^{-1} のように減衰するので
        T = (α/2) log( max(1, 1/(p_a ρ_0)) / ε_tail )
    で裾の寄与は (α/2)·ε_tail 程度に収まる。
    """
    if cfg.outer_truncation is not None:
        return float(cfg.outer_truncation)
    rho0 = _rho_zero_analytic(alpha)
    return (alpha / 2.0) * math.log(max(1.0, 1.0 / (p_a * rho0)) / cfg.tail_eps)


def _se_integral(p_a: float, alpha: float, cfg: QuadratureConfig) -> tuple[float, float]:
    """
    γ = ∫_0^∞ [1 + ρ_t (e^t-1)^{2/α} p_a]^{-1} dt を [0, T] で求積し、
    T より先は漸近形の裾を解析的に足す。(value, abs_error) を返す。
    """
    rho0 = _rho_zero_analytic(alpha)
    big_t = outer_truncation(p_a, alpha, cfg)

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 1.0
        log_lower = _rho_lower_limit_log(t, alpha)
        rho = _rho_from_log_lower(log_lower, alpha, rho0, cfg)
        # (e^t-1)^{2/α} = 1/L
        return 1.0 / (1.0 + p_a * rho * math.exp(-log_lower))

    body, err = _adaptive_quad(
        integrand, 0.0, big_t,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        what=f"SE outer integral (p_a={p_a:.6g}, alpha={alpha})",
    )
    # 裾: ∫_T^∞ e^{-2t/α}/(p_a ρ_0) dt
    tail = (alpha / 2.0) * math.exp(_rho_lower_limit_log(big_t, alpha)) / (p_a * rho0)
    return body + tail, err + tail


def se_exact(
    params: NetworkParams,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    *,
    p_active_override: float | None = None,
) -> SEValue:
    """
    全密度で有効な SE（二重積分）。密度には p_a = p_a(λ_u/λ_b) を通してのみ依存する。
    p_active_override=1.0 で γ_α と一致する（検証用）。
    """
    p_a = p_active(params.lambda_u, params.lambda_b) if p_active_override is None else p_active_override
    if not (0.0 < p_a <= 1.0):
        raise DomainError(f"p_a must lie in (0, 1]: p_a={p_a!r}")
    value, err = _se_integral(p_a, params.alpha, cfg)
    return SEValue(value=value, method=SEMethod.EXACT_QUADRATURE, regime_assumption=None, abs_error=err)


def se_sparse_gamma_alpha(alpha: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> SEValue:
    """
    γ_α: 全 BS 稼働 (p_a=1) の SE。λ_b, λ_u に依存しない。
    指数は 2/α（p_a=1 とした厳密式の特殊化）を使う。
    """
    check_alpha(alpha)
    value, err = _se_integral(1.0, alpha, cfg)
    return SEValue(value=value, method=SEMethod.SPARSE_CLOSED_FORM, regime_assumption=Regime.SPARSE, abs_error=err)


# ------------------------------------------------------------
# SE: 閉形式
# ------------------------------------------------------------

def se_udn_closed_form(params: NetworkParams) -> SEValue:
    """超高密度の閉形式 log[1 + (λ_b/(ρ_0 λ_u))^{α/2}]。求積なし。"""
    rho0 = _rho_zero_analytic(params.alpha)
    x = (params.lambda_b / (rho0 * params.lambda_u)) ** (params.alpha / 2.0)
    return SEValue(
        value=math.log1p(x),
        method=SEMethod.ULTRA_DENSE_CLOSED_FORM,
        regime_assumption=Regime.ULTRA_DENSE,
    )


def se_with_multiple_access(
    params: NetworkParams,
    regime: Regime,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> SEValue:
    """
    一様ランダムスケジューラ込みの SE。
      Sparse     : (λ_b/λ_u) γ_α
      UltraDense : se_udn_closed_form と同じ
    疎モデルで λ_b > λ_u のときは選択確率が 1 を超える。値はそのまま返し flags に残す。
    """
    if regime is Regime.ULTRA_DENSE:
        return se_udn_closed_form(params)
    if regime is not Regime.SPARSE:
        raise DomainError(f"multiple-access SE needs regime sparse or ultra_dense: {regime!r}")

    gamma_alpha = se_sparse_gamma_alpha(params.alpha, cfg)
    selection = params.density_ratio
    flags: tuple[str, ...] = ()
    if selection > 1.0:
        flags = ("selection_probability_exceeds_one",)
        warnings.warn(
            f"sparse multiple-access formula used with lambda_b > lambda_u "
            f"(selection probability {selection:.4g} > 1)",
            SelectionProbabilityWarning,
            stacklevel=2,
        )
    return SEValue(
        value=selection * gamma_alpha.value,
        method=SEMethod.SPARSE_CLOSED_FORM,
        regime_assumption=Regime.SPARSE,
        abs_error=selection * gamma_alpha.abs_error,
        flags=flags,
    )


# ------------------------------------------------------------
# 下界
# ------------------------------------------------------------

def load_ratio_a(params: NetworkParams) -> float:
    """a := ρ_0 λ_u / λ_b"""
    return _rho_zero_analytic(params.alpha) * params.lambda_u / params.lambda_b


def se_lower_bound_appendix(params: NetworkParams) -> SEValue:
    """
    [1 - a(e^t-1)^{2/α}]^+ の積分（閉形式）:

        log(1 + a^{-α/2}) + aπ csc(2π/α)
          - α/(2(1+a^{α/2})) · ₂F₁(1,1; 1-2/α; 1 - 1/(a^{α/2}+1))

    a→0 では log 項以外が -α/2 に収束する（相対的には閉形式 SE に近づく）。
    """
    alpha = params.alpha
    a = load_ratio_a(params)
    big_a = a ** (alpha / 2.0)
    z = big_a / (1.0 + big_a)
    c = 1.0 - 2.0 / alpha

    log_term = math.log1p(a ** (-alpha / 2.0))
    csc_term = a * math.pi / math.sin(2.0 * math.pi / alpha)
    hyp_term = alpha / (2.0 * (1.0 + big_a)) * hyp2f1_11c(c, z)
    value = log_term + csc_term - hyp_term

    scale = max(log_term, csc_term, hyp_term, 1.0)
    if value < 0.0:
        if value < -1e-12 * scale:
            raise NumericalError(f"lower bound evaluated negative: {value!r} at a={a!r}", partial=value)
        value = 0.0
    return SEValue(value=value, method=SEMethod.APPENDIX_LOWER_BOUND, regime_assumption=Regime.ULTRA_DENSE)


def se_lower_bound_quadrature(params: NetworkParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> SEValue:
    """同じ下界を被積分関数の直接求積で（閉形式の検算用）。"""
    alpha = params.alpha
    a = load_ratio_a(params)
    t_star = math.log1p(a ** (-alpha / 2.0))

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 1.0
        return max(0.0, 1.0 - a * math.exp((2.0 / alpha) * _log_expm1(t)))

    value, err = _adaptive_quad(
        integrand, 0.0, t_star,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        what="lower bound integrand",
    )
    return SEValue(
        value=max(value, 0.0),
        method=SEMethod.APPENDIX_LOWER_BOUND,
        regime_assumption=Regime.ULTRA_DENSE,
        abs_error=err,
    )


# ------------------------------------------------------------
# 派生量
# ------------------------------------------------------------

def densification_gain(params: NetworkParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """超高密度化による SE 利得 se_udn_closed_form / γ_α。"""
    return se_udn_closed_form(params).value / se_sparse_gamma_alpha(params.alpha, cfg).value


def approximation_ratio(params: NetworkParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """se_udn_closed_form / se_exact"""
    return se_udn_closed_form(params).value / se_exact(params, cfg).value


def tightness_threshold(
    alpha: float,
    target: float = 0.85,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    *,
    ratio_bounds: tuple[float, float] = (1e-2, 1e6),
) -> float:
    """
    閉形式/厳密 の比が target に達する λ_b/λ_u を返す。
    比は λ_b/λ_u について増加するので log 比で brentq。
    """
    check_alpha(alpha)
    if not (0.0 < target < 1.0):
        raise DomainError(f"target must lie in (0, 1): target={target!r}")

    def gap(log_ratio: float) -> float:
        params = NetworkParams(lambda_b=math.exp(log_ratio), lambda_u=1.0, alpha=alpha)
        return approximation_ratio(params, cfg) - target

    lo, hi = (math.log(r) for r in ratio_bounds)
    if gap(lo) > 0.0 or gap(hi) < 0.0:
        raise NumericalError(f"target ratio {target} not bracketed by lambda_b/lambda_u in {ratio_bounds}")
    return math.exp(brentq(gap, lo, hi, xtol=1e-10))


class AnalyticSEEngine:
    """
    経済モデル側から使う SE のまとめ役。γ_α と ρ_0 はインスタンス内でだけメモ化する
    （スレッド間で共有する場合もインスタンスを分ければ良い）。
    """

    def __init__(self, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> None:
        self.cfg = cfg
        self._gamma_alpha: dict[float, float] = {}
        self._rho_zero: dict[float, float] = {}

    def rho_zero(self, alpha: float) -> float:
        if alpha not in self._rho_zero:
            self._rho_zero[alpha] = rho_zero(alpha, self.cfg)
        return self._rho_zero[alpha]

    def gamma_alpha(self, alpha: float) -> float:
        if alpha not in self._gamma_alpha:
            self._gamma_alpha[alpha] = se_sparse_gamma_alpha(alpha, self.cfg).value
        return self._gamma_alpha[alpha]

    def se_exact(self, params: NetworkParams) -> float:
        return se_exact(params, self.cfg).value

    def se_sparse_multiple_access(self, params: NetworkParams) -> float:
        # 最適化の途中では λ_b > λ_u も評価するので警告は出さない
        return params.density_ratio * self.gamma_alpha(params.alpha)

    def se_ultra_dense(self, params: NetworkParams) -> float:
        return se_udn_closed_form(params).value
