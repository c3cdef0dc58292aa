# src/udn_se_economics/params.py
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import DomainError


class Regime(str, Enum):
    SPARSE = "sparse"
    ULTRA_DENSE = "ultra_dense"
    GENERAL = "general"


class SEMethod(str, Enum):
    EXACT_QUADRATURE = "exact_quadrature"
    SPARSE_CLOSED_FORM = "sparse_closed_form"
    ULTRA_DENSE_CLOSED_FORM = "ultra_dense_closed_form"
    APPENDIX_LOWER_BOUND = "appendix_lower_bound"
    MONTE_CARLO = "monte_carlo"


def _require_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} は正の有限値が必要です: {name}={value!r}")


def check_alpha(alpha: float) -> None:
    """α>2 でないと ρ 積分が発散する。"""
    if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and alpha > 2.0):
        raise DomainError(f"path-loss exponent must satisfy alpha > 2: alpha={alpha!r}")


@dataclass(frozen=True)
class NetworkParams:
    """(λ_b, λ_u, α) の三つ組。密度は抽象的な単位面積あたり。"""

    lambda_b: float
    lambda_u: float
    alpha: float

    def __post_init__(self) -> None:
        _require_positive("lambda_b", self.lambda_b)
        _require_positive("lambda_u", self.lambda_u)
        check_alpha(self.alpha)

    @property
    def density_ratio(self) -> float:
        """λ_b/λ_u"""
        return self.lambda_b / self.lambda_u

    def scaled(self, k: float) -> "NetworkParams":
        return NetworkParams(self.lambda_b * k, self.lambda_u * k, self.alpha)


@dataclass(frozen=True)
class QuadratureConfig:
    """
    広義積分の打ち切り/許容誤差。
    outer_truncation=None のときは被積分関数の裾の減衰から T を解析的に決める。
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    outer_truncation: float | None = None
    tail_eps: float = 1e-10
    max_subdivisions: int = 500
    identity_tol: float = 1e-9

    def __post_init__(self) -> None:
        _require_positive("abs_tol", self.abs_tol)
        _require_positive("rel_tol", self.rel_tol)
        _require_positive("tail_eps", self.tail_eps)
        _require_positive("identity_tol", self.identity_tol)
        if self.outer_truncation is not None:
            _require_positive("outer_truncation", self.outer_truncation)
        if int(self.max_subdivisions) < 1:
            raise DomainError(f"max_subdivisions >= 1 が必要です: {self.max_subdivisions!r}")

    @property
    def inner_abs_tol(self) -> float:
        # 内側の誤差は外側の被積分関数にそのまま乗るので一桁厳しくする
        return self.abs_tol * 0.1

    @property
    def inner_rel_tol(self) -> float:
        return self.rel_tol * 0.1


@dataclass(frozen=True)
class SEValue:
    """SE [nats/sec/Hz]。どの式/どの領域仮定で出した値かを必ず持つ。"""

    value: float
    method: SEMethod
    regime_assumption: Regime | None = None
    abs_error: float = 0.0
    flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.value) and self.value >= 0.0):
            raise DomainError(f"SE は非負の有限値が必要です: value={self.value!r} ({self.method.value})")

    def __float__(self) -> float:
        return float(self.value)

    @property
    def bits(self) -> float:
        """表示用: 1 bit ≈ 0.693 nats。内部計算では使わない。"""
        return self.value / math.log(2.0)


# 長い処理の進捗通知 (done, total, message)
ProgressCb = Callable[[int, int, str], None]
