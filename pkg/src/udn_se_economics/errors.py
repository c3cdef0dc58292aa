# src/udn_se_economics/errors.py
from __future__ import annotations


class UdnError(Exception):
    """パッケージ共通の基底例外。"""


class DomainError(UdnError, ValueError):
    """モデルの定義域外のパラメータ（α<=2, 負の密度など）。"""


class NumericalError(UdnError, ArithmeticError):
    """
    数値計算（求積・級数・最適化）が許容誤差内に収束しなかった。
    partial に途中までの推定値を持たせる（無ければ None）。
    """

    def __init__(self, message: str, partial: float | None = None) -> None:
        super().__init__(message)
        self.partial = partial


class OptimizationError(NumericalError):
    pass


class MultistartDisagreementError(OptimizationError):
    """利益が同等なのに座標が食い違う局所解が複数ある（非凹領域の疑い）。"""


class ConfigError(UdnError):
    """
    実験設定ファイルの読込/検証エラー。
    source（ファイル）と line（行番号, 不明なら None）を保持する。
    """

    def __init__(self, message: str, source: str | None = None, line: int | None = None) -> None:
        self.source = source
        self.line = line
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


class UsageError(ConfigError):
    """コマンドラインの使い方の誤り（空の掃引軸、未知の図 ID など）。"""


# ---- 警告（処理は続行し、結果の flags にも残す）----

class SelectionProbabilityWarning(UserWarning):
    """疎モデルのスケジューラ選択確率 λ_b/λ_u が 1 を超えた。"""


class RegimeWarning(UserWarning):
    """閉形式解が仮定した領域（疎/超高密度）と整合しない。"""


class BoundaryWarning(UserWarning):
    """数値最適化の解が探索範囲の境界に張り付いた。"""


class TruncationWarning(UserWarning):
    """干渉ゼロの試行が出た（窓の大きさ不足の可能性）。"""
