# src/udn_se_economics/hypergeometric.py
from __future__ import annotations

import math

from .errors import DomainError, NumericalError

SERIES_TERM_CAP = 1_000_000
SERIES_REL_STOP = 1e-14
# これより 1 に近い z は 1-z 側の接続公式で評価する
CONNECTION_Z = 0.95


def _series_11c(c: float, z: float, term_cap: int = SERIES_TERM_CAP) -> float:
    """
    ₂F₁(1,1;c;z) の冪級数。a=b=1 なので term_k = z^k k!/c^(k)、
    漸化式 term_{k+1} = term_k · z (k+1)/(c+k)。
    """
    total = 1.0
    term = 1.0
    for k in range(term_cap):
        term *= z * (k + 1.0) / (c + k)
        total += term
        if abs(term) < SERIES_REL_STOP * abs(total):
            return total
    raise NumericalError(
        f"2F1(1,1;{c};{z}) series did not converge within {term_cap} terms",
        partial=total,
    )


def hyp2f1_11c(c: float, z: float, term_cap: int = SERIES_TERM_CAP) -> float:
    """
    Gauss 超幾何関数 ₂F₁(1, 1; c; z), 0 <= z < 1。

    c ∈ (0,1) は 1 - 2/α に対応（α>2）。c=1 は 1/(1-z) になる形式的な極限。
    z > 0.95 では直接級数が遅いので、c が整数でなければ 1-z 側の接続公式

        F = (c-1)/(c-2) · ₂F₁(1,1;3-c;1-z) + (1-c)π/sin(πc) · z^{1-c} (1-z)^{c-2}

    を使う（第2項は ₂F₁(c-1,c-1;c-1;1-z) = z^{1-c} を代入済み）。
    """
    if not (math.isfinite(c) and c > 0.0):
        raise DomainError(f"c must be positive: c={c!r}")
    if not math.isfinite(z) or z < 0.0:
        raise DomainError(f"z must lie in [0, 1): z={z!r}")
    if z >= 1.0:
        raise DomainError(f"2F1(1,1;c;z) diverges for z >= 1: z={z!r}")
    if z == 0.0:
        return 1.0

    if z > CONNECTION_Z and not float(c).is_integer():
        w = 1.0 - z
        regular = (c - 1.0) / (c - 2.0) * _series_11c(3.0 - c, w, term_cap)
        singular = (1.0 - c) * math.pi / math.sin(math.pi * c) * z ** (1.0 - c) * w ** (c - 2.0)
        return regular + singular

    return _series_11c(c, z, term_cap)
